#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hfss/error.hpp"

namespace hfss {

using Index = Eigen::Index;

template <typename Scalar>
using VectorFieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, 3, Eigen::RowMajor>;
template <typename Scalar>
using ScalarFieldT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
// Per-node Jacobian; entry (i, a) is the derivative of component i along axis a.
template <typename Scalar>
using GradientFieldT = std::vector<Eigen::Matrix<Scalar, 3, 3>>;

using VectorField = VectorFieldT<double>;
using ScalarField = ScalarFieldT<double>;
using GradientField = GradientFieldT<double>;

/// Masked cell-centred Cartesian grid on the unit ball.
///
/// Nodes are the centres of an N^3 grid of cubes of side h = 2/N covering
/// [-1,1]^3. A node is interior when |x| < 1 - h/8 and none of its grid
/// indices lie on the outermost layer, so every interior 6-neighbour stays
/// inside the cube. The boundary band is the set of non-interior nodes with
/// an interior 6-neighbour; band values carry Dirichlet data and never take
/// part in an equation. Only interior and band nodes are stored, in
/// lexicographic (i, j, k) order.
class BallMesh {
 public:
  // Neighbour slots: +x, -x, +y, -y, +z, -z.
  static constexpr int kNeighbors = 6;

  static std::shared_ptr<const BallMesh> build(int resolution);

  int resolution() const { return resolution_; }
  double spacing() const { return spacing_; }
  double cell_volume() const { return spacing_ * spacing_ * spacing_; }

  Index node_count() const { return static_cast<Index>(grid_index_.size()); }
  Index interior_count() const { return static_cast<Index>(interior_.size()); }

  const Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>& coordinates() const {
    return coordinates_;
  }
  Eigen::Vector3d position(Index node) const { return coordinates_.row(node).transpose(); }
  const std::array<int, 3>& grid_index(Index node) const { return grid_index_[node]; }

  std::span<const Index> interior() const { return interior_; }
  std::span<const Index> band() const { return band_; }
  bool is_interior(Index node) const { return slot_[node] >= 0; }

  // Position of an interior node inside interior(), or -1 for band nodes.
  Index interior_slot(Index node) const { return slot_[node]; }

  // Neighbour node id of the interior node stored at `slot`; -1 when absent.
  Index neighbor(Index slot, int direction) const { return neighbors_(slot, direction); }

  // Graph distance to the band along 6-neighbour links: 0 on the band,
  // 1 on interior nodes touching it, and so on.
  int depth(Index node) const { return depth_[node]; }

  // Node id at grid index (i, j, k), or -1 when the node is not stored.
  Index node_at(int i, int j, int k) const;

  std::uint64_t hash() const { return hash_; }

  bool same_as(const BallMesh& other) const {
    return resolution_ == other.resolution_ && hash_ == other.hash_;
  }

 private:
  BallMesh() = default;

  int resolution_ = 0;
  double spacing_ = 0.0;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> coordinates_;
  std::vector<std::array<int, 3>> grid_index_;
  std::vector<Index> lookup_;
  std::vector<Index> interior_;
  std::vector<Index> band_;
  std::vector<Index> slot_;
  std::vector<int> depth_;
  Eigen::Matrix<Index, Eigen::Dynamic, kNeighbors, Eigen::RowMajor> neighbors_;
  std::uint64_t hash_ = 0;
};

using MeshPtr = std::shared_ptr<const BallMesh>;

namespace detail {
[[noreturn]] void throw_missing_neighbor(Index node, int direction);
void require_rows(const BallMesh& mesh, Index rows, const char* what);
}  // namespace detail

/// Central-difference Jacobian at interior nodes; band entries are zero.
template <typename Derived>
GradientFieldT<typename Derived::Scalar> gradient(const BallMesh& mesh,
                                                  const Eigen::MatrixBase<Derived>& f) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::ColsAtCompileTime == 3, "gradient expects a 3-vector field");
  detail::require_rows(mesh, f.rows(), "gradient");
  GradientFieldT<Scalar> out(static_cast<std::size_t>(mesh.node_count()),
                             Eigen::Matrix<Scalar, 3, 3>::Zero());
  const Scalar inv_2h = Scalar(1) / (Scalar(2) * Scalar(mesh.spacing()));
  const auto interior = mesh.interior();
  for (Index slot = 0; slot < static_cast<Index>(interior.size()); ++slot) {
    auto& jac = out[static_cast<std::size_t>(interior[slot])];
    for (int axis = 0; axis < 3; ++axis) {
      const Index plus = mesh.neighbor(slot, 2 * axis);
      const Index minus = mesh.neighbor(slot, 2 * axis + 1);
      if (plus < 0) detail::throw_missing_neighbor(interior[slot], 2 * axis);
      if (minus < 0) detail::throw_missing_neighbor(interior[slot], 2 * axis + 1);
      jac.col(axis) = (f.row(plus) - f.row(minus)).transpose() * inv_2h;
    }
  }
  return out;
}

/// Seven-point Laplacian at interior nodes; band rows are zero.
template <typename Derived>
VectorFieldT<typename Derived::Scalar> laplacian(const BallMesh& mesh,
                                                 const Eigen::MatrixBase<Derived>& f) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::ColsAtCompileTime == 3, "laplacian expects a 3-vector field");
  detail::require_rows(mesh, f.rows(), "laplacian");
  VectorFieldT<Scalar> out = VectorFieldT<Scalar>::Zero(mesh.node_count(), 3);
  const Scalar inv_h2 = Scalar(1) / Scalar(mesh.spacing() * mesh.spacing());
  const auto interior = mesh.interior();
  for (Index slot = 0; slot < static_cast<Index>(interior.size()); ++slot) {
    const Index node = interior[slot];
    Eigen::Matrix<Scalar, 1, 3> acc = Scalar(-6) * f.row(node);
    for (int dir = 0; dir < BallMesh::kNeighbors; ++dir) {
      const Index nb = mesh.neighbor(slot, dir);
      if (nb < 0) detail::throw_missing_neighbor(node, dir);
      acc += f.row(nb);
    }
    out.row(node) = acc * inv_h2;
  }
  return out;
}

/// Midpoint quadrature over the interior: sum of f(x) h^3.
template <typename Derived>
typename Derived::Scalar integrate(const BallMesh& mesh, const Eigen::MatrixBase<Derived>& f) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::ColsAtCompileTime == 1, "integrate expects a scalar field");
  detail::require_rows(mesh, f.rows(), "integrate");
  Scalar sum(0);
  for (const Index node : mesh.interior()) sum += f(node);
  return sum * Scalar(mesh.cell_volume());
}

/// Discrete L2 inner product of two vector fields over the interior.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar inner(const BallMesh& mesh, const Eigen::MatrixBase<DerivedA>& f,
                                const Eigen::MatrixBase<DerivedB>& g) {
  using Scalar = typename DerivedA::Scalar;
  detail::require_rows(mesh, f.rows(), "inner");
  detail::require_rows(mesh, g.rows(), "inner");
  Scalar sum(0);
  for (const Index node : mesh.interior()) sum += f.row(node).dot(g.row(node));
  return sum * Scalar(mesh.cell_volume());
}

template <typename Derived>
typename Derived::Scalar l2_norm(const BallMesh& mesh, const Eigen::MatrixBase<Derived>& f) {
  using std::sqrt;
  return sqrt(inner(mesh, f, f));
}

/// Nodes that carry the frozen boundary trace.
std::vector<Index> trace_nodes(const BallMesh& mesh);

}  // namespace hfss
