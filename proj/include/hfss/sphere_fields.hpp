#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "hfss/ball_mesh.hpp"

namespace hfss {

// Nodewise tolerance on ||u(x)| - 1| accepted by the static operators.
inline constexpr double kUnitTolerance = 1e-9;
// Tolerance the time steppers guarantee for every stored snapshot.
inline constexpr double kStrictUnitTolerance = 1e-12;

/// Largest ||f(x)| - 1| over all stored nodes (interior and band).
double max_norm_defect(const VectorField& values);

/// A sphere-valued field on a BallMesh: one unit 3-vector per node.
class DirectorField {
 public:
  // Throws ConstraintViolation when some node is off the sphere by more than
  // `tolerance` or not finite, MeshMismatch when the row count is wrong.
  DirectorField(MeshPtr mesh, VectorField values, double tolerance = kUnitTolerance);

  const BallMesh& mesh() const { return *mesh_; }
  const MeshPtr& mesh_ptr() const { return mesh_; }
  const VectorField& values() const { return values_; }

  double max_norm_defect() const { return hfss::max_norm_defect(values_); }

 private:
  MeshPtr mesh_;
  VectorField values_;
};

// Energy density from one-sided link differences,
//   e(x) = 1/4 sum_dir |u(x + h d) - u(x)|^2 / h^2,
// which for unit fields satisfies u.Lap(u) = -2 e exactly.
template <typename Derived>
ScalarFieldT<typename Derived::Scalar> energy_density(const BallMesh& mesh,
                                                      const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  detail::require_rows(mesh, u.rows(), "energy_density");
  ScalarFieldT<Scalar> e = ScalarFieldT<Scalar>::Zero(mesh.node_count());
  const Scalar scale = Scalar(0.25) / Scalar(mesh.spacing() * mesh.spacing());
  const auto interior = mesh.interior();
  for (Index slot = 0; slot < static_cast<Index>(interior.size()); ++slot) {
    const Index node = interior[slot];
    Scalar acc(0);
    for (int dir = 0; dir < BallMesh::kNeighbors; ++dir)
      acc += (u.row(mesh.neighbor(slot, dir)) - u.row(node)).squaredNorm();
    e(node) = acc * scale;
  }
  return e;
}

// Dirichlet energy of the link graph, (h/2) sum over links touching the
// interior of |u(y) - u(x)|^2. Its gradient with respect to the interior
// values is exactly -h^3 times the seven-point Laplacian.
template <typename Derived>
typename Derived::Scalar dirichlet_energy(const BallMesh& mesh,
                                          const Eigen::MatrixBase<Derived>& u) {
  using Scalar = typename Derived::Scalar;
  detail::require_rows(mesh, u.rows(), "dirichlet_energy");
  Scalar sum(0);
  const auto interior = mesh.interior();
  for (Index slot = 0; slot < static_cast<Index>(interior.size()); ++slot) {
    const Index node = interior[slot];
    for (int dir = 0; dir < BallMesh::kNeighbors; ++dir) {
      const Index nb = mesh.neighbor(slot, dir);
      const Scalar w = mesh.is_interior(nb) ? Scalar(0.5) : Scalar(1);
      sum += w * (u.row(nb) - u.row(node)).squaredNorm();
    }
  }
  return sum * Scalar(0.5 * mesh.spacing());
}

// Tension Lap(u) + |grad u|^2 u with |grad u|^2 = 2 e; interior rows only.
template <typename Derived>
VectorFieldT<typename Derived::Scalar> tension(const BallMesh& mesh,
                                               const Eigen::MatrixBase<Derived>& u) {
  VectorFieldT<typename Derived::Scalar> tau = laplacian(mesh, u);
  const auto e = energy_density(mesh, u);
  for (const Index node : mesh.interior()) tau.row(node) += (2 * e(node)) * u.row(node);
  return tau;
}

ScalarField energy_density(const DirectorField& u);
double energy(const DirectorField& u);
VectorField tension(const DirectorField& u);

// sqrt(2 E(u)), the H1 seminorm of the energy.
double h1_norm(const DirectorField& u);

/// One residual per test field of the weak harmonic-map identity
///   int grad u : grad eta - |grad u|^2 (u . eta) dx,
/// after projecting eta onto the tangent space at u. Tests must vanish on the
/// band (InvalidTest otherwise).
std::vector<double> weak_harmonic_residual(const DirectorField& u,
                                           const std::vector<VectorField>& tests);

struct StationarityResidual {
  // R_k per node; nonzero only on nodes at depth >= 2 where the nested
  // central differences are fully supported.
  VectorField residual;
  Eigen::Vector3d integrated_abs = Eigen::Vector3d::Zero();
};

/// R_k = sum_j d_k |d_j u|^2 - 2 d_j <d_j u, d_k u>.
StationarityResidual stationarity_residual(const DirectorField& u);

/// Weak test fields: monomials x^a y^b z^c e_i of total degree <= `degree`,
/// multiplied by the cutoff (1 - (r - c)^2 / w^2)^3 supported on
/// inner_radius < r < outer_radius (c, w the centre and half width). With
/// inner_radius = 0 the cutoff is (1 - r^2/R^2)^3.
std::vector<VectorField> weak_test_fields(const BallMesh& mesh, int degree, double inner_radius,
                                          double outer_radius);

struct GateReport {
  double max_normalized_residual = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

// Default weak-harmonicity threshold 10 h^2 ||a||_{H1}.
double default_gate_threshold(const DirectorField& a);

/// Residuals over the default test set (degree 2, cutoff radius 0.85),
/// each divided by the H1 seminorm of its projected test field.
GateReport weak_harmonicity_gate(const DirectorField& a, double threshold);

/// phi(v) = b(<v, g>) with b(s) = tanh(s / s0), s0 = 4 pi / 3.
class ProbeFunctional {
 public:
  static constexpr double kReferenceVolume = 4.18879020478639098;  // 4 pi / 3

  ProbeFunctional(MeshPtr mesh, VectorField probe, std::string label);

  static double transform(double s) { return std::tanh(s / kReferenceVolume); }

  const BallMesh& mesh() const { return *mesh_; }
  const VectorField& probe() const { return probe_; }
  const std::string& label() const { return label_; }

  double l2_norm() const;

 private:
  MeshPtr mesh_;
  VectorField probe_;
  std::string label_;
};

using ProbePtr = std::shared_ptr<const ProbeFunctional>;

double evaluate_probe(const ProbeFunctional& phi, const VectorField& u);
double evaluate_probe(const ProbeFunctional& phi, const DirectorField& u);

/// Probe whose field is `a` on the interior and zero on the band; among unit
/// fields it is maximised exactly at `a`.
ProbePtr make_aligned_probe(const DirectorField& a);

struct SignedProbe {
  ProbePtr probe;
  int sign = 1;

  double operator()(const VectorField& u) const { return sign * evaluate_probe(*probe, u); }
  std::string label() const { return (sign > 0 ? "+" : "-") + probe->label(); }
};

/// Signed monomial probes x^a y^b z^c e_i, total degree <= degree, in
/// a fixed order: monomial (graded lexicographic), component, then sign.
std::vector<SignedProbe> build_probe_family(const MeshPtr& mesh, int degree = 2);

}  // namespace hfss
