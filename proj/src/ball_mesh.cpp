#include "hfss/ball_mesh.hpp"

#include <cmath>
#include <deque>
#include <string>

namespace hfss {

namespace {

constexpr int kOffsets[BallMesh::kNeighbors][3] = {
    {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};

std::uint64_t fnv1a(std::uint64_t state, std::uint64_t value) {
  for (int byte = 0; byte < 8; ++byte) {
    state ^= (value >> (8 * byte)) & 0xffu;
    state *= 0x100000001b3ull;
  }
  return state;
}

}  // namespace

namespace detail {

void throw_missing_neighbor(Index node, int direction) {
  throw Error(ErrorKind::MeshConsistency, "interior node " + std::to_string(node) +
                                              " has no neighbour in direction " +
                                              std::to_string(direction));
}

void require_rows(const BallMesh& mesh, Index rows, const char* what) {
  if (rows != mesh.node_count()) {
    throw Error(ErrorKind::MeshMismatch, std::string(what) + ": field has " +
                                             std::to_string(rows) + " rows, mesh has " +
                                             std::to_string(mesh.node_count()) + " nodes");
  }
}

}  // namespace detail

std::shared_ptr<const BallMesh> BallMesh::build(int resolution) {
  if (resolution < 4 || resolution % 2 != 0) {
    throw Error(ErrorKind::InvalidResolution,
                "resolution must be even and at least 4, got " + std::to_string(resolution));
  }
  const int n = resolution;
  const double h = 2.0 / n;
  const double radius = 1.0 - h / 8.0;
  auto center = [h](int i) { return -1.0 + (i + 0.5) * h; };
  auto flat = [n](int i, int j, int k) {
    return (static_cast<std::size_t>(i) * n + j) * n + k;
  };

  std::vector<char> interior(static_cast<std::size_t>(n) * n * n, 0);
  for (int i = 1; i < n - 1; ++i)
    for (int j = 1; j < n - 1; ++j)
      for (int k = 1; k < n - 1; ++k) {
        const double x = center(i), y = center(j), z = center(k);
        interior[flat(i, j, k)] = std::sqrt(x * x + y * y + z * z) < radius;
      }

  std::shared_ptr<BallMesh> mesh(new BallMesh());
  mesh->resolution_ = n;
  mesh->spacing_ = h;
  mesh->lookup_.assign(interior.size(), -1);

  std::uint64_t hash = fnv1a(0xcbf29ce484222325ull, static_cast<std::uint64_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const bool inner = interior[flat(i, j, k)];
        bool keep = inner;
        for (int dir = 0; dir < kNeighbors && !keep; ++dir) {
          const int a = i + kOffsets[dir][0], b = j + kOffsets[dir][1], c = k + kOffsets[dir][2];
          if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) continue;
          keep = interior[flat(a, b, c)];
        }
        if (!keep) continue;
        const Index id = static_cast<Index>(mesh->grid_index_.size());
        mesh->lookup_[flat(i, j, k)] = id;
        mesh->grid_index_.push_back({i, j, k});
        (inner ? mesh->interior_ : mesh->band_).push_back(id);
        hash = fnv1a(hash, (static_cast<std::uint64_t>(flat(i, j, k)) << 1) | (inner ? 1u : 0u));
      }
  mesh->hash_ = hash;

  const Index count = mesh->node_count();
  mesh->coordinates_.resize(count, 3);
  for (Index id = 0; id < count; ++id) {
    const auto& g = mesh->grid_index_[id];
    mesh->coordinates_.row(id) << center(g[0]), center(g[1]), center(g[2]);
  }

  mesh->slot_.assign(static_cast<std::size_t>(count), -1);
  for (Index slot = 0; slot < mesh->interior_count(); ++slot) mesh->slot_[mesh->interior_[slot]] = slot;

  mesh->neighbors_.resize(mesh->interior_count(), kNeighbors);
  for (Index slot = 0; slot < mesh->interior_count(); ++slot) {
    const auto& g = mesh->grid_index_[mesh->interior_[slot]];
    for (int dir = 0; dir < kNeighbors; ++dir)
      mesh->neighbors_(slot, dir) =
          mesh->node_at(g[0] + kOffsets[dir][0], g[1] + kOffsets[dir][1], g[2] + kOffsets[dir][2]);
  }

  // Breadth-first layering from the band inwards.
  mesh->depth_.assign(static_cast<std::size_t>(count), -1);
  std::deque<Index> queue;
  for (const Index b : mesh->band_) {
    mesh->depth_[b] = 0;
    queue.push_back(b);
  }
  while (!queue.empty()) {
    const Index node = queue.front();
    queue.pop_front();
    const auto& g = mesh->grid_index_[node];
    for (int dir = 0; dir < kNeighbors; ++dir) {
      const Index nb =
          mesh->node_at(g[0] + kOffsets[dir][0], g[1] + kOffsets[dir][1], g[2] + kOffsets[dir][2]);
      if (nb < 0 || mesh->depth_[nb] >= 0) continue;
      mesh->depth_[nb] = mesh->depth_[node] + 1;
      queue.push_back(nb);
    }
  }
  return mesh;
}

Index BallMesh::node_at(int i, int j, int k) const {
  const int n = resolution_;
  if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return -1;
  return lookup_[(static_cast<std::size_t>(i) * n + j) * n + k];
}

std::vector<Index> trace_nodes(const BallMesh& mesh) {
  return {mesh.band().begin(), mesh.band().end()};
}

}  // namespace hfss
