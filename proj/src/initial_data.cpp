#include "hfss/initial_data.hpp"

#include <cmath>
#include <random>

namespace hfss {

namespace {

// Portable uniform draw in [lo, hi) from the raw 64-bit engine output.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

}  // namespace

DirectorField constant_map(const MeshPtr& mesh, const Eigen::Vector3d& direction) {
  if (!(direction.norm() > 0.0)) throw Error(ErrorKind::Config, "constant map needs a nonzero direction");
  VectorField values(mesh->node_count(), 3);
  values.rowwise() = direction.normalized().transpose();
  return DirectorField(mesh, std::move(values));
}

DirectorField great_circle_map(const MeshPtr& mesh, double wavenumber) {
  VectorField values(mesh->node_count(), 3);
  for (Index node = 0; node < mesh->node_count(); ++node) {
    const double s = wavenumber * mesh->coordinates()(node, 0);
    values.row(node) << std::sin(s), 0.0, std::cos(s);
  }
  return DirectorField(mesh, std::move(values));
}

DirectorField equator_map(const MeshPtr& mesh) {
  VectorField values = mesh->coordinates();
  values.rowwise().normalize();
  return DirectorField(mesh, std::move(values));
}

DirectorField random_smooth_map(const MeshPtr& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  constexpr int kModes = 6;
  Eigen::Matrix<double, kModes, 3> amplitude, wave;
  Eigen::Matrix<double, kModes, 1> phase;
  for (int q = 0; q < kModes; ++q) {
    for (int c = 0; c < 3; ++c) amplitude(q, c) = uniform(rng, -0.12, 0.12);
    for (int c = 0; c < 3; ++c) wave(q, c) = uniform(rng, -2.0, 2.0);
    phase(q) = uniform(rng, 0.0, 2.0 * M_PI);
  }
  VectorField values(mesh->node_count(), 3);
  for (Index node = 0; node < mesh->node_count(); ++node) {
    const Eigen::Vector3d x = mesh->position(node);
    Eigen::RowVector3d v(0.0, 0.0, 1.5);
    for (int q = 0; q < kModes; ++q) v += std::sin(wave.row(q).dot(x) + phase(q)) * amplitude.row(q);
    values.row(node) = v.normalized();
  }
  return DirectorField(mesh, std::move(values));
}

}  // namespace hfss
