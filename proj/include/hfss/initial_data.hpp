#pragma once

#include <cstdint>

#include "hfss/sphere_fields.hpp"

namespace hfss {

/// u(x) = d / |d|.
DirectorField constant_map(const MeshPtr& mesh, const Eigen::Vector3d& direction = Eigen::Vector3d::UnitZ());

/// u(x) = (sin k x1, 0, cos k x1): harmonic for every wavenumber k, with
/// |grad u|^2 = k^2 and Lap u = -k^2 u.
DirectorField great_circle_map(const MeshPtr& mesh, double wavenumber = 1.0);

/// u(x) = x / |x|. Cell centres never sit at the origin.
DirectorField equator_map(const MeshPtr& mesh);

/// Normalised smooth field e3 * 1.5 + sum of six random plane waves; generic
/// and far from harmonic. Deterministic in `seed`.
DirectorField random_smooth_map(const MeshPtr& mesh, std::uint64_t seed);

}  // namespace hfss
