#include "hfss/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

namespace hfss {

namespace {

void copy_band(const BallMesh& mesh, const VectorField& from, VectorField& to) {
  for (const Index b : mesh.band()) to.row(b) = from.row(b);
}

// Nodes the step left untouched keep their bits, so exact fixed points stay exact.
void renormalise_interior(const BallMesh& mesh, VectorField& v, const VectorField& before) {
  for (const Index node : mesh.interior()) {
    const double n = v.row(node).norm();
    if (!(n >= 0.5)) {
      throw Error(ErrorKind::StepSize, "pre-normalisation length " + std::to_string(n) +
                                           " at node " + std::to_string(node) +
                                           "; time step too large");
    }
    if ((v.row(node).array() != before.row(node).array()).any()) v.row(node) /= n;
  }
}

double squared_increment(const BallMesh& mesh, const VectorField& a, const VectorField& b) {
  double sum = 0.0;
  for (const Index node : mesh.interior()) sum += (a.row(node) - b.row(node)).squaredNorm();
  return sum * mesh.cell_volume();
}

Trajectory empty_trajectory(const DirectorField& a, const SchemeConfig& cfg) {
  Trajectory traj;
  traj.mesh = a.mesh_ptr();
  traj.scheme = to_string(cfg.scheme);
  traj.dt = cfg.dt;
  traj.steps = cfg.steps();
  traj.dense_prefix = cfg.dense_prefix;
  traj.stride = cfg.stride;
  traj.phase = cfg.phase;
  traj.energies = Eigen::VectorXd::Zero(traj.steps + 1);
  traj.dissipation = Eigen::VectorXd::Zero(traj.steps);
  traj.parameters["dt"] = cfg.dt;
  traj.parameters["horizon"] = cfg.horizon;
  return traj;
}

}  // namespace

const char* to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Projection: return "projection";
    case Scheme::Penalized: return "penalized";
    case Scheme::Constant: return "constant";
    case Scheme::LandauLifshitz: return "landau-lifshitz";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "projection" || name == "projection-explicit") return Scheme::Projection;
  if (name == "penalized") return Scheme::Penalized;
  if (name == "constant") return Scheme::Constant;
  if (name == "landau-lifshitz" || name == "ll") return Scheme::LandauLifshitz;
  throw Error(ErrorKind::Config, "unknown scheme '" + name + "'");
}

long SchemeConfig::steps() const { return std::lround(horizon / dt); }

double SchemeConfig::max_stable_dt(const BallMesh& mesh) const {
  const double h2 = mesh.spacing() * mesh.spacing();
  switch (scheme) {
    case Scheme::Penalized:
      return epsilon > 0.0 ? 2.0 / (12.0 / h2 + 2.0 / (epsilon * epsilon)) : h2 / 6.0;
    case Scheme::LandauLifshitz:
      // Euler on -mu (lambda +- i) is stable for dt mu <= 2 lambda / (1 + lambda^2),
      // mu <= 12 / h^2. Without damping no step is stable; h^2 / 48 keeps the
      // growth of the stiffest modes small over short horizons.
      return damping > 0.0 ? h2 / 6.0 * damping / (1.0 + damping * damping) : h2 / 48.0;
    case Scheme::Projection:
    case Scheme::Constant:
      break;
  }
  return h2 / 6.0;
}

void SchemeConfig::validate(const BallMesh& mesh) const {
  const std::string tag = std::string(to_string(scheme)) + ": ";
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorKind::Config, tag + "dt must be positive");
  if (!(horizon >= 10.0 * dt)) throw Error(ErrorKind::Config, tag + "horizon must be at least 10 dt");
  if (stride < 1) throw Error(ErrorKind::Config, tag + "stride must be >= 1");
  if (dense_prefix < 0) throw Error(ErrorKind::Config, tag + "dense prefix must be >= 0");
  if (phase < 0) throw Error(ErrorKind::Config, tag + "storage phase must be >= 0");
  if (scheme == Scheme::Penalized && !(epsilon >= 2.0 * mesh.spacing() * (1.0 - 1e-12)))
    throw Error(ErrorKind::Config, tag + "epsilon must be at least 2h");
  if (scheme == Scheme::LandauLifshitz && !(damping >= 0.0))
    throw Error(ErrorKind::Config, tag + "damping must be non-negative");
  if (scheme != Scheme::Constant && dt > max_stable_dt(mesh) * (1.0 + 1e-12)) {
    throw Error(ErrorKind::Config, tag + "dt " + std::to_string(dt) + " exceeds stability bound " +
                                       std::to_string(max_stable_dt(mesh)));
  }
}

SchemeConfig SchemeConfig::restarted(long m) const {
  SchemeConfig cfg = *this;
  cfg.horizon = static_cast<double>(steps() - m) * dt;
  cfg.phase = (phase + m) % stride;
  return cfg;
}

SchemeConfig default_scheme_config(const BallMesh& mesh, Scheme scheme, double horizon, long stride,
                                   long dense_prefix) {
  SchemeConfig cfg;
  cfg.scheme = scheme;
  cfg.horizon = horizon;
  cfg.stride = stride;
  cfg.dense_prefix = dense_prefix;
  if (scheme == Scheme::Penalized) cfg.epsilon = 4.0 * mesh.spacing();
  if (scheme == Scheme::LandauLifshitz) cfg.damping = 1.0;
  cfg.dt = 0.5 * cfg.max_stable_dt(mesh);
  return cfg;
}

bool keeps_snapshot(long m, long steps, long dense_prefix, long stride, long phase) {
  return m <= dense_prefix || (m + phase) % stride == 0 || m == steps;
}

bool Trajectory::is_stored(long m) const {
  return std::binary_search(stored_steps.begin(), stored_steps.end(), m);
}

std::shared_ptr<const VectorField> Trajectory::snapshot_ptr(long m) const {
  const auto it = std::lower_bound(stored_steps.begin(), stored_steps.end(), m);
  if (it == stored_steps.end() || *it != m)
    throw Error(ErrorKind::Storage, "step " + std::to_string(m) + " is not stored");
  return snapshots[static_cast<std::size_t>(it - stored_steps.begin())];
}

const VectorField& Trajectory::snapshot(long m) const { return *snapshot_ptr(m); }

VectorField step_projection(const BallMesh& mesh, const VectorField& u, double dt) {
  detail::require_rows(mesh, u.rows(), "step_projection");
  VectorField v(u.rows(), 3);
  copy_band(mesh, u, v);
  const double inv_h2 = 1.0 / (mesh.spacing() * mesh.spacing());
  const auto interior = mesh.interior();
  for (Index slot = 0; slot < static_cast<Index>(interior.size()); ++slot) {
    const Index node = interior[slot];
    const Eigen::RowVector3d centre = u.row(node);
    Eigen::RowVector3d lap = Eigen::RowVector3d::Zero();
    double sq = 0.0;
    for (int dir = 0; dir < BallMesh::kNeighbors; ++dir) {
      const Eigen::RowVector3d diff = u.row(mesh.neighbor(slot, dir)) - centre;
      lap += diff;
      sq += diff.squaredNorm();
    }
    // |grad u|^2 = 2 e = sq / (2 h^2).
    v.row(node) = centre + dt * inv_h2 * (lap + 0.5 * sq * centre);
  }
  renormalise_interior(mesh, v, u);
  return v;
}

VectorField step_penalized(const BallMesh& mesh, const VectorField& w, double dt, double epsilon) {
  detail::require_rows(mesh, w.rows(), "step_penalized");
  VectorField lap = laplacian(mesh, w);
  VectorField v = w;
  const double inv_eps2 = 1.0 / (epsilon * epsilon);
  for (const Index node : mesh.interior()) {
    const double r2 = w.row(node).squaredNorm();
    v.row(node) += dt * (lap.row(node) + inv_eps2 * (1.0 - r2) * w.row(node));
    const double n = v.row(node).norm();
    if (!(n <= 2.0)) {
      throw Error(ErrorKind::Instability,
                  "penalized state reached length " + std::to_string(n) + " at node " +
                      std::to_string(node));
    }
  }
  return v;
}

VectorField step_landau_lifshitz(const BallMesh& mesh, const VectorField& u, double dt,
                                 double damping) {
  detail::require_rows(mesh, u.rows(), "step_landau_lifshitz");
  const VectorField lap = laplacian(mesh, u);
  VectorField v(u.rows(), 3);
  copy_band(mesh, u, v);
  for (const Index node : mesh.interior()) {
    const Eigen::Vector3d m = u.row(node).transpose();
    const Eigen::Vector3d precession = m.cross(lap.row(node).transpose());
    const Eigen::Vector3d rhs = precession - damping * m.cross(precession);
    v.row(node) = (m + dt * rhs).transpose();
  }
  renormalise_interior(mesh, v, u);
  return v;
}

double default_energy_tolerance(double dt, double initial_energy) {
  return 10.0 * dt * initial_energy;
}

Trajectory run_flow(const DirectorField& a, const SchemeConfig& cfg) {
  const BallMesh& mesh = a.mesh();
  cfg.validate(mesh);
  if (cfg.scheme == Scheme::Constant) return constant_trajectory(a, cfg);

  Trajectory traj = empty_trajectory(a, cfg);
  if (cfg.scheme == Scheme::Penalized) traj.parameters["epsilon"] = cfg.epsilon;
  double dissipation_weight = 1.0;
  if (cfg.scheme == Scheme::LandauLifshitz) {
    traj.equation = "landau-lifshitz";
    traj.parameters["damping"] = cfg.damping;
    dissipation_weight = cfg.damping / (1.0 + cfg.damping * cfg.damping);
  }

  auto current = std::make_shared<const VectorField>(a.values());
  traj.stored_steps.push_back(0);
  traj.snapshots.push_back(current);
  traj.energies(0) = dirichlet_energy(mesh, *current);

  VectorField state = a.values();  // penalized state w, off the sphere
  double projection_defect = 0.0;
  for (long m = 0; m < traj.steps; ++m) {
    VectorField next;
    switch (cfg.scheme) {
      case Scheme::Projection:
        next = step_projection(mesh, *current, cfg.dt);
        break;
      case Scheme::LandauLifshitz:
        next = step_landau_lifshitz(mesh, *current, cfg.dt, cfg.damping);
        break;
      case Scheme::Penalized: {
        state = step_penalized(mesh, state, cfg.dt, cfg.epsilon);
        next = state;
        for (const Index node : mesh.interior()) {
          const double n = state.row(node).norm();
          projection_defect = std::max(projection_defect, std::abs(n - 1.0));
          next.row(node) /= n;
        }
        break;
      }
      case Scheme::Constant:
        break;
    }
    traj.dissipation(m) = dissipation_weight * squared_increment(mesh, next, *current) / cfg.dt;
    traj.energies(m + 1) = dirichlet_energy(mesh, next);
    current = std::make_shared<const VectorField>(std::move(next));
    if (keeps_snapshot(m + 1, traj.steps, traj.dense_prefix, traj.stride, traj.phase)) {
      traj.stored_steps.push_back(m + 1);
      traj.snapshots.push_back(current);
    }
  }
  if (cfg.scheme == Scheme::Penalized) traj.parameters["projection_defect"] = projection_defect;
  traj.energy_tolerance = default_energy_tolerance(cfg.dt, traj.energies(0));
  return traj;
}

Trajectory constant_trajectory(const DirectorField& a, const SchemeConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.horizon >= 10.0 * cfg.dt))
    throw Error(ErrorKind::Config, "constant: need dt > 0 and horizon >= 10 dt");
  const double threshold = cfg.gate_threshold > 0.0 ? cfg.gate_threshold : default_gate_threshold(a);
  const GateReport gate = weak_harmonicity_gate(a, threshold);
  if (!gate.passed) {
    throw Error(ErrorKind::NotWeaklyHarmonic,
                "normalised weak residual " + std::to_string(gate.max_normalized_residual) +
                    " exceeds threshold " + std::to_string(gate.threshold));
  }
  SchemeConfig constant = cfg;
  constant.scheme = Scheme::Constant;
  Trajectory traj = empty_trajectory(a, constant);
  traj.parameters["gate_residual"] = gate.max_normalized_residual;
  traj.parameters["gate_threshold"] = gate.threshold;
  auto datum = std::make_shared<const VectorField>(a.values());
  for (long m = 0; m <= traj.steps; ++m) {
    if (!keeps_snapshot(m, traj.steps, traj.dense_prefix, traj.stride, traj.phase)) continue;
    traj.stored_steps.push_back(m);
    traj.snapshots.push_back(datum);
  }
  traj.energies.setConstant(dirichlet_energy(a.mesh(), a.values()));
  traj.energy_tolerance = default_energy_tolerance(cfg.dt, traj.energies(0));
  return traj;
}

double energy_inequality_check(const Trajectory& traj, long m, long s) {
  if (m < 0 || s < 0 || m + s > traj.steps) {
    throw Error(ErrorKind::IndexRange, "energy check (m=" + std::to_string(m) + ", s=" +
                                           std::to_string(s) + ") outside 0.." +
                                           std::to_string(traj.steps));
  }
  double dissipated = 0.0;
  for (long r = m; r < m + s; ++r) dissipated += traj.dissipation(r);
  return traj.energies(m + s) + dissipated - traj.energies(m);
}

EnergySweep energy_inequality_sweep(const Trajectory& traj) {
  const long steps = traj.steps;
  // value_j = E_j + sum_{r<j} d_r; residual(m, s) = value_{m+s} - value_m.
  Eigen::VectorXd value(steps + 1);
  double acc = 0.0;
  for (long j = 0; j <= steps; ++j) {
    value(j) = traj.energies(j) + acc;
    if (j < steps) acc += traj.dissipation(j);
  }
  EnergySweep sweep;
  double best = value(steps);
  long best_j = steps;
  for (long m = steps; m >= 0; --m) {
    if (value(m) > best) {
      best = value(m);
      best_j = m;
    }
    const double r = best - value(m);
    if (r > sweep.worst_residual) {
      sweep.worst_residual = r;
      sweep.worst_m = m;
      sweep.worst_s = best_j - m;
    }
  }
  return sweep;
}

}  // namespace hfss
