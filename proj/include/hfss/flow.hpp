#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hfss/sphere_fields.hpp"

namespace hfss {

enum class Scheme { Projection, Penalized, Constant, LandauLifshitz };

const char* to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct SchemeConfig {
  Scheme scheme = Scheme::Projection;
  double dt = 0.0;
  double horizon = 0.0;
  // Ginzburg-Landau penalisation length (penalized only).
  double epsilon = 0.0;
  // Damping lambda >= 0 (landau-lifshitz only).
  double damping = 0.0;
  // Snapshot storage: every step m <= dense_prefix, every stride-th step, and the last one.
  long stride = 1;
  long dense_prefix = 0;
  // Strided steps are those with (m + phase) % stride == 0; restarts carry the
  // parent's grid forward this way.
  long phase = 0;
  // Weak-harmonicity threshold for the constant scheme; <= 0 selects the default.
  double gate_threshold = 0.0;

  long steps() const;
  // Largest admissible explicit time step on `mesh` for this scheme.
  double max_stable_dt(const BallMesh& mesh) const;
  // Throws Config or StepSize describing the first violated precondition.
  void validate(const BallMesh& mesh) const;
  // Same scheme restarted at step m: horizon shortened by m dt, strided
  // storage kept on the parent's grid.
  SchemeConfig restarted(long m) const;
};

/// Half the explicit stability bound for `scheme` on `mesh`, with the given
/// horizon and storage pattern.
SchemeConfig default_scheme_config(const BallMesh& mesh, Scheme scheme, double horizon,
                                   long stride = 1, long dense_prefix = 0);

/// Discrete path t_m = m dt, m = 0..steps, with a full energy ledger and a
/// sparse set of stored snapshots (shared and immutable).
struct Trajectory {
  MeshPtr mesh;
  std::string scheme;
  // Equation the path claims to solve: "heat-flow" or "landau-lifshitz"
  // (damping in parameters["damping"]).
  std::string equation = "heat-flow";
  std::map<std::string, double> parameters;
  double dt = 0.0;
  long steps = 0;
  long dense_prefix = 0;
  long stride = 1;
  long phase = 0;

  std::vector<long> stored_steps;
  std::vector<std::shared_ptr<const VectorField>> snapshots;

  // energies[m] for m = 0..steps; dissipation[m] = c |u_{m+1} - u_m|^2_{L2} / dt
  // with c = 1 for the heat flow and c = lambda / (1 + lambda^2) for
  // Landau-Lifshitz, whose energy identity dissipates only that fraction.
  Eigen::VectorXd energies;
  Eigen::VectorXd dissipation;
  double energy_tolerance = 0.0;

  double time(long m) const { return static_cast<double>(m) * dt; }
  double horizon() const { return time(steps); }
  bool is_stored(long m) const;
  // Throws Storage when step m was not retained.
  const VectorField& snapshot(long m) const;
  std::shared_ptr<const VectorField> snapshot_ptr(long m) const;
  const VectorField& initial() const { return *snapshots.front(); }
  const VectorField& last() const { return *snapshots.back(); }
};

/// Storage rule shared by every scheme.
bool keeps_snapshot(long m, long steps, long dense_prefix, long stride, long phase = 0);

/// Explicit projection step: v = u + dt tension(u), renormalised on the interior.
VectorField step_projection(const BallMesh& mesh, const VectorField& u, double dt);

/// Explicit Ginzburg-Landau step w + dt (Lap w + (1 - |w|^2) w / eps^2); no projection.
VectorField step_penalized(const BallMesh& mesh, const VectorField& w, double dt, double epsilon);

/// Explicit Landau-Lifshitz step u + dt (u x Lap u - lambda u x (u x Lap u)), renormalised.
VectorField step_landau_lifshitz(const BallMesh& mesh, const VectorField& u, double dt, double damping);

// Ledger tolerance 10 dt E_0 used for the discrete energy inequality.
double default_energy_tolerance(double dt, double initial_energy);

/// Runs `cfg` from `a`. The penalized scheme stores the interior projection of
/// its state onto S^2 and records the worst ||w| - 1| as "projection_defect".
/// The constant scheme delegates to constant_trajectory.
Trajectory run_flow(const DirectorField& a, const SchemeConfig& cfg);

/// u(t) = a for all t. Throws NotWeaklyHarmonic unless `a` passes the gate.
Trajectory constant_trajectory(const DirectorField& a, const SchemeConfig& cfg);

/// E_{m+s} + sum_{r=m}^{m+s-1} d_r - E_m.
double energy_inequality_check(const Trajectory& traj, long m, long s);

struct EnergySweep {
  double worst_residual = 0.0;
  long worst_m = 0;
  long worst_s = 0;
};

/// Worst energy_inequality_check over all pairs 0 <= m <= m + s <= steps, in
/// linear time via prefix sums.
EnergySweep energy_inequality_sweep(const Trajectory& traj);

}  // namespace hfss
