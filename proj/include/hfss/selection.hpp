#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hfss/flow.hpp"

namespace hfss {

struct AdmissibilityTolerances {
  double unit_norm = kStrictUnitTolerance;
  // Energy-inequality slack; negative means the trajectory's own ledger tolerance.
  double energy = -1.0;
  // Weak-form defect rate; negative means default_weak_form_tolerance.
  double weak_form = -1.0;
  // Relative slack on the L2 continuity modulus.
  double continuity_slack = 1e-9;
};

struct AdmissibilityReport {
  bool unit_norm = false;          // i)
  bool initial_and_trace = false;  // ii)
  bool regularity = false;         // iii)
  bool weak_form = false;          // iv)
  bool energy_inequality = false;  // v)

  double worst_norm_defect = 0.0;
  double initial_deviation = 0.0;
  double worst_trace_deviation = 0.0;
  double max_energy = 0.0;
  double continuity_ratio = 0.0;
  double weak_form_defect = 0.0;
  double weak_form_threshold = 0.0;
  double worst_energy_residual = 0.0;
  double energy_tolerance = 0.0;
  std::string diagnostic;

  bool passed() const {
    return unit_norm && initial_and_trace && regularity && weak_form && energy_inequality;
  }
};

// h^2 (1 + ||a||_{H1}).
double default_weak_form_tolerance(const DirectorField& a);

/// Discrete checks of the five weak-solution conditions for `traj` started at `a`:
///  i)   every stored snapshot is unit length;
///  ii)  the first snapshot equals a and band values never change (bit-exact);
///  iii) energies are finite and bounded by E_0 + eps, and consecutive stored
///       snapshots satisfy |u_b - u_a| <= sqrt(E_0 + eps) sqrt(t_b - t_a);
///  iv)  for each weak test eta, the sum over stored windows of
///       |<u_b - u_a, eta> + int_a^b B(u, eta) dt| / |grad eta|, divided by the
///       horizon, stays below the threshold (B is the heat-flow or
///       Landau-Lifshitz form depending on the trajectory's equation);
///  v)   the energy-inequality sweep stays below eps for every (m, s).
AdmissibilityReport admissible(const Trajectory& traj, const DirectorField& a,
                               const AdmissibilityTolerances& tol = {});

/// Tail s -> u(t_m + s). m must lie in the dense prefix.
Trajectory shift(const Trajectory& u, long m);

/// w(s) = u(s) for s <= t_m and v(s - t_m) afterwards. Requires t_m in u's
/// dense prefix, v's initial datum bit-equal to u(t_m), equal time steps and
/// equations, and a valid energy inequality for u at m. The result is checked
/// for admissibility.
Trajectory concatenate(const Trajectory& u, const Trajectory& v, long m);

struct DiscountedValue {
  double value = 0.0;
  // e^{-rate T} / rate, the largest possible contribution of [T, inf) when |phi| <= 1.
  double tail_bound = 0.0;
  double quadrature_error = 0.0;
  std::vector<double> times;
  std::vector<double> samples;  // phi(u(t_i))
};

/// int_0^T e^{-rate t} phi(t) dt with phi linear between samples and the
/// exponential weight integrated exactly. The error estimate compares against
/// the same rule on every other sample.
DiscountedValue discounted_functional(std::span<const double> times,
                                      std::span<const double> samples, double rate);
DiscountedValue discounted_functional(const Trajectory& traj, double rate, const SignedProbe& phi);

/// Bound under which two discounted values are indistinguishable: twice the
/// tail bound plus the quadrature error of the difference.
double comparability_bound(const DiscountedValue& a, const DiscountedValue& b, double rate);

struct Functional {
  double rate = 1.0;
  SignedProbe phi;

  std::string label() const;
};

struct SelectionConfig {
  std::vector<Functional> functionals;
  double tie_tolerance = 1e-9;
  std::string enumeration = "custom";
  // Positions of the functionals in the canonical enumeration, for the record.
  std::vector<long> permutation;
  // Every rate must satisfy rate * horizon >= this; 0 disables the check.
  double min_discount_horizon = 20.0;

  void validate(double horizon) const;
};

struct SolutionMember {
  int id = 0;
  Trajectory trajectory;
  AdmissibilityReport report;
};

struct RejectedCandidate {
  int id = 0;
  std::string scheme;
  std::string reason;
};

/// Finite stand-in for the set of weak solutions from one datum.
struct SolutionSet {
  std::optional<DirectorField> datum;
  std::vector<SolutionMember> members;
  std::vector<RejectedCandidate> rejected;

  bool empty() const { return members.empty(); }
};

/// Runs every config from `a` (in parallel), keeping admissible outputs in
/// config order with ids 0, 1, ...; failures are recorded in `rejected`.
SolutionSet build_solution_set(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                               const AdmissibilityTolerances& tol = {});

/// Indices i with values[i] >= max - tolerance - bounds[i] (bounds optional),
/// in input order; never empty for non-empty input.
std::vector<std::size_t> refine_values(std::span<const double> values, double tolerance,
                                       std::span<const double> bounds = {});

struct RefineRound {
  std::string functional;
  std::vector<int> candidate_ids;
  std::vector<double> values;
  std::vector<double> bounds;
  std::vector<int> survivor_ids;
};

/// Keeps members whose value is within tie_tolerance (1 + |max|) plus the
/// comparability bound of the maximum.
SolutionSet refine(const SolutionSet& set, const Functional& f, double tie_tolerance,
                   RefineRound* round = nullptr);

struct SelectionResult {
  SolutionSet set;
  std::vector<RefineRound> rounds;
  int selected_id = 0;

  const Trajectory& selected() const;
};

/// Builds S_a, folds refine over the functionals (stopping once one member
/// remains) and returns the lowest-id survivor.
SelectionResult select(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                       const SelectionConfig& sel, const AdmissibilityTolerances& tol = {});

/// Folds refine over an already built solution set.
SelectionResult select_from(SolutionSet set, const SelectionConfig& sel);

/// |select(a)(t_m + t_s) - select(select(a)(t_m))(t_s)|_{L2}. The restart
/// ensemble reruns every config from the restart datum over T - t_m.
double semigroup_check(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                       const SelectionConfig& sel, long m, long s,
                       const AdmissibilityTolerances& tol = {});
double semigroup_check(const SelectionResult& base, std::span<const SchemeConfig> cfgs,
                       const SelectionConfig& sel, long m, long s,
                       const AdmissibilityTolerances& tol = {});
/// Worst semigroup_check error over every s stored by both paths, from one
/// restart at m.
double semigroup_defect(const SelectionResult& base, std::span<const SchemeConfig> cfgs,
                        const SelectionConfig& sel, long m,
                        const AdmissibilityTolerances& tol = {});

/// True when the two enumerations select trajectories that differ in L2 by
/// more than 1e-10 |a|_{L2} at some commonly stored time.
bool enumeration_distinctness(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                              const SelectionConfig& first, const SelectionConfig& second,
                              const AdmissibilityTolerances& tol = {});
bool enumeration_distinctness(const DirectorField& a, const SelectionResult& first,
                              const SelectionResult& second);
bool trajectories_distinct(const Trajectory& x, const Trajectory& y, double threshold);

}  // namespace hfss
