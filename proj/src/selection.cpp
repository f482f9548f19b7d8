#include "hfss/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Geometry>

#include "hfss/parallel.hpp"

namespace hfss {

namespace {

bool bit_equal(const VectorField& a, const VectorField& b) {
  return a.rows() == b.rows() && (a.array() == b.array()).all();
}

// Weak-form integrand B(u, eta) for every test, at one snapshot. The
// Dirichlet pairing <grad u, grad eta> is the link form whose quadratic part
// is the discrete energy; tests vanish on the band, so summing by parts turns
// it into -h^3 sum Lap(u) . eta.
struct WeakForm {
  const BallMesh& mesh;
  bool landau_lifshitz = false;
  double damping = 0.0;
  std::vector<VectorField> tests;
  std::vector<double> test_norms;

  WeakForm(const BallMesh& m, const Trajectory& traj) : mesh(m) {
    landau_lifshitz = traj.equation == "landau-lifshitz";
    if (landau_lifshitz) {
      const auto it = traj.parameters.find("damping");
      damping = it == traj.parameters.end() ? 0.0 : it->second;
    }
    tests = weak_test_fields(mesh, 2, 0.0, 0.85);
    for (const auto& eta : tests) test_norms.push_back(std::sqrt(2.0 * dirichlet_energy(mesh, eta)));
  }

  // Fills b[t] = B(u, eta_t) and p[t] = <u, eta_t>.
  void evaluate(const VectorField& u, std::vector<double>& b, std::vector<double>& p) const {
    const VectorField lap = laplacian(mesh, u);
    const ScalarField e = energy_density(mesh, u);
    b.assign(tests.size(), 0.0);
    p.assign(tests.size(), 0.0);
    for (const Index node : mesh.interior()) {
      const Eigen::Vector3d un = u.row(node).transpose();
      const Eigen::Vector3d ln = lap.row(node).transpose();
      const Eigen::Vector3d tau = ln + 2.0 * e(node) * un;
      for (std::size_t t = 0; t < tests.size(); ++t) {
        const Eigen::Vector3d eta = tests[t].row(node).transpose();
        if (eta.squaredNorm() == 0.0) continue;
        b[t] -= landau_lifshitz ? ln.dot(eta.cross(un)) + damping * tau.dot(eta) : tau.dot(eta);
        p[t] += un.dot(eta);
      }
    }
    for (std::size_t t = 0; t < tests.size(); ++t) {
      b[t] *= mesh.cell_volume();
      p[t] *= mesh.cell_volume();
    }
  }
};

// Exact integral of e^{-rate t} against the piecewise-linear interpolant.
double product_trapezoid(std::span<const double> times, std::span<const double> samples,
                         double rate, std::size_t step) {
  double sum = 0.0;
  std::size_t a = 0;
  while (a + 1 < times.size()) {
    const std::size_t b = std::min(a + step, times.size() - 1);
    const double w = times[b] - times[a];
    const double x = rate * w;
    const double ea = std::exp(-rate * times[a]);
    const double mass = -std::expm1(-x);                 // 1 - e^{-x}
    const double first = mass - x * std::exp(-x);        // 1 - e^{-x}(1 + x)
    const double slope = x > 0.0 ? (samples[b] - samples[a]) * first / x : 0.0;
    sum += ea / rate * (samples[a] * mass + slope);
    a = b;
  }
  return sum;
}

double quadrature_estimate(std::span<const double> times, std::span<const double> samples,
                           double rate, double fine) {
  if (times.size() < 3) return 0.0;
  return std::abs(fine - product_trapezoid(times, samples, rate, 2)) / 3.0;
}

void require_rate(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate))
    throw Error(ErrorKind::InvalidRate, "discount rate must be positive, got " + std::to_string(rate));
}

}  // namespace

double default_weak_form_tolerance(const DirectorField& a) {
  const double h = a.mesh().spacing();
  return h * h * (1.0 + std::sqrt(2.0 * dirichlet_energy(a.mesh(), a.values())));
}

AdmissibilityReport admissible(const Trajectory& traj, const DirectorField& a,
                               const AdmissibilityTolerances& tol) {
  if (!traj.mesh || !traj.mesh->same_as(a.mesh()))
    throw Error(ErrorKind::MeshMismatch, "trajectory and datum live on different meshes");
  const BallMesh& mesh = a.mesh();
  AdmissibilityReport r;
  std::string why;
  auto note = [&why](const std::string& s) { why += (why.empty() ? "" : "; ") + s; };

  // i)
  for (const auto& snap : traj.snapshots)
    r.worst_norm_defect = std::max(r.worst_norm_defect, max_norm_defect(*snap));
  r.unit_norm = r.worst_norm_defect <= tol.unit_norm;
  if (!r.unit_norm) note("unit-norm defect " + std::to_string(r.worst_norm_defect));

  // ii)
  const VectorField& datum = a.values();
  r.initial_deviation = (traj.initial() - datum).cwiseAbs().maxCoeff();
  bool trace_exact = true;
  for (const auto& snap : traj.snapshots) {
    for (const Index b : mesh.band()) {
      if ((snap->row(b).array() != datum.row(b).array()).any()) {
        trace_exact = false;
        r.worst_trace_deviation =
            std::max(r.worst_trace_deviation, (snap->row(b) - datum.row(b)).cwiseAbs().maxCoeff());
      }
    }
  }
  r.initial_and_trace = traj.stored_steps.front() == 0 && bit_equal(traj.initial(), datum) && trace_exact;
  if (!r.initial_and_trace) {
    note("initial deviation " + std::to_string(r.initial_deviation) + ", trace deviation " +
         std::to_string(r.worst_trace_deviation));
  }

  // iii) and v)
  const double eps = tol.energy >= 0.0 ? tol.energy : traj.energy_tolerance;
  r.energy_tolerance = eps;
  const double e0 = traj.energies(0);
  r.max_energy = traj.energies.maxCoeff();
  const bool finite = traj.energies.allFinite() && traj.dissipation.allFinite();
  const double modulus = std::sqrt(std::max(0.0, e0 + eps));
  for (std::size_t i = 0; i + 1 < traj.snapshots.size(); ++i) {
    const double jump = l2_norm(mesh, *traj.snapshots[i + 1] - *traj.snapshots[i]);
    if (jump == 0.0) continue;
    const double window = traj.time(traj.stored_steps[i + 1]) - traj.time(traj.stored_steps[i]);
    const double ratio = modulus > 0.0 ? jump / (modulus * std::sqrt(window))
                                       : std::numeric_limits<double>::infinity();
    r.continuity_ratio = std::max(r.continuity_ratio, ratio);
  }
  r.regularity = finite && r.max_energy <= e0 + eps && r.continuity_ratio <= 1.0 + tol.continuity_slack;
  if (!r.regularity) {
    note("regularity: max energy " + std::to_string(r.max_energy) + ", continuity ratio " +
         std::to_string(r.continuity_ratio));
  }
  r.worst_energy_residual = energy_inequality_sweep(traj).worst_residual;
  r.energy_inequality = finite && r.worst_energy_residual <= eps;
  if (!r.energy_inequality) note("energy residual " + std::to_string(r.worst_energy_residual));

  // iv)
  r.weak_form_threshold = tol.weak_form >= 0.0 ? tol.weak_form : default_weak_form_tolerance(a);
  const WeakForm form(mesh, traj);
  std::vector<double> defect(form.tests.size(), 0.0);
  std::vector<double> b_prev, p_prev, b_next, p_next;
  form.evaluate(*traj.snapshots.front(), b_prev, p_prev);
  for (std::size_t i = 0; i + 1 < traj.snapshots.size(); ++i) {
    const double window = traj.time(traj.stored_steps[i + 1]) - traj.time(traj.stored_steps[i]);
    if (traj.snapshots[i + 1] == traj.snapshots[i]) {
      b_next = b_prev;
      p_next = p_prev;
    } else {
      form.evaluate(*traj.snapshots[i + 1], b_next, p_next);
    }
    for (std::size_t t = 0; t < defect.size(); ++t)
      defect[t] += std::abs(p_next[t] - p_prev[t] + 0.5 * window * (b_prev[t] + b_next[t]));
    std::swap(b_prev, b_next);
    std::swap(p_prev, p_next);
  }
  const double horizon = std::max(traj.horizon(), traj.dt);
  for (std::size_t t = 0; t < defect.size(); ++t) {
    if (form.test_norms[t] > 0.0)
      r.weak_form_defect = std::max(r.weak_form_defect, defect[t] / form.test_norms[t] / horizon);
  }
  r.weak_form = r.weak_form_defect <= r.weak_form_threshold;
  if (!r.weak_form) {
    note("weak-form defect " + std::to_string(r.weak_form_defect) + " > " +
         std::to_string(r.weak_form_threshold));
  }
  r.diagnostic = why;
  return r;
}

Trajectory shift(const Trajectory& u, long m) {
  if (m < 0 || m > u.dense_prefix || m > u.steps || !u.is_stored(m)) {
    throw Error(ErrorKind::Storage,
                "shift index " + std::to_string(m) + " outside the dense prefix 0.." +
                    std::to_string(std::min(u.dense_prefix, u.steps)));
  }
  Trajectory t = u;
  t.steps = u.steps - m;
  t.dense_prefix = u.dense_prefix - m;
  t.phase = (u.phase + m) % u.stride;
  t.stored_steps.clear();
  t.snapshots.clear();
  for (std::size_t i = 0; i < u.stored_steps.size(); ++i) {
    if (u.stored_steps[i] < m) continue;
    t.stored_steps.push_back(u.stored_steps[i] - m);
    t.snapshots.push_back(u.snapshots[i]);
  }
  t.energies = u.energies.tail(u.steps - m + 1);
  t.dissipation = u.dissipation.tail(u.steps - m);
  t.parameters["horizon"] = t.horizon();
  return t;
}

Trajectory concatenate(const Trajectory& u, const Trajectory& v, long m) {
  if (m < 0 || m > u.dense_prefix || m > u.steps || !u.is_stored(m))
    throw Error(ErrorKind::Storage, "splice index " + std::to_string(m) + " is not a dense-prefix step");
  if (!u.mesh->same_as(*v.mesh)) throw Error(ErrorKind::MeshMismatch, "splice across meshes");
  if (u.dt != v.dt) throw Error(ErrorKind::Concatenation, "splice of different time steps");
  if (u.equation != v.equation) throw Error(ErrorKind::Concatenation, "splice of different equations");
  if (!bit_equal(v.initial(), u.snapshot(m)))
    throw Error(ErrorKind::Concatenation, "restart datum differs from u(t_m)");
  double worst = 0.0;
  for (long s = 0; m + s <= u.steps; ++s) worst = std::max(worst, energy_inequality_check(u, m, s));
  if (worst > u.energy_tolerance) {
    throw Error(ErrorKind::Concatenation,
                "energy inequality fails at the splice time (residual " + std::to_string(worst) + ")");
  }

  Trajectory w;
  w.mesh = u.mesh;
  w.scheme = u.scheme == v.scheme ? u.scheme : u.scheme + "+" + v.scheme;
  w.equation = u.equation;
  w.parameters = u.parameters;
  w.dt = u.dt;
  w.steps = m + v.steps;
  w.stride = u.stride;
  w.phase = u.phase;
  w.parameters["splice_step"] = static_cast<double>(m);
  w.parameters["horizon"] = w.horizon();
  for (std::size_t i = 0; i < u.stored_steps.size() && u.stored_steps[i] <= m; ++i) {
    w.stored_steps.push_back(u.stored_steps[i]);
    w.snapshots.push_back(u.snapshots[i]);
  }
  for (std::size_t i = 0; i < v.stored_steps.size(); ++i) {
    if (v.stored_steps[i] == 0) continue;
    w.stored_steps.push_back(v.stored_steps[i] + m);
    w.snapshots.push_back(v.snapshots[i]);
  }
  long prefix = 0;
  while (static_cast<std::size_t>(prefix + 1) < w.stored_steps.size() &&
         w.stored_steps[prefix + 1] == prefix + 1)
    ++prefix;
  w.dense_prefix = prefix;
  w.energies.resize(w.steps + 1);
  w.energies.head(m + 1) = u.energies.head(m + 1);
  w.energies.tail(v.steps) = v.energies.tail(v.steps);
  w.dissipation.resize(w.steps);
  w.dissipation.head(m) = u.dissipation.head(m);
  w.dissipation.tail(v.steps) = v.dissipation;
  w.energy_tolerance = u.energy_tolerance + v.energy_tolerance;

  const DirectorField datum(u.mesh, u.initial(), kUnitTolerance);
  const AdmissibilityReport report = admissible(w, datum);
  if (!report.passed())
    throw Error(ErrorKind::Concatenation, "spliced trajectory is not admissible: " + report.diagnostic);
  return w;
}

DiscountedValue discounted_functional(std::span<const double> times,
                                      std::span<const double> samples, double rate) {
  require_rate(rate);
  if (times.size() != samples.size() || times.empty())
    throw Error(ErrorKind::Config, "discounted functional needs matching, non-empty samples");
  DiscountedValue out;
  out.times.assign(times.begin(), times.end());
  out.samples.assign(samples.begin(), samples.end());
  out.value = product_trapezoid(times, samples, rate, 1);
  out.tail_bound = std::exp(-rate * times.back()) / rate;
  out.quadrature_error = quadrature_estimate(times, samples, rate, out.value);
  return out;
}

DiscountedValue discounted_functional(const Trajectory& traj, double rate, const SignedProbe& phi) {
  require_rate(rate);
  std::vector<double> times, samples;
  std::map<const VectorField*, double> cache;
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const VectorField* key = traj.snapshots[i].get();
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, phi(*key)).first;
    times.push_back(traj.time(traj.stored_steps[i]));
    samples.push_back(it->second);
  }
  return discounted_functional(times, samples, rate);
}

double comparability_bound(const DiscountedValue& a, const DiscountedValue& b, double rate) {
  const double tails = 2.0 * std::max(a.tail_bound, b.tail_bound);
  if (a.times != b.times) return tails + a.quadrature_error + b.quadrature_error;
  std::vector<double> diff(a.samples.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.samples[i] - b.samples[i];
  const double fine = product_trapezoid(a.times, diff, rate, 1);
  return tails + quadrature_estimate(a.times, diff, rate, fine);
}

std::string Functional::label() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "I[%g,", rate);
  return std::string(buf) + phi.label() + "]";
}

void SelectionConfig::validate(double horizon) const {
  if (!(tie_tolerance > 0.0)) throw Error(ErrorKind::Config, "tie tolerance must be positive");
  for (const auto& f : functionals) {
    require_rate(f.rate);
    if (!f.phi.probe) throw Error(ErrorKind::Config, "functional without a probe");
    if (min_discount_horizon > 0.0 && f.rate * horizon < min_discount_horizon * (1.0 - 1e-12)) {
      throw Error(ErrorKind::Config, "rate * horizon = " + std::to_string(f.rate * horizon) +
                                         " below the required " +
                                         std::to_string(min_discount_horizon));
    }
  }
}

SolutionSet build_solution_set(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                               const AdmissibilityTolerances& tol) {
  struct Outcome {
    std::optional<Trajectory> traj;
    AdmissibilityReport report;
    std::string failure;
  };
  std::vector<Outcome> outcomes(cfgs.size());
  parallel_for(cfgs.size(), [&](std::size_t i) {
    try {
      outcomes[i].traj = run_flow(a, cfgs[i]);
      outcomes[i].report = admissible(*outcomes[i].traj, a, tol);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Config || e.kind() == ErrorKind::MeshMismatch) throw;
      outcomes[i].failure = e.what();
    }
  });
  SolutionSet set;
  set.datum = a;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const int id = static_cast<int>(i);
    auto& o = outcomes[i];
    if (!o.traj) {
      set.rejected.push_back({id, to_string(cfgs[i].scheme), o.failure});
    } else if (!o.report.passed()) {
      set.rejected.push_back({id, to_string(cfgs[i].scheme), "inadmissible: " + o.report.diagnostic});
    } else {
      set.members.push_back({id, std::move(*o.traj), o.report});
    }
  }
  return set;
}

std::vector<std::size_t> refine_values(std::span<const double> values, double tolerance,
                                       std::span<const double> bounds) {
  std::vector<std::size_t> keep;
  if (values.empty()) return keep;
  const double best = *std::max_element(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double slack = tolerance + (bounds.empty() ? 0.0 : bounds[i]);
    if (best - values[i] <= slack) keep.push_back(i);
  }
  return keep;
}

SolutionSet refine(const SolutionSet& set, const Functional& f, double tie_tolerance,
                   RefineRound* round) {
  if (set.members.size() <= 1) {
    if (round) {
      round->functional = f.label();
      for (const auto& m : set.members) {
        round->candidate_ids.push_back(m.id);
        round->survivor_ids.push_back(m.id);
      }
    }
    return set;
  }
  std::vector<DiscountedValue> values(set.members.size());
  parallel_for(values.size(), [&](std::size_t i) {
    values[i] = discounted_functional(set.members[i].trajectory, f.rate, f.phi);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i].value > values[best].value) best = i;
  const double top = values[best].value;

  std::vector<double> raw(values.size()), bounds(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    raw[i] = values[i].value;
    bounds[i] = i == best ? 0.0 : comparability_bound(values[best], values[i], f.rate);
  }
  const std::vector<std::size_t> keep = refine_values(raw, tie_tolerance * (1.0 + std::abs(top)), bounds);

  SolutionSet out;
  out.datum = set.datum;
  out.rejected = set.rejected;
  for (const std::size_t i : keep) out.members.push_back(set.members[i]);
  if (round) {
    round->functional = f.label();
    for (std::size_t i = 0; i < values.size(); ++i) round->candidate_ids.push_back(set.members[i].id);
    for (const std::size_t i : keep) round->survivor_ids.push_back(set.members[i].id);
    round->values = raw;
    round->bounds = bounds;
  }
  return out;
}

const Trajectory& SelectionResult::selected() const {
  for (const auto& m : set.members)
    if (m.id == selected_id) return m.trajectory;
  throw Error(ErrorKind::EmptySolutionSet, "selected id not in the solution set");
}

SelectionResult select(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                       const SelectionConfig& sel, const AdmissibilityTolerances& tol) {
  if (cfgs.empty()) throw Error(ErrorKind::Config, "selection needs at least one scheme");
  double horizon = cfgs.front().horizon;
  for (const auto& c : cfgs) horizon = std::min(horizon, c.horizon);
  sel.validate(horizon);
  return select_from(build_solution_set(a, cfgs, tol), sel);
}

SelectionResult select_from(SolutionSet set, const SelectionConfig& sel) {
  if (set.empty()) {
    std::string reasons;
    for (const auto& r : set.rejected)
      reasons += "\n  [" + std::to_string(r.id) + " " + r.scheme + "] " + r.reason;
    throw Error(ErrorKind::EmptySolutionSet, "no admissible candidate" + reasons);
  }
  SelectionResult result;
  result.set = std::move(set);
  for (const auto& f : sel.functionals) {
    if (result.set.members.size() <= 1) break;
    RefineRound round;
    result.set = refine(result.set, f, sel.tie_tolerance, &round);
    result.rounds.push_back(std::move(round));
  }
  result.selected_id = result.set.members.front().id;
  return result;
}

namespace {

SelectionResult reselect(const SelectionResult& base, std::span<const SchemeConfig> cfgs,
                         const SelectionConfig& sel, long m, const AdmissibilityTolerances& tol) {
  const Trajectory& u = base.selected();
  if (m < 0 || m > u.dense_prefix)
    throw Error(ErrorKind::Storage, "restart step " + std::to_string(m) + " outside the dense prefix");
  const DirectorField restart(u.mesh, u.snapshot(m), kUnitTolerance);
  std::vector<SchemeConfig> restarted;
  for (const auto& c : cfgs) restarted.push_back(c.restarted(m));
  SelectionConfig tail = sel;
  tail.min_discount_horizon = 0.0;
  return select(restart, restarted, tail, tol);
}

}  // namespace

double semigroup_check(const SelectionResult& base, std::span<const SchemeConfig> cfgs,
                       const SelectionConfig& sel, long m, long s,
                       const AdmissibilityTolerances& tol) {
  const Trajectory& u = base.selected();
  if (s < 0 || m + s > u.steps)
    throw Error(ErrorKind::IndexRange, "t_m + t_s exceeds the horizon");
  const VectorField& x = u.snapshot(m + s);
  const SelectionResult again = reselect(base, cfgs, sel, m, tol);
  return l2_norm(*u.mesh, x - again.selected().snapshot(s));
}

double semigroup_defect(const SelectionResult& base, std::span<const SchemeConfig> cfgs,
                        const SelectionConfig& sel, long m, const AdmissibilityTolerances& tol) {
  const Trajectory& u = base.selected();
  const SelectionResult again = reselect(base, cfgs, sel, m, tol);
  const Trajectory& v = again.selected();
  double worst = 0.0;
  for (std::size_t i = 0; i < v.stored_steps.size(); ++i) {
    const long s = v.stored_steps[i];
    if (!u.is_stored(m + s)) continue;
    worst = std::max(worst, l2_norm(*u.mesh, u.snapshot(m + s) - *v.snapshots[i]));
  }
  return worst;
}

double semigroup_check(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                       const SelectionConfig& sel, long m, long s,
                       const AdmissibilityTolerances& tol) {
  return semigroup_check(select(a, cfgs, sel, tol), cfgs, sel, m, s, tol);
}

bool trajectories_distinct(const Trajectory& x, const Trajectory& y, double threshold) {
  if (x.dt != y.dt || x.steps != y.steps) return true;
  for (std::size_t i = 0; i < x.stored_steps.size(); ++i) {
    const long m = x.stored_steps[i];
    if (!y.is_stored(m)) continue;
    if (l2_norm(*x.mesh, *x.snapshots[i] - y.snapshot(m)) > threshold) return true;
  }
  return false;
}

bool enumeration_distinctness(const DirectorField& a, std::span<const SchemeConfig> cfgs,
                              const SelectionConfig& first, const SelectionConfig& second,
                              const AdmissibilityTolerances& tol) {
  return enumeration_distinctness(a, select(a, cfgs, first, tol), select(a, cfgs, second, tol));
}

bool enumeration_distinctness(const DirectorField& a, const SelectionResult& first,
                              const SelectionResult& second) {
  if (first.selected_id == second.selected_id) return false;
  const double threshold = 1e-10 * l2_norm(a.mesh(), a.values());
  return trajectories_distinct(first.selected(), second.selected(), threshold);
}

}  // namespace hfss
