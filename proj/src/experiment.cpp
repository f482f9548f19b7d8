#include "hfss/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "hfss/initial_data.hpp"

namespace hfss {

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& into) {
  if (j.contains(key) && !j.at(key).is_null()) into = j.at(key).get<T>();
}

json datum_json(const DatumSpec& d) {
  json j = {{"kind", d.kind}};
  if (d.kind == "great-circle") j["wavenumber"] = d.wavenumber;
  if (d.kind == "constant") j["direction"] = {d.direction.x(), d.direction.y(), d.direction.z()};
  if (d.kind == "custom-file") j["path"] = d.path;
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

json rejected_json(const RejectedCandidate& r) {
  return {{"id", r.id}, {"scheme", r.scheme}, {"reason", r.reason}};
}

int fail(std::ostream& err, const Error& e) {
  err << "hfss: " << e.what() << "\n";
  return exit_code(e.kind());
}

// Runs `body` with uniform error reporting.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    return fail(err, e);
  } catch (const json::exception& e) {
    return fail(err, Error(ErrorKind::Config, e.what()));
  } catch (const fs::filesystem_error& e) {
    return fail(err, Error(ErrorKind::Io, e.what()));
  }
}

void require_out(const ExperimentConfig& cfg) {
  if (cfg.out.empty()) throw Error(ErrorKind::Config, "no output directory (--out or \"out\")");
}

json functional_values(const Trajectory& traj, const std::vector<Functional>& fs) {
  json values = json::array();
  for (const auto& f : fs) {
    const DiscountedValue v = discounted_functional(traj, f.rate, f.phi);
    values.push_back({{"functional", f.label()},
                      {"value", v.value},
                      {"tail_bound", v.tail_bound},
                      {"quadrature_error", v.quadrature_error}});
  }
  return values;
}

json rounds_json(const SelectionResult& r) {
  json rounds = json::array();
  for (const auto& rd : r.rounds) {
    rounds.push_back({{"functional", rd.functional},
                      {"candidates", rd.candidate_ids},
                      {"values", rd.values},
                      {"bounds", rd.bounds},
                      {"survivors", rd.survivor_ids}});
  }
  return rounds;
}

std::string member_dir(int id, const std::string& scheme) {
  return "members/" + std::to_string(id) + "-" + scheme;
}

double portable_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir) {
  ExperimentConfig c;
  c.base_dir = base_dir;
  read_opt(j, "n", c.resolution);
  if (j.contains("datum")) {
    const json& d = j.at("datum");
    if (d.is_string()) {
      c.datum.kind = d.get<std::string>();
    } else {
      read_opt(d, "kind", c.datum.kind);
      read_opt(d, "wavenumber", c.datum.wavenumber);
      read_opt(d, "path", c.datum.path);
      if (d.contains("seed")) c.datum.seed = d.at("seed").get<std::uint64_t>();
      if (d.contains("direction")) {
        const auto v = d.at("direction").get<std::vector<double>>();
        if (v.size() != 3) throw Error(ErrorKind::Config, "datum direction needs 3 components");
        c.datum.direction = Eigen::Vector3d(v[0], v[1], v[2]);
      }
    }
  }
  if (j.contains("schemes")) {
    c.schemes.clear();
    for (const auto& s : j.at("schemes")) c.schemes.push_back(s.is_string() ? json{{"scheme", s}} : s);
  }
  read_opt(j, "horizon", c.horizon);
  if (j.contains("dt") && !j.at("dt").is_null()) c.dt = j.at("dt").get<double>();
  read_opt(j, "stride", c.stride);
  read_opt(j, "dense_prefix", c.dense_prefix);
  if (j.contains("selection")) {
    const json& s = j.at("selection");
    read_opt(s, "rates", c.rates);
    read_opt(s, "tie_tolerance", c.tie_tolerance);
    read_opt(s, "probe_degree", c.probe_degree);
    read_opt(s, "min_discount_horizon", c.min_discount_horizon);
    if (s.contains("enumeration")) {
      const json& e = s.at("enumeration");
      c.enumerations = e.is_string() ? std::vector<std::string>{e.get<std::string>()}
                                     : e.get<std::vector<std::string>>();
    }
  }
  read_opt(j, "out", c.out);
  read_opt(j, "seed", c.seed);
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
  const fs::path parent = fs::path(path).parent_path();
  return from_json(j, parent.empty() ? "." : parent.string());
}

json ExperimentConfig::echo() const {
  json j = {{"n", resolution},
            {"datum", datum_json(datum)},
            {"schemes", schemes},
            {"horizon", horizon},
            {"stride", stride},
            {"dense_prefix", dense_prefix},
            {"selection",
             {{"rates", rates},
              {"tie_tolerance", tie_tolerance},
              {"probe_degree", probe_degree},
              {"min_discount_horizon", min_discount_horizon},
              {"enumeration", enumerations}}},
            {"out", out},
            {"seed", seed}};
  j["dt"] = dt ? json(*dt) : json(nullptr);
  return j;
}

DirectorField make_datum(const MeshPtr& mesh, const DatumSpec& spec, std::uint64_t fallback_seed,
                         const std::string& base_dir) {
  if (spec.kind == "constant") {
    if (!(spec.direction.norm() > 0.0)) throw Error(ErrorKind::Config, "constant datum needs a nonzero direction");
    return constant_map(mesh, spec.direction.normalized());
  }
  if (spec.kind == "great-circle") return great_circle_map(mesh, spec.wavenumber);
  if (spec.kind == "equator") return equator_map(mesh);
  if (spec.kind == "random-smooth") return random_smooth_map(mesh, spec.seed.value_or(fallback_seed));
  if (spec.kind == "custom-file") {
    if (spec.path.empty()) throw Error(ErrorKind::Config, "custom-file datum needs a path");
    fs::path p = spec.path;
    if (p.is_relative()) p = fs::path(base_dir) / p;
    if (!fs::exists(p)) throw Error(ErrorKind::Io, "datum file " + p.string() + " not found");
    return DirectorField(mesh, read_field(p, *mesh));
  }
  throw Error(ErrorKind::Config, "unknown datum kind '" + spec.kind + "'");
}

Experiment prepare(ExperimentConfig& cfg) {
  Experiment ex;
  ex.mesh = BallMesh::build(cfg.resolution);
  if (cfg.schemes.empty()) throw Error(ErrorKind::Config, "no schemes configured");
  for (const auto& s : cfg.schemes) {
    if (!s.contains("scheme")) throw Error(ErrorKind::Config, "scheme entry without a name: " + s.dump());
    SchemeConfig c = default_scheme_config(*ex.mesh, scheme_from_string(s.at("scheme").get<std::string>()),
                                           cfg.horizon, cfg.stride, cfg.dense_prefix);
    read_opt(s, "horizon", c.horizon);
    read_opt(s, "epsilon", c.epsilon);
    read_opt(s, "damping", c.damping);
    read_opt(s, "stride", c.stride);
    read_opt(s, "dense_prefix", c.dense_prefix);
    read_opt(s, "gate_threshold", c.gate_threshold);
    ex.schemes.push_back(c);
  }
  // One time grid for the whole ensemble.
  if (!cfg.dt) {
    double bound = std::numeric_limits<double>::infinity();
    for (const auto& c : ex.schemes)
      if (c.scheme != Scheme::Constant) bound = std::min(bound, c.max_stable_dt(*ex.mesh));
    if (!std::isfinite(bound)) bound = ex.mesh->spacing() * ex.mesh->spacing() / 6.0;
    cfg.dt = 0.5 * bound;
  }
  for (std::size_t i = 0; i < ex.schemes.size(); ++i) {
    SchemeConfig& c = ex.schemes[i];
    c.dt = *cfg.dt;
    read_opt(cfg.schemes[i], "dt", c.dt);
    c.validate(*ex.mesh);
  }
  for (const double r : cfg.rates)
    if (!(r > 0.0)) throw Error(ErrorKind::InvalidRate, "selection rates must be positive");
  if (!(cfg.tie_tolerance > 0.0)) throw Error(ErrorKind::Config, "tie tolerance must be positive");
  ex.datum = make_datum(ex.mesh, cfg.datum, cfg.seed, cfg.base_dir);
  return ex;
}

std::vector<Functional> canonical_functionals(const DirectorField& a, std::span<const double> rates,
                                              int probe_degree) {
  const ProbePtr aligned = make_aligned_probe(a);
  const std::vector<SignedProbe> family = build_probe_family(a.mesh_ptr(), probe_degree);
  std::vector<Functional> out;
  for (const double rate : rates) {
    out.push_back({rate, SignedProbe{aligned, +1}});
    out.push_back({rate, SignedProbe{aligned, -1}});
    for (const auto& p : family) out.push_back({rate, p});
  }
  return out;
}

SelectionConfig make_selection(const DirectorField& a, const ExperimentConfig& cfg,
                               const std::string& enumeration) {
  const std::vector<Functional> base = canonical_functionals(a, cfg.rates, cfg.probe_degree);
  const long n = static_cast<long>(base.size());
  std::vector<long> order(n);
  for (long i = 0; i < n; ++i) order[i] = i;

  if (enumeration == "canonical" || enumeration == "aligned") {
  } else if (enumeration == "anti-aligned") {
    const long block = n / static_cast<long>(cfg.rates.size());
    for (long b = 0; b < n; b += block) std::swap(order[b], order[b + 1]);
  } else if (enumeration == "reversed") {
    std::reverse(order.begin(), order.end());
  } else if (enumeration.rfind("shuffle", 0) == 0) {
    std::uint64_t seed = cfg.seed;
    if (enumeration.size() > 7) {
      if (enumeration[7] != ':') throw Error(ErrorKind::Config, "bad enumeration '" + enumeration + "'");
      try {
        seed = std::stoull(enumeration.substr(8));
      } catch (const std::exception&) {
        throw Error(ErrorKind::Config, "bad shuffle seed in '" + enumeration + "'");
      }
    }
    std::mt19937_64 rng(seed);
    for (long i = n - 1; i > 0; --i) {
      const long j = std::min(i, static_cast<long>(portable_unit(rng) * static_cast<double>(i + 1)));
      std::swap(order[i], order[j]);
    }
  } else if (enumeration.rfind("perm:", 0) == 0) {
    std::vector<long> head;
    std::stringstream ss(enumeration.substr(5));
    std::string item;
    while (std::getline(ss, item, ',')) {
      long k = -1;
      try {
        k = std::stol(item);
      } catch (const std::exception&) {
      }
      if (k < 0 || k >= n || std::find(head.begin(), head.end(), k) != head.end())
        throw Error(ErrorKind::Config, "bad permutation entry '" + item + "' in '" + enumeration + "'");
      head.push_back(k);
    }
    order = head;
    for (long i = 0; i < n; ++i)
      if (std::find(head.begin(), head.end(), i) == head.end()) order.push_back(i);
  } else {
    throw Error(ErrorKind::Config, "unknown enumeration '" + enumeration + "'");
  }

  SelectionConfig sel;
  sel.tie_tolerance = cfg.tie_tolerance;
  sel.enumeration = enumeration;
  sel.permutation = order;
  sel.min_discount_horizon = cfg.min_discount_horizon;
  for (const long i : order) sel.functionals.push_back(base[i]);
  return sel;
}

int cmd_simulate(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_out(cfg);
    if (cfg.schemes.size() != 1)
      throw Error(ErrorKind::Config, "simulate runs exactly one scheme; use ensemble for several");
    const Experiment ex = prepare(cfg);
    const Trajectory traj = run_flow(*ex.datum, ex.schemes.front());
    const AdmissibilityReport report = admissible(traj, *ex.datum);
    json extra = {{"command", "simulate"},
                  {"config", cfg.echo()},
                  {"admissibility", to_json(report)}};
    write_archive(cfg.out, traj, ex.schemes.front(), extra);
    out << "simulate: " << traj.scheme << " steps=" << traj.steps << " E0=" << traj.energies(0)
        << " E_T=" << traj.energies(traj.steps) << " admissible=" << (report.passed() ? "yes" : "no")
        << " -> " << cfg.out << "\n";
    if (!report.passed()) out << "  " << report.diagnostic << "\n";
    return 0;
  });
}

int cmd_ensemble(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_out(cfg);
    const Experiment ex = prepare(cfg);
    const SolutionSet set = build_solution_set(*ex.datum, ex.schemes);
    const std::vector<Functional> fs = canonical_functionals(*ex.datum, cfg.rates, cfg.probe_degree);

    const fs::path staged = cfg.out + ".partial";
    std::error_code ec;
    fs::remove_all(staged, ec);
    fs::create_directories(staged / "members");
    json members = json::array();
    for (const auto& m : set.members) {
      const std::string dir = member_dir(m.id, m.trajectory.scheme);
      json extra = {{"command", "ensemble"}, {"member_id", m.id}, {"admissibility", to_json(m.report)}};
      write_archive(staged / dir, m.trajectory, ex.schemes[m.id], extra);
      members.push_back({{"id", m.id},
                         {"scheme", m.trajectory.scheme},
                         {"archive", dir},
                         {"admissibility", to_json(m.report)},
                         {"functionals", functional_values(m.trajectory, fs)}});
    }
    json rejected = json::array();
    for (const auto& r : set.rejected) rejected.push_back(rejected_json(r));
    const json manifest = {{"format", "hfss-ensemble"},
                           {"version", kArchiveVersion},
                           {"command", "ensemble"},
                           {"config", cfg.echo()},
                           {"mesh", {{"resolution", ex.mesh->resolution()}, {"hash", mesh_hash_hex(*ex.mesh)}}},
                           {"members", members},
                           {"rejected", rejected}};
    write_text_atomically(staged / "manifest.json", manifest.dump(2) + "\n");
    if (fs::exists(cfg.out)) fs::remove_all(cfg.out);
    fs::rename(staged, cfg.out);

    out << "ensemble: " << set.members.size() << " admissible, " << set.rejected.size()
        << " rejected -> " << cfg.out << "\n";
    for (const auto& m : set.members) out << "  [" << m.id << "] " << m.trajectory.scheme << "\n";
    for (const auto& r : set.rejected) out << "  [" << r.id << "] " << r.scheme << " rejected: " << r.reason << "\n";
    if (set.empty()) throw Error(ErrorKind::EmptySolutionSet, "no admissible candidate");
    return 0;
  });
}

int cmd_select(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    require_out(cfg);
    if (cfg.enumerations.empty() || cfg.enumerations.size() > 2)
      throw Error(ErrorKind::Config, "select takes one or two enumerations");
    const Experiment ex = prepare(cfg);
    std::vector<SelectionConfig> sels;
    double horizon = ex.schemes.front().horizon;
    for (const auto& c : ex.schemes) horizon = std::min(horizon, c.horizon);
    for (const auto& e : cfg.enumerations) {
      sels.push_back(make_selection(*ex.datum, cfg, e));
      sels.back().validate(horizon);
    }
    const SolutionSet set = build_solution_set(*ex.datum, ex.schemes);
    std::vector<SelectionResult> results;
    for (const auto& s : sels) results.push_back(select_from(set, s));

    json transcripts = json::array();
    for (std::size_t k = 0; k < results.size(); ++k) {
      transcripts.push_back({{"enumeration", sels[k].enumeration},
                             {"permutation", sels[k].permutation},
                             {"rounds", rounds_json(results[k])},
                             {"selected_id", results[k].selected_id},
                             {"selected_scheme", results[k].selected().scheme}});
    }
    json members = json::array();
    for (const auto& m : set.members)
      members.push_back({{"id", m.id}, {"scheme", m.trajectory.scheme}, {"admissibility", to_json(m.report)}});
    json rejected = json::array();
    for (const auto& r : set.rejected) rejected.push_back(rejected_json(r));
    json transcript = {{"members", members}, {"rejected", rejected}, {"selections", transcripts}};
    std::optional<bool> distinct;
    if (results.size() == 2) {
      distinct = enumeration_distinctness(*ex.datum, results[0], results[1]);
      transcript["distinct"] = *distinct;
    }

    const SelectionResult& chosen = results.front();
    json extra = {{"command", "select"},
                  {"config", cfg.echo()},
                  {"admissibility", to_json(set.members.front().report)},
                  {"functionals", functional_values(chosen.selected(), sels.front().functionals)},
                  {"transcript", transcript}};
    for (const auto& m : set.members)
      if (m.id == chosen.selected_id) extra["admissibility"] = to_json(m.report);
    write_archive(cfg.out, chosen.selected(), ex.schemes[chosen.selected_id], extra);

    for (std::size_t k = 0; k < results.size(); ++k) {
      out << "select[" << sels[k].enumeration << "]: " << results[k].rounds.size()
          << " round(s), selected id " << results[k].selected_id << " ("
          << results[k].selected().scheme << ")\n";
    }
    if (distinct) out << "distinct: " << (*distinct ? "yes" : "no") << "\n";
    out << "-> " << cfg.out << "\n";
    return 0;
  });
}

json verify_archive(const LoadedArchive& archive, const std::vector<std::string>& checks) {
  const Trajectory& t = archive.trajectory;
  json report = {{"checks", json::object()}};
  auto want = [&](const std::string& c) {
    return checks.empty() || std::find(checks.begin(), checks.end(), c) != checks.end();
  };
  for (const auto& c : checks) {
    if (std::find(kVerifyChecks.begin(), kVerifyChecks.end(), c) == kVerifyChecks.end())
      throw Error(ErrorKind::Config, "unknown check '" + c + "'");
  }
  // The archived initial snapshot stands in for the datum; a broken one is
  // reported by the norm check instead of aborting the others.
  const DirectorField a(t.mesh, t.initial(), std::numeric_limits<double>::infinity());
  const bool need_report = want("norm") || want("trace") || want("continuity") || want("energy") ||
                           want("weak-form");
  AdmissibilityReport r;
  if (need_report) r = admissible(t, a);
  if (want("norm"))
    report["checks"]["norm"] = {{"passed", r.unit_norm}, {"worst_residual", r.worst_norm_defect}};
  if (want("trace")) {
    report["checks"]["trace"] = {{"passed", r.initial_and_trace},
                                 {"worst_residual", r.worst_trace_deviation}};
  }
  if (want("continuity")) {
    report["checks"]["continuity"] = {{"passed", r.regularity},
                                      {"max_energy", r.max_energy},
                                      {"worst_residual", r.continuity_ratio}};
  }
  if (want("energy")) {
    const EnergySweep sweep = energy_inequality_sweep(t);
    report["checks"]["energy"] = {{"passed", r.energy_inequality},
                                  {"worst_residual", sweep.worst_residual},
                                  {"worst_m", sweep.worst_m},
                                  {"worst_s", sweep.worst_s},
                                  {"tolerance", r.energy_tolerance}};
  }
  if (want("weak-form")) {
    report["checks"]["weak-form"] = {{"passed", r.weak_form},
                                     {"worst_residual", r.weak_form_defect},
                                     {"threshold", r.weak_form_threshold}};
  }
  if (want("semigroup")) {
    json grid = json::array();
    json entry;
    const SchemeConfig& cfg = archive.config;
    if (cfg.scheme == Scheme::Penalized) {
      entry = {{"passed", true}, {"skipped", "penalized state lives off the sphere; no restart map"}};
    } else {
      double worst = 0.0;
      bool ok = true;
      std::string why;
      for (long m = 0; m <= std::min(t.dense_prefix, t.steps - 10); ++m) {
        try {
          const DirectorField restart(t.mesh, t.snapshot(m), kStrictUnitTolerance);
          const Trajectory v = run_flow(restart, cfg.restarted(m));
          double err = 0.0;
          for (std::size_t i = 0; i < v.stored_steps.size(); ++i) {
            const long s = v.stored_steps[i];
            if (!t.is_stored(m + s)) continue;
            err = std::max(err, l2_norm(*t.mesh, t.snapshot(m + s) - *v.snapshots[i]));
          }
          worst = std::max(worst, err);
          grid.push_back({{"m", m}, {"error", err}});
        } catch (const Error& e) {
          ok = false;
          why = e.what();
          grid.push_back({{"m", m}, {"error", nullptr}, {"diagnostic", why}});
        }
      }
      entry = {{"passed", ok && worst == 0.0}, {"worst_residual", worst}, {"grid", grid}};
      if (!why.empty()) entry["diagnostic"] = why;
    }
    report["checks"]["semigroup"] = entry;
  }
  bool all = true;
  for (const auto& [name, c] : report["checks"].items()) all = all && c.at("passed").get<bool>();
  report["passed"] = all;
  return report;
}

int cmd_verify(const std::string& archive, std::vector<std::string> checks,
               const std::string& report_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (archive.empty()) throw Error(ErrorKind::Config, "verify needs an archive directory");
    const LoadedArchive loaded = read_archive(archive);
    json report = verify_archive(loaded, checks);
    report["archive"] = archive;
    if (!report_path.empty()) write_text_atomically(report_path, report.dump(2) + "\n");
    out << report.dump(2) << "\n";
    if (!report.at("passed").get<bool>()) {
      err << "hfss: verify: one or more checks failed\n";
      return 3;
    }
    return 0;
  });
}

}  // namespace hfss
