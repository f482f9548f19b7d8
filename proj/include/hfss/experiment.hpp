#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hfss/archive.hpp"
#include "hfss/selection.hpp"

namespace hfss {

struct DatumSpec {
  // constant | great-circle | equator | random-smooth | custom-file
  std::string kind = "great-circle";
  double wavenumber = 1.0;
  Eigen::Vector3d direction = Eigen::Vector3d::UnitZ();
  std::string path;
  std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
  int resolution = 16;
  DatumSpec datum;
  // Each entry: {"scheme": name, optional dt/horizon/epsilon/damping/stride/dense_prefix}.
  std::vector<json> schemes{json{{"scheme", "projection"}}};
  double horizon = 1.0;
  // Shared time step; unset means half the tightest stability bound.
  std::optional<double> dt;
  long stride = 1;
  long dense_prefix = 0;

  std::vector<double> rates{1.0, 2.0};
  double tie_tolerance = 1e-9;
  int probe_degree = 2;
  double min_discount_horizon = 20.0;
  // The first drives the selection; a second one triggers the distinctness check.
  std::vector<std::string> enumerations{"canonical"};

  std::string out;
  std::uint64_t seed = 0;
  // Base directory for relative datum paths.
  std::string base_dir = ".";

  static ExperimentConfig from_json(const json& j, const std::string& base_dir = ".");
  static ExperimentConfig load(const std::string& path);
  json echo() const;
};

struct Experiment {
  MeshPtr mesh;
  std::optional<DirectorField> datum;
  std::vector<SchemeConfig> schemes;
};

DirectorField make_datum(const MeshPtr& mesh, const DatumSpec& spec, std::uint64_t fallback_seed,
                         const std::string& base_dir = ".");

/// Builds the mesh and datum and resolves every scheme config, validating all
/// of them before any time stepping.
Experiment prepare(ExperimentConfig& cfg);

/// Per rate: +aligned, -aligned, then the signed monomial probes.
std::vector<Functional> canonical_functionals(const DirectorField& a, std::span<const double> rates,
                                              int probe_degree);

/// canonical | aligned | anti-aligned | reversed | shuffle[:seed] | perm:i,j,...
/// (listed positions first, the rest in canonical order).
SelectionConfig make_selection(const DirectorField& a, const ExperimentConfig& cfg,
                               const std::string& enumeration);

inline const std::vector<std::string> kVerifyChecks{"norm", "trace", "continuity", "energy",
                                                    "weak-form", "semigroup"};

// Each returns the process exit code; diagnostics go to `err`.
int cmd_simulate(ExperimentConfig cfg, std::ostream& out, std::ostream& err);
int cmd_ensemble(ExperimentConfig cfg, std::ostream& out, std::ostream& err);
int cmd_select(ExperimentConfig cfg, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& archive, std::vector<std::string> checks,
               const std::string& report_path, std::ostream& out, std::ostream& err);

/// The verify report for one archive, without printing.
json verify_archive(const LoadedArchive& archive, const std::vector<std::string>& checks);

}  // namespace hfss
