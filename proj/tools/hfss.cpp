#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hfss/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::string out;
  int n = 0;
  double dt = 0.0;
  double horizon = 0.0;
  std::vector<std::string> schemes;
  long long seed = -1;
  std::vector<std::string> enumerations;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_option("--n", o.n, "Mesh resolution (even, >= 4)");
  cmd->add_option("--dt", o.dt, "Time step shared by every scheme");
  cmd->add_option("--horizon", o.horizon, "Final time T");
  cmd->add_option("--scheme", o.schemes, "Scheme; repeat for an ensemble")->take_all();
  cmd->add_option("--seed", o.seed, "Seed for random data and shuffled enumerations");
  cmd->add_option("--enumeration", o.enumerations,
                  "canonical | aligned | anti-aligned | reversed | shuffle[:seed] | perm:i,j,..; "
                  "give twice to compare two selections")->take_all();
}

hfss::ExperimentConfig resolve(const Overrides& o) {
  hfss::ExperimentConfig cfg = o.config.empty() ? hfss::ExperimentConfig{} : hfss::ExperimentConfig::load(o.config);
  if (!o.out.empty()) cfg.out = o.out;
  if (o.n != 0) cfg.resolution = o.n;
  if (o.dt != 0.0) cfg.dt = o.dt;
  if (o.horizon != 0.0) cfg.horizon = o.horizon;
  if (!o.schemes.empty()) {
    cfg.schemes.clear();
    for (const auto& s : o.schemes) cfg.schemes.push_back(hfss::json{{"scheme", s}});
  }
  if (o.seed >= 0) cfg.seed = static_cast<std::uint64_t>(o.seed);
  if (!o.enumerations.empty()) cfg.enumerations = o.enumerations;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat flow of director fields on the unit ball: simulation, ensembles and selection"};
  app.require_subcommand(1);

  Overrides sim, ens, sel;
  add_run_flags(app.add_subcommand("simulate", "Run one scheme and archive the trajectory"), sim);
  add_run_flags(app.add_subcommand("ensemble", "Run every scheme and archive the admissible ones"), ens);
  add_run_flags(app.add_subcommand("select", "Select one trajectory by discounted functionals"), sel);

  std::string archive, report;
  std::vector<std::string> checks;
  CLI::App* verify = app.add_subcommand("verify", "Re-check an archive");
  verify->add_option("archive", archive, "Archive directory")->required();
  verify->add_option("--check", checks, "norm | trace | continuity | energy | weak-form | semigroup")
      ->take_all();
  verify->add_option("--out", report, "Also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "simulate") return hfss::cmd_simulate(resolve(sim), std::cout, std::cerr);
    if (cmd == "ensemble") return hfss::cmd_ensemble(resolve(ens), std::cout, std::cerr);
    if (cmd == "select") return hfss::cmd_select(resolve(sel), std::cout, std::cerr);
    return hfss::cmd_verify(archive, checks, report, std::cout, std::cerr);
  } catch (const hfss::Error& e) {
    std::cerr << "hfss: " << e.what() << "\n";
    return hfss::exit_code(e.kind());
  }
}
