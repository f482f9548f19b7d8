#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "hfss/experiment.hpp"
#include "hfss/initial_data.hpp"

using namespace hfss;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hfss-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HFSS_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ExperimentConfig small(const std::string& datum, std::vector<std::string> schemes, const fs::path& out) {
  ExperimentConfig cfg;
  cfg.resolution = 12;
  cfg.datum.kind = datum;
  cfg.horizon = 0.1;
  cfg.stride = 8;
  cfg.dense_prefix = 3;
  cfg.schemes.clear();
  for (const auto& s : schemes) cfg.schemes.push_back(json{{"scheme", s}});
  cfg.out = out.string();
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("field files round-trip bit-exactly") {
  const auto mesh = BallMesh::build(10);
  const fs::path dir = scratch("field");
  fs::create_directories(dir);
  const VectorField u = random_smooth_map(mesh, 3).values();
  write_field(dir / "u.bin", u);
  CHECK(fs::file_size(dir / "u.bin") == static_cast<std::uintmax_t>(mesh->node_count()) * 24);
  CHECK((read_field(dir / "u.bin", *mesh).array() == u.array()).all());
  // Little-endian, node-major: the first 8 bytes are u(0, 0).
  std::ifstream in(dir / "u.bin", std::ios::binary);
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[i];
  CHECK(std::bit_cast<double>(bits) == u(0, 0));
  CHECK_THROWS_AS(read_field(dir / "u.bin", *BallMesh::build(12)), Error);
}

TEST_CASE("trajectory archives round-trip") {
  const auto mesh = BallMesh::build(10);
  const DirectorField a = random_smooth_map(mesh, 1);
  const SchemeConfig cfg = default_scheme_config(*mesh, Scheme::LandauLifshitz, 0.1, 6, 2);
  const Trajectory t = run_flow(a, cfg);
  const fs::path dir = scratch("traj");
  write_archive(dir, t, cfg, json{{"note", "x"}});
  CHECK_FALSE(fs::exists(dir.string() + ".partial"));
  const LoadedArchive back = read_archive(dir);
  const Trajectory& r = back.trajectory;
  CHECK(back.manifest.at("note") == "x");
  CHECK(r.scheme == t.scheme);
  CHECK(r.equation == t.equation);
  CHECK(r.parameters == t.parameters);
  CHECK(r.dt == t.dt);
  CHECK(r.steps == t.steps);
  CHECK(r.stored_steps == t.stored_steps);
  CHECK(r.energy_tolerance == t.energy_tolerance);
  CHECK((r.energies.array() == t.energies.array()).all());
  CHECK((r.dissipation.array() == t.dissipation.array()).all());
  for (std::size_t i = 0; i < t.snapshots.size(); ++i) CHECK((r.snapshots[i]->array() == t.snapshots[i]->array()).all());
  CHECK(back.config.scheme == cfg.scheme);
  CHECK(back.config.damping == cfg.damping);
  CHECK(back.config.dt == cfg.dt);

  // Ledger: one row per step plus the initial one.
  std::ifstream ledger(dir / "ledger.csv");
  std::string line;
  long rows = -1;
  while (std::getline(ledger, line)) ++rows;
  CHECK(rows == t.steps + 1);
  CHECK(back.manifest.at("mesh").at("hash") == mesh_hash_hex(*mesh));
}

TEST_CASE("corrupt archives are detected") {
  const auto mesh = BallMesh::build(8);
  const SchemeConfig cfg = default_scheme_config(*mesh, Scheme::Projection, 0.1, 4);
  const Trajectory t = run_flow(random_smooth_map(mesh, 2), cfg);
  auto kind = [](const fs::path& d) {
    try {
      read_archive(d);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Config;
  };
  const fs::path base = scratch("corrupt");
  write_archive(base, t, cfg);

  const fs::path truncated = scratch("truncated");
  fs::copy(base, truncated, fs::copy_options::recursive);
  fs::resize_file(truncated / "snapshots" / "step_00000004.bin", 100);
  CHECK(kind(truncated) == ErrorKind::CorruptArchive);

  const fs::path rows = scratch("rows");
  fs::copy(base, rows, fs::copy_options::recursive);
  {
    std::ofstream out(rows / "ledger.csv", std::ios::app);
    out << "999,1,1,1\n";
  }
  CHECK(kind(rows) == ErrorKind::CorruptArchive);

  const fs::path hash = scratch("hash");
  fs::copy(base, hash, fs::copy_options::recursive);
  json man = read_json(hash / "manifest.json");
  man["mesh"]["hash"] = "0000000000000000";
  std::ofstream(hash / "manifest.json") << man.dump();
  CHECK(kind(hash) == ErrorKind::CorruptArchive);

  const fs::path garbage = scratch("garbage");
  fs::copy(base, garbage, fs::copy_options::recursive);
  std::ofstream(garbage / "manifest.json") << "{not json";
  CHECK(kind(garbage) == ErrorKind::CorruptArchive);

  CHECK(kind(scratch("missing")) == ErrorKind::Io);
}

TEST_CASE("simulate") {
  std::ostringstream out, err;
  const fs::path c = scratch("sim-constant");
  REQUIRE(cmd_simulate(small("constant", {"projection"}, c), out, err) == 0);
  const LoadedArchive lc = read_archive(c);
  CHECK(lc.trajectory.energies.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lc.manifest.at("config").at("datum").at("kind") == "constant");

  const fs::path g = scratch("sim-gc");
  REQUIRE(cmd_simulate(small("great-circle", {"projection"}, g), out, err) == 0);
  CHECK(read_json(g / "manifest.json").at("admissibility").at("passed") == true);

  // The echoed config reproduces the run bit for bit.
  const fs::path again = scratch("sim-again");
  ExperimentConfig echoed = ExperimentConfig::from_json(read_json(g / "manifest.json").at("config"));
  echoed.out = again.string();
  REQUIRE(cmd_simulate(echoed, out, err) == 0);
  const LoadedArchive a1 = read_archive(g), a2 = read_archive(again);
  for (std::size_t i = 0; i < a1.trajectory.snapshots.size(); ++i)
    CHECK((a1.trajectory.snapshots[i]->array() == a2.trajectory.snapshots[i]->array()).all());

  const fs::path bad = scratch("sim-bad");
  ExperimentConfig cfg = small("great-circle", {"projection"}, bad);
  cfg.dt = 1.0;
  CHECK(cmd_simulate(cfg, out, err) == 2);
  CHECK_FALSE(fs::exists(bad));
  CHECK_FALSE(fs::exists(bad.string() + ".partial"));

  cfg = small("great-circle", {"projection", "penalized"}, bad);
  CHECK(cmd_simulate(cfg, out, err) == 2);
  cfg = small("sphere", {"projection"}, bad);
  CHECK(cmd_simulate(cfg, out, err) == 2);
  cfg = small("custom-file", {"projection"}, bad);
  cfg.datum.path = "/nonexistent/u.bin";
  CHECK(cmd_simulate(cfg, out, err) == 4);
}

TEST_CASE("custom-file data") {
  const auto mesh = BallMesh::build(12);
  const fs::path dir = scratch("custom");
  fs::create_directories(dir);
  write_field(dir / "a.bin", equator_map(mesh).values());
  ExperimentConfig cfg = small("custom-file", {"projection"}, dir / "run");
  cfg.datum.path = "a.bin";
  cfg.base_dir = dir.string();
  std::ostringstream out, err;
  REQUIRE(cmd_simulate(cfg, out, err) == 0);
  CHECK((read_archive(dir / "run").trajectory.initial().array() == equator_map(mesh).values().array()).all());
}

TEST_CASE("ensemble") {
  std::ostringstream out, err;
  const fs::path h = scratch("ens-harmonic");
  REQUIRE(cmd_ensemble(small("great-circle", {"constant", "projection"}, h), out, err) == 0);
  json man = read_json(h / "manifest.json");
  CHECK(man.at("members").size() == 2);
  CHECK(man.at("rejected").empty());
  CHECK(man.at("members")[0].at("functionals").size() == 124);
  for (const auto& m : man.at("members")) CHECK(fs::exists(h / m.at("archive").get<std::string>() / "manifest.json"));

  const fs::path n = scratch("ens-rough");
  ExperimentConfig cfg = small("random-smooth", {"constant", "projection"}, n);
  cfg.resolution = 24;
  REQUIRE(cmd_ensemble(cfg, out, err) == 0);
  man = read_json(n / "manifest.json");
  CHECK(man.at("members").size() == 1);
  CHECK(man.at("members")[0].at("scheme") == "projection");
  REQUIRE(man.at("rejected").size() == 1);
  CHECK(man.at("rejected")[0].at("scheme") == "constant");
  CHECK(man.at("rejected")[0].at("reason").get<std::string>().find("not-weakly-harmonic") != std::string::npos);

  const fs::path s = scratch("ens-single");
  REQUIRE(cmd_ensemble(small("equator", {"penalized"}, s), out, err) == 0);
  CHECK(read_json(s / "manifest.json").at("members").size() == 1);
}

TEST_CASE("select with two enumerations") {
  std::ostringstream out, err;
  const fs::path dir = scratch("select");
  ExperimentConfig cfg = small("equator", {"constant", "projection"}, dir);
  cfg.horizon = 10.0;
  cfg.stride = 64;
  cfg.rates = {2.0};
  cfg.enumerations = {"aligned", "anti-aligned"};
  REQUIRE(cmd_select(cfg, out, err) == 0);
  const json man = read_json(dir / "manifest.json");
  const json& tr = man.at("transcript");
  CHECK(tr.at("distinct") == true);
  CHECK(tr.at("selections")[0].at("selected_scheme") == "constant");
  CHECK(tr.at("selections")[1].at("selected_scheme") == "projection");
  const json& round = tr.at("selections")[0].at("rounds")[0];
  CHECK(round.at("functional") == "I[2,+aligned]");
  CHECK(round.at("survivors") == json::array({0}));
  CHECK(man.at("trajectory").at("scheme") == "constant");

  cfg.horizon = 1.0;
  CHECK(cmd_select(cfg, out, err) == 2);
  cfg = small("random-smooth", {"constant"}, scratch("select-empty"));
  cfg.resolution = 24;
  cfg.min_discount_horizon = 0;
  CHECK(cmd_select(cfg, out, err) == 3);
}

TEST_CASE("verify") {
  std::ostringstream out, err;
  const fs::path c = scratch("ver-constant");
  REQUIRE(cmd_simulate(small("constant", {"constant"}, c), out, err) == 0);
  const json rc = verify_archive(read_archive(c), {});
  CHECK(rc.at("passed") == true);
  for (const auto& [name, check] : rc.at("checks").items()) {
    CHECK(check.at("passed") == true);
    if (check.contains("worst_residual")) CHECK(check.at("worst_residual").get<double>() == 0.0);
  }

  const fs::path p = scratch("ver-projection");
  ExperimentConfig cfg = small("random-smooth", {"projection"}, p);
  REQUIRE(cmd_simulate(cfg, out, err) == 0);
  const json rp = verify_archive(read_archive(p), {"energy", "semigroup"});
  CHECK(rp.at("checks").at("energy").at("passed") == true);
  CHECK(rp.at("checks").at("semigroup").at("worst_residual") == 0.0);
  CHECK(rp.at("checks").size() == 2);
  CHECK(cmd_verify(p.string(), {}, (p.parent_path() / "report.json").string(), out, err) == 0);
  CHECK(read_json(p.parent_path() / "report.json").at("passed") == true);

  // Break one node's norm in a stored snapshot.
  const fs::path file = p / "snapshots" / "step_00000002.bin";
  const auto mesh = BallMesh::build(12);
  VectorField u = read_field(file, *mesh);
  u.row(mesh->interior()[4]) *= 1.5;
  write_field(file, u);
  const json broken = verify_archive(read_archive(p), {"norm", "trace"});
  CHECK(broken.at("checks").at("norm").at("passed") == false);
  CHECK(broken.at("checks").at("trace").at("passed") == true);
  CHECK(cmd_verify(p.string(), {"norm"}, "", out, err) == 3);

  fs::resize_file(file, 10);
  CHECK(cmd_verify(p.string(), {}, "", out, err) == 4);
  CHECK(cmd_verify(c.string(), {"bogus"}, "", out, err) == 2);
}

TEST_CASE("command-line exit codes") {
  const fs::path dir = scratch("cli");
  CHECK(run_cli("simulate --n 12 --horizon 0.05 --scheme projection --out " + (dir / "ok").string()) == 0);
  CHECK(fs::exists(dir / "ok" / "manifest.json"));
  CHECK(run_cli("verify " + (dir / "ok").string() + " --check norm --check energy") == 0);
  CHECK(run_cli("simulate --n 7 --out " + (dir / "odd").string()) == 2);
  CHECK(run_cli("simulate --n 12 --dt 1 --out " + (dir / "dt").string()) == 2);
  CHECK_FALSE(fs::exists(dir / "dt"));
  CHECK(run_cli("simulate --frobnicate") == 2);
  CHECK(run_cli("simulate --config /nonexistent.json --out x") == 4);
  CHECK(run_cli("verify " + (dir / "nothing").string()) == 4);
  CHECK(run_cli("ensemble --n 12 --horizon 0.05 --scheme constant --scheme projection --out " + (dir / "ens").string()) == 0);
  CHECK(run_cli("select --n 12 --horizon 20 --scheme constant --scheme projection --enumeration aligned "
                "--enumeration anti-aligned --out " + (dir / "sel").string()) == 0);
  CHECK(run_cli("select --n 12 --horizon 1 --scheme projection --out " + (dir / "short").string()) == 2);
  ::setenv("HFSS_THREADS", "1", 1);
  CHECK(run_cli("ensemble --n 12 --horizon 0.05 --scheme projection --scheme penalized --out " + (dir / "one").string()) == 0);
  ::unsetenv("HFSS_THREADS");
}
