#include "hfss/archive.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace hfss {

namespace {

std::uint64_t to_little(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t y = 0;
    for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return y;
  }
  return x;
}

std::string snapshot_name(long m) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%08ld.bin", m);
  return buf;
}

std::string ledger_csv(const Trajectory& traj) {
  std::ostringstream out;
  out.precision(17);
  out << "m,t,E_m,d_m\n";
  for (long m = 0; m <= traj.steps; ++m) {
    out << m << ',' << traj.time(m) << ',' << traj.energies(m) << ',';
    if (m < traj.steps) out << traj.dissipation(m);
    out << '\n';
  }
  return out.str();
}

[[noreturn]] void corrupt(const fs::path& where, const std::string& what) {
  throw Error(ErrorKind::CorruptArchive, where.string() + ": " + what);
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& file, const std::string& body) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot create " + file.string());
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + file.string());
}

void move_into_place(const fs::path& staged, const fs::path& target) {
  std::error_code ec;
  if (fs::exists(target)) fs::remove_all(target, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot replace " + target.string() + ": " + ec.message());
  fs::rename(staged, target, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot rename into " + target.string() + ": " + ec.message());
}

}  // namespace

std::string mesh_hash_hex(const BallMesh& mesh) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, mesh.hash());
  return buf;
}

void write_field(const fs::path& file, const VectorField& u) {
  std::string bytes(static_cast<std::size_t>(u.size()) * 8, '\0');
  std::size_t at = 0;
  for (Index i = 0; i < u.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(u(i, c)));
      std::memcpy(bytes.data() + at, &bits, 8);
      at += 8;
    }
  }
  write_bytes(file, bytes);
}

VectorField read_field(const fs::path& file, const BallMesh& mesh) {
  const std::string bytes = read_text(file);
  const std::size_t expected = static_cast<std::size_t>(mesh.node_count()) * 3 * 8;
  if (bytes.size() != expected) {
    corrupt(file, "holds " + std::to_string(bytes.size()) + " bytes, mesh needs " +
                      std::to_string(expected));
  }
  VectorField u(mesh.node_count(), 3);
  std::size_t at = 0;
  for (Index i = 0; i < u.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      std::uint64_t bits;
      std::memcpy(&bits, bytes.data() + at, 8);
      u(i, c) = std::bit_cast<double>(to_little(bits));
      at += 8;
    }
  }
  return u;
}

json to_json(const SchemeConfig& cfg) {
  return {{"scheme", to_string(cfg.scheme)}, {"dt", cfg.dt},
          {"horizon", cfg.horizon},          {"epsilon", cfg.epsilon},
          {"damping", cfg.damping},          {"stride", cfg.stride},
          {"dense_prefix", cfg.dense_prefix}, {"phase", cfg.phase},
          {"gate_threshold", cfg.gate_threshold}};
}

SchemeConfig scheme_config_from_json(const json& j) {
  SchemeConfig cfg;
  cfg.scheme = scheme_from_string(j.at("scheme").get<std::string>());
  cfg.dt = j.at("dt").get<double>();
  cfg.horizon = j.at("horizon").get<double>();
  cfg.epsilon = j.value("epsilon", 0.0);
  cfg.damping = j.value("damping", 0.0);
  cfg.stride = j.value("stride", 1L);
  cfg.dense_prefix = j.value("dense_prefix", 0L);
  cfg.phase = j.value("phase", 0L);
  cfg.gate_threshold = j.value("gate_threshold", 0.0);
  return cfg;
}

json to_json(const AdmissibilityReport& r) {
  return {{"passed", r.passed()},
          {"unit_norm", {{"passed", r.unit_norm}, {"worst_defect", r.worst_norm_defect}}},
          {"initial_and_trace",
           {{"passed", r.initial_and_trace},
            {"initial_deviation", r.initial_deviation},
            {"worst_trace_deviation", r.worst_trace_deviation}}},
          {"regularity",
           {{"passed", r.regularity},
            {"max_energy", r.max_energy},
            {"continuity_ratio", r.continuity_ratio}}},
          {"weak_form",
           {{"passed", r.weak_form},
            {"defect", r.weak_form_defect},
            {"threshold", r.weak_form_threshold}}},
          {"energy_inequality",
           {{"passed", r.energy_inequality},
            {"worst_residual", r.worst_energy_residual},
            {"tolerance", r.energy_tolerance}}},
          {"diagnostic", r.diagnostic}};
}

void write_text_atomically(const fs::path& file, const std::string& body) {
  const fs::path tmp = file.string() + ".partial";
  write_bytes(tmp, body);
  move_into_place(tmp, file);
}

void write_archive(const fs::path& dir, const Trajectory& traj, const SchemeConfig& cfg,
                   const json& extra) {
  const fs::path staged = dir.string() + ".partial";
  std::error_code ec;
  fs::remove_all(staged, ec);
  try {
    fs::create_directories(staged / "snapshots");
    json files = json::array();
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
      const std::string name = snapshot_name(traj.stored_steps[i]);
      write_field(staged / "snapshots" / name, *traj.snapshots[i]);
      files.push_back("snapshots/" + name);
    }
    write_bytes(staged / "ledger.csv", ledger_csv(traj));

    json manifest = {{"format", kArchiveFormat}, {"version", kArchiveVersion}};
    manifest["mesh"] = {{"resolution", traj.mesh->resolution()},
                        {"node_count", traj.mesh->node_count()},
                        {"interior_count", traj.mesh->interior_count()},
                        {"hash", mesh_hash_hex(*traj.mesh)},
                        {"snapshot_bytes", traj.mesh->node_count() * 3 * 8}};
    manifest["trajectory"] = {{"scheme", traj.scheme},
                              {"equation", traj.equation},
                              {"parameters", traj.parameters},
                              {"dt", traj.dt},
                              {"steps", traj.steps},
                              {"dense_prefix", traj.dense_prefix},
                              {"stride", traj.stride},
                              {"phase", traj.phase},
                              {"energy_tolerance", traj.energy_tolerance},
                              {"stored_steps", traj.stored_steps},
                              {"snapshots", files},
                              {"ledger", "ledger.csv"}};
    manifest["scheme_config"] = to_json(cfg);
    manifest.update(extra);
    write_bytes(staged / "manifest.json", manifest.dump(2) + "\n");
    move_into_place(staged, dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staged, ec);
    throw Error(ErrorKind::Io, e.what());
  } catch (...) {
    fs::remove_all(staged, ec);
    throw;
  }
}

LoadedArchive read_archive(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "no archive directory " + dir.string());
  LoadedArchive out;
  try {
    out.manifest = json::parse(read_text(dir / "manifest.json"));
  } catch (const json::exception& e) {
    corrupt(dir / "manifest.json", e.what());
  }
  const json& man = out.manifest;
  try {
    if (man.at("format") != kArchiveFormat) corrupt(dir, "not a trajectory archive");
    const json& jm = man.at("mesh");
    const MeshPtr mesh = BallMesh::build(jm.at("resolution").get<int>());
    if (jm.at("hash").get<std::string>() != mesh_hash_hex(*mesh) ||
        jm.at("node_count").get<Index>() != mesh->node_count()) {
      corrupt(dir, "mesh hash does not match resolution " + std::to_string(mesh->resolution()));
    }
    out.config = scheme_config_from_json(man.at("scheme_config"));

    const json& jt = man.at("trajectory");
    Trajectory& t = out.trajectory;
    t.mesh = mesh;
    t.scheme = jt.at("scheme").get<std::string>();
    t.equation = jt.at("equation").get<std::string>();
    t.parameters = jt.at("parameters").get<std::map<std::string, double>>();
    t.dt = jt.at("dt").get<double>();
    t.steps = jt.at("steps").get<long>();
    t.dense_prefix = jt.at("dense_prefix").get<long>();
    t.stride = jt.at("stride").get<long>();
    t.phase = jt.value("phase", 0L);
    t.energy_tolerance = jt.at("energy_tolerance").get<double>();
    t.stored_steps = jt.at("stored_steps").get<std::vector<long>>();
    const auto files = jt.at("snapshots").get<std::vector<std::string>>();
    if (files.size() != t.stored_steps.size() || files.empty())
      corrupt(dir, "snapshot list and stored steps disagree");
    for (const auto& f : files) {
      if (!fs::exists(dir / f)) corrupt(dir / f, "missing snapshot");
      t.snapshots.push_back(std::make_shared<const VectorField>(read_field(dir / f, *mesh)));
    }

    std::istringstream ledger(read_text(dir / jt.at("ledger").get<std::string>()));
    std::string line;
    std::getline(ledger, line);
    if (line != "m,t,E_m,d_m") corrupt(dir / "ledger.csv", "unexpected header '" + line + "'");
    t.energies.resize(t.steps + 1);
    t.dissipation.resize(t.steps);
    long rows = 0;
    while (std::getline(ledger, line)) {
      if (line.empty()) continue;
      if (rows > t.steps) corrupt(dir / "ledger.csv", "more rows than steps");
      std::istringstream row(line);
      std::string cell[4];
      for (auto& c : cell) std::getline(row, c, ',');
      if (std::stol(cell[0]) != rows) corrupt(dir / "ledger.csv", "row " + std::to_string(rows) + " out of order");
      t.energies(rows) = std::stod(cell[2]);
      if (rows < t.steps) t.dissipation(rows) = std::stod(cell[3]);
      ++rows;
    }
    if (rows != t.steps + 1) {
      corrupt(dir / "ledger.csv", std::to_string(rows) + " rows for " + std::to_string(t.steps) + " steps");
    }
  } catch (const json::exception& e) {
    corrupt(dir / "manifest.json", e.what());
  } catch (const std::invalid_argument& e) {
    corrupt(dir / "ledger.csv", "unparsable number");
  } catch (const std::out_of_range& e) {
    corrupt(dir / "ledger.csv", "number out of range");
  }
  return out;
}

}  // namespace hfss
