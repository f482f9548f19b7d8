#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "hfss/flow.hpp"
#include "hfss/selection.hpp"

namespace hfss {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr const char* kArchiveFormat = "hfss-trajectory";
inline constexpr int kArchiveVersion = 1;

std::string mesh_hash_hex(const BallMesh& mesh);

// Flat little-endian f64, node-major in mesh order. Size is checked on read.
void write_field(const fs::path& file, const VectorField& u);
VectorField read_field(const fs::path& file, const BallMesh& mesh);

json to_json(const SchemeConfig& cfg);
SchemeConfig scheme_config_from_json(const json& j);
json to_json(const AdmissibilityReport& r);

/// Writes manifest.json, ledger.csv and snapshots/step_<m>.bin under `dir`.
/// The files are staged in `<dir>.partial` and renamed into place, so a failed
/// write leaves no archive behind. `extra` is merged into the manifest.
void write_archive(const fs::path& dir, const Trajectory& traj, const SchemeConfig& cfg,
                   const json& extra = json::object());

struct LoadedArchive {
  json manifest;
  SchemeConfig config;
  Trajectory trajectory;
};

/// Rebuilds the mesh from the manifest and checks its hash, every snapshot's
/// byte length and the ledger's row count. Throws CorruptArchive or Io.
LoadedArchive read_archive(const fs::path& dir);

/// Writes `body` to `file` through a temporary sibling and a rename.
void write_text_atomically(const fs::path& file, const std::string& body);

}  // namespace hfss
