#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sbmlab/grid_function.hpp"

namespace sbmlab::io {

inline constexpr const char* kToolVersion = "sbmlab 1.0.0";

/// Hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

struct ArtifactEntry {
    std::string path;  ///< relative to the run directory
    std::string sha256;
    std::size_t size = 0;

    bool operator==(const ArtifactEntry&) const = default;
};

struct RunManifest {
    std::string run_id;
    nlohmann::json config = nlohmann::json::object();
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::vector<ArtifactEntry> artifacts;
    /// Fields this version does not know about, kept for rewriting.
    nlohmann::json extra = nlohmann::json::object();

    std::vector<std::string> artifact_paths() const;
    bool operator==(const RunManifest&) const = default;
};

/// Content hash of (canonical config, seed, tool version): the first 16 hex
/// digits of a SHA-256. Keys are sorted before hashing, so field order in the
/// config does not matter.
std::string compute_run_id(const nlohmann::json& config, std::uint64_t seed,
                           const std::string& tool_version = kToolVersion);

/// Artifact name to file content.
using Artifacts = std::map<std::string, std::string>;

/// Canonical manifest.json text (sorted keys, two-space indent, trailing LF).
std::string manifest_text(const RunManifest& m);

/// Writes <root>/runs/<run_id>/ with manifest.json and the artifacts. The
/// run id and artifact index in `m` are recomputed. The directory is built
/// under a temporary name and renamed into place while holding an exclusive
/// lock on <root>/runs/<run_id>.lock. Writing an identical run again is a
/// no-op. Throws CollisionError when the run exists with different content,
/// IoError on filesystem failures.
std::filesystem::path write_run(const std::filesystem::path& root, RunManifest& m, const Artifacts& artifacts);

/// Reads and validates a run directory (sizes and hashes of every artifact).
/// Throws CorruptManifest with the byte offset of the first problem.
std::pair<RunManifest, Artifacts> read_run(const std::filesystem::path& run_dir);

/// Parses manifest.json text. Throws CorruptManifest.
RunManifest parse_manifest(const std::string& text);

/// Grid CSV:
///   # sbmlab-grid v1 label=<label> x_min=<x> x_max=<x> n_points=<n> run_id=<id>
///   x,value
///   <x>,<value>   (one row per grid point, LF line endings)
std::string grid_csv(const GridFunction& f, const std::string& run_id);

/// Parses a grid CSV. Throws CorruptManifest with the byte offset of the
/// first malformed or missing line.
GridFunction parse_grid_csv(const std::string& text, std::string* run_id = nullptr);

/// Table CSV:
///   # sbmlab-table v1 label=<label> n_rows=<n> run_id=<id>
///   <col>,<col>,...
///   rows of numbers
std::string table_csv(const std::string& label, const std::vector<std::string>& columns,
                      const std::vector<std::vector<double>>& rows, const std::string& run_id);

struct Table {
    std::string label;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};
Table parse_table_csv(const std::string& text);

/// Pretty JSON text with sorted keys and a trailing LF.
std::string json_text(const nlohmann::json& j);

}  // namespace sbmlab::io
