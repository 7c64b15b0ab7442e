#pragma once

#include "piperecon/synth.hpp"
#include "piperecon/types.hpp"

#include "json.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace piperecon::io {

namespace fs = std::filesystem;

/// ASCII "x y z" per line. Blank lines and lines starting with '#' are skipped.
std::vector<Point3> read_xyz(const fs::path& path);
void write_xyz(const fs::path& path, std::span<const Point3> points);

/// Reads ascii or binary_little_endian PLY with float or double x, y, z.
std::vector<Point3> read_ply(const fs::path& path);
/// Writes binary_little_endian PLY with double x, y, z.
void write_ply(const fs::path& path, std::span<const Point3> points);

/// Dispatch on extension (.xyz / .ply).
std::vector<Point3> read_cloud(const fs::path& path);
void write_cloud(const fs::path& path, std::span<const Point3> points);

nlohmann::json read_json(const fs::path& path);
/// Two-space indent and a trailing newline.
void write_json(const fs::path& path, const nlohmann::json& doc);
void write_text(const fs::path& path, const std::string& text);

nlohmann::json polyline_to_json(std::span<const Point3> points);
std::vector<Point3> points_from_json(const nlohmann::json& doc, const std::string& field);

/// {spline, tangents, radius, length}
nlohmann::json model_to_json(const PipeModel& model);
PipeModel model_from_json(const nlohmann::json& doc);

/// {id, spline, tangents, radius, length}
nlohmann::json ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& doc);

/// {pipes: [{id, control_points, tangents, radius, bend?, occluder?}],
///  stations: [{position, yaw_step_deg?, resolution?: [w, h], vfov_deg?}]}
synth::Scene scene_from_json(const nlohmann::json& doc);
nlohmann::json scene_to_json(const synth::Scene& scene);

struct ManifestEntry {
  std::string id;
  std::string cloud;         // relative to the manifest directory
  std::string ground_truth;  // relative to the manifest directory
  bool bend = false;
  bool empty = false;
  std::size_t points = 0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::size_t rays_cast = 0;
  std::size_t hits = 0;
};

nlohmann::json manifest_to_json(const Manifest& manifest);
Manifest manifest_from_json(const nlohmann::json& doc);

/// ASCII OBJ with v and f records, 1-based indices.
void write_obj(const fs::path& path, const TriMesh& mesh);

}  // namespace piperecon::io
