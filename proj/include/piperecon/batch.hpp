#pragma once

#include "piperecon/error.hpp"
#include "piperecon/eval.hpp"
#include "piperecon/io.hpp"
#include "piperecon/pipeline.hpp"
#include "piperecon/synth.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace piperecon::batch {

namespace fs = std::filesystem;

/// Runs fn(0..n-1) on up to `jobs` threads. The first exception is rethrown
/// after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct GenerateOptions {
  synth::ScanOptions scan{};
  std::string cloud_format = "xyz";  // xyz | ply
  double ground_truth_spacing = 0.02;
};

/// Scans the scene and writes clouds/<id>.<fmt>, ground_truth/<id>.json,
/// scene.json and manifest.json under out_dir.
io::Manifest generate(const synth::Scene& scene, const fs::path& out_dir,
                      const GenerateOptions& options = {});

struct ReconstructReport {
  std::string id;
  bool ok = false;
  ErrorKind error_kind = ErrorKind::invalid_input;
  std::string error;
  std::vector<std::string> warnings;
};

/// File holding the model of one pipe at one stage.
fs::path model_path(const fs::path& models_dir, const std::string& id, pipeline::Stage stage);

/// Model JSON: the PipeModel fields plus id, stage and n_before_rdp.
nlohmann::json stage_model_json(const std::string& id, const pipeline::StageResult& result);

/// Reconstructs one cloud and writes <id>.<stage>.json and .obj per stage.
/// With `dump`, intermediate point sets go to <id>.dump/<name>.xyz as they
/// are produced, so a failing run still leaves the earlier ones.
ReconstructReport reconstruct_cloud(const std::string& id, std::span<const Point3> cloud,
                                    const pipeline::PipelineConfig& config,
                                    const fs::path& out_dir, bool dump);

/// Every non-empty manifest entry, in parallel over config.jobs workers.
/// Failures are reported per entry; the batch always completes.
std::vector<ReconstructReport> reconstruct_manifest(const io::Manifest& manifest,
                                                    const fs::path& manifest_dir,
                                                    const pipeline::PipelineConfig& config,
                                                    const fs::path& out_dir, bool dump);

struct MetricsRow {
  std::string id;
  pipeline::Stage stage = pipeline::Stage::base;
  bool bend = false;
  bool ok = false;
  std::string status;  // "ok" or a failure reason
  eval::MetricsReport metrics;
};

std::vector<MetricsRow> evaluate_manifest(const io::Manifest& manifest, const fs::path& manifest_dir,
                                          const fs::path& models_dir,
                                          const pipeline::PipelineConfig& config);

struct Aggregate {
  std::string group;  // overall | bends | non_bends
  pipeline::Stage stage = pipeline::Stage::base;
  std::size_t count = 0;
  double iou = 0.0, radius_ratio = 0.0, length_ratio = 0.0, point_ratio = 0.0;
};

/// Means over successful rows, per stage and group.
std::vector<Aggregate> aggregate(const std::vector<MetricsRow>& rows,
                                 const std::vector<pipeline::Stage>& stages);

/// Header id,stage,iou,r_ratio,l_ratio,n_ratio,status; per-pipe rows then
/// aggregate rows whose id is the group name.
std::string metrics_csv(const std::vector<MetricsRow>& rows, const std::vector<pipeline::Stage>& stages);

}  // namespace piperecon::batch
