#pragma once

#include "piperecon/error.hpp"

#include "piperecon/eval.hpp"
#include "piperecon/recon.hpp"
#include "piperecon/refine.hpp"
#include "piperecon/skeleton.hpp"
#include "piperecon/smooth.hpp"
#include "piperecon/types.hpp"

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace piperecon::pipeline {

enum class Stage { pure, base, smooth, elong, elong_smooth };

/// "pure", "base", "+smooth", "+elong", "+elong+smooth"
std::string stage_label(Stage stage);
/// File-name friendly form: "pure", "base", "smooth", "elong", "elong_smooth".
std::string stage_key(Stage stage);
Stage parse_stage(const std::string& label);
bool stage_elongates(Stage stage);
bool stage_smooths(Stage stage);
const std::vector<Stage>& all_stages();

struct PipelineConfig {
  skeleton::ContractionParams contraction{};
  skeleton::GraphParams graph{};
  refine::ElongationParams elongation{};
  refine::RollingSphereParams rolling_sphere{};
  smooth::SmoothingParams smoothing{};
  eval::EvalParams eval{};  // also carries the hull parameters

  std::vector<Stage> stages{Stage::base};
  bool enable_rdp = false;
  double rdp_factor = 0.6;
  /// The cloud is voxel-thinned to at most this many points before contraction.
  std::size_t max_contraction_points = 3000;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

/// Fills a config from JSON; absent keys keep their defaults, unknown keys are errors.
PipelineConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const PipelineConfig& config);

struct StageResult {
  Stage stage = Stage::base;
  PipeModel model;
  /// Spline point count before simplification (equals the final count when RDP is off).
  std::size_t n_before_rdp = 0;
  std::vector<std::string> warnings;
  /// Set when this stage failed; the model is then empty. Other stages are unaffected.
  std::optional<PipeError> error;
};

/// Receives intermediate polylines and point sets as they are produced.
using DumpSink = std::function<void(const std::string& name, std::span<const Point3> points)>;

/// Shared-prefix reconstruction: the skeleton and longest path are computed
/// once; every requested stage branches from there. Stage randomness is
/// seeded from config.seed and the stage, so a stage's result does not depend
/// on which other stages run. Errors are rethrown with the failing step named;
/// a failure confined to one stage's branch (elongation, smoothing, RDP) is
/// recorded in that stage's result instead.
std::vector<StageResult> reconstruct(std::span<const Point3> cloud, const PipelineConfig& config,
                                     const DumpSink& dump = {});

}  // namespace piperecon::pipeline
