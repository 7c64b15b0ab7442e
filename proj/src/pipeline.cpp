#include "piperecon/pipeline.hpp"

#include "piperecon/error.hpp"

#include <optional>
#include <random>
#include <set>
#include <type_traits>

namespace piperecon::pipeline {

using nlohmann::json;

std::string stage_label(Stage stage) {
  switch (stage) {
    case Stage::pure: return "pure";
    case Stage::base: return "base";
    case Stage::smooth: return "+smooth";
    case Stage::elong: return "+elong";
    case Stage::elong_smooth: return "+elong+smooth";
  }
  return "base";
}

std::string stage_key(Stage stage) {
  switch (stage) {
    case Stage::pure: return "pure";
    case Stage::base: return "base";
    case Stage::smooth: return "smooth";
    case Stage::elong: return "elong";
    case Stage::elong_smooth: return "elong_smooth";
  }
  return "base";
}

Stage parse_stage(const std::string& label) {
  for (Stage s : all_stages()) {
    if (stage_label(s) == label) return s;
  }
  if (label == "smooth") return Stage::smooth;
  if (label == "elong") return Stage::elong;
  if (label == "elong+smooth") return Stage::elong_smooth;
  throw invalid_input("unknown stage '" + label + "' (pure, base, +smooth, +elong, +elong+smooth)");
}

bool stage_elongates(Stage stage) { return stage == Stage::elong || stage == Stage::elong_smooth; }
bool stage_smooths(Stage stage) { return stage == Stage::smooth || stage == Stage::elong_smooth; }

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages{Stage::pure, Stage::base, Stage::smooth, Stage::elong,
                                         Stage::elong_smooth};
  return stages;
}

void PipelineConfig::validate() const {
  contraction.validate();
  rolling_sphere.validate();
  smoothing.validate();
  eval.hull.validate();
  if (!(graph.sample_radius > 0.0)) throw invalid_input("graph.sample_radius must be positive");
  if (!(graph.bridge_distance >= 0.0)) throw invalid_input("graph.bridge_distance must be non-negative");
  if (!(elongation.search_distance > 0.0) || !(elongation.spacing > 0.0) ||
      !(elongation.tube_factor > 0.0)) {
    throw invalid_input("elongation parameters must be positive");
  }
  if (!(eval.voxel_size > 0.0)) throw invalid_input("eval.voxel_size must be positive");
  if (!(eval.margin_voxels >= 0.0)) throw invalid_input("eval.margin_voxels must be non-negative");
  if (!(rdp_factor > 0.0)) throw invalid_input("rdp_factor must be positive");
  if (max_contraction_points < 10) throw invalid_input("max_contraction_points must be at least 10");
  if (stages.empty()) throw invalid_input("no stages selected");
  if (jobs < 1) throw invalid_input("jobs must be at least 1");
}

namespace {

// Reads typed keys from one JSON object and rejects keys nobody asked for.
class Block {
 public:
  Block(const json& doc, std::string name) : doc_(doc), name_(std::move(name)) {
    if (!doc_.is_object()) throw invalid_input(name_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end()) return;
    const std::string where = name_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw invalid_input(where + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw invalid_input(where + ": expected an integer");
      if (std::is_unsigned_v<T> && it->is_number_integer() && !it->is_number_unsigned()) {
        throw invalid_input(where + ": expected a non-negative integer");
      }
    } else {
      if (!it->is_number()) throw invalid_input(where + ": expected a number");
    }
    out = it->template get<T>();
  }

  /// Sub-object, or nullptr when absent.
  const json* child(const char* key) {
    seen_.insert(key);
    auto it = doc_.find(key);
    return it == doc_.end() ? nullptr : &*it;
  }

  std::string path(const char* key) const { return name_ + "." + key; }

  void finish() const {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) throw invalid_input(name_ + "." + it.key() + ": unknown key");
    }
  }

 private:
  const json& doc_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig config_from_json(const json& doc) {
  PipelineConfig c;
  Block top(doc, "config");
  top.get("enable_rdp", c.enable_rdp);
  top.get("rdp_factor", c.rdp_factor);
  top.get("max_contraction_points", c.max_contraction_points);
  top.get("seed", c.seed);
  top.get("jobs", c.jobs);

  if (const json* s = top.child("stages")) {
    if (!s->is_array()) throw invalid_input("config.stages: expected an array of stage labels");
    c.stages.clear();
    for (const auto& v : *s) {
      if (!v.is_string()) throw invalid_input("config.stages: expected stage labels");
      c.stages.push_back(parse_stage(v.get<std::string>()));
    }
  }
  // Single-stage toggles, used when no explicit stage list is given.
  bool elong = false, smoothing = false, toggled = doc.contains("enable_elongation") || doc.contains("enable_smoothing");
  top.get("enable_elongation", elong);
  top.get("enable_smoothing", smoothing);
  if (toggled && !doc.contains("stages")) {
    c.stages = {elong ? (smoothing ? Stage::elong_smooth : Stage::elong)
                      : (smoothing ? Stage::smooth : Stage::base)};
  }

  if (const json* j = top.child("contraction")) {
    Block b(*j, top.path("contraction"));
    auto& p = c.contraction;
    b.get("init_contraction_weight", p.init_contraction_weight);
    b.get("init_attraction_weight", p.init_attraction_weight);
    b.get("contraction_amplification", p.contraction_amplification);
    b.get("max_iterations", p.max_iterations);
    b.get("neighborhood_size", p.neighborhood_size);
    b.get("convergence_ratio", p.convergence_ratio);
    b.get("onset_ratio", p.onset_ratio);
    b.get("max_contraction_weight", p.max_contraction_weight);
    b.get("max_attraction_weight", p.max_attraction_weight);
    b.get("max_cotangent", p.max_cotangent);
    b.finish();
  }
  if (const json* j = top.child("graph")) {
    Block b(*j, top.path("graph"));
    b.get("sample_radius", c.graph.sample_radius);
    b.get("bridge_distance", c.graph.bridge_distance);
    b.finish();
  }
  if (const json* j = top.child("elongation")) {
    Block b(*j, top.path("elongation"));
    b.get("search_distance", c.elongation.search_distance);
    b.get("spacing", c.elongation.spacing);
    b.get("tube_factor", c.elongation.tube_factor);
    b.finish();
  }
  if (const json* j = top.child("rolling_sphere")) {
    Block b(*j, top.path("rolling_sphere"));
    auto& p = c.rolling_sphere;
    b.get("min_inlier_points", p.min_inlier_points);
    b.get("max_growth_iterations", p.max_growth_iterations);
    b.get("growth_factor", p.growth_factor);
    b.get("ransac_iterations", p.ransac_iterations);
    b.get("ransac_inlier_threshold", p.ransac_inlier_threshold);
    b.get("initial_radius", p.initial_radius);
    b.get("duplicate_tolerance", p.duplicate_tolerance);
    b.finish();
  }
  if (const json* j = top.child("smoothing")) {
    Block b(*j, top.path("smoothing"));
    auto& p = c.smoothing;
    b.get("weight", p.weight);
    b.get("voxel_size", p.voxel_size);
    b.get("max_outer_iterations", p.max_outer_iterations);
    b.get("step_size", p.step_size);
    b.get("convergence_delta", p.convergence_delta);
    b.get("point_spacing", p.point_spacing);
    b.get("band_voxels", p.band_voxels);
    b.finish();
  }
  if (const json* j = top.child("hull")) {
    Block b(*j, top.path("hull"));
    b.get("circumferential_segments", c.eval.hull.circumferential_segments);
    b.get("cap_ends", c.eval.hull.cap_ends);
    b.finish();
  }
  if (const json* j = top.child("eval")) {
    Block b(*j, top.path("eval"));
    b.get("voxel_size", c.eval.voxel_size);
    b.get("margin_voxels", c.eval.margin_voxels);
    b.finish();
  }
  top.finish();
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json stages = json::array();
  for (Stage s : c.stages) stages.push_back(stage_label(s));
  const auto& k = c.contraction;
  const auto& r = c.rolling_sphere;
  const auto& s = c.smoothing;
  return json{
      {"stages", stages},
      {"enable_rdp", c.enable_rdp},
      {"rdp_factor", c.rdp_factor},
      {"max_contraction_points", c.max_contraction_points},
      {"seed", c.seed},
      {"jobs", c.jobs},
      {"contraction",
       {{"init_contraction_weight", k.init_contraction_weight},
        {"init_attraction_weight", k.init_attraction_weight},
        {"contraction_amplification", k.contraction_amplification},
        {"max_iterations", k.max_iterations},
        {"neighborhood_size", k.neighborhood_size},
        {"convergence_ratio", k.convergence_ratio},
        {"onset_ratio", k.onset_ratio},
        {"max_contraction_weight", k.max_contraction_weight},
        {"max_attraction_weight", k.max_attraction_weight},
        {"max_cotangent", k.max_cotangent}}},
      {"graph", {{"sample_radius", c.graph.sample_radius}, {"bridge_distance", c.graph.bridge_distance}}},
      {"elongation",
       {{"search_distance", c.elongation.search_distance},
        {"spacing", c.elongation.spacing},
        {"tube_factor", c.elongation.tube_factor}}},
      {"rolling_sphere",
       {{"min_inlier_points", r.min_inlier_points},
        {"max_growth_iterations", r.max_growth_iterations},
        {"growth_factor", r.growth_factor},
        {"ransac_iterations", r.ransac_iterations},
        {"ransac_inlier_threshold", r.ransac_inlier_threshold},
        {"initial_radius", r.initial_radius},
        {"duplicate_tolerance", r.duplicate_tolerance}}},
      {"smoothing",
       {{"weight", s.weight},
        {"voxel_size", s.voxel_size},
        {"max_outer_iterations", s.max_outer_iterations},
        {"step_size", s.step_size},
        {"convergence_delta", s.convergence_delta},
        {"point_spacing", s.point_spacing},
        {"band_voxels", s.band_voxels}}},
      {"hull",
       {{"circumferential_segments", c.eval.hull.circumferential_segments},
        {"cap_ends", c.eval.hull.cap_ends}}},
      {"eval", {{"voxel_size", c.eval.voxel_size}, {"margin_voxels", c.eval.margin_voxels}}},
  };
}

namespace {

template <typename F>
auto step(const char* name, F&& f) {
  try {
    return f();
  } catch (const PipeError& e) {
    throw PipeError(e.kind(), std::string(name) + ": " + e.what());
  }
}

std::mt19937_64 stage_rng(std::uint64_t seed, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

struct Branch {
  Polyline skeleton;
  std::vector<double> radii;
};

}  // namespace

std::vector<StageResult> reconstruct(std::span<const Point3> cloud, const PipelineConfig& config,
                                     const DumpSink& dump) {
  config.validate();
  if (cloud.size() < 10) {
    throw PipeError(ErrorKind::infeasible,
                    "insufficient points (" + std::to_string(cloud.size()) + " < 10)");
  }
  for (const auto& p : cloud) {
    if (!is_finite(p)) throw invalid_input("cloud contains non-finite coordinates");
  }
  auto emit = [&](const std::string& name, std::span<const Point3> pts) {
    if (dump) dump(name, pts);
  };

  const std::vector<Point3> thinned = skeleton::downsample(cloud, config.max_contraction_points);
  const skeleton::ContractedCloud contracted =
      step("contraction", [&] { return skeleton::contract(thinned, config.contraction); });
  emit("contracted", contracted.points);

  const SkeletonGraph graph = step("skeleton graph", [&] {
    return skeleton::collapse_edges(skeleton::build_skeleton_graph(contracted.points, config.graph));
  });
  emit("graph_nodes", graph.nodes());
  const Polyline path = step("longest path", [&] { return refine::longest_path(graph); });
  emit("longest_path", path.points());

  bool need_plain = false, need_elong = false;
  for (Stage s : config.stages) {
    (stage_elongates(s) ? need_elong : need_plain) = true;
  }

  // The radius of the plain branch also serves the pure stage and the elongation tube.
  auto rs_plain = stage_rng(config.seed, 1);
  const refine::RecenterResult plain = step("rolling sphere", [&] {
    return refine::rolling_sphere_recenter(path, cloud, config.rolling_sphere, rs_plain);
  });
  const double plain_radius = step("rolling sphere", [&] { return refine::mean_radius(plain.radii); });
  if (need_plain) emit("recentered", plain.skeleton.points());

  std::optional<Branch> elongated;
  std::optional<PipeError> elong_error;
  if (need_elong) {
    try {
      const Polyline extended = step("elongation", [&] {
        return refine::elongate(path, cloud, plain_radius, config.elongation);
      });
      emit("elongated", extended.points());
      auto rs_elong = stage_rng(config.seed, 2);
      refine::RecenterResult rec = step("rolling sphere (elongated)", [&] {
        return refine::rolling_sphere_recenter(extended, cloud, config.rolling_sphere, rs_elong);
      });
      emit("elongated_recentered", rec.skeleton.points());
      elongated = Branch{std::move(rec.skeleton), std::move(rec.radii)};
    } catch (const PipeError& e) {
      elong_error = e;
    }
  }

  std::vector<StageResult> results;
  for (Stage stage : config.stages) {
    StageResult res{stage, PipeModel{path, {}, 0.0, 0.0}, 0, {}, std::nullopt};
    try {
      Polyline line = path;
      double radius = plain_radius;
      if (stage == Stage::pure) {
        line = path;
      } else if (stage_elongates(stage)) {
        if (elong_error) throw *elong_error;
        line = elongated->skeleton;
        radius = step("rolling sphere (elongated)", [&] { return refine::mean_radius(elongated->radii); });
      } else {
        line = plain.skeleton;
      }
      if (stage_smooths(stage)) {
        smooth::SmoothResult sm = step("smoothing", [&] {
          if (line.size() < 3) {
            throw PipeError(ErrorKind::infeasible,
                            "recentered skeleton has " + std::to_string(line.size()) + " points, need 3");
          }
          return smooth::smooth_curve(line, config.smoothing);
        });
        if (!sm.warning.empty()) res.warnings.push_back(sm.warning);
        line = std::move(sm.curve);
        emit("smoothed_" + stage_key(stage), line.points());
      }
      res.n_before_rdp = line.size();
      if (config.enable_rdp) {
        line = step("rdp", [&] { return smooth::rdp_simplify(line, radius, config.rdp_factor); });
        emit("rdp_" + stage_key(stage), line.points());
      }
      res.model = step("assemble", [&] { return recon::model_with_radius(line, radius); });
    } catch (const PipeError& e) {
      res.error = e;
    }
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace piperecon::pipeline
