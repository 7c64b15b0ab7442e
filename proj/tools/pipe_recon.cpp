// pipe_recon: generate synthetic scans, reconstruct pipe models, evaluate them.

#include "piperecon/batch.hpp"
#include "piperecon/dataset.hpp"
#include "piperecon/io.hpp"
#include "piperecon/pipeline.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace piperecon;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitMismatch = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return kExitInput;
    case ErrorKind::infeasible:
    case ErrorKind::solver_failure: return kExitInfeasible;
    case ErrorKind::mismatch: return kExitMismatch;
  }
  return kExitInput;
}

struct CommonOptions {
  std::string config_path;
  std::string stages;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<double> voxel_size;
  bool dump = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool with_dump) {
  cmd->add_option("--config", o.config_path, "JSON pipeline configuration")->check(CLI::ExistingFile);
  cmd->add_option("--stages", o.stages,
                  "Comma-separated stages: pure, base, +smooth, +elong, +elong+smooth, or all");
  cmd->add_option("--seed", o.seed, "Seed for sampling and RANSAC");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--voxel-size", o.voxel_size, "Evaluation voxel size in meters")->check(CLI::PositiveNumber);
  if (with_dump) cmd->add_flag("--dump-intermediate", o.dump, "Write intermediate point sets");
}

pipeline::PipelineConfig load_config(const CommonOptions& o) {
  pipeline::PipelineConfig c;
  if (!o.config_path.empty()) c = pipeline::config_from_json(io::read_json(o.config_path));
  if (!o.stages.empty()) {
    c.stages.clear();
    if (o.stages == "all") {
      c.stages = pipeline::all_stages();
    } else {
      std::stringstream ss(o.stages);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) c.stages.push_back(pipeline::parse_stage(item));
      }
    }
  }
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.voxel_size) c.eval.voxel_size = *o.voxel_size;
  c.validate();
  return c;
}

struct SceneOptions {
  std::string scene_path;
  bool hall = false;
  std::string format = "xyz";
  double jitter = 0.0;
  std::uint64_t seed = 0;
};

void add_scene(CLI::App* cmd, SceneOptions& o) {
  auto* scene = cmd->add_option("--scene", o.scene_path, "Scene JSON")->check(CLI::ExistingFile);
  auto* hall = cmd->add_flag("--hall-dataset", o.hall, "Use the built-in 51-pipe hall dataset");
  scene->excludes(hall);
  cmd->add_option("--format", o.format, "Cloud file format")->check(CLI::IsMember({"xyz", "ply"}));
  cmd->add_option("--jitter", o.jitter, "Gaussian jitter sigma in meters")->check(CLI::NonNegativeNumber);
}

io::Manifest run_generate(const SceneOptions& o, std::uint64_t seed, const fs::path& out) {
  if (o.scene_path.empty() && !o.hall) throw invalid_input("generate needs --scene or --hall-dataset");
  synth::Scene scene;
  if (o.hall) {
    synth::DatasetParams dp;
    dp.seed = seed;
    scene = synth::hall_dataset(dp);
  } else {
    scene = io::scene_from_json(io::read_json(o.scene_path));
  }
  batch::GenerateOptions g;
  g.cloud_format = o.format;
  g.scan.jitter_sigma = o.jitter;
  g.scan.seed = seed;
  io::Manifest m = batch::generate(scene, out, g);
  std::size_t empty = 0;
  for (const auto& e : m.entries) {
    if (e.empty) {
      ++empty;
      std::cerr << "warning: " << e.id << " received no points\n";
    }
  }
  std::cerr << "generated " << m.entries.size() << " clouds (" << empty << " empty), " << m.hits
            << " hits of " << m.rays_cast << " rays\n";
  return m;
}

json reports_json(const std::vector<batch::ReconstructReport>& reports, const pipeline::PipelineConfig& c) {
  json entries = json::array();
  for (const auto& r : reports) {
    json e{{"id", r.id}, {"ok", r.ok}};
    if (!r.ok) e["error"] = r.error;
    if (!r.warnings.empty()) e["warnings"] = r.warnings;
    entries.push_back(std::move(e));
  }
  return json{{"config", pipeline::config_to_json(c)}, {"entries", std::move(entries)}};
}

void log_reports(const std::vector<batch::ReconstructReport>& reports) {
  std::size_t failed = 0;
  for (const auto& r : reports) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << r.id << ": " << w << "\n";
    if (!r.ok) {
      ++failed;
      std::cerr << "error: " << r.id << ": " << r.error << "\n";
    }
  }
  std::cerr << "reconstructed " << reports.size() - failed << " of " << reports.size() << " pipes without errors\n";
}

int run_evaluate(const io::Manifest& manifest, const fs::path& manifest_dir, const fs::path& models,
                 const fs::path& csv, const pipeline::PipelineConfig& c) {
  const auto rows = batch::evaluate_manifest(manifest, manifest_dir, models, c);
  io::write_text(csv, batch::metrics_csv(rows, c.stages));
  std::size_t failed = 0;
  for (const auto& r : rows) {
    if (!r.ok) {
      ++failed;
      std::cerr << "error: " << r.id << " " << pipeline::stage_label(r.stage) << ": " << r.status << "\n";
    }
  }
  for (const auto& a : batch::aggregate(rows, c.stages)) {
    if (a.count == 0) continue;
    std::cerr << pipeline::stage_label(a.stage) << " " << a.group << ": IoU " << a.iou << ", r " << a.radius_ratio
              << ", l " << a.length_ratio << " (" << a.count << ")\n";
  }
  std::cerr << "evaluated " << rows.size() - failed << " of " << rows.size() << " rows\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pipe reconstruction from incomplete point clouds"};
  app.require_subcommand(1);

  SceneOptions gen_scene;
  std::string gen_out;
  std::uint64_t gen_seed = 7;
  auto* gen = app.add_subcommand("generate", "Scan a scene into per-pipe clouds and ground truth");
  add_scene(gen, gen_scene);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", gen_seed, "Seed for the dataset layout and jitter");

  CommonOptions rec_opts;
  std::string rec_cloud, rec_manifest, rec_out;
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct pipe models from clouds");
  auto* rec_cloud_opt = rec->add_option("--cloud", rec_cloud, "Single cloud (.xyz or .ply)")->check(CLI::ExistingFile);
  auto* rec_manifest_opt = rec->add_option("--manifest", rec_manifest, "Manifest of clouds")->check(CLI::ExistingFile);
  rec_cloud_opt->excludes(rec_manifest_opt);
  rec->add_option("--out", rec_out, "Output directory for models")->required();
  add_common(rec, rec_opts, true);

  CommonOptions ev_opts;
  std::string ev_manifest, ev_models, ev_out;
  auto* ev = app.add_subcommand("evaluate", "Compare models with ground truth");
  ev->add_option("--manifest", ev_manifest, "Manifest of clouds and ground truth")->required()->check(CLI::ExistingFile);
  ev->add_option("--models", ev_models, "Directory of model JSON files")->required();
  ev->add_option("--out", ev_out, "Metrics CSV path")->required();
  add_common(ev, ev_opts, false);

  CommonOptions all_opts;
  SceneOptions all_scene;
  std::string all_out;
  auto* all = app.add_subcommand("all", "generate, reconstruct and evaluate in one output directory");
  add_scene(all, all_scene);
  all->add_option("--out", all_out, "Output directory")->required();
  add_common(all, all_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*gen) {
      run_generate(gen_scene, gen_seed, gen_out);
      return kExitOk;
    }
    if (*rec) {
      const auto config = load_config(rec_opts);
      if (!rec_cloud.empty()) {
        const auto cloud = io::read_cloud(rec_cloud);
        const std::string id = fs::path(rec_cloud).stem().string();
        const auto report = batch::reconstruct_cloud(id, cloud, config, rec_out, rec_opts.dump);
        log_reports({report});
        io::write_json(fs::path(rec_out) / "run.json", reports_json({report}, config));
        return report.ok ? kExitOk : exit_code(report.error_kind);
      }
      if (rec_manifest.empty()) throw invalid_input("reconstruct needs --cloud or --manifest");
      const auto manifest = io::manifest_from_json(io::read_json(rec_manifest));
      const auto reports = batch::reconstruct_manifest(manifest, fs::path(rec_manifest).parent_path(), config,
                                                       rec_out, rec_opts.dump);
      log_reports(reports);
      io::write_json(fs::path(rec_out) / "run.json", reports_json(reports, config));
      return kExitOk;
    }
    if (*ev) {
      const auto config = load_config(ev_opts);
      const auto manifest = io::manifest_from_json(io::read_json(ev_manifest));
      return run_evaluate(manifest, fs::path(ev_manifest).parent_path(), ev_models, ev_out, config);
    }
    if (*all) {
      const auto config = load_config(all_opts);
      const fs::path out(all_out);
      const auto manifest = run_generate(all_scene, config.seed, out);
      const auto reports = batch::reconstruct_manifest(manifest, out, config, out / "models", all_opts.dump);
      log_reports(reports);
      io::write_json(out / "models" / "run.json", reports_json(reports, config));
      return run_evaluate(manifest, out, out / "models", out / "metrics.csv", config);
    }
  } catch (const PipeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
