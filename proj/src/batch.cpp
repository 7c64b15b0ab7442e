#include "piperecon/batch.hpp"

#include "piperecon/recon.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace piperecon::batch {

using nlohmann::json;
using pipeline::Stage;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

io::Manifest generate(const synth::Scene& scene, const fs::path& out_dir,
                      const GenerateOptions& options) {
  if (options.cloud_format != "xyz" && options.cloud_format != "ply") {
    throw invalid_input("cloud format must be xyz or ply");
  }
  const synth::ScanResult scan = synth::virtual_scan(scene, options.scan);
  io::Manifest manifest;
  manifest.rays_cast = scan.rays_cast;
  manifest.hits = scan.hits;
  std::size_t k = 0;
  for (const auto& pipe : scene.pipes) {
    if (pipe.occluder) continue;
    const PointCloud& cloud = scan.clouds[k];
    io::ManifestEntry entry;
    entry.id = pipe.id;
    entry.cloud = "clouds/" + pipe.id + "." + options.cloud_format;
    entry.ground_truth = "ground_truth/" + pipe.id + ".json";
    entry.bend = pipe.bend;
    entry.empty = scan.empty[k];
    entry.points = cloud.size();
    io::write_cloud(out_dir / entry.cloud, cloud.points);
    io::write_json(out_dir / entry.ground_truth,
                   io::ground_truth_to_json(
                       synth::make_ground_truth(pipe.id, pipe.spec, options.ground_truth_spacing)));
    manifest.entries.push_back(std::move(entry));
    ++k;
  }
  io::write_json(out_dir / "scene.json", io::scene_to_json(scene));
  io::write_json(out_dir / "manifest.json", io::manifest_to_json(manifest));
  return manifest;
}

fs::path model_path(const fs::path& models_dir, const std::string& id, Stage stage) {
  return models_dir / (id + "." + pipeline::stage_key(stage) + ".json");
}

json stage_model_json(const std::string& id, const pipeline::StageResult& result) {
  json doc = io::model_to_json(result.model);
  doc["id"] = id;
  doc["stage"] = pipeline::stage_label(result.stage);
  doc["n_before_rdp"] = result.n_before_rdp;
  if (!result.warnings.empty()) doc["warnings"] = result.warnings;
  return doc;
}

ReconstructReport reconstruct_cloud(const std::string& id, std::span<const Point3> cloud,
                                    const pipeline::PipelineConfig& config,
                                    const fs::path& out_dir, bool dump) {
  ReconstructReport report;
  report.id = id;
  pipeline::DumpSink sink;
  if (dump) {
    sink = [&](const std::string& name, std::span<const Point3> pts) {
      io::write_xyz(out_dir / (id + ".dump") / (name + ".xyz"), pts);
    };
  }
  try {
    const auto results = pipeline::reconstruct(cloud, config, sink);
    std::string errors;
    for (const auto& r : results) {
      if (r.error) {
        if (errors.empty()) report.error_kind = r.error->kind();
        errors += (errors.empty() ? "" : "; ") + pipeline::stage_label(r.stage) + ": " + r.error->what();
        continue;
      }
      const fs::path path = model_path(out_dir, id, r.stage);
      io::write_json(path, stage_model_json(id, r));
      io::write_obj(fs::path(path).replace_extension(".obj"), recon::extrude_hull(r.model, config.eval.hull));
      for (const auto& w : r.warnings) report.warnings.push_back(pipeline::stage_label(r.stage) + ": " + w);
    }
    report.ok = errors.empty();
    report.error = errors;
  } catch (const PipeError& e) {
    report.error_kind = e.kind();
    report.error = e.what();
  } catch (const std::exception& e) {
    report.error_kind = ErrorKind::invalid_input;
    report.error = e.what();
  }
  return report;
}

std::vector<ReconstructReport> reconstruct_manifest(const io::Manifest& manifest,
                                                    const fs::path& manifest_dir,
                                                    const pipeline::PipelineConfig& config,
                                                    const fs::path& out_dir, bool dump) {
  std::vector<ReconstructReport> reports(manifest.entries.size());
  parallel_for(manifest.entries.size(), config.jobs, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    if (entry.empty) {
      reports[i] = {entry.id, false, ErrorKind::infeasible, "empty cloud", {}};
      return;
    }
    try {
      const auto cloud = io::read_cloud(manifest_dir / entry.cloud);
      reports[i] = reconstruct_cloud(entry.id, cloud, config, out_dir, dump);
    } catch (const PipeError& e) {
      reports[i] = {entry.id, false, e.kind(), e.what(), {}};
    }
  });
  return reports;
}

namespace {

std::string csv_safe(std::string s) {
  for (char& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::vector<MetricsRow> evaluate_manifest(const io::Manifest& manifest, const fs::path& manifest_dir,
                                          const fs::path& models_dir,
                                          const pipeline::PipelineConfig& config) {
  const auto& stages = config.stages;
  std::vector<std::vector<MetricsRow>> per_entry(manifest.entries.size());
  parallel_for(manifest.entries.size(), config.jobs, [&](std::size_t i) {
    const auto& entry = manifest.entries[i];
    auto& rows = per_entry[i];
    auto fail_all = [&](const std::string& why) {
      rows.clear();
      for (Stage s : stages) rows.push_back({entry.id, s, entry.bend, false, why, {}});
    };
    if (entry.empty) return fail_all("failed: empty cloud");
    std::vector<Point3> cloud;
    GroundTruth gt{entry.id, Polyline({Point3::Zero(), Point3::UnitX()}), {}, 1.0, 1.0};
    try {
      cloud = io::read_cloud(manifest_dir / entry.cloud);
      gt = io::ground_truth_from_json(io::read_json(manifest_dir / entry.ground_truth));
      if (cloud.empty()) return fail_all("failed: empty cloud");
    } catch (const std::exception& e) {
      return fail_all(std::string("failed: ") + e.what());
    }
    for (Stage s : stages) {
      MetricsRow row{entry.id, s, entry.bend, false, "", {}};
      const fs::path path = model_path(models_dir, entry.id, s);
      try {
        if (!fs::exists(path)) throw invalid_input("missing model " + path.filename().string());
        const json doc = io::read_json(path);
        const PipeModel model = io::model_from_json(doc);
        const std::size_t n_before = doc.contains("n_before_rdp") && doc["n_before_rdp"].is_number_unsigned()
                                         ? doc["n_before_rdp"].get<std::size_t>()
                                         : model.spline.size();
        row.metrics = eval::evaluate(model, gt, cloud, n_before, config.eval);
        row.metrics.id = entry.id;
        row.metrics.stage = pipeline::stage_label(s);
        row.ok = true;
        row.status = row.metrics.union_empty ? "ok (empty union)" : "ok";
      } catch (const std::exception& e) {
        row.status = std::string("failed: ") + e.what();
      }
      rows.push_back(std::move(row));
    }
  });
  std::vector<MetricsRow> out;
  for (auto& rows : per_entry) {
    for (auto& r : rows) out.push_back(std::move(r));
  }
  return out;
}

std::vector<Aggregate> aggregate(const std::vector<MetricsRow>& rows, const std::vector<Stage>& stages) {
  std::vector<Aggregate> out;
  for (Stage s : stages) {
    for (const char* group : {"overall", "bends", "non_bends"}) {
      Aggregate a{group, s, 0, 0.0, 0.0, 0.0, 0.0};
      for (const auto& r : rows) {
        if (!r.ok || r.stage != s) continue;
        if (a.group == "bends" && !r.bend) continue;
        if (a.group == "non_bends" && r.bend) continue;
        ++a.count;
        a.iou += r.metrics.iou;
        a.radius_ratio += r.metrics.radius_ratio;
        a.length_ratio += r.metrics.length_ratio;
        a.point_ratio += r.metrics.point_ratio;
      }
      if (a.count > 0) {
        const double n = static_cast<double>(a.count);
        a.iou /= n;
        a.radius_ratio /= n;
        a.length_ratio /= n;
        a.point_ratio /= n;
      }
      out.push_back(a);
    }
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows, const std::vector<Stage>& stages) {
  std::string text = "id,stage,iou,r_ratio,l_ratio,n_ratio,status\n";
  for (const auto& r : rows) {
    text += csv_safe(r.id) + "," + pipeline::stage_label(r.stage) + ",";
    if (r.ok) {
      text += fixed(r.metrics.iou) + "," + fixed(r.metrics.radius_ratio) + "," +
              fixed(r.metrics.length_ratio) + "," + fixed(r.metrics.point_ratio);
    } else {
      text += ",,,";
    }
    text += "," + csv_safe(r.status) + "\n";
  }
  if (rows.empty()) return text;
  for (const auto& a : aggregate(rows, stages)) {
    text += a.group + "," + pipeline::stage_label(a.stage) + ",";
    if (a.count > 0) {
      text += fixed(a.iou) + "," + fixed(a.radius_ratio) + "," + fixed(a.length_ratio) + "," +
              fixed(a.point_ratio) + ",mean of " + std::to_string(a.count);
    } else {
      text += ",,,,no rows";
    }
    text += "\n";
  }
  return text;
}

}  // namespace piperecon::batch
