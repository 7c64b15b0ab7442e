#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "piperecon/error.hpp"
#include "piperecon/io.hpp"
#include "piperecon/pipeline.hpp"
#include "piperecon/recon.hpp"
#include "piperecon/synth.hpp"

#include <fstream>
#include <random>

using namespace piperecon;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<Point3> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, 3);
  std::vector<Point3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(g(rng), g(rng), g(rng));
  return pts;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const PipeError& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::invalid_input;
}

}  // namespace

TEST_CASE("xyz round trip is exact") {
  const auto dir = fixtures::scratch_dir("io_xyz");
  const auto pts = random_points(500, 1);
  io::write_cloud(dir / "a.xyz", pts);
  CHECK(io::read_cloud(dir / "a.xyz") == pts);
}

TEST_CASE("ply round trip is exact") {
  const auto dir = fixtures::scratch_dir("io_ply");
  const auto pts = random_points(500, 2);
  io::write_cloud(dir / "a.ply", pts);
  CHECK(io::read_cloud(dir / "a.ply") == pts);
}

TEST_CASE("ascii ply with extra properties") {
  const auto dir = fixtures::scratch_dir("io_ply_ascii");
  write_file(dir / "b.ply",
             "ply\nformat ascii 1.0\ncomment hand made\nelement vertex 2\n"
             "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
             "end_header\n1 2 3 255\n-1 0.5 4 0\n");
  const auto pts = io::read_ply(dir / "b.ply");
  REQUIRE(pts.size() == 2);
  CHECK(pts[0] == Point3(1, 2, 3));
  CHECK(pts[1] == Point3(-1, 0.5, 4));
}

TEST_CASE("xyz comments and malformed lines") {
  const auto dir = fixtures::scratch_dir("io_xyz_bad");
  write_file(dir / "c.xyz", "# header\n\n1 2 3\n  4 5 6\n");
  CHECK(io::read_xyz(dir / "c.xyz").size() == 2);
  write_file(dir / "d.xyz", "1 2 3\n1 2\n");
  CHECK_THROWS_WITH_AS(io::read_xyz(dir / "d.xyz"), doctest::Contains(":2:"), PipeError);
  write_file(dir / "e.xyz", "1 nan 3\n");
  CHECK_THROWS_AS(io::read_xyz(dir / "e.xyz"), PipeError);
  CHECK_THROWS_AS(io::read_cloud(dir / "c.las"), PipeError);
  CHECK_THROWS_AS(io::read_cloud(dir / "missing.xyz"), PipeError);
}

TEST_CASE("model json round trip") {
  const Polyline axis = synth::interpolate_spline(fixtures::quarter_bend_spec(0.5, 0.1), 0.05);
  const PipeModel m = recon::model_with_radius(axis, 0.1234567890123);
  const json doc = io::model_to_json(m);
  const PipeModel back = io::model_from_json(doc);
  CHECK(back.spline.points() == m.spline.points());
  CHECK(back.tangents == m.tangents);
  CHECK(back.mean_radius == m.mean_radius);
  CHECK(back.axis_length == m.axis_length);
  CHECK(io::model_to_json(back) == doc);

  const auto dir = fixtures::scratch_dir("io_model");
  io::write_json(dir / "m.json", doc);
  CHECK(io::read_json(dir / "m.json") == doc);
}

TEST_CASE("ground truth json round trip") {
  const GroundTruth gt = synth::make_ground_truth("p7", fixtures::quarter_bend_spec(0.5, 0.1));
  const json doc = io::ground_truth_to_json(gt);
  const GroundTruth back = io::ground_truth_from_json(doc);
  CHECK(back.id == "p7");
  CHECK(back.spline.points() == gt.spline.points());
  CHECK(back.outer_radius == gt.outer_radius);
  CHECK(io::ground_truth_to_json(back) == doc);
}

TEST_CASE("scene json round trip and diagnostics") {
  synth::Scene scene;
  scene.pipes.push_back({"a", fixtures::straight_spec(2.0, 0.1), false, false});
  scene.pipes.push_back({"b", fixtures::quarter_bend_spec(0.6, 0.08), true, false});
  scene.pipes.push_back({"wall", fixtures::straight_spec(1.0, 0.5), false, true});
  synth::ScanStation st;
  st.position = Point3(1, -3, 0.5);
  scene.stations.push_back(st);
  const json doc = io::scene_to_json(scene);
  CHECK(io::scene_to_json(io::scene_from_json(doc)) == doc);

  json bad = doc;
  bad["pipes"][1]["radius"] = -1;
  CHECK_THROWS_WITH_AS(io::scene_from_json(bad), doctest::Contains("scene.pipes[1]"), PipeError);
  bad = doc;
  bad["pipes"][0].erase("tangents");
  CHECK_THROWS_WITH_AS(io::scene_from_json(bad), doctest::Contains("tangents"), PipeError);
  bad = doc;
  bad["stations"][0]["resolution"] = json::array({10});
  CHECK_THROWS_WITH_AS(io::scene_from_json(bad), doctest::Contains("scene.stations[0]"), PipeError);
}

TEST_CASE("manifest json round trip") {
  io::Manifest m;
  m.entries.push_back({"a", "clouds/a.xyz", "ground_truth/a.json", false, false, 1234});
  m.entries.push_back({"b", "clouds/b.xyz", "ground_truth/b.json", true, true, 0});
  m.rays_cast = 99;
  m.hits = 42;
  const json doc = io::manifest_to_json(m);
  const io::Manifest back = io::manifest_from_json(doc);
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].bend);
  CHECK(back.entries[1].empty);
  CHECK(back.entries[0].points == 1234);
  CHECK(io::manifest_to_json(back) == doc);
}

TEST_CASE("config json round trip and strictness") {
  pipeline::PipelineConfig c;
  c.stages = pipeline::all_stages();
  c.enable_rdp = true;
  c.seed = 11;
  c.smoothing.weight = 0.25;
  c.eval.voxel_size = 0.02;
  const json doc = pipeline::config_to_json(c);
  const pipeline::PipelineConfig back = pipeline::config_from_json(doc);
  CHECK(pipeline::config_to_json(back) == doc);
  CHECK(back.stages == c.stages);

  CHECK(pipeline::config_to_json(pipeline::config_from_json(json::object())) ==
        pipeline::config_to_json(pipeline::PipelineConfig{}));

  json unknown = doc;
  unknown["no_such_key"] = 1;
  CHECK(kind_of([&] { pipeline::config_from_json(unknown); }) == ErrorKind::invalid_input);
  json wrong = doc;
  wrong["seed"] = "eleven";
  CHECK(kind_of([&] { pipeline::config_from_json(wrong); }) == ErrorKind::invalid_input);
}

TEST_CASE("stage labels") {
  for (auto s : pipeline::all_stages()) CHECK(pipeline::parse_stage(pipeline::stage_label(s)) == s);
  CHECK(pipeline::all_stages().size() == 5);
  CHECK(pipeline::stage_label(pipeline::Stage::elong_smooth) == "+elong+smooth");
  CHECK_THROWS_AS(pipeline::parse_stage("fancy"), PipeError);
}

TEST_CASE("obj writer") {
  const auto dir = fixtures::scratch_dir("io_obj");
  const TriMesh mesh = recon::extrude_hull(recon::model_with_radius(fixtures::line_x(0, 1, 3), 0.1), {8, true});
  io::write_obj(dir / "h.obj", mesh);
  std::ifstream in(dir / "h.obj");
  std::size_t v = 0, f = 0;
  int lowest = 1 << 30;
  std::string tag;
  while (in >> tag) {
    if (tag == "v") {
      double x, y, z;
      in >> x >> y >> z;
      ++v;
    } else if (tag == "f") {
      int a, b, c;
      in >> a >> b >> c;
      lowest = std::min({lowest, a, b, c});
      ++f;
    } else {
      std::string rest;
      std::getline(in, rest);
    }
  }
  CHECK(v == mesh.vertices.size());
  CHECK(f == mesh.triangles.size());
  CHECK(lowest == 1);
}
