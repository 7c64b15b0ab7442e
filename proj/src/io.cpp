#include "piperecon/io.hpp"

#include "piperecon/error.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace piperecon::io {

using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw invalid_input("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw invalid_input("cannot write " + path.string());
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const json& field(const json& doc, const std::string& key, const std::string& where) {
  if (!doc.is_object()) throw invalid_input(where + ": expected an object");
  auto it = doc.find(key);
  if (it == doc.end()) throw invalid_input(where + "." + key + ": missing field");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw invalid_input(where + ": expected a number");
  return v.get<double>();
}

Point3 point(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) throw invalid_input(where + ": expected [x, y, z]");
  Point3 p(number(v[0], where + "[0]"), number(v[1], where + "[1]"), number(v[2], where + "[2]"));
  if (!is_finite(p)) throw invalid_input(where + ": non-finite coordinate");
  return p;
}

std::vector<Point3> point_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw invalid_input(where + ": expected an array of points");
  std::vector<Point3> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.push_back(point(v[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::string string_field(const json& doc, const std::string& key, const std::string& where) {
  const json& v = field(doc, key, where);
  if (!v.is_string()) throw invalid_input(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

bool optional_bool(const json& doc, const std::string& key, const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end()) return false;
  if (!it->is_boolean()) throw invalid_input(where + "." + key + ": expected a boolean");
  return it->get<bool>();
}

// Rethrow construction errors of domain types with the JSON location attached.
template <typename F>
auto located(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const PipeError& e) {
    if (e.kind() == ErrorKind::invalid_input && std::string(e.what()).rfind(where, 0) != 0) {
      throw invalid_input(where + ": " + e.what());
    }
    throw;
  }
}

}  // namespace

std::vector<Point3> read_xyz(const fs::path& path) {
  auto in = open_in(path);
  std::vector<Point3> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Point3 p;
    if (!(ss >> p.x() >> p.y() >> p.z())) {
      throw invalid_input(path.string() + ":" + std::to_string(lineno) + ": expected 'x y z'");
    }
    if (!is_finite(p)) {
      throw invalid_input(path.string() + ":" + std::to_string(lineno) + ": non-finite coordinate");
    }
    pts.push_back(p);
  }
  return pts;
}

void write_xyz(const fs::path& path, std::span<const Point3> points) {
  auto out = open_out(path);
  for (const auto& p : points) {
    out << fmt_double(p.x()) << ' ' << fmt_double(p.y()) << ' ' << fmt_double(p.z()) << '\n';
  }
  if (!out) throw invalid_input("write failed: " + path.string());
}

namespace {

std::size_t ply_type_size(const std::string& t) {
  static const std::map<std::string, std::size_t> sizes = {
      {"char", 1},  {"uchar", 1},  {"int8", 1},    {"uint8", 1},   {"short", 2},
      {"ushort", 2}, {"int16", 2}, {"uint16", 2},  {"int", 4},     {"uint", 4},
      {"int32", 4}, {"uint32", 4}, {"float", 4},   {"float32", 4}, {"double", 8},
      {"float64", 8}};
  auto it = sizes.find(t);
  if (it == sizes.end()) throw invalid_input("unsupported PLY property type '" + t + "'");
  return it->second;
}

double ply_decode(const char* bytes, const std::string& t) {
  if (t == "float" || t == "float32") {
    float f;
    std::memcpy(&f, bytes, 4);
    return f;
  }
  if (t == "double" || t == "float64") {
    double d;
    std::memcpy(&d, bytes, 8);
    return d;
  }
  throw invalid_input("PLY coordinates must be float or double, got '" + t + "'");
}

}  // namespace

std::vector<Point3> read_ply(const fs::path& path) {
  static_assert(std::endian::native == std::endian::little, "PLY reader assumes a little-endian host");
  auto in = open_in(path, std::ios::in | std::ios::binary);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) {
    throw invalid_input(path.string() + ": not a PLY file");
  }
  std::string format;
  std::size_t count = 0;
  bool in_vertex = false, seen_vertex = false;
  struct Prop {
    std::string type, name;
  };
  std::vector<Prop> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "end_header") break;
    if (key == "format") {
      ss >> format;
    } else if (key == "element") {
      std::string name;
      ss >> name >> count;
      if (seen_vertex && name != "vertex") {
        in_vertex = false;
        continue;
      }
      if (name != "vertex") throw invalid_input(path.string() + ": vertex element must come first");
      in_vertex = seen_vertex = true;
    } else if (key == "property" && in_vertex) {
      Prop p;
      ss >> p.type;
      if (p.type == "list") throw invalid_input(path.string() + ": list property on vertices");
      ss >> p.name;
      props.push_back(p);
    }
  }
  if (!seen_vertex) throw invalid_input(path.string() + ": no vertex element");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].name == "x") ix = static_cast<int>(i);
    if (props[i].name == "y") iy = static_cast<int>(i);
    if (props[i].name == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw invalid_input(path.string() + ": missing x/y/z properties");

  std::vector<Point3> pts(count);
  if (format == "ascii") {
    std::vector<double> vals(props.size());
    for (std::size_t n = 0; n < count; ++n) {
      for (auto& v : vals) {
        if (!(in >> v)) throw invalid_input(path.string() + ": truncated vertex data");
      }
      pts[n] = Point3(vals[ix], vals[iy], vals[iz]);
    }
  } else if (format == "binary_little_endian") {
    std::vector<std::size_t> offset(props.size() + 1, 0);
    for (std::size_t i = 0; i < props.size(); ++i) offset[i + 1] = offset[i] + ply_type_size(props[i].type);
    std::vector<char> rec(offset.back());
    for (std::size_t n = 0; n < count; ++n) {
      if (!in.read(rec.data(), static_cast<std::streamsize>(rec.size()))) {
        throw invalid_input(path.string() + ": truncated vertex data");
      }
      pts[n] = Point3(ply_decode(rec.data() + offset[ix], props[ix].type),
                      ply_decode(rec.data() + offset[iy], props[iy].type),
                      ply_decode(rec.data() + offset[iz], props[iz].type));
    }
  } else {
    throw invalid_input(path.string() + ": unsupported PLY format '" + format + "'");
  }
  for (const auto& p : pts) {
    if (!is_finite(p)) throw invalid_input(path.string() + ": non-finite coordinate");
  }
  return pts;
}

void write_ply(const fs::path& path, std::span<const Point3> points) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
      << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
  for (const auto& p : points) {
    const double xyz[3] = {p.x(), p.y(), p.z()};
    out.write(reinterpret_cast<const char*>(xyz), sizeof xyz);
  }
  if (!out) throw invalid_input("write failed: " + path.string());
}

std::vector<Point3> read_cloud(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".ply") return read_ply(path);
  if (ext == ".xyz" || ext == ".txt") return read_xyz(path);
  throw invalid_input("unknown cloud format '" + ext + "' (expected .xyz or .ply)");
}

void write_cloud(const fs::path& path, std::span<const Point3> points) {
  if (path.extension() == ".ply") {
    write_ply(path, points);
  } else {
    write_xyz(path, points);
  }
}

json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw invalid_input(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << text;
  if (!out) throw invalid_input("write failed: " + path.string());
}

json polyline_to_json(std::span<const Point3> points) {
  json arr = json::array();
  for (const auto& p : points) arr.push_back({p.x(), p.y(), p.z()});
  return arr;
}

std::vector<Point3> points_from_json(const json& doc, const std::string& key) {
  return point_list(field(doc, key, "$"), key);
}

json model_to_json(const PipeModel& model) {
  return json{{"spline", polyline_to_json(model.spline.points())},
              {"tangents", polyline_to_json(model.tangents)},
              {"radius", model.mean_radius},
              {"length", model.axis_length}};
}

PipeModel model_from_json(const json& doc) {
  const std::string where = "model";
  auto spline = point_list(field(doc, "spline", where), where + ".spline");
  auto tangents = point_list(field(doc, "tangents", where), where + ".tangents");
  const double radius = number(field(doc, "radius", where), where + ".radius");
  const double length = number(field(doc, "length", where), where + ".length");
  if (tangents.size() != spline.size()) throw invalid_input(where + ": tangents and spline differ in size");
  if (!(radius > 0.0)) throw invalid_input(where + ".radius: must be positive");
  Polyline line = located(where + ".spline", [&] { return Polyline(std::move(spline)); });
  return PipeModel{std::move(line), std::move(tangents), radius, length};
}

json ground_truth_to_json(const GroundTruth& gt) {
  return json{{"id", gt.id},
              {"spline", polyline_to_json(gt.spline.points())},
              {"tangents", polyline_to_json(gt.tangents)},
              {"radius", gt.outer_radius},
              {"length", gt.axis_length}};
}

GroundTruth ground_truth_from_json(const json& doc) {
  const std::string where = "ground_truth";
  GroundTruth gt{string_field(doc, "id", where),
                 Polyline({Point3::Zero(), Point3::UnitX()}),
                 point_list(field(doc, "tangents", where), where + ".tangents"),
                 number(field(doc, "radius", where), where + ".radius"),
                 number(field(doc, "length", where), where + ".length")};
  auto spline = point_list(field(doc, "spline", where), where + ".spline");
  gt.spline = located(where + ".spline", [&] { return Polyline(std::move(spline)); });
  if (!(gt.outer_radius > 0.0)) throw invalid_input(where + ".radius: must be positive");
  return gt;
}

synth::Scene scene_from_json(const json& doc) {
  synth::Scene scene;
  const json& pipes = field(doc, "pipes", "scene");
  if (!pipes.is_array()) throw invalid_input("scene.pipes: expected an array");
  for (std::size_t i = 0; i < pipes.size(); ++i) {
    const std::string where = "scene.pipes[" + std::to_string(i) + "]";
    const json& p = pipes[i];
    const std::string id = string_field(p, "id", where);
    auto cps = point_list(field(p, "control_points", where), where + ".control_points");
    auto tans = point_list(field(p, "tangents", where), where + ".tangents");
    const double radius = number(field(p, "radius", where), where + ".radius");
    synth::PipeSpec spec = located(where, [&] { return synth::PipeSpec(cps, tans, radius); });
    scene.pipes.push_back({id, std::move(spec), optional_bool(p, "bend", where),
                           optional_bool(p, "occluder", where)});
  }
  const json& stations = field(doc, "stations", "scene");
  if (!stations.is_array()) throw invalid_input("scene.stations: expected an array");
  for (std::size_t i = 0; i < stations.size(); ++i) {
    const std::string where = "scene.stations[" + std::to_string(i) + "]";
    const json& s = stations[i];
    synth::ScanStation st;
    st.position = point(field(s, "position", where), where + ".position");
    if (s.contains("yaw_step_deg")) st.yaw_step_deg = number(s["yaw_step_deg"], where + ".yaw_step_deg");
    if (s.contains("vfov_deg")) st.vfov_deg = number(s["vfov_deg"], where + ".vfov_deg");
    if (s.contains("resolution")) {
      const json& r = s["resolution"];
      if (!r.is_array() || r.size() != 2 || !r[0].is_number_integer() || !r[1].is_number_integer()) {
        throw invalid_input(where + ".resolution: expected [width, height] integers");
      }
      st.width = r[0].get<int>();
      st.height = r[1].get<int>();
    }
    located(where, [&] {
      st.validate();
      return 0;
    });
    scene.stations.push_back(st);
  }
  return scene;
}

json scene_to_json(const synth::Scene& scene) {
  json pipes = json::array();
  for (const auto& p : scene.pipes) {
    json entry{{"id", p.id},
               {"control_points", polyline_to_json(p.spec.control_points())},
               {"tangents", polyline_to_json(p.spec.tangents())},
               {"radius", p.spec.radius()}};
    if (p.bend) entry["bend"] = true;
    if (p.occluder) entry["occluder"] = true;
    pipes.push_back(std::move(entry));
  }
  json stations = json::array();
  for (const auto& s : scene.stations) {
    stations.push_back({{"position", {s.position.x(), s.position.y(), s.position.z()}},
                        {"yaw_step_deg", s.yaw_step_deg},
                        {"resolution", {s.width, s.height}},
                        {"vfov_deg", s.vfov_deg}});
  }
  return json{{"pipes", std::move(pipes)}, {"stations", std::move(stations)}};
}

json manifest_to_json(const Manifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id},
                       {"cloud", e.cloud},
                       {"ground_truth", e.ground_truth},
                       {"bend", e.bend},
                       {"empty", e.empty},
                       {"points", e.points}});
  }
  return json{{"entries", std::move(entries)},
              {"rays_cast", manifest.rays_cast},
              {"hits", manifest.hits}};
}

Manifest manifest_from_json(const json& doc) {
  Manifest m;
  const json& entries = field(doc, "entries", "manifest");
  if (!entries.is_array()) throw invalid_input("manifest.entries: expected an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string where = "manifest.entries[" + std::to_string(i) + "]";
    const json& e = entries[i];
    ManifestEntry entry;
    entry.id = string_field(e, "id", where);
    entry.cloud = string_field(e, "cloud", where);
    entry.ground_truth = string_field(e, "ground_truth", where);
    entry.bend = optional_bool(e, "bend", where);
    entry.empty = optional_bool(e, "empty", where);
    if (e.contains("points") && e["points"].is_number_unsigned()) entry.points = e["points"].get<std::size_t>();
    m.entries.push_back(std::move(entry));
  }
  if (doc.contains("rays_cast") && doc["rays_cast"].is_number_unsigned()) m.rays_cast = doc["rays_cast"].get<std::size_t>();
  if (doc.contains("hits") && doc["hits"].is_number_unsigned()) m.hits = doc["hits"].get<std::size_t>();
  return m;
}

void write_obj(const fs::path& path, const TriMesh& mesh) {
  std::string text;
  text.reserve(mesh.vertices.size() * 48 + mesh.triangles.size() * 24);
  for (const auto& v : mesh.vertices) {
    text += "v " + fmt_double(v.x()) + ' ' + fmt_double(v.y()) + ' ' + fmt_double(v.z()) + '\n';
  }
  for (const auto& t : mesh.triangles) {
    text += "f " + std::to_string(t[0] + 1) + ' ' + std::to_string(t[1] + 1) + ' ' +
            std::to_string(t[2] + 1) + '\n';
  }
  write_text(path, text);
}

}  // namespace piperecon::io
