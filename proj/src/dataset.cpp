#include "piperecon/dataset.hpp"

#include "piperecon/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

namespace piperecon::synth {

namespace {

constexpr double kHallLength = 30.0;
constexpr double kHallWidth = 10.0;
constexpr double kLaneTop = 3.5;
constexpr double kLaneBottom = 0.3;
constexpr double kCeilingZ = 4.1;
constexpr double kRunGap = 0.6;
constexpr double kMaxRun = 22.5;

struct Part {
  std::vector<Point3> cps;
  std::vector<Vec3> tangents;
};

void mirror_x(Part& part, double lo, double hi) {
  for (auto& p : part.cps) p.x() = lo + hi - p.x();
  for (auto& t : part.tangents) t.x() = -t.x();
}

}  // namespace

Scene hall_dataset(const DatasetParams& params) {
  if (!(params.min_radius > 0.0) || params.max_radius < params.min_radius || params.max_radius > 0.25) {
    throw invalid_input("dataset radii must satisfy 0 < min <= max <= 0.25");
  }
  std::mt19937_64 rng(params.seed);
  auto uniform = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto radius = [&] { return uniform(params.min_radius, params.max_radius); };

  Scene scene;
  int counter = 0;
  auto add = [&](const Part& part, double r, bool bend, const char* kind) {
    char id[32];
    std::snprintf(id, sizeof id, "pipe_%02d_%s", counter++, kind);
    scene.pipes.push_back({id, PipeSpec(part.cps, part.tangents, r), bend, false});
  };

  // Lanes parallel to the long walls, by distance from the wall.
  const double lane_y[6] = {0.3, 0.85, 1.4, kHallWidth - 0.3, kHallWidth - 0.85, kHallWidth - 1.4};
  const int runs_per_lane[6] = {3, 3, 2, 3, 2, 2};
  // Height bands of the horizontal parts; inner lanes run lower so they do not
  // hide the lanes behind them completely.
  const double band[3][2] = {{2.5, 3.0}, {1.7, 2.2}, {0.6, 1.2}};

  for (int lane = 0; lane < 6; ++lane) {
    const int n = runs_per_lane[lane];
    const double y = lane_y[lane];
    std::vector<double> r(n), bend_r(n), weight(n);
    double fixed = 0.0, wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      r[i] = radius();
      bend_r[i] = std::max(3.0 * r[i], 0.35) * uniform(1.0, 1.3);
      fixed += bend_r[i] + r[i] + kRunGap;
      weight[i] = std::exponential_distribution<double>(1.0)(rng);
      wsum += weight[i];
    }
    const double free_length = kHallLength - 1.0 - fixed - 0.5 * n;
    double x = 0.5;
    for (int i = 0; i < n; ++i) {
      const double run_len = std::min(kMaxRun, 0.5 + free_length * weight[i] / wsum);
      const double z = uniform(band[lane % 3][0], band[lane % 3][1]);
      const double rb = std::min(bend_r[i], std::max(kLaneTop - z, z - kLaneBottom) - 0.5);
      const bool can_rise = z + rb + 0.5 <= kLaneTop;
      const bool can_drop = z - rb - 0.5 >= kLaneBottom;
      const bool up = can_rise && (!can_drop || uniform(0.0, 1.0) < 0.5);
      const double dz = up ? 1.0 : -1.0;
      const double xb = x + run_len;
      const double c = std::cos(std::numbers::pi / 4), s = std::sin(std::numbers::pi / 4);

      Part straight{{{x, y, z}, {xb, y, z}}, {Vec3::UnitX(), Vec3::UnitX()}};
      Part elbow{{{xb, y, z}, {xb + rb * s, y, z + dz * rb * (1.0 - c)}, {xb + rb, y, z + dz * rb}},
                 {Vec3::UnitX(), Vec3(c, 0.0, dz * s), Vec3(0.0, 0.0, dz)}};
      const double z_end = up ? kLaneTop : kLaneBottom;
      Part riser{{{xb + rb, y, z + dz * rb}, {xb + rb, y, z_end}},
                 {Vec3(0.0, 0.0, dz), Vec3(0.0, 0.0, dz)}};

      const double lo = x, hi = xb + rb;
      if (uniform(0.0, 1.0) < 0.5) {
        mirror_x(straight, lo, hi);
        mirror_x(elbow, lo, hi);
        mirror_x(riser, lo, hi);
      }
      add(straight, r[i], false, "straight");
      add(elbow, r[i], true, "bend");
      add(riser, r[i], false, "straight");
      x = xb + rb + r[i] + kRunGap;
    }
  }

  // Ceiling pipes: four straight, two with a lateral offset.
  const Vec3 ex = Vec3::UnitX();
  add(Part{{{3.5, 2.0, kCeilingZ}, {26.0, 2.0, kCeilingZ}}, {ex, ex}}, radius(), false, "straight");
  add(Part{{{6.0, 3.0, kCeilingZ}, {21.0, 3.0, kCeilingZ}}, {ex, ex}}, radius(), false, "straight");
  add(Part{{{2.0, 7.0, kCeilingZ}, {10.0, 7.0, kCeilingZ}}, {ex, ex}}, radius(), false, "straight");
  add(Part{{{20.0, 8.0, kCeilingZ}, {24.0, 8.0, kCeilingZ}}, {ex, ex}}, radius(), false, "straight");
  add(Part{{{4.0, 4.5, kCeilingZ}, {9.0, 4.5, kCeilingZ}, {11.0, 5.0, kCeilingZ}, {16.0, 5.0, kCeilingZ}},
           {ex, ex, ex, ex}},
      radius(), false, "offset");
  add(Part{{{8.0, 6.0, kCeilingZ}, {15.0, 6.0, kCeilingZ}, {17.0, 5.6, kCeilingZ}, {26.0, 5.6, kCeilingZ}},
           {ex, ex, ex, ex}},
      radius(), false, "offset");

  for (double sx : {5.0, 15.0, 25.0}) {
    for (double sy : {4.0, 6.5}) {
      ScanStation st;
      st.position = Point3(sx, sy, 1.6);
      st.yaw_step_deg = params.yaw_step_deg;
      st.width = params.width;
      st.height = params.height;
      st.vfov_deg = params.vfov_deg;
      st.validate();
      scene.stations.push_back(st);
    }
  }
  return scene;
}

}  // namespace piperecon::synth
