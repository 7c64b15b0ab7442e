#pragma once

#include "piperecon/synth.hpp"

#include <cstdint>

namespace piperecon::synth {

struct DatasetParams {
  std::uint64_t seed = 7;
  double min_radius = 0.06;
  double max_radius = 0.25;
  /// Vertical field of view of every station.
  double vfov_deg = 60.0;
  int width = 256;
  int height = 192;
  double yaw_step_deg = 10.0;
};

/// A 30 m x 10 m x 4.5 m hall scanned from six stations in its interior.
/// Fifteen wall runs (horizontal pipe, 90 degree elbow, vertical pipe) sit in
/// three lanes along each long wall, and six straight or offset pipes hang
/// under the ceiling: 51 pipes, 15 of them bends, all seen from one side only.
Scene hall_dataset(const DatasetParams& params = {});

}  // namespace piperecon::synth
