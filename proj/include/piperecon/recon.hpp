#pragma once

#include "piperecon/types.hpp"

#include <span>

namespace piperecon::recon {

struct HullParams {
  int circumferential_segments = 32;
  bool cap_ends = true;

  void validate() const;
};

PipeModel assemble_model(const Polyline& spline, std::span<const double> radii);

/// Model from a known radius, e.g. when re-reading or for ground truth.
PipeModel model_with_radius(const Polyline& spline, double radius);

/// Sweep a circle of the model's mean radius along its spline. Ring frames are
/// propagated by parallel transport; caps are triangle fans, wound outward.
TriMesh extrude_hull(const PipeModel& model, const HullParams& params = {});

}  // namespace piperecon::recon
