#pragma once

#include <vector>

#include "mvlab/core/view_stack.hpp"

namespace mvlab {

// One compositing contribution along a ray: blending weight and camera depth.
struct Contribution {
  double weight = 0.0;
  double depth = 0.0;
};

using RayContribs = std::vector<Contribution>;

struct RenderOutput {
  Image rgb;     // 3 channels
  Image alpha;   // 1 channel
  Image depth;   // 1 channel, camera z; 0 on background
  Image normal;  // 3 channels, camera space, zero where undefined
  // Row-major per pixel; empty when contributions were not requested.
  std::vector<RayContribs> contribs;

  int height() const { return alpha.height(); }
  int width() const { return alpha.width(); }
  bool has_contribs() const { return !contribs.empty(); }

  static RenderOutput blank(int height, int width);
};

// Packs renders into RGBAD (5 channels) or RGBD (4 channels) view stacks.
ViewStack to_rgbad(const std::vector<RenderOutput>& renders);
ViewStack to_rgbd(const std::vector<RenderOutput>& renders);

// Wraps view v of an RGBAD stack as a RenderOutput (no normals, no contribs).
RenderOutput from_rgbad(const ViewStack& x, int v);

}  // namespace mvlab
