#pragma once

#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"
#include "mvlab/render/mesh.hpp"

namespace mvlab {

struct BackprojectOptions {
  int texture_height = 64;
  int texture_width = 64;
  double cosine_power = 1.0;
  // Depth-test bias as a fraction of the mesh bounding diagonal, plus a
  // slope-scaled term of one pixel footprint times tan(theta).
  double visibility_bias = 1e-3;
};

struct BackprojectResult {
  Image texture;                        // 3 channels
  Image weight;                         // 1 channel, sum of view weights
  std::vector<unsigned char> filled;    // per texel, row-major
};

// Blends views into the mesh's UV space. A texel inside a UV triangle maps to a
// surface point; each view contributes its bilinearly sampled color with weight
// visible * max(0, cos theta)^k * alpha, where alpha is channel 3 when the views
// have one. Texels with zero total weight stay black and unfilled.
BackprojectResult backproject_texture(const ViewStack& views, const std::vector<Camera>& cams,
                                      const TriMesh& mesh, const BackprojectOptions& opts = {});

}  // namespace mvlab
