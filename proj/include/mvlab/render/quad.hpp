#pragma once

#include <Eigen/Core>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"
#include "mvlab/render/render_output.hpp"

namespace mvlab {

// Flat textured square: points center + s * half_u + t * half_v for s, t in [-1, 1].
// Texel (tx, ty) covers s in [-1 + 2 tx / W, -1 + 2 (tx + 1) / W), likewise for t.
struct TexturedQuad {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d half_v = Eigen::Vector3d::UnitY();
  Image texture;  // 3 channels

  Eigen::Vector3d normal() const { return half_u.cross(half_v).normalized(); }
};

// Which texel each pixel center sees (-1 for a miss) and at what camera depth.
struct QuadCoverage {
  std::vector<int> texel;
  std::vector<double> depth;
};
QuadCoverage quad_coverage(const TexturedQuad& quad, const Camera& cam);

// Nearest-texel render; alpha is the coverage mask.
RenderOutput render_quad(const TexturedQuad& quad, const Camera& cam,
                         const Eigen::Vector3d& background = Eigen::Vector3d::Zero());

}  // namespace mvlab
