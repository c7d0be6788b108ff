#pragma once

#include <Eigen/Core>
#include <vector>

#include "mvlab/render/camera.hpp"
#include "mvlab/render/render_output.hpp"

namespace mvlab {

// Isotropic Gaussian splats.
struct SplatSet {
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> scales;     // world-space standard deviation, > 0
  std::vector<double> opacities;  // (0, 1]
  std::vector<Eigen::Vector3d> colors;

  std::size_t size() const { return centers.size(); }
  void add(const Eigen::Vector3d& center, double scale, double opacity,
           const Eigen::Vector3d& color);
  void append(const SplatSet& other);
  // Throws DomainError on non-positive scales, opacities outside (0, 1] or size mismatch.
  void validate() const;
};

struct SplatOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  bool contribs = true;
  double normal_alpha_threshold = 0.5;
};

// Front-to-back compositing in camera-depth order. A splat with camera depth z
// has screen radius r = focal * scale / z and footprint
// a = opacity * exp(-d^2 / (2 r^2)) for pixel-center distance d <= 3r.
// Weights are w_m = a_m prod_{j<m} (1 - a_j); ties in depth are ordered by
// content so the result does not depend on input order.
// One splat footprint at one pixel: a = opacity * exp(-d^2 / (2 r^2)), z = camera depth.
struct SplatFragment {
  std::size_t splat = 0;
  double a = 0.0;
  double z = 0.0;
};

// Per-pixel (row-major) fragments in compositing order.
std::vector<std::vector<SplatFragment>> splat_fragments(const SplatSet& splats, const Camera& cam);

RenderOutput composite_splats(const SplatSet& splats, const Camera& cam,
                              const SplatOptions& opts = {});

std::vector<RenderOutput> composite_views(const SplatSet& splats, const std::vector<Camera>& cams,
                                          const SplatOptions& opts = {});

}  // namespace mvlab
