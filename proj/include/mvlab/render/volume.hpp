#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

#include "mvlab/render/camera.hpp"
#include "mvlab/render/render_output.hpp"

namespace mvlab {

// Dense vertex-centered grid: sample (i, j, k) sits at lo + (i, j, k) * spacing.
// Fields are trilinearly interpolated and vanish outside the box.
struct VolumeGrid {
  int resolution = 0;
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d hi = Eigen::Vector3d::Constant(1.0);
  std::vector<double> density;  // N^3
  std::vector<double> color;    // N^3 * 3, interleaved rgb

  VolumeGrid() = default;
  VolumeGrid(int n, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi);

  std::size_t cells() const { return density.size(); }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * resolution + j) * resolution + i;
  }
  Eigen::Vector3d spacing() const { return (hi - lo) / (resolution - 1); }
  Eigen::Vector3d position(int i, int j, int k) const;
  double diagonal() const { return (hi - lo).norm(); }

  // Throws DomainError on negative density, colors outside [0, 1], or bad sizes.
  void validate() const;
};

// Eight corner indices and weights of a trilinear lookup; all weights are zero
// when the point lies outside the box.
struct Trilinear {
  std::array<std::size_t, 8> index{};
  std::array<double, 8> weight{};
};
Trilinear trilinear(const VolumeGrid& grid, const Eigen::Vector3d& p);

double sample_density(const VolumeGrid& grid, const Trilinear& s);
Eigen::Vector3d sample_color(const VolumeGrid& grid, const Trilinear& s);

// Uniform sample layout along one pixel ray clipped to the grid box. Ray
// parameters tau are camera z-depths; world distance is tau * dir_norm.
struct RaySegment {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;
  double dir_norm = 0.0;
  double t0 = 0.0;
  double dt = 0.0;
  int samples = 0;  // 0 when the ray misses the box

  double tau(int i) const { return t0 + (i + 0.5) * dt; }
  Eigen::Vector3d point(int i) const { return origin + tau(i) * dir; }
};

// Ray through the center of pixel (x, y); sample count is ceil(world length / step).
RaySegment ray_segment(const VolumeGrid& grid, const Camera& cam, int x, int y, double step);

struct RenderOptions {
  double step = 0.0;  // <= 0 selects diagonal / 256
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  bool contribs = false;
  double normal_alpha_threshold = 0.5;
};

// Emission-absorption ray marching. Sample i contributes
// w_i = T_i (1 - exp(-sigma_i dt |d|)), rgb = sum w_i c_i + (1 - alpha) background,
// alpha = 1 - T_end, depth = sum w_i tau_i / max(alpha, 1e-6).
RenderOutput raymarch_volume(const VolumeGrid& grid, const Camera& cam,
                             const RenderOptions& opts = {});

std::vector<RenderOutput> raymarch_views(const VolumeGrid& grid, const std::vector<Camera>& cams,
                                         const RenderOptions& opts = {});

}  // namespace mvlab
