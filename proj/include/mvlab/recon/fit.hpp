#pragma once

#include <utility>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/metrics/losses.hpp"
#include "mvlab/render/camera.hpp"
#include "mvlab/render/mesh.hpp"
#include "mvlab/render/quad.hpp"
#include "mvlab/render/render_output.hpp"
#include "mvlab/render/splats.hpp"
#include "mvlab/render/volume.hpp"

namespace mvlab {

enum class ReconPhase { kNerf, kMesh, kTexture, kSplats };

struct AdamMoments {
  std::vector<double> m, v;
  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
};

// 3D state carried across denoising steps.
//   nerf:    grid.density = softplus(density_logits), grid.color optimized directly
//   mesh:    extracted surface, colored by querying grid.color (the texture field)
//   texture: known quad geometry with a fitted texture
//   splats:  pixel-aligned splats lifted from the views (feed-forward, no state reuse)
struct ReconState {
  ReconPhase phase = ReconPhase::kNerf;
  int step_count = 0;
  VolumeGrid grid;
  std::vector<double> density_logits;
  AdamMoments density_moments;
  AdamMoments color_moments;
  TriMesh mesh;
  TexturedQuad quad;
  std::vector<bool> texel_filled;
  SplatSet splats;
  std::vector<double> loss_trace;  // total loss per step of the last fit window
  bool empty_surface_warning = false;
};

ReconState make_volume_state(int resolution, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi,
                             double init_density = 0.5, double init_color = 0.5);
ReconState make_quad_state(const TexturedQuad& layout);
ReconState make_splat_state();

double softplus(double x);
double softplus_inverse(double y);

struct FitConfig {
  int steps_per_denoise = 96;
  LossWeights weights = default_weights();
  double lr_density = 0.05;
  double lr_color = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double ray_step = 0.0;         // <= 0: grid diagonal / 64
  double entropy_shell = 1.0;    // background shell thickness d
  double alpha_blur_px = 2.0;    // Gaussian softening of alpha targets, 0 disables
  int erosion_iterations = 2;
  double normal_alpha_threshold = 0.5;
  // (completed fraction, square resolution) breakpoints; empty keeps the target resolution.
  std::vector<std::pair<double, int>> resolution_schedule;
  bool optimize_vertices = false;
  double vertex_lr = 1e-3;
  double mesh_iso = 0.0;         // <= 0: silhouette-matched level, see silhouette_iso
  // Splat lifting.
  int lift_stride = 1;
  double lift_alpha_threshold = 0.5;
  double lift_scale = 0.6;
  double lift_opacity = 0.5;
  // Adam refinement of lifted opacities and colors against the views.
  int lift_refine_steps = 40;
  double lift_lr_opacity = 0.1;  // on opacity logits
  double lift_lr_color = 0.02;

  // Fitting uses rgb and alpha only; the depth channel of denoised views is not a target.
  static LossWeights default_weights() {
    LossWeights w;
    w.depth = 0.0;
    return w;
  }
  // Throws DomainError on invalid settings.
  void validate() const;
  double step_for(const VolumeGrid& grid) const {
    return ray_step > 0.0 ? ray_step : grid.diagonal() / 64.0;
  }
  // Resolution for the given completed fraction of the trajectory, 0 for "keep".
  int resolution_for(double fraction) const;
};

// Targets for one camera: rgb, alpha (possibly softened) and depth.
std::vector<RenderOutput> make_fit_targets(const ViewStack& views, double alpha_blur_px);

// Separable Gaussian blur with sigma = radius / 2 and a window of +-ceil(radius),
// renormalized at the image border.
Image gaussian_blur(const Image& img, double radius);

struct FitLoss {
  double total = 0.0;
  double l1 = 0.0;
  double perceptual = 0.0;
  double normal_tv = 0.0;
  double entropy = 0.0;
};

// Fitting objective of the nerf phase, averaged over views:
//   w.l1 l1_rgbad + w.perceptual patch_perceptual(rgb)
//   + w.normal_tv normal_tv_l15(normals, eroded target mask) / pixels
//   + w.entropy mean_rays ray_entropy
// with analytic gradients with respect to density logits and colors when requested.
FitLoss volume_objective(const ReconState& state, const std::vector<RenderOutput>& targets,
                         const std::vector<Camera>& cams, const FitConfig& cfg,
                         std::vector<double>* grad_logits = nullptr,
                         std::vector<double>* grad_color = nullptr);

// Mesh-phase objective (l1 + perceptual on the mesh render) with its gradient
// with respect to the color grid.
FitLoss mesh_objective(const ReconState& state, const std::vector<RenderOutput>& targets,
                       const std::vector<Camera>& cams, const FitConfig& cfg,
                       std::vector<double>* grad_color = nullptr);

// Central finite-difference check of volume_objective. Parameter p < cells is
// density logit p, otherwise color entry p - cells. A parameter whose +-h
// perturbation flips a pixel across the normal alpha threshold sits on a
// discontinuity of the normal map and is reported in `nonsmooth` instead.
struct GradientCheck {
  std::vector<std::size_t> params;
  std::vector<double> analytic;
  std::vector<double> numeric;
  std::vector<std::size_t> nonsmooth;
  double max_rel_error = 0.0;  // |a - f| / max(|a|, |f|, 1e-8)
};
GradientCheck finite_difference_check(const ReconState& state,
                                      const std::vector<RenderOutput>& targets,
                                      const std::vector<Camera>& cams, const FitConfig& cfg,
                                      const std::vector<std::size_t>& params, double h = 1e-3);

// cfg.steps_per_denoise Adam steps on the nerf or mesh phase objective.
// Throws NumericalError on a non-finite loss or gradient.
ReconState fit_incremental(ReconState state, const ViewStack& targets,
                           const std::vector<Camera>& cams, const FitConfig& cfg);

// Marching cubes on the density grid (iso <= 0: log(2) / cell size); keeps the nerf phase and sets
// empty_surface_warning when the surface is empty.
ReconState switch_to_mesh(ReconState state, double iso = 0.0);

// Density level whose extracted surface covers as many pixels of `cams` as the
// volume render has pixels with alpha >= cfg.normal_alpha_threshold (bisection
// in log density). Falls back to log(2) / cell size when nothing is opaque.
double silhouette_iso(const ReconState& state, const std::vector<Camera>& cams,
                      const FitConfig& cfg);

// switch_to_mesh at cfg.mesh_iso, or at silhouette_iso when that is <= 0.
ReconState switch_to_mesh(ReconState state, const std::vector<Camera>& cams, const FitConfig& cfg);

// Renders of the state's current representation.
std::vector<RenderOutput> render_state(const ReconState& state, const std::vector<Camera>& cams,
                                       const FitConfig& cfg = {}, bool contribs = false);

}  // namespace mvlab
