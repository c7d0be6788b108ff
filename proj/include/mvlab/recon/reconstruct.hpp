#pragma once

#include <string>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/metrics/metrics.hpp"
#include "mvlab/recon/fit.hpp"
#include "mvlab/world/bayes.hpp"
#include "mvlab/world/world_model.hpp"

namespace mvlab {

struct FeedforwardResult {
  Image texture;                      // 3 channels, layout resolution
  std::vector<unsigned char> filled;  // per texel, row-major
};

// Closed-form texture solve on known quad geometry. Every pixel that sees texel
// j adds one observation with weight view_weight[v] * alpha (alpha = 1 for rgb
// views); the texel value minimizing sum w (c - value)^2 is the weighted mean.
// Texels with no observation stay black and unfilled.
FeedforwardResult fit_feedforward_quads(const ViewStack& targets, const std::vector<Camera>& cams,
                                        const TexturedQuad& layout,
                                        const std::vector<double>& view_weights = {});

// Pixel-aligned splats: every stride-th pixel with alpha >= threshold and positive
// depth becomes a splat at its backprojected depth, with scale proportional to
// the pixel footprint times the stride.
SplatSet lift_splats(const ViewStack& targets, const std::vector<Camera>& cams,
                     const FitConfig& cfg);

// Weighted l1_rgbad of the splat renders, averaged over views, with gradients
// with respect to opacities and colors (positions and scales are fixed).
double splat_objective(const SplatSet& splats, const std::vector<RenderOutput>& targets,
                       const std::vector<Camera>& cams, const LossWeights& w,
                       std::vector<double>* grad_opacity = nullptr,
                       std::vector<Eigen::Vector3d>* grad_color = nullptr);

// cfg.lift_refine_steps Adam steps on splat_objective over opacity logits and
// colors, colors clamped to [0, 1]. Appends the loss per step to `trace`.
SplatSet refine_splats(SplatSet splats, const ViewStack& targets, const std::vector<Camera>& cams,
                       const FitConfig& cfg, std::vector<double>* trace = nullptr);

struct ReconResult {
  ReconState state;
  FeedbackPacket feedback;           // rgb + depth at the render cameras
  std::vector<RenderOutput> renders; // full renders at the render cameras
};

// One reconstruction step in the state's phase followed by a render:
//   nerf / mesh: fit_incremental on RGBAD targets
//   texture:     fit_feedforward_quads on rgb or RGBAD targets
//   splats:      lift_splats then refine_splats on RGBAD targets
// A zero step budget skips the fit and renders the incoming state.
ReconResult reconstruct_and_render(ReconState state, const ViewStack& targets,
                                   const std::vector<Camera>& cams, const FitConfig& cfg,
                                   const std::vector<Camera>& render_cams, bool contribs = false);

// Empty initial state suited to the world's prototype kind.
ReconState initial_state(const WorldModel& world, int volume_resolution = 16);

// Keeps the leading channels of an RGBAD render stack that the world denoises.
ViewStack to_data_channels(const std::vector<RenderOutput>& renders, int data_channels);

// Best-fit reconstruction of a view stack followed by a re-render in the same
// channels; used by cross_view_consistency.
ReconstructRender make_reconstructor(const WorldModel& world, const FitConfig& cfg,
                                     int volume_resolution = 16, int volume_steps = 480);

// Versioned binary checkpoint with the "recon-v1" header. Throws StructuralError
// on I/O failure, a wrong header or truncated data.
void save_checkpoint(const std::string& path, const ReconState& state);
ReconState load_checkpoint(const std::string& path);

}  // namespace mvlab
