#pragma once

#include <string_view>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/diffusion/schedule.hpp"
#include "mvlab/world/world_model.hpp"

namespace mvlab {

enum class FeedbackSource { kReconstruction, kZero };

// RGBD re-render of the current 3D state, injected into the augmented denoiser.
struct FeedbackPacket {
  ViewStack views;  // rgb + depth
  FeedbackSource source = FeedbackSource::kZero;

  static FeedbackPacket zero(int views, int height, int width);
  // Throws StructuralError on a bad channel count and DomainError on negative
  // depth or a non-zero "zero" packet.
  void validate() const;
};

enum class DenoiseScope { kPerView, kJoint };

inline constexpr double kDefaultFeedbackRho = 0.1;

// Posterior over prototypes given x_t, in log space:
//   log w_k = log prior_k - |x_t - alpha y_k|^2 / (2 v) - |fb - fb_k|^2 / (2 rho^2 M) + const
// with v = alpha^2 view_noise^2 + sigma^2 and M the element count of the packet.
// `view` >= 0 restricts the x_t term to that camera. Zero-source feedback adds
// no term. `condition` restricts the prior to the tagged prototypes.
std::vector<double> posterior_weights(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                                      const WorldModel& world,
                                      const FeedbackPacket* feedback = nullptr,
                                      double rho = kDefaultFeedbackRho,
                                      std::string_view condition = {}, int view = -1);

// Posterior mean E[x | x_t] over the finite mixture. Given prototype k the
// jittered data point has mean y_k + c (x_t - alpha y_k), c = alpha nu^2 / v.
ViewStack bayes_denoise(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                        const WorldModel& world, DenoiseScope scope = DenoiseScope::kPerView,
                        std::string_view condition = {});

// Per-view posterior mean whose weights also carry the feedback likelihood.
// A zero-source packet leaves the weights untouched, which reproduces the
// per-view output of bayes_denoise.
ViewStack bayes_denoise_augmented(const ViewStack& x_t, double t, const NoiseSchedule& sched,
                                  const WorldModel& world, const FeedbackPacket& feedback,
                                  double rho = kDefaultFeedbackRho,
                                  std::string_view condition = {});

}  // namespace mvlab
