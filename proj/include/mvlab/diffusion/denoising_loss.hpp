#pragma once

#include <cstdint>
#include <functional>

#include "mvlab/core/random.hpp"
#include "mvlab/core/view_stack.hpp"
#include "mvlab/diffusion/schedule.hpp"

namespace mvlab {

enum class LossWeighting {
  kSnr,   // (alpha_t / sigma_t)^2
  kUnit,  // 1
};

// D(x_t, t) -> predicted clean views.
using Denoiser = std::function<ViewStack(const ViewStack& x_t, double t)>;
// Draws one clean data point from the data distribution.
using CleanSampler = std::function<ViewStack(Rng& rng)>;

double loss_weight(double t, const NoiseSchedule& sched, LossWeighting weighting);

// Monte-Carlo estimate of E[1/2 w_t ||D(x_t, t) - x||^2] with t ~ U(0, T).
//
// Sample i draws (x, t, eps) from its own stream derive_seed(seed, i), so two
// denoisers evaluated with the same seed see identical (x, t, eps) triples.
double diffusion_loss(const Denoiser& denoiser, const CleanSampler& data,
                      const NoiseSchedule& sched, int n_samples, LossWeighting weighting,
                      std::uint64_t seed);

}  // namespace mvlab
