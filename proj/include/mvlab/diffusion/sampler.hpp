#pragma once

#include <cstdint>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/diffusion/schedule.hpp"

namespace mvlab {

struct DiffusionState {
  ViewStack x;  // noisy views x_t
  double t = 0.0;
  std::uint64_t rng_seed = 0;
};

// x_t = alpha(t) x + sigma(t) eps
ViewStack perturb(const ViewStack& x, double t, const ViewStack& eps, const NoiseSchedule& sched);

// s_t = (alpha_t x_hat - x_t) / sigma_t^2; requires t > 0.
ViewStack score_from_denoised(const ViewStack& x_t, const ViewStack& x_hat, double t,
                              const NoiseSchedule& sched);
// Inverse of score_from_denoised at fixed (x_t, t).
ViewStack denoised_from_score(const ViewStack& x_t, const ViewStack& score, double t,
                              const NoiseSchedule& sched);

// One Euler step in the rescaled variable y = x / alpha, whose noise level is
// s = sigma / alpha. Ancestral mode splits s_next into
//   s_up   = sqrt(s_next^2 (s_t^2 - s_next^2) / s_t^2)
//   s_down = sqrt(s_next^2 - s_up^2)
// and returns alpha_next * (x_hat + s_down / s_t (y - x_hat) + s_up * noise).
// Deterministic mode forces s_up = 0, which is the plain Euler ODE step.
DiffusionState euler_ancestral_step(const DiffusionState& state, const ViewStack& x_hat,
                                    double t_next, const ViewStack& noise,
                                    const NoiseSchedule& sched, bool deterministic = false);

// Linear coefficients (c_state, c_denoised) of the deterministic step:
// x_next = c_state * x_t + c_denoised * x_hat.
struct EulerCoefficients {
  double state = 0.0;
  double denoised = 0.0;
};
EulerCoefficients deterministic_euler_coefficients(double t, double t_next,
                                                   const NoiseSchedule& sched);

// x_{t_init} = alpha x_bar + sigma eps, starting point for mean-latent or SDEdit sampling.
DiffusionState mean_latent_init(const ViewStack& x_bar, double t_init, const ViewStack& eps,
                                const NoiseSchedule& sched, std::uint64_t seed = 0);

}  // namespace mvlab
