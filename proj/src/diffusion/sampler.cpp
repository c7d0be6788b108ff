#include "mvlab/diffusion/sampler.hpp"

#include <cmath>
#include <sstream>

#include "mvlab/core/errors.hpp"

namespace mvlab {

ViewStack perturb(const ViewStack& x, double t, const ViewStack& eps, const NoiseSchedule& sched) {
  require_same_shape(x, eps, "perturb");
  sched.check_time(t);
  return axpby(sched.alpha(t), x, sched.sigma(t), eps);
}

ViewStack score_from_denoised(const ViewStack& x_t, const ViewStack& x_hat, double t,
                              const NoiseSchedule& sched) {
  require_same_shape(x_t, x_hat, "score_from_denoised");
  sched.check_time(t);
  const double s = sched.sigma(t);
  if (!(s > 0.0)) throw DomainError("score_from_denoised: sigma(t) = 0, score undefined at t = 0");
  const double inv = 1.0 / (s * s);
  return axpby(sched.alpha(t) * inv, x_hat, -inv, x_t);
}

ViewStack denoised_from_score(const ViewStack& x_t, const ViewStack& score, double t,
                              const NoiseSchedule& sched) {
  require_same_shape(x_t, score, "denoised_from_score");
  sched.check_time(t);
  const double a = sched.alpha(t);
  const double s = sched.sigma(t);
  return axpby(1.0 / a, x_t, s * s / a, score);
}

DiffusionState euler_ancestral_step(const DiffusionState& state, const ViewStack& x_hat,
                                    double t_next, const ViewStack& noise,
                                    const NoiseSchedule& sched, bool deterministic) {
  require_same_shape(state.x, x_hat, "euler_ancestral_step");
  require_same_shape(state.x, noise, "euler_ancestral_step noise");
  sched.check_time(state.t);
  sched.check_time(t_next);
  if (!(t_next >= 0.0 && t_next < state.t)) {
    std::ostringstream msg;
    msg << "euler_ancestral_step: need 0 <= t_next < t, got t=" << state.t
        << " t_next=" << t_next;
    throw OrderingError(msg.str());
  }

  const double a_t = sched.alpha(state.t);
  const double s_t = sched.ratio(state.t);
  const double a_n = sched.alpha(t_next);
  const double s_n = sched.ratio(t_next);

  double s_up = 0.0;
  double s_down = s_n;
  if (!deterministic && s_n > 0.0) {
    s_up = std::sqrt(s_n * s_n * (s_t * s_t - s_n * s_n) / (s_t * s_t));
    s_down = std::sqrt(std::max(0.0, s_n * s_n - s_up * s_up));
  }

  DiffusionState next{x_hat, t_next, state.rng_seed};
  if (s_n > 0.0) {
    const double keep = s_down / s_t;
    auto out = next.x.data();
    auto xs = state.x.data();
    auto nz = noise.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double y = xs[i] / a_t;
      out[i] = a_n * (out[i] + keep * (y - out[i]) + s_up * nz[i]);
    }
  } else if (a_n != 1.0) {
    next.x *= a_n;
  }
  return next;
}

EulerCoefficients deterministic_euler_coefficients(double t, double t_next,
                                                   const NoiseSchedule& sched) {
  const double keep = sched.ratio(t_next) / sched.ratio(t);
  const double a_n = sched.alpha(t_next);
  return {a_n * keep / sched.alpha(t), a_n * (1.0 - keep)};
}

DiffusionState mean_latent_init(const ViewStack& x_bar, double t_init, const ViewStack& eps,
                                const NoiseSchedule& sched, std::uint64_t seed) {
  require_same_shape(x_bar, eps, "mean_latent_init");
  sched.check_time(t_init);
  if (!(t_init > 0.0)) throw DomainError("mean_latent_init: t_init = 0 is a degenerate start");
  return {perturb(x_bar, t_init, eps, sched), t_init, seed};
}

}  // namespace mvlab
