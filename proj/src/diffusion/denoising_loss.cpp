#include "mvlab/diffusion/denoising_loss.hpp"

#include "mvlab/core/errors.hpp"
#include "mvlab/diffusion/sampler.hpp"

namespace mvlab {

double loss_weight(double t, const NoiseSchedule& sched, LossWeighting weighting) {
  if (weighting == LossWeighting::kUnit) return 1.0;
  const double r = sched.alpha(t) / sched.sigma(t);
  return r * r;
}

double diffusion_loss(const Denoiser& denoiser, const CleanSampler& data,
                      const NoiseSchedule& sched, int n_samples, LossWeighting weighting,
                      std::uint64_t seed) {
  if (n_samples <= 0) throw DomainError("diffusion_loss: n_samples must be positive");
  double total = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    ViewStack x = data(rng);
    double u = 0.0;
    while (u == 0.0) u = uniform01(rng);
    const double t = u * sched.terminal_time();
    ViewStack eps = gaussian_like(x, rng);
    ViewStack x_t = perturb(x, t, eps, sched);
    ViewStack d = denoiser(x_t, t);
    require_same_shape(d, x, "diffusion_loss denoiser output");
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double r = d[k] - x[k];
      sq += r * r;
    }
    total += 0.5 * loss_weight(t, sched, weighting) * sq;
  }
  return total / n_samples;
}

}  // namespace mvlab
