#include "mvlab/diffusion/guidance.hpp"

#include <cmath>

#include "mvlab/core/errors.hpp"

namespace mvlab {

void GuidanceConfig::validate() const {
  if (!(lambda_c >= 0.0) || !std::isfinite(lambda_c))
    throw DomainError("guidance.lambda_c must be a finite value >= 0");
  if (!(lambda_aug >= 0.0) || !std::isfinite(lambda_aug))
    throw DomainError("guidance.lambda_aug must be a finite value >= 0");
  if (!(zero_feedback_prob >= 0.0 && zero_feedback_prob <= 1.0))
    throw DomainError("guidance.zero_feedback_prob must lie in [0, 1]");
}

ViewStack cfg_combine(const ViewStack& d_cond, const ViewStack& d_uncond, double lambda_c) {
  require_same_shape(d_cond, d_uncond, "cfg_combine");
  ViewStack out = d_cond;
  auto o = out.data();
  auto u = d_uncond.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = lambda_c * o[i] + (1.0 - lambda_c) * u[i];
  return out;
}

ViewStack guided_feedback_combine(const ViewStack& d_aug_fb, const ViewStack& d_aug_zero,
                                  const ViewStack& d_cond, const ViewStack& d_uncond,
                                  const GuidanceConfig& g) {
  require_same_shape(d_aug_fb, d_aug_zero, "guided_feedback_combine");
  require_same_shape(d_aug_fb, d_cond, "guided_feedback_combine");
  require_same_shape(d_aug_fb, d_uncond, "guided_feedback_combine");
  ViewStack out = cfg_combine(d_cond, d_uncond, g.lambda_c);
  if (g.lambda_aug == 0.0) return out;
  auto o = out.data();
  auto fb = d_aug_fb.data();
  auto zero = d_aug_zero.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += g.lambda_aug * (fb[i] - zero[i]);
  return out;
}

}  // namespace mvlab
