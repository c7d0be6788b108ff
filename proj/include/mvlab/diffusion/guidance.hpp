#pragma once

#include "mvlab/core/view_stack.hpp"

namespace mvlab {

struct GuidanceConfig {
  double lambda_c = 1.0;            // condition CFG scale
  double lambda_aug = 1.0;          // feedback augmentation scale
  double zero_feedback_prob = 0.2;  // feedback dropout rate of the augmented denoising loss

  // Throws DomainError on negative scales or a probability outside [0, 1].
  void validate() const;
};

// lambda_c * d_cond + (1 - lambda_c) * d_uncond
ViewStack cfg_combine(const ViewStack& d_cond, const ViewStack& d_uncond, double lambda_c);

// lambda_aug * (d_aug_fb - d_aug_zero) + lambda_c * d_cond + (1 - lambda_c) * d_uncond
//
// The zero-feedback term cancels whatever bias the augmented denoiser carries
// independently of the feedback content.
ViewStack guided_feedback_combine(const ViewStack& d_aug_fb, const ViewStack& d_aug_zero,
                                  const ViewStack& d_cond, const ViewStack& d_uncond,
                                  const GuidanceConfig& g);

}  // namespace mvlab
