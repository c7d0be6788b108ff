#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvlab/diffusion/schedule.hpp"
#include "mvlab/scorelab/mixture.hpp"

namespace mvlab::scorelab {

// Score of a perturbed 1D density: s(x, t).
using ScoreFn = std::function<double(double x, double t)>;

enum class ProductMode {
  kExactProduct,  // score of the perturbed product p1 p2 / Z
  kAveraged,      // 1/2 s_t(x|c1) + 1/2 s_t(x|c2)
};

ScoreFn mixture_score(const GaussianMixture1D& m, const NoiseSchedule& sched);
ScoreFn exact_product_score(const GaussianMixture1D& m1, const GaussianMixture1D& m2,
                            const NoiseSchedule& sched);
ScoreFn averaged_score(const GaussianMixture1D& m1, const GaussianMixture1D& m2,
                       const NoiseSchedule& sched);

struct SamplerOptions {
  int n_steps = 30;
  int n_samples = 10000;
  std::uint64_t seed = 0;
  // The ODE sampler keeps any mode collapse attributable to the score alone.
  bool deterministic = true;
};

// Reverse diffusion from x_T = sigma(T) eps using euler_ancestral_step, with the
// denoised estimate recovered from the score. Sample j draws all of its noise
// from stream derive_seed(seed, j).
std::vector<double> sample_with_score(const ScoreFn& score, const NoiseSchedule& sched,
                                      const SamplerOptions& opts);

std::vector<double> sample_product(const GaussianMixture1D& m1, const GaussianMixture1D& m2,
                                   ProductMode mode, const NoiseSchedule& sched,
                                   const SamplerOptions& opts);

struct Histogram {
  double lo = -4.0;
  double hi = 4.0;
  std::vector<long> counts;
  long total = 0;  // samples inside [lo, hi)

  int bins() const { return static_cast<int>(counts.size()); }
  double bin_width() const { return (hi - lo) / bins(); }
  double center(int i) const { return lo + (i + 0.5) * bin_width(); }
  double density(int i) const;
};

Histogram make_histogram(const std::vector<double>& samples, double lo = -4.0, double hi = 4.0,
                         int bins = 128);

// KL(empirical || target) over the histogram bins. Both sides receive one
// pseudo-count per bin: q_i = (n_i + 1) / (N + B), p_i = (N P_i + 1) / (N + B)
// with P_i the exact target mass of bin i renormalized to [lo, hi).
double histogram_kl(const Histogram& hist, const GaussianMixture1D& target);

double fraction_within(const std::vector<double>& samples, double center, double radius);

struct ScorePreset {
  std::string id;
  GaussianMixture1D first;
  GaussianMixture1D second;
};

// "bimodal": mirrored 0.8/0.2 mixtures at +-1 with std 0.3; their product is the
//            symmetric equal-weight bimodal density at +-1.
// "degenerate": both factors equal to the equal-weight +-1 mixture.
// "gaussian": N(0,1) with itself.
const std::vector<ScorePreset>& score_presets();
const ScorePreset& score_preset(const std::string& id);

}  // namespace mvlab::scorelab
