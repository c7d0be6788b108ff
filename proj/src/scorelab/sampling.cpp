#include "mvlab/scorelab/sampling.hpp"

#include <cmath>

#include "mvlab/core/errors.hpp"
#include "mvlab/core/random.hpp"
#include "mvlab/diffusion/sampler.hpp"

namespace mvlab::scorelab {

ScoreFn mixture_score(const GaussianMixture1D& m, const NoiseSchedule& sched) {
  m.validate();
  return [m, sched](double x, double t) { return perturbed_score_1d(m, x, t, sched); };
}

ScoreFn exact_product_score(const GaussianMixture1D& m1, const GaussianMixture1D& m2,
                            const NoiseSchedule& sched) {
  return mixture_score(product_mixture_1d(m1, m2), sched);
}

ScoreFn averaged_score(const GaussianMixture1D& m1, const GaussianMixture1D& m2,
                       const NoiseSchedule& sched) {
  m1.validate();
  m2.validate();
  return [m1, m2, sched](double x, double t) {
    return 0.5 * perturbed_score_1d(m1, x, t, sched) + 0.5 * perturbed_score_1d(m2, x, t, sched);
  };
}

std::vector<double> sample_with_score(const ScoreFn& score, const NoiseSchedule& sched,
                                      const SamplerOptions& opts) {
  if (opts.n_steps <= 0 || opts.n_samples <= 0)
    throw DomainError("sample_with_score: n_steps and n_samples must be positive");
  const int n = opts.n_samples;
  std::vector<Rng> streams;
  streams.reserve(n);
  for (int j = 0; j < n; ++j) streams.emplace_back(derive_seed(opts.seed, static_cast<std::uint64_t>(j)));

  const double T = sched.terminal_time();
  DiffusionState state{ViewStack(1, 1, 1, n), T, opts.seed};
  for (int j = 0; j < n; ++j) state.x[j] = sched.sigma(T) * standard_normal(streams[j]);

  const std::vector<double> times = sched.time_grid(opts.n_steps);
  ViewStack noise(1, 1, 1, n);
  ViewStack x_hat(1, 1, 1, n);
  for (int i = 0; i < opts.n_steps; ++i) {
    const double t = times[i];
    const double a = sched.alpha(t);
    const double s2 = sched.sigma(t) * sched.sigma(t);
    for (int j = 0; j < n; ++j) {
      const double x = state.x[j];
      x_hat[j] = (x + s2 * score(x, t)) / a;
    }
    if (!opts.deterministic)
      for (int j = 0; j < n; ++j) noise[j] = standard_normal(streams[j]);
    state = euler_ancestral_step(state, x_hat, times[i + 1], noise, sched, opts.deterministic);
  }
  return {state.x.data().begin(), state.x.data().end()};
}

std::vector<double> sample_product(const GaussianMixture1D& m1, const GaussianMixture1D& m2,
                                   ProductMode mode, const NoiseSchedule& sched,
                                   const SamplerOptions& opts) {
  const ScoreFn fn = mode == ProductMode::kExactProduct ? exact_product_score(m1, m2, sched)
                                                        : averaged_score(m1, m2, sched);
  return sample_with_score(fn, sched, opts);
}

double Histogram::density(int i) const {
  if (total == 0) return 0.0;
  return static_cast<double>(counts[i]) / (static_cast<double>(total) * bin_width());
}

Histogram make_histogram(const std::vector<double>& samples, double lo, double hi, int bins) {
  if (bins <= 0 || !(hi > lo)) throw DomainError("make_histogram: need bins > 0 and hi > lo");
  Histogram h{lo, hi, std::vector<long>(bins, 0), 0};
  for (double x : samples) {
    if (!(x >= lo && x < hi)) continue;
    int b = static_cast<int>((x - lo) / h.bin_width());
    if (b >= bins) b = bins - 1;
    ++h.counts[b];
    ++h.total;
  }
  return h;
}

double histogram_kl(const Histogram& hist, const GaussianMixture1D& target) {
  const int B = hist.bins();
  const double N = static_cast<double>(hist.total);
  std::vector<double> mass(B);
  double mass_total = 0.0;
  for (int i = 0; i < B; ++i) {
    mass[i] = interval_mass_1d(target, hist.lo + i * hist.bin_width(),
                               hist.lo + (i + 1) * hist.bin_width());
    mass_total += mass[i];
  }
  double kl = 0.0;
  for (int i = 0; i < B; ++i) {
    const double q = (hist.counts[i] + 1.0) / (N + B);
    const double p = (N * mass[i] / mass_total + 1.0) / (N + B);
    kl += q * std::log(q / p);
  }
  return kl;
}

double fraction_within(const std::vector<double>& samples, double center, double radius) {
  if (samples.empty()) return 0.0;
  long hits = 0;
  for (double x : samples)
    if (std::abs(x - center) <= radius) ++hits;
  return static_cast<double>(hits) / samples.size();
}

const std::vector<ScorePreset>& score_presets() {
  static const std::vector<ScorePreset> presets = {
      {"bimodal", {{-1.0, 1.0}, {0.3, 0.3}, {0.8, 0.2}}, {{-1.0, 1.0}, {0.3, 0.3}, {0.2, 0.8}}},
      {"degenerate", {{-1.0, 1.0}, {0.3, 0.3}, {0.5, 0.5}}, {{-1.0, 1.0}, {0.3, 0.3}, {0.5, 0.5}}},
      {"gaussian", single_gaussian(0.0, 1.0), single_gaussian(0.0, 1.0)},
  };
  return presets;
}

const ScorePreset& score_preset(const std::string& id) {
  for (const auto& p : score_presets())
    if (p.id == id) return p;
  throw LookupError("unknown score preset '" + id + "'");
}

}  // namespace mvlab::scorelab
