#pragma once

#include <vector>

#include "mvlab/diffusion/schedule.hpp"

namespace mvlab::scorelab {

struct GaussianMixture1D {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<double> weights;

  std::size_t size() const { return means.size(); }
  // Throws StructuralError/DomainError on ragged lists, stds <= 0 or weights off the simplex.
  void validate() const;
};

GaussianMixture1D single_gaussian(double mean, double std);

// Each component N(mu_i, s_i^2) becomes N(alpha_t mu_i, alpha_t^2 s_i^2 + sigma_t^2).
double perturbed_log_density_1d(const GaussianMixture1D& m, double x, double t,
                                const NoiseSchedule& sched);
double perturbed_density_1d(const GaussianMixture1D& m, double x, double t,
                            const NoiseSchedule& sched);
// d/dx log of the perturbed density, evaluated in log-space.
double perturbed_score_1d(const GaussianMixture1D& m, double x, double t,
                          const NoiseSchedule& sched);

double density_1d(const GaussianMixture1D& m, double x);
// Probability mass of [lo, hi].
double interval_mass_1d(const GaussianMixture1D& m, double lo, double hi);

// Normalized product p1 * p2 / Z as a mixture over component pairs (i, j).
GaussianMixture1D product_mixture_1d(const GaussianMixture1D& m1, const GaussianMixture1D& m2);

}  // namespace mvlab::scorelab
