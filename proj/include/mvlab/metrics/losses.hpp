#pragma once

#include <Eigen/Core>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/diffusion/schedule.hpp"
#include "mvlab/render/mesh.hpp"
#include "mvlab/render/render_output.hpp"

namespace mvlab {

struct LossWeights {
  // Channel weights of the RGBAD L1 term.
  double rgb = 1.0;
  double alpha = 1.0;
  double depth = 0.1;
  // Term weights of the fitting objective.
  double l1 = 1.0;
  double perceptual = 1.0;
  double normal_tv = 0.01;
  double entropy = 0.001;
  double laplacian = 0.1;
  double normal_consistency = 0.1;

  // Throws DomainError on negative or non-finite weights.
  void validate() const;
};

// Gradients of a scalar loss with respect to the images of a RenderOutput.
struct RenderGrad {
  Image rgb, alpha, depth, normal;
  static RenderGrad zeros(int height, int width);
};

// Channel-weighted mean absolute difference:
//   sum_c w_c mean_p |r_c - t_c| / sum_c w_c
// over the rgb (3 channels sharing w.rgb), alpha and depth channels. Adds
// d/d(render) into `grad` when given; sign(0) = 0.
double l1_rgbad(const RenderOutput& render, const RenderOutput& target, const LossWeights& w,
                RenderGrad* grad = nullptr);
// Same on stacks of 5 (RGBAD) or 3 (rgb only) channels, averaged over views.
double l1_rgbad(const ViewStack& render, const ViewStack& target, const LossWeights& w);

// alpha_t / sqrt(alpha_t^2 + sigma_t^2)
double rend_weight(double t, const NoiseSchedule& sched);

inline constexpr double kTvEpsilon = 1e-6;

// sum over channels and pixels of (|m g|^2 + eps^2)^{3/4} - eps^{3/2}, where g
// is the forward-difference gradient (zero past the last row/column) of one
// channel and m the mask value at that pixel. Adds d/d(normal) into `grad`.
double normal_tv_l15(const Image& normal, const Image& mask, Image* grad = nullptr);

// 3x3 min filter applied `iterations` times; the window is clipped at borders.
Image erode_mask(const Image& mask, int iterations = 2);

// Discretized contribution density along one ray.
struct RayProfile {
  std::vector<double> taus;
  std::vector<double> p;
  std::vector<double> delta_tau;
  double alpha = 0.0;

  // Throws StructuralError on size mismatch, DomainError on negative p or
  // when sum p dtau differs from alpha by more than 1e-6.
  void validate() const;
};

// -sum p_i log(p_i) dtau_i - (1 - alpha) log((1 - alpha) / d), 0 log 0 := 0.
// Optional partial derivatives with respect to p_i and alpha (treated as
// independent); p_i = 0 contributes a zero partial.
double ray_entropy(const RayProfile& ray, double d = 1.0, std::vector<double>* grad_p = nullptr,
                   double* grad_alpha = nullptr);

// Mean over non-isolated vertices of |centroid(neighbors) - v|^2.
double laplacian_smoothing(const TriMesh& mesh, std::vector<Eigen::Vector3d>* grad = nullptr);

// Mean over pairs of faces sharing an edge of 1 - cos(angle between normals).
double normal_consistency(const TriMesh& mesh);

// sum_{m,n} w_m w_n |tau_m - tau_n|
double depth_distortion_pixel(const RayContribs& contribs);

// Total depth distortion over all pixels divided by total alpha (0 when alpha is 0).
double mdd(const RenderOutput& render);
double mdd(const std::vector<RenderOutput>& renders);

// Mean over scales 1, 1/2, 1/4 of the mean squared difference between
// locally contrast-normalized images (per channel, 3x3 windows clipped at
// borders). Writes d/d(a) into `grad_a` when given.
double patch_perceptual(const Image& a, const Image& b, Image* grad_a = nullptr);

double psnr(const Image& a, const Image& b, double peak = 1.0);

}  // namespace mvlab
