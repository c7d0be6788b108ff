#include "mvlab/render/splats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "mvlab/core/errors.hpp"
#include "mvlab/render/normals.hpp"

namespace mvlab {

void SplatSet::add(const Eigen::Vector3d& center, double scale, double opacity,
                   const Eigen::Vector3d& color) {
  centers.push_back(center);
  scales.push_back(scale);
  opacities.push_back(opacity);
  colors.push_back(color);
}

void SplatSet::append(const SplatSet& other) {
  centers.insert(centers.end(), other.centers.begin(), other.centers.end());
  scales.insert(scales.end(), other.scales.begin(), other.scales.end());
  opacities.insert(opacities.end(), other.opacities.begin(), other.opacities.end());
  colors.insert(colors.end(), other.colors.begin(), other.colors.end());
}

void SplatSet::validate() const {
  const std::size_t m = centers.size();
  if (scales.size() != m || opacities.size() != m || colors.size() != m)
    throw DomainError("SplatSet: attribute arrays differ in length");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(scales[i] > 0.0)) throw DomainError("SplatSet: scales must be positive");
    if (!(opacities[i] > 0.0 && opacities[i] <= 1.0))
      throw DomainError("SplatSet: opacities must lie in (0, 1]");
    if (!centers[i].allFinite() || !colors[i].allFinite())
      throw DomainError("SplatSet: non-finite splat");
  }
}

namespace {

struct Projected {
  double u, v, z, radius;
  std::size_t src;
};

auto sort_key(const Projected& p, const SplatSet& s) {
  const auto& c = s.colors[p.src];
  return std::make_tuple(p.z, p.u, p.v, s.scales[p.src], s.opacities[p.src], c.x(), c.y(), c.z());
}

}  // namespace

std::vector<std::vector<SplatFragment>> splat_fragments(const SplatSet& splats, const Camera& cam) {
  cam.validate();
  splats.validate();
  const int h = cam.height, w = cam.width;
  std::vector<Projected> proj;
  proj.reserve(splats.size());
  for (std::size_t i = 0; i < splats.size(); ++i) {
    const Eigen::Vector3d p = cam.project(splats.centers[i]);
    if (!(p.z() > 1e-6)) continue;
    proj.push_back({p.x(), p.y(), p.z(), cam.focal * splats.scales[i] / p.z(), i});
  }
  std::sort(proj.begin(), proj.end(), [&](const Projected& a, const Projected& b) {
    return sort_key(a, splats) < sort_key(b, splats);
  });

  std::vector<std::vector<SplatFragment>> frags(static_cast<std::size_t>(h) * w);
  for (const Projected& p : proj) {
    const double reach = 3.0 * p.radius;
    const int x0 = std::max(0, static_cast<int>(std::floor(p.u - reach - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(p.u + reach - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(p.v - reach - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(p.v + reach - 0.5)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double du = x + 0.5 - p.u;
        const double dv = y + 0.5 - p.v;
        const double d2 = du * du + dv * dv;
        if (d2 > 9.0 * p.radius * p.radius) continue;
        const double a = splats.opacities[p.src] * std::exp(-d2 / (2.0 * p.radius * p.radius));
        frags[static_cast<std::size_t>(y) * w + x].push_back({p.src, a, p.z});
      }
  }
  return frags;
}

RenderOutput composite_splats(const SplatSet& splats, const Camera& cam, const SplatOptions& opts) {
  const auto frags = splat_fragments(splats, cam);
  const int h = cam.height, w = cam.width;
  RenderOutput out = RenderOutput::blank(h, w);
  if (opts.contribs) out.contribs.resize(frags.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * w + x;
      double trans = 1.0;
      double depth_acc = 0.0;
      Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
      for (const SplatFragment& f : frags[pix]) {
        const double wgt = f.a * trans;
        rgb += wgt * splats.colors[f.splat];
        depth_acc += wgt * f.z;
        if (opts.contribs && wgt > 0.0) out.contribs[pix].push_back({wgt, f.z});
        trans *= 1.0 - f.a;
      }
      const double alpha = 1.0 - trans;
      rgb += trans * opts.background;
      for (int c = 0; c < 3; ++c) out.rgb.at(c, y, x) = rgb[c];
      out.alpha.at(0, y, x) = alpha;
      out.depth.at(0, y, x) = depth_acc / std::max(alpha, 1e-6);
    }
  }
  out.normal = normals_from_depth(out.depth, cam, &out.alpha, opts.normal_alpha_threshold);
  return out;
}

std::vector<RenderOutput> composite_views(const SplatSet& splats, const std::vector<Camera>& cams,
                                          const SplatOptions& opts) {
  std::vector<RenderOutput> out;
  out.reserve(cams.size());
  for (const auto& c : cams) out.push_back(composite_splats(splats, c, opts));
  return out;
}

}  // namespace mvlab
