#include "mvlab/render/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvlab/core/errors.hpp"
#include "mvlab/render/normals.hpp"

namespace mvlab {

VolumeGrid::VolumeGrid(int n, const Eigen::Vector3d& lo_, const Eigen::Vector3d& hi_)
    : resolution(n), lo(lo_), hi(hi_) {
  if (n < 2) throw DomainError("VolumeGrid: resolution must be at least 2");
  if (!((hi - lo).array() > 0.0).all()) throw DomainError("VolumeGrid: empty bounds");
  const std::size_t count = static_cast<std::size_t>(n) * n * n;
  density.assign(count, 0.0);
  color.assign(count * 3, 0.0);
}

Eigen::Vector3d VolumeGrid::position(int i, int j, int k) const {
  return lo + spacing().cwiseProduct(Eigen::Vector3d(i, j, k));
}

void VolumeGrid::validate() const {
  const std::size_t count = static_cast<std::size_t>(resolution) * resolution * resolution;
  if (resolution < 2 || density.size() != count || color.size() != 3 * count)
    throw DomainError("VolumeGrid: field sizes do not match the resolution");
  for (double d : density)
    if (!(d >= 0.0) || !std::isfinite(d)) throw DomainError("VolumeGrid: density must be >= 0");
  for (double c : color)
    if (!(c >= 0.0 && c <= 1.0)) throw DomainError("VolumeGrid: color must lie in [0, 1]");
}

Trilinear trilinear(const VolumeGrid& grid, const Eigen::Vector3d& p) {
  Trilinear s;
  const int n = grid.resolution;
  const Eigen::Vector3d f = (p - grid.lo).cwiseQuotient(grid.spacing());
  constexpr double kSlack = 1e-9;
  if ((f.array() < -kSlack).any() || (f.array() > n - 1 + kSlack).any()) return s;
  int base[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(f[a], 0.0, static_cast<double>(n - 1));
    base[a] = std::min(static_cast<int>(std::floor(c)), n - 2);
    frac[a] = c - base[a];
  }
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    s.index[corner] = grid.index(base[0] + dx, base[1] + dy, base[2] + dz);
    s.weight[corner] = (dx ? frac[0] : 1 - frac[0]) * (dy ? frac[1] : 1 - frac[1]) *
                       (dz ? frac[2] : 1 - frac[2]);
  }
  return s;
}

double sample_density(const VolumeGrid& grid, const Trilinear& s) {
  double d = 0.0;
  for (int c = 0; c < 8; ++c) d += s.weight[c] * grid.density[s.index[c]];
  return d;
}

Eigen::Vector3d sample_color(const VolumeGrid& grid, const Trilinear& s) {
  Eigen::Vector3d col = Eigen::Vector3d::Zero();
  for (int c = 0; c < 8; ++c)
    for (int ch = 0; ch < 3; ++ch) col[ch] += s.weight[c] * grid.color[3 * s.index[c] + ch];
  return col;
}

RaySegment ray_segment(const VolumeGrid& grid, const Camera& cam, int x, int y, double step) {
  RaySegment seg;
  seg.origin = cam.center();
  seg.dir = cam.ray_direction(x + 0.5, y + 0.5);
  seg.dir_norm = seg.dir.norm();
  if (!seg.origin.allFinite() || !seg.dir.allFinite())
    throw DomainError("ray_segment: camera produces non-finite rays");
  double t0 = 1e-6;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (seg.dir[a] == 0.0) {
      if (seg.origin[a] < grid.lo[a] || seg.origin[a] > grid.hi[a]) return seg;
      continue;
    }
    double ta = (grid.lo[a] - seg.origin[a]) / seg.dir[a];
    double tb = (grid.hi[a] - seg.origin[a]) / seg.dir[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return seg;
  const double length = (t1 - t0) * seg.dir_norm;
  seg.samples = std::max(1, static_cast<int>(std::ceil(length / step - 1e-9)));
  seg.t0 = t0;
  seg.dt = (t1 - t0) / seg.samples;
  return seg;
}

RenderOutput raymarch_volume(const VolumeGrid& grid, const Camera& cam, const RenderOptions& opts) {
  cam.validate();
  const double step = opts.step > 0.0 ? opts.step : grid.diagonal() / 256.0;
  const int h = cam.height, w = cam.width;
  RenderOutput out = RenderOutput::blank(h, w);
  if (opts.contribs) out.contribs.resize(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const RaySegment seg = ray_segment(grid, cam, x, y, step);
      double trans = 1.0;
      double depth_acc = 0.0;
      Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
      for (int i = 0; i < seg.samples; ++i) {
        const Trilinear s = trilinear(grid, seg.point(i));
        const double sigma = sample_density(grid, s);
        if (sigma <= 0.0) continue;
        const double att = std::exp(-sigma * seg.dt * seg.dir_norm);
        const double wgt = trans * (1.0 - att);
        rgb += wgt * sample_color(grid, s);
        depth_acc += wgt * seg.tau(i);
        if (opts.contribs && wgt > 0.0)
          out.contribs[static_cast<std::size_t>(y) * w + x].push_back({wgt, seg.tau(i)});
        trans *= att;
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

std::vector<RenderOutput> raymarch_views(const VolumeGrid& grid, const std::vector<Camera>& cams,
                                         const RenderOptions& opts) {
  std::vector<RenderOutput> out;
  out.reserve(cams.size());
  for (const auto& c : cams) out.push_back(raymarch_volume(grid, c, opts));
  return out;
}

}  // namespace mvlab
