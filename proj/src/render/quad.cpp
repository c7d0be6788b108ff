#include "mvlab/render/quad.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>

#include "mvlab/core/errors.hpp"

namespace mvlab {

QuadCoverage quad_coverage(const TexturedQuad& quad, const Camera& cam) {
  cam.validate();
  if (quad.texture.channels() != 3 || quad.texture.empty())
    throw StructuralError("TexturedQuad: texture must be a non-empty rgb image");
  const int tw = quad.texture.width(), th = quad.texture.height();
  const std::size_t npix = static_cast<std::size_t>(cam.width) * cam.height;
  QuadCoverage cov{std::vector<int>(npix, -1), std::vector<double>(npix, 0.0)};
  const Eigen::Vector3d n = quad.half_u.cross(quad.half_v);
  const Eigen::Vector3d origin = cam.center();
  const double uu = quad.half_u.squaredNorm(), vv = quad.half_v.squaredNorm();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d d = cam.ray_direction(x + 0.5, y + 0.5);
      const double denom = n.dot(d);
      if (denom == 0.0) continue;
      const double tau = n.dot(quad.center - origin) / denom;
      if (!(tau > 1e-6)) continue;
      const Eigen::Vector3d rel = origin + tau * d - quad.center;
      const double s = rel.dot(quad.half_u) / uu;
      const double t = rel.dot(quad.half_v) / vv;
      if (std::abs(s) > 1.0 || std::abs(t) > 1.0) continue;
      const int tx = std::min(static_cast<int>(std::floor((s + 1.0) * 0.5 * tw)), tw - 1);
      const int ty = std::min(static_cast<int>(std::floor((t + 1.0) * 0.5 * th)), th - 1);
      const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
      cov.texel[pix] = ty * tw + tx;
      cov.depth[pix] = tau;
    }
  return cov;
}

RenderOutput render_quad(const TexturedQuad& quad, const Camera& cam,
                         const Eigen::Vector3d& background) {
  const QuadCoverage cov = quad_coverage(quad, cam);
  RenderOutput out = RenderOutput::blank(cam.height, cam.width);
  Eigen::Vector3d n = cam.rotation * quad.normal();
  const std::size_t tpix = quad.texture.pixels();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * cam.width + x;
      const int texel = cov.texel[pix];
      if (texel < 0) {
        for (int c = 0; c < 3; ++c) out.rgb.at(c, y, x) = background[c];
        continue;
      }
      for (int c = 0; c < 3; ++c) out.rgb.at(c, y, x) = quad.texture.data()[c * tpix + texel];
      out.alpha.at(0, y, x) = 1.0;
      out.depth.at(0, y, x) = cov.depth[pix];
      const Eigen::Vector3d nn = n.dot(cam.camera_ray(x + 0.5, y + 0.5)) > 0.0 ? Eigen::Vector3d(-n) : n;
      for (int c = 0; c < 3; ++c) out.normal.at(c, y, x) = nn[c];
    }
  return out;
}

}  // namespace mvlab
