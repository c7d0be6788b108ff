#include "mvlab/render/texture.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/core/errors.hpp"

namespace mvlab {
namespace {

// Bilinear sample of one channel at continuous pixel coordinates, clamped.
double sample_plane(std::span<const double> plane, int h, int w, double u, double v) {
  const double fx = std::clamp(u - 0.5, 0.0, w - 1.0);
  const double fy = std::clamp(v - 0.5, 0.0, h - 1.0);
  const int x0 = std::min(static_cast<int>(fx), w - 1), y0 = std::min(static_cast<int>(fy), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = fx - x0, ay = fy - y0;
  auto at = [&](int y, int x) { return plane[static_cast<std::size_t>(y) * w + x]; };
  return (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x1)) +
         ay * ((1 - ax) * at(y1, x0) + ax * at(y1, x1));
}

}  // namespace

BackprojectResult backproject_texture(const ViewStack& views, const std::vector<Camera>& cams,
                                      const TriMesh& mesh, const BackprojectOptions& opts) {
  mesh.validate();
  if (mesh.uv.empty()) throw StructuralError("backproject_texture: mesh has no uv");
  if (views.views() != static_cast<int>(cams.size()))
    throw StructuralError("backproject_texture: view and camera counts differ");
  if (views.channels() < 3) throw StructuralError("backproject_texture: views need rgb");
  const int th = opts.texture_height, tw = opts.texture_width;
  if (th <= 0 || tw <= 0) throw DomainError("backproject_texture: bad texture size");

  BackprojectResult res{Image(th, tw, 3), Image(th, tw, 1),
                        std::vector<unsigned char>(static_cast<std::size_t>(th) * tw, 0)};
  const double bias = opts.visibility_bias * std::max(mesh.bounding_diagonal(), 1e-12);
  std::vector<MeshRaster> zbuf;
  zbuf.reserve(cams.size());
  for (const auto& c : cams) zbuf.push_back(rasterize_mesh(mesh, c));
  const bool has_alpha = views.channels() >= 4;

  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const auto& t = mesh.faces[f];
    const Eigen::Vector3d normal = mesh.face_normal(f);
    Eigen::Vector2d q[3];
    for (int i = 0; i < 3; ++i) q[i] = mesh.uv[t[i]].cwiseProduct(Eigen::Vector2d(tw, th));
    const double area = (q[1] - q[0]).x() * (q[2] - q[0]).y() - (q[2] - q[0]).x() * (q[1] - q[0]).y();
    if (area == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].x(), q[1].x(), q[2].x()}))));
    const int x1 = std::min(tw - 1, static_cast<int>(std::ceil(std::max({q[0].x(), q[1].x(), q[2].x()}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({q[0].y(), q[1].y(), q[2].y()}))));
    const int y1 = std::min(th - 1, static_cast<int>(std::ceil(std::max({q[0].y(), q[1].y(), q[2].y()}))));
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx) {
        const std::size_t texel = static_cast<std::size_t>(ty) * tw + tx;
        if (res.filled[texel]) continue;
        const Eigen::Vector2d p(tx + 0.5, ty + 0.5);
        const double l0 = ((q[1] - p).x() * (q[2] - p).y() - (q[2] - p).x() * (q[1] - p).y()) / area;
        const double l1 = ((q[2] - p).x() * (q[0] - p).y() - (q[0] - p).x() * (q[2] - p).y()) / area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
        const Eigen::Vector3d point =
            l0 * mesh.vertices[t[0]] + l1 * mesh.vertices[t[1]] + l2 * mesh.vertices[t[2]];
        double wsum = 0.0;
        Eigen::Vector3d acc = Eigen::Vector3d::Zero();
        for (int v = 0; v < views.views(); ++v) {
          const Camera& cam = cams[v];
          const Eigen::Vector3d uvz = cam.project(point);
          if (!(uvz.z() > 1e-6)) continue;
          const int px = static_cast<int>(std::floor(uvz.x()));
          const int py = static_cast<int>(std::floor(uvz.y()));
          if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) continue;
          const std::size_t pix = static_cast<std::size_t>(py) * cam.width + px;
          const MeshRaster& zb = zbuf[v];
          const Eigen::Vector3d to_cam = (cam.center() - point).normalized();
          const double cosine = std::max(0.0, normal.dot(to_cam));
          if (!(cosine > 0.0)) continue;
          // Slope-scaled bias: at grazing angles depth changes by z tan(theta) / f
          // across one pixel, far more than the constant bias.
          const double slope = std::sqrt(std::max(0.0, 1.0 - cosine * cosine)) / std::max(cosine, 0.05);
          const double tol = bias + uvz.z() * slope / cam.focal;
          if (zb.face[pix] < 0 || uvz.z() > zb.depth[pix] + tol) continue;
          double wgt = std::pow(cosine, opts.cosine_power);
          if (has_alpha)
            wgt *= std::clamp(sample_plane(views.plane(v, 3), cam.height, cam.width, uvz.x(), uvz.y()), 0.0, 1.0);
          if (!(wgt > 0.0)) continue;
          for (int c = 0; c < 3; ++c)
            acc[c] += wgt * sample_plane(views.plane(v, c), cam.height, cam.width, uvz.x(), uvz.y());
          wsum += wgt;
        }
        if (wsum > 0.0) {
          for (int c = 0; c < 3; ++c) res.texture.at(c, ty, tx) = acc[c] / wsum;
          res.weight.at(0, ty, tx) = wsum;
          res.filled[texel] = 1;
        }
      }
  }
  return res;
}

}  // namespace mvlab
