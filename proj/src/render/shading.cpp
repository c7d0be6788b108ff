#include "mvlab/render/shading.hpp"

#include <algorithm>
#include <cmath>

#include "mvlab/core/errors.hpp"

namespace mvlab {

double lambert_factor(const Eigen::Vector3d& n, const Eigen::Vector3d& to_light, double ambient) {
  return std::max(ambient, n.dot(to_light.normalized()));
}

double tonemap(double linear) { return std::pow(std::clamp(linear, 0.0, 1.0), 1.0 / 2.2); }

ShadeResult lambertian_shade(const Image& albedo, const Image& normal, const Image& depth,
                             const Eigen::Vector3d& light_world, const Camera& cam,
                             double ambient) {
  if (albedo.channels() != 3 || normal.channels() != 3 || depth.channels() != 1)
    throw StructuralError("lambertian_shade: expected rgb albedo, 3-channel normals, 1-channel depth");
  if (albedo.height() != normal.height() || albedo.width() != normal.width() ||
      albedo.height() != depth.height() || albedo.width() != depth.width())
    throw StructuralError("lambertian_shade: image sizes differ");
  const Eigen::Vector3d light_cam = cam.to_camera(light_world);
  ShadeResult out{Image(albedo.height(), albedo.width(), 3), Image(albedo.height(), albedo.width(), 3)};
  for (int y = 0; y < albedo.height(); ++y)
    for (int x = 0; x < albedo.width(); ++x) {
      const Eigen::Vector3d n(normal.at(0, y, x), normal.at(1, y, x), normal.at(2, y, x));
      double factor = 1.0;
      if (n.squaredNorm() > 0.0) {
        const Eigen::Vector3d p = depth.at(0, y, x) * cam.camera_ray(x + 0.5, y + 0.5);
        factor = lambert_factor(n, light_cam - p, ambient);
      }
      for (int c = 0; c < 3; ++c) {
        out.linear.at(c, y, x) = albedo.at(c, y, x) * factor;
        out.display.at(c, y, x) = tonemap(out.linear.at(c, y, x));
      }
    }
  return out;
}

}  // namespace mvlab
