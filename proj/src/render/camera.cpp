#include "mvlab/render/camera.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "mvlab/core/errors.hpp"

namespace mvlab {

void Camera::validate() const {
  if (!rotation.allFinite() || !translation.allFinite() || !principal.allFinite() ||
      !std::isfinite(focal))
    throw DomainError("camera has non-finite parameters");
  if (!(focal > 0.0)) throw DomainError("camera focal length must be positive");
  if (width <= 0 || height <= 0) throw DomainError("camera resolution must be positive");
  const double err = (rotation * rotation.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (err > 1e-9) throw DomainError("camera rotation is not orthonormal");
}

Eigen::Vector3d Camera::ray_direction(double u, double v) const {
  return camera_to_world_dir(camera_ray(u, v));
}

Eigen::Vector3d Camera::project(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d c = to_camera(p);
  return {focal * c.x() / c.z() + principal.x(), focal * c.y() / c.z() + principal.y(), c.z()};
}

Camera Camera::resized(int new_width, int new_height) const {
  Camera out = *this;
  const double sx = static_cast<double>(new_width) / width;
  const double sy = static_cast<double>(new_height) / height;
  out.focal = focal * sx;
  out.principal = {principal.x() * sx, principal.y() * sy};
  out.width = new_width;
  out.height = new_height;
  return out;
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double focal, int width, int height) {
  const Eigen::Vector3d z = (target - eye).normalized();
  const Eigen::Vector3d x = z.cross(up).normalized();
  const Eigen::Vector3d y = z.cross(x);
  Camera cam;
  cam.rotation.row(0) = x.transpose();
  cam.rotation.row(1) = y.transpose();
  cam.rotation.row(2) = z.transpose();
  cam.translation = -cam.rotation * eye;
  cam.focal = focal;
  cam.principal = {0.5 * width, 0.5 * height};
  cam.width = width;
  cam.height = height;
  cam.validate();
  return cam;
}

std::vector<Camera> orbit_cameras(int count, double radius, double elevation_deg,
                                  double start_deg, double step_deg, double fov_deg, int width,
                                  int height) {
  constexpr double kDeg = std::numbers::pi / 180.0;
  const double focal = 0.5 * width / std::tan(0.5 * fov_deg * kDeg);
  std::vector<Camera> cams;
  cams.reserve(count);
  const double el = elevation_deg * kDeg;
  for (int i = 0; i < count; ++i) {
    const double az = (start_deg + i * step_deg) * kDeg;
    // Azimuth 0 looks at the origin from -z.
    const Eigen::Vector3d eye(radius * std::cos(el) * std::sin(az), -radius * std::sin(el),
                              -radius * std::cos(el) * std::cos(az));
    cams.push_back(Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d(0, -1, 0), focal,
                                   width, height));
  }
  return cams;
}

std::vector<Camera> resize_cameras(const std::vector<Camera>& cams, int width, int height) {
  std::vector<Camera> out;
  out.reserve(cams.size());
  for (const auto& c : cams) out.push_back(c.resized(width, height));
  return out;
}

}  // namespace mvlab
