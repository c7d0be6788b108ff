#pragma once

#include <Eigen/Core>
#include <vector>

namespace mvlab {

// Pinhole camera, OpenCV convention: x right, y down, z forward.
// World point p maps to camera space as rotation * p + translation.
// Pixel (col, row) covers [col, col+1) x [row, row+1); its center is (col+0.5, row+0.5).
struct Camera {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double focal = 1.0;
  Eigen::Vector2d principal = Eigen::Vector2d::Zero();
  int width = 1;
  int height = 1;

  // Throws DomainError unless rotation is orthonormal within 1e-9, focal > 0 and
  // all entries are finite.
  void validate() const;

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& p) const { return rotation * p + translation; }
  Eigen::Vector3d camera_to_world_dir(const Eigen::Vector3d& d) const {
    return rotation.transpose() * d;
  }

  // World-space ray direction through continuous pixel coordinates (u, v),
  // scaled so its camera-space z component is 1. Ray parameters are therefore z-depths.
  Eigen::Vector3d ray_direction(double u, double v) const;
  // Camera-space direction with z = 1.
  Eigen::Vector3d camera_ray(double u, double v) const {
    return {(u - principal.x()) / focal, (v - principal.y()) / focal, 1.0};
  }

  // (u, v, z): continuous pixel coordinates and camera z of a world point.
  Eigen::Vector3d project(const Eigen::Vector3d& p) const;

  // Same field of view at a different resolution.
  Camera resized(int new_width, int new_height) const;

  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double focal, int width, int height);
};

// `count` cameras on a circle of `radius` around the origin at the given
// elevation, starting at azimuth `start_deg` and spaced by `step_deg`.
std::vector<Camera> orbit_cameras(int count, double radius, double elevation_deg,
                                  double start_deg, double step_deg, double fov_deg, int width,
                                  int height);

std::vector<Camera> resize_cameras(const std::vector<Camera>& cams, int width, int height);

}  // namespace mvlab
