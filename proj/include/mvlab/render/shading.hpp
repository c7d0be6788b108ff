#pragma once

#include <Eigen/Core>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"

namespace mvlab {

struct ShadeResult {
  Image linear;   // albedo * max(ambient, n . l)
  Image display;  // clamp(linear, 0, 1)^(1 / 2.2)
};

// Lambertian shading of linear-space albedo under a world-space point light.
// Normals are camera-space; pixels with a zero normal keep the plain albedo.
// The light direction at each pixel is taken from the surface point backprojected
// from depth.
ShadeResult lambertian_shade(const Image& albedo, const Image& normal, const Image& depth,
                             const Eigen::Vector3d& light_world, const Camera& cam,
                             double ambient = 0.0);

// Shading factor for a single sample.
double lambert_factor(const Eigen::Vector3d& n, const Eigen::Vector3d& to_light, double ambient);

double tonemap(double linear);

}  // namespace mvlab
