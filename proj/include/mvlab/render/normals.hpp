#pragma once

#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"

namespace mvlab {

// Camera-space normals from a z-depth map. Each pixel is backprojected to
// P = z * ((x + 0.5 - cx) / f, (y + 0.5 - cy) / f, 1); tangents use central
// differences, falling back to one-sided differences at the image or mask
// border, and n = normalize(t_y x t_x) so surfaces facing the camera get n_z < 0.
// Pixels without a usable neighbor along either axis, or with alpha below the
// threshold, get the zero vector.
Image normals_from_depth(const Image& depth, const Camera& cam, const Image* alpha = nullptr,
                         double alpha_threshold = 0.5);

// Adds d(loss)/d(depth) to grad_depth given d(loss)/d(normal), with the same
// neighbor selection as the forward pass.
void normals_from_depth_backward(const Image& depth, const Camera& cam, const Image& grad_normal,
                                 Image& grad_depth, const Image* alpha = nullptr,
                                 double alpha_threshold = 0.5);

}  // namespace mvlab
