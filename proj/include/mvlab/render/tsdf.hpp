#pragma once

#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"
#include "mvlab/render/marching_cubes.hpp"
#include "mvlab/render/mesh.hpp"

namespace mvlab {

// Fused truncated signed distance samples, positive in front of surfaces.
// valid marks samples observed by at least one view.
struct TsdfVolume {
  ScalarField field;
  std::vector<double> weight;
};

// Projective TSDF averaging. For a voxel at camera depth z projecting onto a
// pixel with depth d, sdf = d - z; observations with sdf < -trunc are ignored and
// the rest contribute min(1, sdf / trunc) with unit weight. Pixels without a
// finite positive depth count as free space (+1). The lattice covers the
// backprojected depth points padded by 2 * trunc.
TsdfVolume tsdf_integrate(const std::vector<Image>& depths, const std::vector<Camera>& cams,
                          double voxel, double trunc);

// Zero level set of the fused TSDF; empty when no depth is observed.
TriMesh tsdf_fuse(const std::vector<Image>& depths, const std::vector<Camera>& cams, double voxel,
                  double trunc);

}  // namespace mvlab
