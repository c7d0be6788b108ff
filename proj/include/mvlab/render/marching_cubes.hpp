#pragma once

#include <Eigen/Core>
#include <vector>

#include "mvlab/render/mesh.hpp"
#include "mvlab/render/volume.hpp"

namespace mvlab {

// Vertex-centered scalar samples on an nx x ny x nz lattice.
struct ScalarField {
  int nx = 0, ny = 0, nz = 0;
  Eigen::Vector3d lo = Eigen::Vector3d::Zero();
  Eigen::Vector3d spacing = Eigen::Vector3d::Ones();
  std::vector<double> values;
  std::vector<unsigned char> valid;  // empty means every sample is valid

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * ny + j) * nx + i;
  }
  Eigen::Vector3d position(int i, int j, int k) const {
    return lo + spacing.cwiseProduct(Eigen::Vector3d(i, j, k));
  }
};

ScalarField density_field(const VolumeGrid& grid);

// Iso-surface of {value > iso}. Each cube is polygonized face by face: on every
// cube face the inside corners form runs, and each run contributes one segment
// between its crossing points. Neighbouring cubes derive identical segments on a
// shared face, so the surface is closed wherever it does not leave the lattice or
// touch an invalid sample. Cells with any invalid corner are skipped. Triangles
// are wound counter-clockwise seen from outside (normals point toward lower values).
TriMesh marching_cubes(const ScalarField& field, double iso);
TriMesh marching_cubes(const VolumeGrid& grid, double iso);

}  // namespace mvlab
