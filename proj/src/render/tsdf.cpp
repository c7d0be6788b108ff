#include "mvlab/render/tsdf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mvlab/core/errors.hpp"

namespace mvlab {
namespace {

bool usable(double d) { return std::isfinite(d) && d > 0.0; }

constexpr int kMaxSamplesPerAxis = 512;

}  // namespace

TsdfVolume tsdf_integrate(const std::vector<Image>& depths, const std::vector<Camera>& cams,
                          double voxel, double trunc) {
  if (depths.empty()) throw StructuralError("tsdf_fuse: no views");
  if (depths.size() != cams.size()) throw StructuralError("tsdf_fuse: depth and camera counts differ");
  if (!(voxel > 0.0)) throw DomainError("tsdf_fuse: voxel must be positive");
  if (!(trunc >= 2.0 * voxel)) throw DomainError("tsdf_fuse: trunc must be at least 2 voxels");
  for (std::size_t v = 0; v < cams.size(); ++v) {
    cams[v].validate();
    if (depths[v].height() != cams[v].height || depths[v].width() != cams[v].width)
      throw StructuralError("tsdf_fuse: depth map does not match camera resolution");
  }

  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  bool any = false;
  for (std::size_t v = 0; v < cams.size(); ++v)
    for (int y = 0; y < cams[v].height; ++y)
      for (int x = 0; x < cams[v].width; ++x) {
        const double d = depths[v].at(0, y, x);
        if (!usable(d)) continue;
        const Eigen::Vector3d p =
            cams[v].center() + d * cams[v].ray_direction(x + 0.5, y + 0.5);
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        any = true;
      }
  TsdfVolume vol;
  if (!any) return vol;
  lo.array() -= 2.0 * trunc;
  hi.array() += 2.0 * trunc;

  ScalarField& f = vol.field;
  const Eigen::Vector3d extent = hi - lo;
  int dims[3];
  for (int a = 0; a < 3; ++a) {
    dims[a] = static_cast<int>(std::ceil(extent[a] / voxel)) + 1;
    if (dims[a] > kMaxSamplesPerAxis) throw DomainError("tsdf_fuse: voxel too small for the scene");
  }
  f.nx = dims[0];
  f.ny = dims[1];
  f.nz = dims[2];
  f.lo = lo;
  f.spacing = Eigen::Vector3d::Constant(voxel);
  const std::size_t count = static_cast<std::size_t>(f.nx) * f.ny * f.nz;
  f.values.assign(count, 0.0);
  f.valid.assign(count, 0);
  vol.weight.assign(count, 0.0);

  for (int k = 0; k < f.nz; ++k)
    for (int j = 0; j < f.ny; ++j)
      for (int i = 0; i < f.nx; ++i) {
        const Eigen::Vector3d p = f.position(i, j, k);
        double sum = 0.0, wsum = 0.0;
        for (std::size_t v = 0; v < cams.size(); ++v) {
          const Eigen::Vector3d uvz = cams[v].project(p);
          if (!(uvz.z() > 1e-6)) continue;
          const int px = static_cast<int>(std::floor(uvz.x()));
          const int py = static_cast<int>(std::floor(uvz.y()));
          if (px < 0 || py < 0 || px >= cams[v].width || py >= cams[v].height) continue;
          const double d = depths[v].at(0, py, px);
          if (!usable(d)) {
            sum += 1.0;
            wsum += 1.0;
            continue;
          }
          const double sdf = d - uvz.z();
          if (sdf < -trunc) continue;
          sum += std::min(1.0, sdf / trunc);
          wsum += 1.0;
        }
        const std::size_t idx = f.index(i, j, k);
        vol.weight[idx] = wsum;
        if (wsum > 0.0) {
          f.values[idx] = sum / wsum;
          f.valid[idx] = 1;
        }
      }
  return vol;
}

TriMesh tsdf_fuse(const std::vector<Image>& depths, const std::vector<Camera>& cams, double voxel,
                  double trunc) {
  TsdfVolume vol = tsdf_integrate(depths, cams, voxel, trunc);
  if (vol.field.values.empty()) return {};
  // Inside is where the signed distance is negative.
  for (double& v : vol.field.values) v = -v;
  return marching_cubes(vol.field, 0.0);
}

}  // namespace mvlab
