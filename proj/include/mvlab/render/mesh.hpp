#pragma once

#include <Eigen/Core>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mvlab/core/view_stack.hpp"
#include "mvlab/render/camera.hpp"
#include "mvlab/render/render_output.hpp"

namespace mvlab {

struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<Eigen::Vector2d> uv;              // empty or one per vertex, in [0, 1]^2
  Image texture;                                // 3 channels; row 0 is v = 0
  std::vector<Eigen::Vector3d> vertex_colors;   // empty or one per vertex

  bool empty() const { return faces.empty(); }
  // Throws StructuralError on out-of-range indices or attribute size mismatch.
  void validate() const;
  Eigen::Vector3d face_normal(int f) const;  // unit, zero when degenerate
  double face_area(int f) const;
  Eigen::Vector3d centroid() const;
  double bounding_diagonal() const;
};

// Drops faces with repeated indices or area <= area_eps; returns the count removed.
int remove_degenerate_faces(TriMesh& mesh, double area_eps = 1e-14);

// Drops vertices not referenced by any face and reindexes.
void compact_vertices(TriMesh& mesh);

// Per-pixel visibility buffer. Barycentrics are perspective-correct.
struct MeshRaster {
  int height = 0;
  int width = 0;
  std::vector<int> face;                // -1 on background
  std::vector<double> depth;            // camera z, 0 on background
  std::vector<Eigen::Vector3d> bary;
};

// Z-buffered rasterization at pixel centers; depth ties go to the lower face index.
MeshRaster rasterize_mesh(const TriMesh& mesh, const Camera& cam);

using ColorField = std::function<Eigen::Vector3d(const Eigen::Vector3d& world_point)>;

struct MeshRenderOptions {
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  // Color source priority: color_field, then uv texture, then vertex colors, then white.
  ColorField color_field;
  bool contribs = false;
};

// Bilinear texture lookup with clamped borders; uv (0, 0) is the first texel corner.
Eigen::Vector3d sample_texture(const Image& texture, const Eigen::Vector2d& uv);

// Opaque render: alpha is the coverage mask, normals are the camera-space face
// normals flipped toward the camera.
RenderOutput render_mesh(const TriMesh& mesh, const Camera& cam, const MeshRenderOptions& opts = {});

std::vector<RenderOutput> render_mesh_views(const TriMesh& mesh, const std::vector<Camera>& cams,
                                            const MeshRenderOptions& opts = {});

// ASCII OBJ with vt lines when uv is present.
void write_obj(const std::string& path, const TriMesh& mesh);

}  // namespace mvlab
