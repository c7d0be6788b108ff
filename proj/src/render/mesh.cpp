#include "mvlab/render/mesh.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "mvlab/core/errors.hpp"

namespace mvlab {

void TriMesh::validate() const {
  const int n = static_cast<int>(vertices.size());
  for (const auto& f : faces)
    for (int i : f)
      if (i < 0 || i >= n) throw StructuralError("TriMesh: face index out of range");
  if (!uv.empty() && uv.size() != vertices.size())
    throw StructuralError("TriMesh: uv count does not match vertex count");
  if (!vertex_colors.empty() && vertex_colors.size() != vertices.size())
    throw StructuralError("TriMesh: vertex color count does not match vertex count");
}

Eigen::Vector3d TriMesh::face_normal(int f) const {
  const auto& t = faces[f];
  const Eigen::Vector3d c =
      (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
  const double len = c.norm();
  return len > 0.0 ? Eigen::Vector3d(c / len) : Eigen::Vector3d::Zero();
}

double TriMesh::face_area(int f) const {
  const auto& t = faces[f];
  return 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
}

Eigen::Vector3d TriMesh::centroid() const {
  Eigen::Vector3d c = Eigen::Vector3d::Zero();
  for (const auto& v : vertices) c += v;
  return vertices.empty() ? c : Eigen::Vector3d(c / static_cast<double>(vertices.size()));
}

double TriMesh::bounding_diagonal() const {
  if (vertices.empty()) return 0.0;
  Eigen::Vector3d lo = vertices.front(), hi = vertices.front();
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

int remove_degenerate_faces(TriMesh& mesh, double area_eps) {
  std::vector<std::array<int, 3>> kept;
  kept.reserve(mesh.faces.size());
  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const auto& t = mesh.faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
    if (!(mesh.face_area(f) > area_eps)) continue;
    kept.push_back(t);
  }
  const int removed = static_cast<int>(mesh.faces.size() - kept.size());
  mesh.faces = std::move(kept);
  return removed;
}

void compact_vertices(TriMesh& mesh) {
  std::vector<int> remap(mesh.vertices.size(), -1);
  int next = 0;
  for (auto& f : mesh.faces)
    for (int& i : f) {
      if (remap[i] < 0) remap[i] = next++;
      i = remap[i];
    }
  auto shrink = [&](auto& attr) {
    if (attr.empty()) return;
    std::remove_reference_t<decltype(attr)> out(next);
    for (std::size_t i = 0; i < remap.size(); ++i)
      if (remap[i] >= 0) out[remap[i]] = attr[i];
    attr = std::move(out);
  };
  shrink(mesh.vertices);
  shrink(mesh.uv);
  shrink(mesh.vertex_colors);
}

MeshRaster rasterize_mesh(const TriMesh& mesh, const Camera& cam) {
  cam.validate();
  mesh.validate();
  MeshRaster r;
  r.height = cam.height;
  r.width = cam.width;
  const std::size_t npix = static_cast<std::size_t>(r.height) * r.width;
  r.face.assign(npix, -1);
  r.depth.assign(npix, 0.0);
  r.bary.assign(npix, Eigen::Vector3d::Zero());

  std::vector<Eigen::Vector3d> proj(mesh.vertices.size());
  for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = cam.project(mesh.vertices[i]);

  for (int f = 0; f < static_cast<int>(mesh.faces.size()); ++f) {
    const auto& t = mesh.faces[f];
    const Eigen::Vector3d& p0 = proj[t[0]];
    const Eigen::Vector3d& p1 = proj[t[1]];
    const Eigen::Vector3d& p2 = proj[t[2]];
    if (!(p0.z() > 1e-6 && p1.z() > 1e-6 && p2.z() > 1e-6)) continue;  // no near clipping
    const double area = (p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y());
    if (area == 0.0) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({p0.x(), p1.x(), p2.x()}) - 0.5)));
    const int x1 = std::min(r.width - 1, static_cast<int>(std::ceil(std::max({p0.x(), p1.x(), p2.x()}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({p0.y(), p1.y(), p2.y()}) - 0.5)));
    const int y1 = std::min(r.height - 1, static_cast<int>(std::ceil(std::max({p0.y(), p1.y(), p2.y()}) - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const double l0 = ((p1.x() - px) * (p2.y() - py) - (p2.x() - px) * (p1.y() - py)) / area;
        const double l1 = ((p2.x() - px) * (p0.y() - py) - (p0.x() - px) * (p2.y() - py)) / area;
        const double l2 = 1.0 - l0 - l1;
        constexpr double kEdge = -1e-12;
        if (l0 < kEdge || l1 < kEdge || l2 < kEdge) continue;
        const double inv = l0 / p0.z() + l1 / p1.z() + l2 / p2.z();
        const double z = 1.0 / inv;
        const std::size_t pix = static_cast<std::size_t>(y) * r.width + x;
        if (r.face[pix] >= 0 && !(z < r.depth[pix])) continue;
        r.face[pix] = f;
        r.depth[pix] = z;
        r.bary[pix] = Eigen::Vector3d(l0 / p0.z(), l1 / p1.z(), l2 / p2.z()) * z;
      }
    }
  }
  return r;
}

Eigen::Vector3d sample_texture(const Image& texture, const Eigen::Vector2d& uv) {
  const int w = texture.width(), h = texture.height();
  const double fx = std::clamp(uv.x() * w - 0.5, 0.0, w - 1.0);
  const double fy = std::clamp(uv.y() * h - 0.5, 0.0, h - 1.0);
  const int x0 = std::min(static_cast<int>(fx), w - 1), y0 = std::min(static_cast<int>(fy), h - 1);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const double ax = fx - x0, ay = fy - y0;
  Eigen::Vector3d out;
  for (int c = 0; c < 3; ++c)
    out[c] = (1 - ay) * ((1 - ax) * texture.at(c, y0, x0) + ax * texture.at(c, y0, x1)) +
             ay * ((1 - ax) * texture.at(c, y1, x0) + ax * texture.at(c, y1, x1));
  return out;
}

RenderOutput render_mesh(const TriMesh& mesh, const Camera& cam, const MeshRenderOptions& opts) {
  const MeshRaster r = rasterize_mesh(mesh, cam);
  RenderOutput out = RenderOutput::blank(r.height, r.width);
  if (opts.contribs) out.contribs.resize(r.face.size());
  const bool textured = !mesh.uv.empty() && !mesh.texture.empty();
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * r.width + x;
      const int f = r.face[pix];
      Eigen::Vector3d rgb = opts.background;
      if (f >= 0) {
        const auto& t = mesh.faces[f];
        const Eigen::Vector3d& b = r.bary[pix];
        if (opts.color_field) {
          const Eigen::Vector3d p =
              b[0] * mesh.vertices[t[0]] + b[1] * mesh.vertices[t[1]] + b[2] * mesh.vertices[t[2]];
          rgb = opts.color_field(p);
        } else if (textured) {
          rgb = sample_texture(mesh.texture, b[0] * mesh.uv[t[0]] + b[1] * mesh.uv[t[1]] + b[2] * mesh.uv[t[2]]);
        } else if (!mesh.vertex_colors.empty()) {
          rgb = b[0] * mesh.vertex_colors[t[0]] + b[1] * mesh.vertex_colors[t[1]] +
                b[2] * mesh.vertex_colors[t[2]];
        } else {
          rgb = Eigen::Vector3d::Ones();
        }
        Eigen::Vector3d n = cam.rotation * mesh.face_normal(f);
        if (n.dot(cam.camera_ray(x + 0.5, y + 0.5)) > 0.0) n = -n;
        for (int c = 0; c < 3; ++c) out.normal.at(c, y, x) = n[c];
        out.alpha.at(0, y, x) = 1.0;
        out.depth.at(0, y, x) = r.depth[pix];
        if (opts.contribs) out.contribs[pix].push_back({1.0, r.depth[pix]});
      }
      for (int c = 0; c < 3; ++c) out.rgb.at(c, y, x) = rgb[c];
    }
  }
  return out;
}

std::vector<RenderOutput> render_mesh_views(const TriMesh& mesh, const std::vector<Camera>& cams,
                                            const MeshRenderOptions& opts) {
  std::vector<RenderOutput> out;
  out.reserve(cams.size());
  for (const auto& c : cams) out.push_back(render_mesh(mesh, c, opts));
  return out;
}

void write_obj(const std::string& path, const TriMesh& mesh) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << std::setprecision(9);
  for (const auto& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  const bool has_uv = !mesh.uv.empty();
  for (const auto& t : mesh.uv) os << "vt " << t.x() << ' ' << 1.0 - t.y() << '\n';
  for (const auto& f : mesh.faces) {
    os << 'f';
    for (int i : f) {
      os << ' ' << i + 1;
      if (has_uv) os << '/' << i + 1;
    }
    os << '\n';
  }
}

}  // namespace mvlab
