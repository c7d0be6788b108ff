#include "mvlab/render/marching_cubes.hpp"

#include <array>
#include <map>

#include "mvlab/core/errors.hpp"

namespace mvlab {
namespace {

// Corner c of a cube sits at offset (c & 1, (c >> 1) & 1, (c >> 2) & 1).
struct Edge {
  int a, b, axis;
};

struct CaseTable {
  std::array<Edge, 12> edges{};
  // For each of the 256 inside/outside patterns, closed loops of edge ids.
  std::array<std::vector<std::vector<int>>, 256> loops;

  CaseTable() {
    int id = 0;
    std::map<std::pair<int, int>, int> edge_id;
    for (int a = 0; a < 8; ++a)
      for (int axis = 0; axis < 3; ++axis)
        if (!(a & (1 << axis))) {
          const int b = a | (1 << axis);
          edges[id] = {a, b, axis};
          edge_id[{a, b}] = edge_id[{b, a}] = id;
          ++id;
        }

    // Faces as corner cycles, counter-clockwise seen from outside the cube.
    std::vector<std::array<int, 4>> faces;
    for (int axis = 0; axis < 3; ++axis) {
      const int i = (axis + 1) % 3, j = (axis + 2) % 3;
      for (int side = 0; side < 2; ++side) {
        std::array<int, 4> f{};
        const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
        for (int q = 0; q < 4; ++q)
          f[q] = (side << axis) | (uv[q][0] << i) | (uv[q][1] << j);
        if (side == 0) std::swap(f[1], f[3]);
        faces.push_back(f);
      }
    }

    for (int config = 0; config < 256; ++config) {
      auto inside = [&](int c) { return (config >> c) & 1; };
      std::array<int, 12> next;
      next.fill(-1);
      for (const auto& f : faces) {
        // Walking the face cycle, each inside run starts at an entry crossing
        // and ends at an exit crossing; link exit -> entry of the same run.
        int entry = -1, first_exit = -1;
        for (int q = 0; q < 4; ++q) {
          const int c0 = f[q], c1 = f[(q + 1) % 4];
          if (inside(c0) == inside(c1)) continue;
          const int e = edge_id[{c0, c1}];
          if (inside(c1)) {
            entry = e;
          } else if (entry >= 0) {
            next[e] = entry;
            entry = -1;
          } else {
            first_exit = e;
          }
        }
        if (first_exit >= 0) next[first_exit] = entry;
      }
      std::array<bool, 12> used{};
      for (int e = 0; e < 12; ++e) {
        if (next[e] < 0 || used[e]) continue;
        std::vector<int> loop;
        for (int cur = e; !used[cur]; cur = next[cur]) {
          used[cur] = true;
          loop.push_back(cur);
        }
        loops[config].push_back(std::move(loop));
      }
    }
  }
};

const CaseTable& table() {
  static const CaseTable t;
  return t;
}

}  // namespace

ScalarField density_field(const VolumeGrid& grid) {
  ScalarField f;
  f.nx = f.ny = f.nz = grid.resolution;
  f.lo = grid.lo;
  f.spacing = grid.spacing();
  f.values = grid.density;
  return f;
}

TriMesh marching_cubes(const ScalarField& field, double iso) {
  if (field.nx < 2 || field.ny < 2 || field.nz < 2)
    throw DomainError("marching_cubes: need at least 2 samples per axis");
  if (field.values.size() != static_cast<std::size_t>(field.nx) * field.ny * field.nz)
    throw StructuralError("marching_cubes: value count does not match dimensions");
  const CaseTable& tab = table();
  TriMesh mesh;
  // One vertex per lattice edge, keyed by (lower sample, axis).
  std::vector<int> edge_vertex(field.values.size() * 3, -1);

  for (int k = 0; k + 1 < field.nz; ++k)
    for (int j = 0; j + 1 < field.ny; ++j)
      for (int i = 0; i + 1 < field.nx; ++i) {
        std::array<std::size_t, 8> idx;
        int config = 0;
        bool ok = true;
        for (int c = 0; c < 8; ++c) {
          idx[c] = field.index(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
          if (!field.valid.empty() && !field.valid[idx[c]]) ok = false;
          if (field.values[idx[c]] > iso) config |= 1 << c;
        }
        if (!ok || config == 0 || config == 255) continue;
        auto vertex_for = [&](int e) {
          const Edge& ed = tab.edges[e];
          const std::size_t lower = idx[ed.a];
          int& slot = edge_vertex[lower * 3 + ed.axis];
          if (slot < 0) {
            const double fa = field.values[idx[ed.a]], fb = field.values[idx[ed.b]];
            const double t = (iso - fa) / (fb - fa);
            const int ci = static_cast<int>(lower % field.nx);
            const int cj = static_cast<int>((lower / field.nx) % field.ny);
            const int ck = static_cast<int>(lower / (static_cast<std::size_t>(field.nx) * field.ny));
            Eigen::Vector3d p = field.position(ci, cj, ck);
            p[ed.axis] += t * field.spacing[ed.axis];
            slot = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(p);
          }
          return slot;
        };
        for (const auto& loop : tab.loops[config]) {
          if (loop.size() == 3) {
            mesh.faces.push_back({vertex_for(loop[0]), vertex_for(loop[2]), vertex_for(loop[1])});
            continue;
          }
          // A plain fan can produce a triangle lying in a cube face when the loop
          // crosses an ambiguous face twice; fanning around the loop centroid,
          // which is strictly inside the cube, avoids that.
          std::vector<int> ring;
          Eigen::Vector3d center = Eigen::Vector3d::Zero();
          for (int e : loop) {
            ring.push_back(vertex_for(e));
            center += mesh.vertices[ring.back()];
          }
          const int c = static_cast<int>(mesh.vertices.size());
          mesh.vertices.push_back(center / static_cast<double>(ring.size()));
          for (std::size_t q = 0; q < ring.size(); ++q)
            mesh.faces.push_back({c, ring[(q + 1) % ring.size()], ring[q]});
        }
      }
  remove_degenerate_faces(mesh, 0.0);
  compact_vertices(mesh);
  return mesh;
}

TriMesh marching_cubes(const VolumeGrid& grid, double iso) {
  return marching_cubes(density_field(grid), iso);
}

}  // namespace mvlab
