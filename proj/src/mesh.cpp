#include "facegeom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "facegeom/error.hpp"

namespace facegeom {

void validate_mesh(const TriangleMesh& mesh) {
  const int n = mesh.vertex_count();
  for (int i = 0; i < n; ++i) {
    if (!mesh.vertices[i].allFinite())
      raise(ErrorCode::ValidationError,
            "non-finite coordinate at vertex " + std::to_string(i));
  }
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& face = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= n)
        raise(ErrorCode::ValidationError,
              "face " + std::to_string(f) + " references vertex " +
                  std::to_string(face[k]) + " outside [0, " +
                  std::to_string(n) + ")");
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      raise(ErrorCode::ValidationError,
            "face " + std::to_string(f) + " repeats a vertex index");
  }
}

void validate_template(const TemplateMesh& tmpl) {
  validate_mesh(tmpl.mesh);
  if (int(tmpl.embedding.size()) != tmpl.mesh.vertex_count())
    raise(ErrorCode::DimensionMismatch,
          "embedding has " + std::to_string(tmpl.embedding.size()) +
              " entries for " + std::to_string(tmpl.mesh.vertex_count()) +
              " vertices");
  for (std::size_t i = 0; i < tmpl.embedding.size(); ++i) {
    if (!tmpl.embedding[i].allFinite())
      raise(ErrorCode::ValidationError,
            "non-finite embedding at vertex " + std::to_string(i));
  }
}

std::vector<std::vector<int>> vertex_adjacency(const TriangleMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.vertex_count());
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      adj[f[k]].push_back(f[(k + 1) % 3]);
      adj[f[k]].push_back(f[(k + 2) % 3]);
    }
  }
  for (auto& ring : adj) {
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
  }
  return adj;
}

std::vector<std::pair<int, int>> edge_list(const TriangleMesh& mesh) {
  std::vector<std::pair<int, int>> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      int a = f[k], b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

double face_area(const TriangleMesh& mesh, int face) {
  const Face& f = mesh.faces[face];
  const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
  const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
  return 0.5 * e1.cross(e2).norm();
}

std::vector<double> barycentric_vertex_areas(const TriangleMesh& mesh) {
  std::vector<double> areas(mesh.vertex_count(), 0.0);
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const double third = face_area(mesh, fi) / 3.0;
    for (int k = 0; k < 3; ++k) areas[mesh.faces[fi][k]] += third;
  }
  return areas;
}

VertexNormals vertex_normals(const TriangleMesh& mesh) {
  VertexNormals out;
  out.normals.assign(mesh.vertex_count(), Vec3::Zero());
  out.valid.assign(mesh.vertex_count(), 0);
  for (const Face& f : mesh.faces) {
    const Vec3 e1 = mesh.vertices[f[1]] - mesh.vertices[f[0]];
    const Vec3 e2 = mesh.vertices[f[2]] - mesh.vertices[f[0]];
    // cross/2 = area-weighted face normal, so degenerate faces drop out.
    const Vec3 weighted = 0.5 * e1.cross(e2);
    for (int k = 0; k < 3; ++k) out.normals[f[k]] += weighted;
  }
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    const double len = out.normals[i].norm();
    if (len > 1e-20) {
      out.normals[i] /= len;
      out.valid[i] = 1;
    } else {
      out.normals[i].setZero();
    }
  }
  return out;
}

TriangleMesh transform_mesh(const TriangleMesh& mesh,
                            const Eigen::Matrix3d& linear,
                            const Vec3& translation) {
  TriangleMesh out;
  out.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) out.vertices.push_back(linear * v + translation);
  out.faces = mesh.faces;
  return out;
}

namespace {

// One midpoint-split level; `attr` (optional, same length as vertices) is
// averaged along each split edge.
void split_once(std::vector<Vec3>& vertices, std::vector<Face>& faces,
                std::vector<Vec3>* attr) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    std::pair<int, int> key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    const int idx = int(vertices.size());
    vertices.push_back(0.5 * (vertices[a] + vertices[b]));
    if (attr) attr->push_back(0.5 * ((*attr)[a] + (*attr)[b]));
    midpoint.emplace(key, idx);
    return idx;
  };
  std::vector<Face> split;
  split.reserve(faces.size() * 4);
  for (const Face& f : faces) {
    const int ab = mid(f[0], f[1]);
    const int bc = mid(f[1], f[2]);
    const int ca = mid(f[2], f[0]);
    split.push_back({f[0], ab, ca});
    split.push_back({ab, f[1], bc});
    split.push_back({ca, bc, f[2]});
    split.push_back({ab, bc, ca});
  }
  faces.swap(split);
}

}  // namespace

TriangleMesh subdivide_midpoint(const TriangleMesh& mesh, int levels) {
  if (levels < 0 || levels > 3)
    raise(ErrorCode::ValidationError,
          "subdivision levels must be in [0, 3], got " + std::to_string(levels));
  TriangleMesh out = mesh;
  for (int l = 0; l < levels; ++l) split_once(out.vertices, out.faces, nullptr);
  return out;
}

TemplateMesh subdivide_midpoint(const TemplateMesh& tmpl, int levels) {
  if (levels < 0 || levels > 3)
    raise(ErrorCode::ValidationError,
          "subdivision levels must be in [0, 3], got " + std::to_string(levels));
  TemplateMesh out = tmpl;
  for (int l = 0; l < levels; ++l)
    split_once(out.mesh.vertices, out.mesh.faces, &out.embedding);
  return out;
}

}  // namespace facegeom
