// Triangle mesh containers and the discrete-geometry helpers built on them.
// Positions are in millimeters throughout the pipeline.
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace facegeom {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

// Faces are CCW when seen from the side the surface normal points to.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  int vertex_count() const { return int(vertices.size()); }
  int face_count() const { return int(faces.size()); }
};

// A template carries, next to its rest positions, per-vertex coordinates in
// the canonical embedding (unitless, roughly [-1,1]^3) that the target maps
// refer to through their correspondence channel.
struct TemplateMesh {
  TriangleMesh mesh;
  std::vector<Vec3> embedding;
};

// Throws ValidationError on out-of-range indices, repeated indices within a
// face, or non-finite coordinates.
void validate_mesh(const TriangleMesh& mesh);
void validate_template(const TemplateMesh& tmpl);

// Sorted one-ring neighbor lists, one per vertex.
std::vector<std::vector<int>> vertex_adjacency(const TriangleMesh& mesh);

// Undirected edges (i < j), sorted lexicographically.
std::vector<std::pair<int, int>> edge_list(const TriangleMesh& mesh);

double face_area(const TriangleMesh& mesh, int face);

// One third of the total area of the faces incident to each vertex.
std::vector<double> barycentric_vertex_areas(const TriangleMesh& mesh);

// Area-weighted average of incident face normals, normalized to unit length.
// A vertex whose incident faces all (near-)vanish gets normal (0,0,0) and
// valid = 0; isolated vertices likewise.
struct VertexNormals {
  std::vector<Vec3> normals;
  std::vector<uint8_t> valid;
};
VertexNormals vertex_normals(const TriangleMesh& mesh);

// v -> linear * v + translation applied to every vertex; faces untouched.
TriangleMesh transform_mesh(const TriangleMesh& mesh,
                            const Eigen::Matrix3d& linear,
                            const Vec3& translation);

// Midpoint (1-to-4) subdivision. Original vertices keep their index and
// exact coordinates; each edge gains one midpoint vertex per level.
// levels must be in [0, 3]; orientation is preserved.
TriangleMesh subdivide_midpoint(const TriangleMesh& mesh, int levels);
// Same split with embedding coordinates interpolated edge-midpoint-wise.
TemplateMesh subdivide_midpoint(const TemplateMesh& tmpl, int levels);

}  // namespace facegeom
