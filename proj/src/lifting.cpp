#include "facegeom/lifting.hpp"

#include "facegeom/error.hpp"

namespace facegeom {

TargetMesh lift_maps_to_mesh(const MapStack& stack) {
  const int w = stack.width(), h = stack.height();
  if (stack.mask.count() == 0)
    raise(ErrorCode::NoValidPixels, "map stack mask selects no pixels");

  TargetMesh target;
  std::vector<int> vertex_id(std::size_t(w) * h, -1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!stack.mask.at(r, c)) continue;
      vertex_id[std::size_t(r) * w + c] = target.mesh.vertex_count();
      target.mesh.vertices.emplace_back(stack.xyz.at(r, c, 0), stack.xyz.at(r, c, 1),
                                        stack.xyz.at(r, c, 2));
      target.embedding.emplace_back(stack.correspondence.at(r, c, 0),
                                    stack.correspondence.at(r, c, 1),
                                    stack.correspondence.at(r, c, 2));
      target.pixel_of_vertex.emplace_back(r, c);
    }
  }

  for (int r = 0; r + 1 < h; ++r) {
    for (int c = 0; c + 1 < w; ++c) {
      const int tl = vertex_id[std::size_t(r) * w + c];
      const int tr = vertex_id[std::size_t(r) * w + c + 1];
      const int bl = vertex_id[std::size_t(r + 1) * w + c];
      const int br = vertex_id[std::size_t(r + 1) * w + c + 1];
      if (tl < 0 || tr < 0 || bl < 0 || br < 0) continue;
      target.mesh.faces.push_back({tl, bl, br});
      target.mesh.faces.push_back({tl, br, tr});
    }
  }
  if (target.mesh.faces.empty())
    raise(ErrorCode::EmptyFace, "no fully valid 2x2 pixel quad to triangulate");
  return target;
}

MeshData target_to_mesh_data(const TargetMesh& target) {
  MeshData data;
  data.mesh = target.mesh;
  data.embedding = target.embedding;
  data.pixel = target.pixel_of_vertex;
  return data;
}

}  // namespace facegeom
