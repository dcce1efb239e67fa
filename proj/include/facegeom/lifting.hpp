// Lifts a map stack into a triangle mesh: one vertex per valid pixel, two
// triangles per fully valid 2x2 pixel quad.
#pragma once

#include <utility>
#include <vector>

#include "facegeom/maps.hpp"
#include "facegeom/mesh.hpp"
#include "facegeom/mesh_io.hpp"

namespace facegeom {

// The lifted target keeps, per vertex, the source pixel and the canonical
// embedding coordinates from the correspondence map.
struct TargetMesh {
  TriangleMesh mesh;
  std::vector<std::pair<int, int>> pixel_of_vertex;  // (row, col)
  std::vector<Vec3> embedding;
};

// Vertices are numbered in row-major pixel scan order. For a quad with
// corners TL=(r,c), TR=(r,c+1), BL=(r+1,c), BR=(r+1,c+1) all valid, the two
// triangles split along the TL-BR diagonal: (TL,BL,BR) and (TL,BR,TR), which
// winds counter-clockwise seen from the camera (+z looking down -z, y up).
// Throws NoValidPixels when the mask is empty and EmptyFace when no quad is
// fully valid.
TargetMesh lift_maps_to_mesh(const MapStack& stack);

MeshData target_to_mesh_data(const TargetMesh& target);

}  // namespace facegeom
