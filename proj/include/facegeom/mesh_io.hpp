// PLY and OBJ mesh files. PLY carries the project's per-vertex attributes
// (embedding, intensity/high-pass texture, source pixel); OBJ is
// positions+faces only for interchange.
#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "facegeom/mesh.hpp"

namespace facegeom {

// The superset of per-vertex attributes the PLY reader/writer understands.
// Any subset may be present; sizes must match the vertex count.
struct MeshData {
  TriangleMesh mesh;
  std::optional<std::vector<Vec3>> embedding;              // properties ex ey ez
  std::optional<std::vector<double>> tau;                  // sampled texture
  std::optional<std::vector<double>> mu;                   // high-passed texture
  std::optional<std::vector<std::pair<int, int>>> pixel;   // properties row col
};

enum class PlyFormat { kBinaryLittleEndian, kAscii };

// Writes double-precision properties; binary files are little-endian. The
// same data always produces byte-identical files.
void write_ply(const std::filesystem::path& path, const MeshData& data,
               PlyFormat format = PlyFormat::kBinaryLittleEndian);
MeshData read_ply(const std::filesystem::path& path);

// Template helpers: the embedding travels as ex/ey/ez vertex properties.
void write_template_ply(const std::filesystem::path& path, const TemplateMesh& tmpl,
                        PlyFormat format = PlyFormat::kBinaryLittleEndian);
TemplateMesh read_template_ply(const std::filesystem::path& path);

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_obj(const std::filesystem::path& path);

}  // namespace facegeom
