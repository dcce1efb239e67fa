#include "facegeom/mesh_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "facegeom/error.hpp"

namespace facegeom {

namespace {

// %.17g survives a text round trip for doubles and is locale-independent
// via snprintf with the C locale formatting of this program.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

enum class PlyType { kInt8, kUint8, kInt16, kUint16, kInt32, kUint32, kFloat32, kFloat64 };

PlyType parse_type(const std::string& t, const std::filesystem::path& path) {
  if (t == "char" || t == "int8") return PlyType::kInt8;
  if (t == "uchar" || t == "uint8") return PlyType::kUint8;
  if (t == "short" || t == "int16") return PlyType::kInt16;
  if (t == "ushort" || t == "uint16") return PlyType::kUint16;
  if (t == "int" || t == "int32") return PlyType::kInt32;
  if (t == "uint" || t == "uint32") return PlyType::kUint32;
  if (t == "float" || t == "float32") return PlyType::kFloat32;
  if (t == "double" || t == "float64") return PlyType::kFloat64;
  raise(ErrorCode::MalformedHeader,
        "unsupported PLY property type '" + t + "' in " + path.string());
}

struct PlyProperty {
  bool is_list = false;
  PlyType count_type = PlyType::kUint8;
  PlyType value_type = PlyType::kFloat64;
  std::string name;
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> props;
};

template <typename T>
double read_raw(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if constexpr (sizeof(T) > 1) {
    if (std::endian::native == std::endian::big) {
      char* p = reinterpret_cast<char*>(&v);
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
    }
  }
  return double(v);
}

double read_binary_scalar(std::istream& in, PlyType t) {
  switch (t) {
    case PlyType::kInt8: return read_raw<int8_t>(in);
    case PlyType::kUint8: return read_raw<uint8_t>(in);
    case PlyType::kInt16: return read_raw<int16_t>(in);
    case PlyType::kUint16: return read_raw<uint16_t>(in);
    case PlyType::kInt32: return read_raw<int32_t>(in);
    case PlyType::kUint32: return read_raw<uint32_t>(in);
    case PlyType::kFloat32: return read_raw<float>(in);
    case PlyType::kFloat64: return read_raw<double>(in);
  }
  return 0.0;
}

double read_ascii_scalar(std::istream& in, const std::filesystem::path& path) {
  double v;
  if (!(in >> v)) raise(ErrorCode::IoError, "truncated PLY data in " + path.string());
  return v;
}

template <typename T>
void write_raw(std::ostream& out, T v) {
  if constexpr (sizeof(T) > 1) {
    if (std::endian::native == std::endian::big) {
      char* p = reinterpret_cast<char*>(&v);
      for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
    }
  }
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

void write_ply(const std::filesystem::path& path, const MeshData& data,
               PlyFormat format) {
  const int n = data.mesh.vertex_count();
  auto check_size = [&](std::size_t size, const char* what) {
    if (int(size) != n)
      raise(ErrorCode::DimensionMismatch,
            std::string(what) + " size does not match vertex count");
  };
  if (data.embedding) check_size(data.embedding->size(), "embedding");
  if (data.tau) check_size(data.tau->size(), "tau");
  if (data.mu) check_size(data.mu->size(), "mu");
  if (data.pixel) check_size(data.pixel->size(), "pixel");
  validate_mesh(data.mesh);

  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  const bool ascii = format == PlyFormat::kAscii;
  out << "ply\nformat " << (ascii ? "ascii" : "binary_little_endian") << " 1.0\n";
  out << "element vertex " << n << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (data.embedding)
    out << "property double ex\nproperty double ey\nproperty double ez\n";
  if (data.tau) out << "property double tau\n";
  if (data.mu) out << "property double mu\n";
  if (data.pixel) out << "property int row\nproperty int col\n";
  out << "element face " << data.mesh.face_count() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";

  for (int i = 0; i < n; ++i) {
    std::vector<double> scalars;
    const Vec3& v = data.mesh.vertices[i];
    scalars.insert(scalars.end(), {v.x(), v.y(), v.z()});
    if (data.embedding) {
      const Vec3& e = (*data.embedding)[i];
      scalars.insert(scalars.end(), {e.x(), e.y(), e.z()});
    }
    if (data.tau) scalars.push_back((*data.tau)[i]);
    if (data.mu) scalars.push_back((*data.mu)[i]);
    if (ascii) {
      std::string line;
      for (double s : scalars) {
        if (!line.empty()) line += ' ';
        line += fmt_double(s);
      }
      if (data.pixel)
        line += ' ' + std::to_string((*data.pixel)[i].first) + ' ' +
                std::to_string((*data.pixel)[i].second);
      out << line << "\n";
    } else {
      for (double s : scalars) write_raw<double>(out, s);
      if (data.pixel) {
        write_raw<int32_t>(out, (*data.pixel)[i].first);
        write_raw<int32_t>(out, (*data.pixel)[i].second);
      }
    }
  }
  for (const Face& f : data.mesh.faces) {
    if (ascii) {
      out << "3 " << f[0] << " " << f[1] << " " << f[2] << "\n";
    } else {
      write_raw<uint8_t>(out, 3);
      for (int k = 0; k < 3; ++k) write_raw<int32_t>(out, f[k]);
    }
  }
  if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

MeshData read_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || (line != "ply" && line != "ply\r"))
    raise(ErrorCode::MalformedHeader, "missing 'ply' magic in " + path.string());

  bool ascii = false, format_seen = false, header_done = false;
  std::vector<PlyElement> elements;
  while (!header_done && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info" || word.empty()) continue;
    if (word == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "ascii") ascii = true;
      else if (fmt == "binary_little_endian") ascii = false;
      else raise(ErrorCode::MalformedHeader, "unsupported PLY format '" + fmt + "'");
      format_seen = true;
    } else if (word == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count) || e.count < 0)
        raise(ErrorCode::MalformedHeader, "bad element line in " + path.string());
      elements.push_back(e);
    } else if (word == "property") {
      if (elements.empty())
        raise(ErrorCode::MalformedHeader, "property before element in " + path.string());
      PlyProperty p;
      std::string t;
      ls >> t;
      if (t == "list") {
        std::string ct, vt;
        if (!(ls >> ct >> vt >> p.name))
          raise(ErrorCode::MalformedHeader, "bad list property in " + path.string());
        p.is_list = true;
        p.count_type = parse_type(ct, path);
        p.value_type = parse_type(vt, path);
      } else {
        if (!(ls >> p.name))
          raise(ErrorCode::MalformedHeader, "bad property line in " + path.string());
        p.value_type = parse_type(t, path);
      }
      elements.back().props.push_back(p);
    } else if (word == "end_header") {
      header_done = true;
    } else {
      raise(ErrorCode::MalformedHeader,
            "unexpected header line '" + line + "' in " + path.string());
    }
  }
  if (!header_done)
    raise(ErrorCode::MalformedHeader, "PLY header missing end_header");
  if (!format_seen)
    raise(ErrorCode::MalformedHeader, "PLY header missing format line");

  MeshData data;
  std::map<std::string, std::vector<double>> vertex_columns;
  bool have_faces = false;

  auto read_scalar = [&](PlyType t) {
    return ascii ? read_ascii_scalar(in, path) : read_binary_scalar(in, t);
  };

  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      for (const PlyProperty& p : e.props)
        if (!p.is_list) vertex_columns[p.name].reserve(std::size_t(e.count));
      for (long i = 0; i < e.count; ++i) {
        for (const PlyProperty& p : e.props) {
          if (p.is_list) {
            const long cnt = long(read_scalar(p.count_type));
            for (long k = 0; k < cnt; ++k) read_scalar(p.value_type);
          } else {
            vertex_columns[p.name].push_back(read_scalar(p.value_type));
          }
        }
      }
    } else if (e.name == "face") {
      data.mesh.faces.reserve(std::size_t(e.count));
      for (long i = 0; i < e.count; ++i) {
        for (const PlyProperty& p : e.props) {
          if (p.is_list && p.name == "vertex_indices") {
            const long cnt = long(read_scalar(p.count_type));
            if (cnt != 3)
              raise(ErrorCode::IoError,
                    "face with " + std::to_string(cnt) + " vertices in " +
                        path.string() + " (triangles only)");
            Face f;
            for (int k = 0; k < 3; ++k) f[k] = int(read_scalar(p.value_type));
            data.mesh.faces.push_back(f);
          } else if (p.is_list) {
            const long cnt = long(read_scalar(p.count_type));
            for (long k = 0; k < cnt; ++k) read_scalar(p.value_type);
          } else {
            read_scalar(p.value_type);
          }
        }
      }
      have_faces = true;
    } else {
      // Unknown element: consume its data so later elements stay aligned.
      for (long i = 0; i < e.count; ++i) {
        for (const PlyProperty& p : e.props) {
          if (p.is_list) {
            const long cnt = long(read_scalar(p.count_type));
            for (long k = 0; k < cnt; ++k) read_scalar(p.value_type);
          } else {
            read_scalar(p.value_type);
          }
        }
      }
    }
  }
  if (!in) raise(ErrorCode::IoError, "truncated PLY data in " + path.string());

  auto column = [&](const char* name) -> std::vector<double>* {
    auto it = vertex_columns.find(name);
    return it == vertex_columns.end() ? nullptr : &it->second;
  };
  auto *x = column("x"), *y = column("y"), *z = column("z");
  if (!x || !y || !z)
    raise(ErrorCode::MalformedHeader, "PLY misses x/y/z properties: " + path.string());
  const std::size_t n = x->size();
  data.mesh.vertices.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    data.mesh.vertices[i] = Vec3((*x)[i], (*y)[i], (*z)[i]);

  auto *ex = column("ex"), *ey = column("ey"), *ez = column("ez");
  if (ex || ey || ez) {
    if (!ex || !ey || !ez)
      raise(ErrorCode::MalformedHeader, "incomplete ex/ey/ez embedding in " + path.string());
    data.embedding.emplace(n);
    for (std::size_t i = 0; i < n; ++i)
      (*data.embedding)[i] = Vec3((*ex)[i], (*ey)[i], (*ez)[i]);
  }
  if (auto* tau = column("tau")) data.tau = *tau;
  if (auto* mu = column("mu")) data.mu = *mu;
  auto *row = column("row"), *col = column("col");
  if (row || col) {
    if (!row || !col)
      raise(ErrorCode::MalformedHeader, "incomplete row/col properties in " + path.string());
    data.pixel.emplace(n);
    for (std::size_t i = 0; i < n; ++i)
      (*data.pixel)[i] = {int((*row)[i]), int((*col)[i])};
  }
  if (!have_faces) data.mesh.faces.clear();
  validate_mesh(data.mesh);
  return data;
}

void write_template_ply(const std::filesystem::path& path, const TemplateMesh& tmpl,
                        PlyFormat format) {
  validate_template(tmpl);
  MeshData data;
  data.mesh = tmpl.mesh;
  data.embedding = tmpl.embedding;
  write_ply(path, data, format);
}

TemplateMesh read_template_ply(const std::filesystem::path& path) {
  MeshData data = read_ply(path);
  if (!data.embedding)
    raise(ErrorCode::ValidationError,
          "template PLY must carry ex/ey/ez vertex properties: " + path.string());
  TemplateMesh tmpl{std::move(data.mesh), std::move(*data.embedding)};
  validate_template(tmpl);
  return tmpl;
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  validate_mesh(mesh);
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  for (const Vec3& v : mesh.vertices)
    out << "v " << fmt_double(v.x()) << " " << fmt_double(v.y()) << " "
        << fmt_double(v.z()) << "\n";
  for (const Face& f : mesh.faces)
    out << "f " << f[0] + 1 << " " << f[1] + 1 << " " << f[2] + 1 << "\n";
  if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  TriangleMesh mesh;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v.x() >> v.y() >> v.z()))
        raise(ErrorCode::MalformedHeader,
              "bad vertex on line " + std::to_string(lineno) + " of " + path.string());
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      // "f 1 2 3" or "f 1/1/1 2/2/2 ..."; polygons are fan-triangulated.
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const long v = std::strtol(tok.c_str(), nullptr, 10);
        if (v <= 0 || v > long(mesh.vertices.size()))
          raise(ErrorCode::MalformedHeader,
                "bad face index on line " + std::to_string(lineno) + " of " +
                    path.string());
        idx.push_back(int(v - 1));
      }
      if (idx.size() < 3)
        raise(ErrorCode::MalformedHeader,
              "face with fewer than 3 vertices on line " + std::to_string(lineno));
      for (std::size_t k = 1; k + 1 < idx.size(); ++k)
        mesh.faces.push_back({idx[0], idx[k], idx[k + 1]});
    }
  }
  validate_mesh(mesh);
  return mesh;
}

}  // namespace facegeom
