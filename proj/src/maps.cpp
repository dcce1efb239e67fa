#include "facegeom/maps.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "facegeom/error.hpp"

namespace facegeom {

using nlohmann::json;

std::size_t Mask::count() const {
  std::size_t n = 0;
  for (uint8_t v : data) n += v != 0;
  return n;
}

double col_to_x(const MapMeta& meta, double col) {
  return (col - 0.5 * meta.width) * meta.camera_scale;
}
double row_to_y(const MapMeta& meta, double row) {
  return (0.5 * meta.height - row) * meta.camera_scale;
}
double x_to_col(const MapMeta& meta, double x) {
  return x / meta.camera_scale + 0.5 * meta.width;
}
double y_to_row(const MapMeta& meta, double y) {
  return 0.5 * meta.height - y / meta.camera_scale;
}

namespace {

// Reads one whitespace-delimited header token; PGM-style '#' comments are
// skipped through end of line.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (!std::isspace(c)) break;
  }
  if (c == EOF) return tok;
  tok.push_back(char(c));
  while ((c = in.get()) != EOF && !std::isspace(c)) tok.push_back(char(c));
  return tok;
}

long parse_dim(const std::string& tok, const char* what) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != tok.size() || v <= 0 || v > 1 << 20)
    raise(ErrorCode::MalformedHeader, std::string("bad ") + what + " '" + tok + "'");
  return v;
}

float byteswap_float(float f) {
  uint32_t u;
  std::memcpy(&u, &f, 4);
  u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

Raster read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  const std::string magic = next_token(in);
  int channels;
  if (magic == "Pf") channels = 1;
  else if (magic == "PF") channels = 3;
  else raise(ErrorCode::MalformedHeader, "not a PFM file: " + path.string());
  const long w = parse_dim(next_token(in), "width");
  const long h = parse_dim(next_token(in), "height");
  const std::string scale_tok = next_token(in);
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (...) {
    raise(ErrorCode::MalformedHeader, "bad PFM scale '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale))
    raise(ErrorCode::MalformedHeader, "bad PFM scale '" + scale_tok + "'");
  // next_token consumed exactly one trailing whitespace byte; data follows.
  const bool big_endian = scale > 0.0;

  Raster raster(int(w), int(h), channels);
  std::vector<float> row(std::size_t(w) * channels);
  const std::streamsize row_bytes = std::streamsize(row.size() * sizeof(float));
  // PFM stores the bottom row first.
  for (long r = h - 1; r >= 0; --r) {
    in.read(reinterpret_cast<char*>(row.data()), row_bytes);
    if (in.gcount() != row_bytes)
      raise(ErrorCode::IoError, "short read in " + path.string());
    for (long c = 0; c < w * channels; ++c) {
      float f = row[c];
      if (big_endian != (std::endian::native == std::endian::big))
        f = byteswap_float(f);
      raster.data[(std::size_t(r) * w * channels) + c] = double(f);
    }
  }
  return raster;
}

void write_pfm(const std::filesystem::path& path, const Raster& raster) {
  if (raster.channels != 1 && raster.channels != 3)
    raise(ErrorCode::ValidationError, "PFM supports 1 or 3 channels, got " +
                                          std::to_string(raster.channels));
  if (raster.width <= 0 || raster.height <= 0)
    raise(ErrorCode::ValidationError, "cannot write empty raster");
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << (raster.channels == 1 ? "Pf" : "PF") << "\n"
      << raster.width << " " << raster.height << "\n-1\n";
  std::vector<float> row(std::size_t(raster.width) * raster.channels);
  for (int r = raster.height - 1; r >= 0; --r) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      float f = float(raster.data[std::size_t(r) * row.size() + c]);
      if (std::endian::native == std::endian::big) f = byteswap_float(f);
      row[c] = f;
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              std::streamsize(row.size() * sizeof(float)));
  }
  if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  if (next_token(in) != "P5")
    raise(ErrorCode::MalformedHeader, "not a binary PGM: " + path.string());
  const long w = parse_dim(next_token(in), "width");
  const long h = parse_dim(next_token(in), "height");
  const long maxval = parse_dim(next_token(in), "maxval");
  if (maxval != 255)
    raise(ErrorCode::MalformedHeader, "mask PGM must have maxval 255");
  Mask mask{int(w), int(h)};
  in.read(reinterpret_cast<char*>(mask.data.data()), std::streamsize(mask.data.size()));
  if (std::size_t(in.gcount()) != mask.data.size())
    raise(ErrorCode::IoError, "short read in " + path.string());
  for (uint8_t& v : mask.data) {
    if (v != 0 && v != 255)
      raise(ErrorCode::ValidationError,
            "mask pixels must be 0 or 255 in " + path.string());
    v = v ? 1 : 0;
  }
  return mask;
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<uint8_t> bytes(mask.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = mask.data[i] ? 255 : 0;
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

MapMeta read_map_meta(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad JSON in " + path.string() + ": " + e.what());
  }
  MapMeta meta;
  try {
    meta.width = j.at("width").get<int>();
    meta.height = j.at("height").get<int>();
    meta.depth_units = j.at("depth_units").get<std::string>();
    meta.depth_sign = j.at("depth_sign").get<std::string>();
    meta.camera_scale = j.at("camera_scale").get<double>();
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad metadata in " + path.string() + ": " + e.what());
  }
  return meta;
}

void write_map_meta(const std::filesystem::path& path, const MapMeta& meta) {
  json j{{"width", meta.width},
         {"height", meta.height},
         {"depth_units", meta.depth_units},
         {"depth_sign", meta.depth_sign},
         {"camera_scale", meta.camera_scale}};
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

MapStackPaths MapStackPaths::from_stem(const std::filesystem::path& stem) {
  MapStackPaths p;
  const std::string s = stem.string();
  p.intensity = s + ".intensity.pfm";
  p.depth = s + ".depth.pfm";
  p.xyz = s + ".xyz.pfm";
  p.correspondence = s + ".corr.pfm";
  p.meta = s + ".meta.json";
  const std::filesystem::path mask = s + ".mask.pgm";
  if (std::filesystem::exists(mask)) p.mask = mask;
  return p;
}

namespace {

void require_channels(const Raster& r, int channels, const char* name) {
  if (r.channels != channels)
    raise(ErrorCode::ValidationError, std::string(name) + " map must have " +
                                          std::to_string(channels) + " channel(s), got " +
                                          std::to_string(r.channels));
}

bool pixel_finite(const MapStack& s, int r, int c) {
  if (!std::isfinite(s.depth.at(r, c))) return false;
  for (int ch = 0; ch < 3; ++ch) {
    if (!std::isfinite(s.xyz.at(r, c, ch))) return false;
    if (!std::isfinite(s.correspondence.at(r, c, ch))) return false;
  }
  return true;
}

}  // namespace

MapStack load_map_stack(const MapStackPaths& paths) {
  MapStack s;
  s.intensity = read_pfm(paths.intensity);
  s.depth = read_pfm(paths.depth);
  s.xyz = read_pfm(paths.xyz);
  s.correspondence = read_pfm(paths.correspondence);
  s.meta = read_map_meta(paths.meta);

  require_channels(s.intensity, 1, "intensity");
  require_channels(s.depth, 1, "depth");
  require_channels(s.xyz, 3, "xyz");
  require_channels(s.correspondence, 3, "correspondence");

  const int w = s.depth.width, h = s.depth.height;
  auto check_dims = [&](const Raster& r, const char* name) {
    if (r.width != w || r.height != h)
      raise(ErrorCode::DimensionMismatch,
            std::string(name) + " map is " + std::to_string(r.width) + "x" +
                std::to_string(r.height) + ", expected " + std::to_string(w) + "x" +
                std::to_string(h));
  };
  check_dims(s.intensity, "intensity");
  check_dims(s.xyz, "xyz");
  check_dims(s.correspondence, "correspondence");
  if (s.meta.width != w || s.meta.height != h)
    raise(ErrorCode::DimensionMismatch,
          "metadata declares " + std::to_string(s.meta.width) + "x" +
              std::to_string(s.meta.height) + ", maps are " + std::to_string(w) + "x" +
              std::to_string(h));
  if (!(s.meta.camera_scale > 0.0) || !std::isfinite(s.meta.camera_scale))
    raise(ErrorCode::ValidationError, "camera_scale must be positive and finite");
  if (s.meta.depth_sign != "larger_is_closer")
    raise(ErrorCode::ValidationError,
          "unsupported depth_sign '" + s.meta.depth_sign + "'");

  if (s.meta.depth_units == "m") {
    for (double& v : s.depth.data) v *= 1000.0;
    for (double& v : s.xyz.data) v *= 1000.0;
    s.meta.depth_units = "mm";
  } else if (s.meta.depth_units != "mm") {
    raise(ErrorCode::ValidationError,
          "unsupported depth_units '" + s.meta.depth_units + "'");
  }

  Mask implied(w, h);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) implied.at(r, c) = pixel_finite(s, r, c) ? 1 : 0;

  if (paths.mask) {
    Mask explicit_mask = read_pgm(*paths.mask);
    if (explicit_mask.width != w || explicit_mask.height != h)
      raise(ErrorCode::DimensionMismatch, "mask dimensions do not match maps");
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (explicit_mask.at(r, c) && !implied.at(r, c))
          raise(ErrorCode::MaskChannelConflict,
                "mask claims pixel (" + std::to_string(r) + ", " + std::to_string(c) +
                    ") valid but a channel is not finite");
    s.mask = std::move(explicit_mask);
  } else {
    s.mask = std::move(implied);
  }

  const double nan = std::nan("");
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (s.mask.at(r, c)) {
        const double i = s.intensity.at(r, c);
        if (!std::isfinite(i) || i < 0.0 || i > 1.0)
          raise(ErrorCode::ValidationError,
                "intensity " + std::to_string(i) + " at valid pixel (" +
                    std::to_string(r) + ", " + std::to_string(c) +
                    ") outside [0, 1]");
      } else {
        // Canonical form: every float channel is NaN off the mask.
        s.intensity.at(r, c) = nan;
        s.depth.at(r, c) = nan;
        for (int ch = 0; ch < 3; ++ch) {
          s.xyz.at(r, c, ch) = nan;
          s.correspondence.at(r, c, ch) = nan;
        }
      }
    }
  }
  if (s.mask.count() == 0)
    std::fprintf(stderr, "warning: map stack has no valid pixels\n");
  return s;
}

MapStack load_map_stack(const std::filesystem::path& stem) {
  return load_map_stack(MapStackPaths::from_stem(stem));
}

void save_map_stack(const std::filesystem::path& stem, const MapStack& stack) {
  auto check = [&](const Raster& r, int channels, const char* name) {
    if (r.width != stack.width() || r.height != stack.height() || r.channels != channels)
      raise(ErrorCode::DimensionMismatch,
            std::string("stack raster '") + name + "' has inconsistent shape");
  };
  check(stack.intensity, 1, "intensity");
  check(stack.depth, 1, "depth");
  check(stack.xyz, 3, "xyz");
  check(stack.correspondence, 3, "correspondence");
  const std::string s = stem.string();
  write_pfm(s + ".intensity.pfm", stack.intensity);
  write_pfm(s + ".depth.pfm", stack.depth);
  write_pfm(s + ".xyz.pfm", stack.xyz);
  write_pfm(s + ".corr.pfm", stack.correspondence);
  write_pgm(s + ".mask.pgm", stack.mask);
  MapMeta meta = stack.meta;
  meta.width = stack.width();
  meta.height = stack.height();
  write_map_meta(s + ".meta.json", meta);
}

Raster depth_to_normals(const Raster& depth, const Mask& mask, double pixel_size) {
  if (depth.channels != 1)
    raise(ErrorCode::ValidationError, "depth must be single-channel");
  if (depth.width != mask.width || depth.height != mask.height)
    raise(ErrorCode::DimensionMismatch, "depth and mask dimensions differ");
  if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
    raise(ErrorCode::ValidationError, "pixel_size must be positive");

  const int w = depth.width, h = depth.height;
  Raster normals(w, h, 3, std::nan(""));
  auto valid = [&](int r, int c) {
    return r >= 0 && r < h && c >= 0 && c < w && mask.at(r, c);
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      const double z = depth.at(r, c);
      const bool left = valid(r, c - 1), right = valid(r, c + 1);
      const bool up = valid(r - 1, c), down = valid(r + 1, c);
      if ((!left && !right) || (!up && !down)) continue;  // gradient undefined
      double gx, gy;
      if (left && right)
        gx = (depth.at(r, c + 1) - depth.at(r, c - 1)) / (2.0 * pixel_size);
      else if (right)
        gx = (depth.at(r, c + 1) - z) / pixel_size;
      else
        gx = (z - depth.at(r, c - 1)) / pixel_size;
      // Row index decreases in +y, hence the flipped difference.
      if (up && down)
        gy = (depth.at(r - 1, c) - depth.at(r + 1, c)) / (2.0 * pixel_size);
      else if (up)
        gy = (depth.at(r - 1, c) - z) / pixel_size;
      else
        gy = (z - depth.at(r + 1, c)) / pixel_size;
      Vec3 n(-gx, -gy, 1.0);
      n.normalize();
      for (int ch = 0; ch < 3; ++ch) normals.at(r, c, ch) = n[ch];
    }
  }
  return normals;
}

}  // namespace facegeom
