// Pixel-level input maps: float rasters (PFM), binary masks (PGM), the JSON
// sidecar with units/scale, and the bundled "map stack" a reconstruction
// consumes. Rasters are held in double precision in memory; PFM stores
// float32 on disk.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "facegeom/mesh.hpp"

namespace facegeom {

// Row-major, row 0 at the top, channels interleaved.
struct Raster {
  int width = 0, height = 0, channels = 1;
  std::vector<double> data;

  Raster() = default;
  Raster(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(std::size_t(w) * h * c, fill) {}

  double& at(int row, int col, int ch = 0) {
    return data[(std::size_t(row) * width + col) * channels + ch];
  }
  double at(int row, int col, int ch = 0) const {
    return data[(std::size_t(row) * width + col) * channels + ch];
  }
  bool same_shape(const Raster& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

struct Mask {
  int width = 0, height = 0;
  std::vector<uint8_t> data;

  Mask() = default;
  Mask(int w, int h, uint8_t fill = 0)
      : width(w), height(h), data(std::size_t(w) * h, fill) {}

  uint8_t& at(int row, int col) { return data[std::size_t(row) * width + col]; }
  bool at(int row, int col) const { return data[std::size_t(row) * width + col] != 0; }
  std::size_t count() const;
};

struct MapMeta {
  int width = 0, height = 0;
  std::string depth_units = "mm";                  // "mm" or "m"
  std::string depth_sign = "larger_is_closer";
  double camera_scale = 1.0;                       // mm per pixel
};

// The five-channel bundle: intensity (1ch, [0,1]), depth (1ch, mm),
// camera-space positions (3ch, mm), canonical-embedding correspondence (3ch),
// and the validity mask. Off-mask raster pixels are NaN.
struct MapStack {
  MapMeta meta;
  Raster intensity;
  Raster depth;
  Raster xyz;
  Raster correspondence;
  Mask mask;

  int width() const { return mask.width; }
  int height() const { return mask.height; }
};

// Orthographic pixel-center <-> millimeter mapping: x grows with column,
// y grows upward (toward row 0), both scaled by meta.camera_scale.
double col_to_x(const MapMeta& meta, double col);
double row_to_y(const MapMeta& meta, double row);
double x_to_col(const MapMeta& meta, double x);
double y_to_row(const MapMeta& meta, double y);

// PFM: "Pf" = 1 channel, "PF" = 3 channels; rows stored bottom-to-top;
// negative scale = little-endian. Written always as little-endian float32
// with scale -1. NaNs round-trip.
Raster read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Raster& raster);

// Binary PGM (P5, maxval 255): 255 = valid, 0 = invalid. Other values are
// rejected.
Mask read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Mask& mask);

MapMeta read_map_meta(const std::filesystem::path& path);
void write_map_meta(const std::filesystem::path& path, const MapMeta& meta);

// File layout around a common stem: stem.intensity.pfm, stem.depth.pfm,
// stem.xyz.pfm, stem.corr.pfm, stem.mask.pgm (optional on load),
// stem.meta.json.
struct MapStackPaths {
  std::filesystem::path intensity, depth, xyz, correspondence, meta;
  std::optional<std::filesystem::path> mask;
  static MapStackPaths from_stem(const std::filesystem::path& stem);
};

// Loads and cross-validates a stack. Depths in meters are converted to mm.
// When no mask file is given the mask is implied by joint finiteness of
// depth/xyz/correspondence; an explicit mask must not claim validity where a
// channel is NaN (MaskChannelConflict). On the mask, intensity must be finite
// in [0,1] and every channel finite (ValidationError).
MapStack load_map_stack(const MapStackPaths& paths);
MapStack load_map_stack(const std::filesystem::path& stem);
void save_map_stack(const std::filesystem::path& stem, const MapStack& stack);

// Unit normals from a depth raster by finite differences (central where both
// neighbors are valid, one-sided at mask borders): n ∝ (-dz/dx, -dz/dy, 1)
// with y pointing up. 3-channel output, NaN off the mask or where no valid
// neighbor exists along one axis. `pixel_size` is the mm extent of one pixel.
Raster depth_to_normals(const Raster& depth, const Mask& mask,
                        double pixel_size = 1.0);

}  // namespace facegeom
