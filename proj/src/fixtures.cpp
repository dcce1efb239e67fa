#include "facegeom/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "facegeom/error.hpp"
#include "facegeom/lifting.hpp"
#include "facegeom/mesh_io.hpp"
#include "facegeom/rng.hpp"

namespace facegeom {

using nlohmann::json;

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
// Margin keeping the raster from clipping the footprint.
constexpr double kFrameFactor = 2.4;
// Disk/square support is trimmed slightly inside the nominal radius so rim
// triangles stay well shaped (a full sphere silhouette has infinite slope).
constexpr double kSupportTrim = 0.97;
// Deformation window: full strength inside this fraction of the support,
// cosine-tapered to zero at the rim.
constexpr double kWindowStart = 0.65;

struct Surface {
  const FixtureSpec& spec;

  double support_radius() const { return kSupportTrim * spec.radius; }

  // Support membership in canonical coordinates.
  bool inside(double x, double y) const {
    if (spec.kind == FixtureKind::kEmbossedPlane)
      return std::max(std::abs(x), std::abs(y)) <= support_radius();
    return x * x + y * y <= support_radius() * support_radius();
  }

  double height_at(double x, double y) const {
    switch (spec.kind) {
      case FixtureKind::kSphere:
        return std::sqrt(std::max(0.0, spec.radius * spec.radius - x * x - y * y));
      case FixtureKind::kParaboloid:
        return spec.height * (1.0 - (x * x + y * y) / (spec.radius * spec.radius));
      case FixtureKind::kEmbossedPlane:
        return spec.height;
    }
    return 0.0;
  }

  Vec3 embedding_at(double x, double y) const {
    switch (spec.kind) {
      case FixtureKind::kSphere:
        return Vec3(x, y, height_at(x, y)) / spec.radius;
      case FixtureKind::kParaboloid:
        return Vec3(x / spec.radius, y / spec.radius, height_at(x, y) / spec.height);
      case FixtureKind::kEmbossedPlane:
        return Vec3(x / spec.radius, y / spec.radius, 0.0);
    }
    return Vec3::Zero();
  }

  double window(double x, double y) const {
    const double u = (spec.kind == FixtureKind::kEmbossedPlane
                          ? std::max(std::abs(x), std::abs(y))
                          : std::sqrt(x * x + y * y)) /
                     support_radius();
    if (u <= kWindowStart) return 1.0;
    if (u >= 1.0) return 0.0;
    const double t = (u - kWindowStart) / (1.0 - kWindowStart);
    return 0.5 * (1.0 + std::cos(kPi * t));
  }

  double deformation_at(double x, double y) const {
    double raw = 0.0;
    switch (spec.deformation) {
      case DeformationKind::kNone:
        return 0.0;
      case DeformationKind::kGaussianBump: {
        // Center offset from the axis so the bump breaks the symmetry.
        const double cx = 0.25 * spec.radius, cy = -0.15 * spec.radius;
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        raw = spec.deform_amplitude *
              std::exp(-d2 / (2.0 * spec.deform_sigma * spec.deform_sigma));
        break;
      }
      case DeformationKind::kSinusoid:
        raw = spec.deform_amplitude * std::sin(2.0 * kPi * x / spec.deform_wavelength) *
              std::sin(2.0 * kPi * y / spec.deform_wavelength);
        break;
    }
    return raw * window(x, y);
  }

  double intensity_at(double x, double y) const {
    switch (spec.pattern) {
      case IntensityPattern::kConstant:
        return 0.6;
      case IntensityPattern::kCheckerboard: {
        const long px = long(std::floor(x / spec.pattern_scale));
        const long py = long(std::floor(y / spec.pattern_scale));
        return ((px + py) % 2 + 2) % 2 == 0 ? 0.75 : 0.35;
      }
      case IntensityPattern::kStripes:
        return 0.5 + spec.pattern_amplitude * std::sin(2.0 * kPi * x / spec.pattern_scale);
    }
    return 0.5;
  }
};

AffineTransform planted_transform(const FixtureSpec& spec) {
  const double th = spec.rotation_deg * kPi / 180.0;
  AffineTransform t;
  t.linear << spec.scale * std::cos(th), -spec.scale * std::sin(th), 0.0,
      spec.scale * std::sin(th), spec.scale * std::cos(th), 0.0,
      0.0, 0.0, spec.scale;
  t.translation = spec.translation;
  return t;
}

MapMeta make_meta(int resolution, double radius) {
  MapMeta meta;
  meta.width = resolution;
  meta.height = resolution;
  meta.depth_units = "mm";
  meta.depth_sign = "larger_is_closer";
  meta.camera_scale = kFrameFactor * radius / double(resolution);
  return meta;
}

// The clean canonical stack (no affine, no deformation, no corruption) from
// which the template is lifted.
MapStack canonical_stack(const FixtureSpec& spec, int resolution) {
  const Surface surf{spec};
  MapStack s;
  s.meta = make_meta(resolution, spec.radius);
  const double nan = std::nan("");
  s.intensity = Raster(resolution, resolution, 1, nan);
  s.depth = Raster(resolution, resolution, 1, nan);
  s.xyz = Raster(resolution, resolution, 3, nan);
  s.correspondence = Raster(resolution, resolution, 3, nan);
  s.mask = Mask(resolution, resolution);
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      const double x = col_to_x(s.meta, c);
      const double y = row_to_y(s.meta, r);
      if (!surf.inside(x, y)) continue;
      const double z = surf.height_at(x, y);
      const Vec3 e = surf.embedding_at(x, y);
      s.mask.at(r, c) = 1;
      s.intensity.at(r, c) = surf.intensity_at(x, y);
      s.depth.at(r, c) = z;
      s.xyz.at(r, c, 0) = x;
      s.xyz.at(r, c, 1) = y;
      s.xyz.at(r, c, 2) = z;
      for (int ch = 0; ch < 3; ++ch) s.correspondence.at(r, c, ch) = e[ch];
    }
  }
  return s;
}

// Target maps: the canonical surface is deformed along canonical z, mapped
// through the planted affine, and rendered on the target raster. Because the
// affine keeps vertical lines vertical, each target pixel is the image of
// exactly one canonical footprint point.
MapStack target_stack(const FixtureSpec& spec, const AffineTransform& t) {
  const Surface surf{spec};
  const int res = spec.resolution;
  MapStack s;
  s.meta = make_meta(res, spec.radius);
  const double nan = std::nan("");
  s.intensity = Raster(res, res, 1, nan);
  s.depth = Raster(res, res, 1, nan);
  s.xyz = Raster(res, res, 3, nan);
  s.correspondence = Raster(res, res, 3, nan);
  s.mask = Mask(res, res);

  const double th = spec.rotation_deg * kPi / 180.0;
  const double cos_th = std::cos(th), sin_th = std::sin(th);
  for (int r = 0; r < res; ++r) {
    for (int c = 0; c < res; ++c) {
      const double wx = col_to_x(s.meta, c);
      const double wy = row_to_y(s.meta, r);
      // Invert the in-plane part of the affine.
      const double dx = wx - t.translation.x(), dy = wy - t.translation.y();
      const double x = (cos_th * dx + sin_th * dy) / spec.scale;
      const double y = (-sin_th * dx + cos_th * dy) / spec.scale;
      if (!surf.inside(x, y)) continue;
      const double z =
          spec.scale * (surf.height_at(x, y) + surf.deformation_at(x, y)) +
          t.translation.z();
      const Vec3 e = surf.embedding_at(x, y);
      s.mask.at(r, c) = 1;
      s.intensity.at(r, c) = surf.intensity_at(x, y);
      s.depth.at(r, c) = z;
      s.xyz.at(r, c, 0) = wx;
      s.xyz.at(r, c, 1) = wy;
      s.xyz.at(r, c, 2) = z;
      for (int ch = 0; ch < 3; ++ch) s.correspondence.at(r, c, ch) = e[ch];
    }
  }
  return s;
}

void add_depth_noise(MapStack& s, double sigma, uint64_t seed) {
  if (sigma <= 0.0) return;
  SplitMix64 rng(seed ^ 0x5eed0001u);
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      if (!s.mask.at(r, c)) continue;
      // One draw per valid pixel, applied to depth and xyz.z alike so the
      // two channels stay consistent.
      const double n = sigma * rng.next_gaussian();
      s.depth.at(r, c) += n;
      s.xyz.at(r, c, 2) += n;
    }
  }
}

int scramble_correspondences(MapStack& s, double fraction, uint64_t seed) {
  if (fraction <= 0.0) return 0;
  std::vector<std::pair<int, int>> valid;
  for (int r = 0; r < s.height(); ++r)
    for (int c = 0; c < s.width(); ++c)
      if (s.mask.at(r, c)) valid.emplace_back(r, c);
  const long k = long(std::floor(fraction * double(valid.size())));
  if (k <= 0) return 0;

  Vec3 lo(0, 0, 0), hi(0, 0, 0);
  bool first = true;
  for (const auto& [r, c] : valid) {
    const Vec3 e(s.correspondence.at(r, c, 0), s.correspondence.at(r, c, 1),
                 s.correspondence.at(r, c, 2));
    if (first) {
      lo = hi = e;
      first = false;
    } else {
      lo = lo.cwiseMin(e);
      hi = hi.cwiseMax(e);
    }
  }

  SplitMix64 rng(seed ^ 0x5eed0002u);
  // Partial Fisher-Yates picks k distinct pixels, then each gets a uniform
  // draw from the embedding bounding box.
  for (long i = 0; i < k; ++i) {
    const long j = i + long(rng.next_index(uint64_t(valid.size() - i)));
    std::swap(valid[i], valid[j]);
  }
  for (long i = 0; i < k; ++i) {
    const auto& [r, c] = valid[i];
    for (int ch = 0; ch < 3; ++ch)
      s.correspondence.at(r, c, ch) = rng.next_range(lo[ch], hi[ch]);
  }
  return int(k);
}

}  // namespace

void FixtureSpec::validate() const {
  if (resolution < 16)
    raise(ErrorCode::ValidationError,
          "resolution must be at least 16, got " + std::to_string(resolution));
  if (template_resolution != 0 && template_resolution < 16)
    raise(ErrorCode::ValidationError, "template_resolution must be 0 or at least 16");
  if (!(radius > 0.0) || !(height > 0.0))
    raise(ErrorCode::ValidationError, "radius and height must be positive");
  if (!(scale > 0.0) || !std::isfinite(scale))
    raise(ErrorCode::ValidationError, "scale must be positive");
  if (!translation.allFinite() || !std::isfinite(rotation_deg))
    raise(ErrorCode::ValidationError, "transform parameters must be finite");
  if (deform_amplitude < 0.0 || !(deform_sigma > 0.0) || !(deform_wavelength > 0.0))
    raise(ErrorCode::ValidationError, "bad deformation parameters");
  if (!(pattern_scale > 0.0) || pattern_amplitude < 0.0 || pattern_amplitude > 0.5)
    raise(ErrorCode::ValidationError, "bad intensity pattern parameters");
  if (noise_sigma < 0.0)
    raise(ErrorCode::ValidationError, "noise_sigma must be nonnegative");
  if (outlier_fraction < 0.0 || outlier_fraction > 0.5)
    raise(ErrorCode::ValidationError, "outlier_fraction must be in [0, 0.5]");
}

Fixture generate_fixture(const FixtureSpec& spec) {
  spec.validate();
  Fixture fixture;
  fixture.transform = planted_transform(spec);

  const int template_res =
      spec.template_resolution > 0 ? spec.template_resolution : spec.resolution;
  const MapStack canonical = canonical_stack(spec, template_res);
  const TargetMesh lifted = lift_maps_to_mesh(canonical);
  fixture.template_mesh.mesh = lifted.mesh;
  fixture.template_mesh.embedding = lifted.embedding;

  // Ground truth: template vertices deformed and pushed through the affine.
  const Surface surf{spec};
  fixture.ground_truth = fixture.template_mesh.mesh;
  for (Vec3& v : fixture.ground_truth.vertices) {
    const Vec3 deformed(v.x(), v.y(), v.z() + surf.deformation_at(v.x(), v.y()));
    v = fixture.transform.apply(deformed);
  }

  fixture.stack = target_stack(spec, fixture.transform);
  add_depth_noise(fixture.stack, spec.noise_sigma, spec.seed);
  fixture.scrambled_pixels =
      scramble_correspondences(fixture.stack, spec.outlier_fraction, spec.seed);
  return fixture;
}

void write_fixture(const std::filesystem::path& stem, const Fixture& fixture,
                   const FixtureSpec& spec) {
  save_map_stack(stem, fixture.stack);
  const std::string s = stem.string();
  write_template_ply(s + ".template.ply", fixture.template_mesh);
  MeshData gt;
  gt.mesh = fixture.ground_truth;
  write_ply(s + ".gt.ply", gt);
  write_transform_json(s + ".transform.json", fixture.transform);
  write_fixture_spec(s + ".fixture.json", spec);
}

const char* fixture_kind_name(FixtureKind kind) {
  switch (kind) {
    case FixtureKind::kSphere: return "sphere";
    case FixtureKind::kParaboloid: return "paraboloid";
    case FixtureKind::kEmbossedPlane: return "embossed_plane";
  }
  return "sphere";
}

FixtureKind fixture_kind_from_name(const std::string& name) {
  if (name == "sphere") return FixtureKind::kSphere;
  if (name == "paraboloid") return FixtureKind::kParaboloid;
  if (name == "embossed_plane") return FixtureKind::kEmbossedPlane;
  raise(ErrorCode::ValidationError, "unknown fixture kind '" + name + "'");
}

const char* deformation_kind_name(DeformationKind kind) {
  switch (kind) {
    case DeformationKind::kNone: return "none";
    case DeformationKind::kGaussianBump: return "gaussian";
    case DeformationKind::kSinusoid: return "sinusoid";
  }
  return "none";
}

DeformationKind deformation_kind_from_name(const std::string& name) {
  if (name == "none") return DeformationKind::kNone;
  if (name == "gaussian") return DeformationKind::kGaussianBump;
  if (name == "sinusoid") return DeformationKind::kSinusoid;
  raise(ErrorCode::ValidationError, "unknown deformation kind '" + name + "'");
}

const char* intensity_pattern_name(IntensityPattern pattern) {
  switch (pattern) {
    case IntensityPattern::kConstant: return "constant";
    case IntensityPattern::kCheckerboard: return "checkerboard";
    case IntensityPattern::kStripes: return "stripes";
  }
  return "constant";
}

IntensityPattern intensity_pattern_from_name(const std::string& name) {
  if (name == "constant") return IntensityPattern::kConstant;
  if (name == "checkerboard") return IntensityPattern::kCheckerboard;
  if (name == "stripes") return IntensityPattern::kStripes;
  raise(ErrorCode::ValidationError, "unknown intensity pattern '" + name + "'");
}

void write_fixture_spec(const std::filesystem::path& path, const FixtureSpec& spec) {
  json j{{"kind", fixture_kind_name(spec.kind)},
         {"resolution", spec.resolution},
         {"template_resolution", spec.template_resolution},
         {"radius", spec.radius},
         {"height", spec.height},
         {"scale", spec.scale},
         {"rotation_deg", spec.rotation_deg},
         {"translation", {spec.translation.x(), spec.translation.y(), spec.translation.z()}},
         {"deformation", deformation_kind_name(spec.deformation)},
         {"deform_amplitude", spec.deform_amplitude},
         {"deform_sigma", spec.deform_sigma},
         {"deform_wavelength", spec.deform_wavelength},
         {"pattern", intensity_pattern_name(spec.pattern)},
         {"pattern_scale", spec.pattern_scale},
         {"pattern_amplitude", spec.pattern_amplitude},
         {"noise_sigma", spec.noise_sigma},
         {"outlier_fraction", spec.outlier_fraction},
         {"seed", spec.seed}};
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

FixtureSpec read_fixture_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad JSON in " + path.string() + ": " + e.what());
  }
  FixtureSpec spec;
  try {
    spec.kind = fixture_kind_from_name(j.at("kind").get<std::string>());
    spec.resolution = j.at("resolution").get<int>();
    spec.template_resolution = j.value("template_resolution", 0);
    spec.radius = j.at("radius").get<double>();
    spec.height = j.value("height", 30.0);
    spec.scale = j.value("scale", 1.0);
    spec.rotation_deg = j.value("rotation_deg", 0.0);
    if (j.contains("translation"))
      for (int k = 0; k < 3; ++k) spec.translation[k] = j.at("translation").at(k).get<double>();
    spec.deformation = deformation_kind_from_name(j.value("deformation", "none"));
    spec.deform_amplitude = j.value("deform_amplitude", 0.0);
    spec.deform_sigma = j.value("deform_sigma", 12.0);
    spec.deform_wavelength = j.value("deform_wavelength", 25.0);
    spec.pattern = intensity_pattern_from_name(j.value("pattern", "constant"));
    spec.pattern_scale = j.value("pattern_scale", 8.0);
    spec.pattern_amplitude = j.value("pattern_amplitude", 0.25);
    spec.noise_sigma = j.value("noise_sigma", 0.0);
    spec.outlier_fraction = j.value("outlier_fraction", 0.0);
    spec.seed = j.value("seed", uint64_t(0));
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad fixture spec in " + path.string() + ": " + e.what());
  }
  spec.validate();
  return spec;
}

}  // namespace facegeom
