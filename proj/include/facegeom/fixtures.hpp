// Synthetic map-stack fixtures with known ground truth: an analytic surface
// rendered into the pixel maps under a planted affine transform, optional
// smooth non-rigid deformation, depth noise, and scrambled correspondences.
#pragma once

#include <cstdint>
#include <filesystem>

#include "facegeom/align.hpp"
#include "facegeom/maps.hpp"
#include "facegeom/mesh.hpp"

namespace facegeom {

enum class FixtureKind { kSphere, kParaboloid, kEmbossedPlane };
enum class DeformationKind { kNone, kGaussianBump, kSinusoid };
enum class IntensityPattern { kConstant, kCheckerboard, kStripes };

struct FixtureSpec {
  FixtureKind kind = FixtureKind::kSphere;
  int resolution = 128;         // target maps are resolution x resolution
  int template_resolution = 0;  // template lift resolution, 0 = resolution
  double radius = 50.0;         // footprint radius / plane half-extent (mm)
  double height = 30.0;         // paraboloid peak / plane elevation (mm)

  // Planted affine: uniform scale, rotation about z, then translation.
  double scale = 1.0;
  double rotation_deg = 0.0;
  Vec3 translation = Vec3::Zero();

  // Smooth out-of-plane deformation (windowed to zero toward the rim),
  // applied in the canonical frame before the affine.
  DeformationKind deformation = DeformationKind::kNone;
  double deform_amplitude = 0.0;   // mm
  double deform_sigma = 12.0;      // gaussian width (mm)
  double deform_wavelength = 25.0; // sinusoid period (mm)

  IntensityPattern pattern = IntensityPattern::kConstant;
  double pattern_scale = 8.0;      // checker square / stripe period (mm)
  double pattern_amplitude = 0.25; // stripe contrast, <= 0.5

  double noise_sigma = 0.0;        // gaussian depth noise (mm)
  double outlier_fraction = 0.0;   // fraction of correspondences scrambled
  uint64_t seed = 0;

  void validate() const;
};

struct Fixture {
  MapStack stack;              // the corrupted target maps
  TemplateMesh template_mesh;  // clean canonical template
  TriangleMesh ground_truth;   // template triangulation at true target positions
  AffineTransform transform;   // the planted affine
  int scrambled_pixels = 0;
};

// Fully determined by the spec: the same spec always produces bit-identical
// fixtures.
Fixture generate_fixture(const FixtureSpec& spec);

// Writes stem.{intensity,depth,xyz,corr}.pfm, stem.mask.pgm, stem.meta.json,
// stem.template.ply, stem.gt.ply, stem.transform.json, stem.fixture.json.
void write_fixture(const std::filesystem::path& stem, const Fixture& fixture,
                   const FixtureSpec& spec);

void write_fixture_spec(const std::filesystem::path& path, const FixtureSpec& spec);
FixtureSpec read_fixture_spec(const std::filesystem::path& path);

const char* fixture_kind_name(FixtureKind kind);
FixtureKind fixture_kind_from_name(const std::string& name);
const char* deformation_kind_name(DeformationKind kind);
DeformationKind deformation_kind_from_name(const std::string& name);
const char* intensity_pattern_name(IntensityPattern pattern);
IntensityPattern intensity_pattern_from_name(const std::string& name);

}  // namespace facegeom
