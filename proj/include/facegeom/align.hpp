// Coarse alignment: nearest-neighbor correspondences in the canonical
// embedding and a RANSAC affine fit that survives scrambled matches.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "facegeom/lifting.hpp"
#include "facegeom/mesh.hpp"
#include "facegeom/rng.hpp"

namespace facegeom {

struct AffineTransform {
  Eigen::Matrix3d linear = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return linear * p + translation; }
};

// Finite entries and |det(linear)| > 1e-9, else ValidationError.
void validate_transform(const AffineTransform& t);

void write_transform_json(const std::filesystem::path& path, const AffineTransform& t);
AffineTransform read_transform_json(const std::filesystem::path& path);

enum class MatchSpace { kEmbedding, kEuclidean };
const char* match_space_name(MatchSpace space);

// pairs[k] = (template vertex, target vertex). `active` runs parallel to
// `pairs`; pruning only toggles activity, it never drops entries, so a pair
// can come back in a later iteration.
struct CorrespondenceSet {
  std::vector<std::pair<int, int>> pairs;
  std::vector<uint8_t> active;
  MatchSpace space = MatchSpace::kEmbedding;

  int active_count() const;
};

// One pair per template vertex: its nearest target vertex in embedding
// space. Exact distance ties take the smallest target index.
CorrespondenceSet match_embedding_nn(const TemplateMesh& tmpl, const TargetMesh& target);

// Same matching between current template positions and target positions.
CorrespondenceSet match_euclidean_nn(const TriangleMesh& positions, const TargetMesh& target);

struct RansacConfig {
  int iterations = 1000;
  double inlier_threshold = 3.0;  // residual units (mm for the affine fit)
  int min_sample = 4;
  uint64_t seed = 0;
};

struct AffineEstimate {
  AffineTransform transform;
  std::vector<uint8_t> inliers;  // parallel to pairs, recomputed after refit
  int inlier_count = 0;
  double mse = 0.0;    // over the final inliers
  int iteration = -1;  // RANSAC round that produced the winning sample
};

// Fits q ~ linear * p + translation over the active pairs. Consensus is
// scored by inlier count with mean-squared-error and then earliest-iteration
// tie-breaks; the winner is refit by least squares over its inliers (normal
// equations with 1e-12 diagonal damping) and inliers are recomputed under
// the refit model. Throws TooFewPairs (active < min_sample) and
// DegenerateSample (every minimal sample was coplanar).
AffineEstimate estimate_affine_ransac(const CorrespondenceSet& matches,
                                      const TemplateMesh& tmpl, const TargetMesh& target,
                                      const RansacConfig& cfg);

// The damped least-squares fit used for the refit step, exposed for reuse:
// rows of `from`/`to` are corresponding points.
AffineTransform fit_affine_lsq(const std::vector<Vec3>& from, const std::vector<Vec3>& to);

}  // namespace facegeom
