// Depth-map evaluation: robust scale/shift alignment of an estimated depth
// map to ground truth, error statistics in percent of the ground-truth depth
// range, and a surface-normal discrepancy measure.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "facegeom/align.hpp"
#include "facegeom/maps.hpp"

namespace facegeom {

struct EvalConfig {
  int ransac_iterations = 1000;
  double threshold_percent = 3.0;  // inlier threshold as % of the gt depth range
  uint64_t seed = 0;
  double pixel_size = 1.0;         // mm per pixel, for the normal measure
};

struct DepthNormalization {
  double scale = 1.0;  // a in  a * est + b ~ gt
  double shift = 0.0;  // b
  Mask inliers;
  double inlier_fraction = 0.0;
};

// Two-point RANSAC for the monotone linear map a * est + b that matches the
// ground truth: consensus by inlier count (mse, then earliest iteration, as
// tie-breaks), least-squares refit over the consensus, inliers recomputed
// under the refit model. cfg.inlier_threshold is in depth units. Pixels where
// either raster is non-finite are ignored even if masked valid. Throws
// TooFewPixels (< 2 usable), DegenerateSample (every sampled pair had equal
// estimated depths), ValidationError (non-positive final scale).
DepthNormalization normalize_depth_ransac(const Raster& est, const Raster& gt,
                                          const Mask& mask, const RansacConfig& cfg);

struct DepthErrorStats {
  double mean = 0.0;          // all in percent of the gt depth range
  double stddev = 0.0;        // population standard deviation
  double median = 0.0;        // mean of the two middle values for even counts
  double p90_mean = 0.0;      // mean of the worst 10% (sorted index >= floor(0.9 N))
  double percentile90 = 0.0;  // sorted value at index min(N-1, floor(0.9 N))
  long pixel_count = 0;
};

// Absolute errors |a * est + b - gt| over the usable pixels, expressed in
// percent of the ground-truth depth range on those pixels.
DepthErrorStats error_statistics(const Raster& est, const Raster& gt, const Mask& mask,
                                 double scale, double shift);

// Mean L1 difference of the unit normals derived from the two depth maps,
// over pixels where both normals exist.
double normal_discrepancy(const Raster& est, const Raster& gt, const Mask& mask,
                          double pixel_size = 1.0);

struct DepthEvalReport {
  DepthErrorStats stats;
  double scale = 1.0;
  double shift = 0.0;
  double inlier_fraction = 0.0;
  double normal_l1 = 0.0;
};

// normalize + statistics + normal measure in one call.
DepthEvalReport evaluate_depth(const Raster& est, const Raster& gt, const Mask& mask,
                               const EvalConfig& cfg);

// Field-wise arithmetic mean over per-sample reports (for --group-by).
DepthEvalReport aggregate_reports(const std::vector<DepthEvalReport>& reports);

std::string report_to_json(const DepthEvalReport& report);
DepthEvalReport report_from_json(const std::string& text);

// Fixed-width text table, one row per (name, report).
std::string report_table(const std::vector<std::string>& names,
                         const std::vector<DepthEvalReport>& reports);

}  // namespace facegeom
