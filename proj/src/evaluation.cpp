#include "facegeom/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "facegeom/error.hpp"
#include "facegeom/rng.hpp"

namespace facegeom {

using nlohmann::json;

namespace {

struct DepthSample {
  double est, gt;
  int row, col;
};

// Usable = masked valid and finite in both rasters.
std::vector<DepthSample> collect_samples(const Raster& est, const Raster& gt,
                                         const Mask& mask) {
  if (est.channels != 1 || gt.channels != 1)
    raise(ErrorCode::ValidationError, "depth rasters must be single-channel");
  if (est.width != gt.width || est.height != gt.height || est.width != mask.width ||
      est.height != mask.height)
    raise(ErrorCode::DimensionMismatch, "depth rasters and mask differ in shape");
  std::vector<DepthSample> samples;
  for (int r = 0; r < est.height; ++r)
    for (int c = 0; c < est.width; ++c)
      if (mask.at(r, c) && std::isfinite(est.at(r, c)) && std::isfinite(gt.at(r, c)))
        samples.push_back({est.at(r, c), gt.at(r, c), r, c});
  return samples;
}

double gt_range(const std::vector<DepthSample>& samples) {
  double lo = samples.front().gt, hi = lo;
  for (const DepthSample& s : samples) {
    lo = std::min(lo, s.gt);
    hi = std::max(hi, s.gt);
  }
  return hi - lo;
}

}  // namespace

DepthNormalization normalize_depth_ransac(const Raster& est, const Raster& gt,
                                          const Mask& mask, const RansacConfig& cfg) {
  if (cfg.iterations < 1 || !(cfg.inlier_threshold > 0.0))
    raise(ErrorCode::ValidationError, "bad RANSAC configuration");
  const std::vector<DepthSample> samples = collect_samples(est, gt, mask);
  const std::size_t n = samples.size();
  if (n < 2)
    raise(ErrorCode::TooFewPixels,
          "scale/shift estimation needs 2 usable pixels, have " + std::to_string(n));

  SplitMix64 rng(cfg.seed);
  const double thr = cfg.inlier_threshold;
  double best_a = 0.0, best_b = 0.0, best_mse = 0.0;
  long best_count = -1;
  bool any_valid = false;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const std::size_t i = std::size_t(rng.next_index(n));
    std::size_t j = std::size_t(rng.next_index(n));
    while (j == i) j = std::size_t(rng.next_index(n));
    const DepthSample &s1 = samples[i], &s2 = samples[j];
    if (s1.est == s2.est) continue;  // cannot pin a slope
    const double a = (s1.gt - s2.gt) / (s1.est - s2.est);
    const double b = s1.gt - a * s1.est;
    if (!std::isfinite(a) || !std::isfinite(b)) continue;
    any_valid = true;
    long count = 0;
    double sse = 0.0;
    for (const DepthSample& s : samples) {
      const double e = a * s.est + b - s.gt;
      if (std::abs(e) <= thr) {
        ++count;
        sse += e * e;
      }
    }
    if (count == 0) continue;
    const double mse = sse / double(count);
    if (count > best_count || (count == best_count && mse < best_mse)) {
      best_count = count;
      best_mse = mse;
      best_a = a;
      best_b = b;
    }
  }
  if (!any_valid)
    raise(ErrorCode::DegenerateSample,
          "every sampled pixel pair had equal estimated depth");

  // Least-squares refit over the consensus, then reclassify.
  double se = 0.0, sg = 0.0, see = 0.0, seg = 0.0;
  long m = 0;
  for (const DepthSample& s : samples) {
    if (std::abs(best_a * s.est + best_b - s.gt) > thr) continue;
    se += s.est;
    sg += s.gt;
    see += s.est * s.est;
    seg += s.est * s.gt;
    ++m;
  }
  double a = best_a, b = best_b;
  if (m >= 2) {
    const double var = see - se * se / double(m);
    if (var > 0.0) {
      a = (seg - se * sg / double(m)) / var;
      b = (sg - a * se) / double(m);
    }
  }
  if (!(a > 0.0))
    raise(ErrorCode::ValidationError,
          "estimated depth is not positively correlated with ground truth (scale " +
              std::to_string(a) + ")");

  DepthNormalization out;
  out.scale = a;
  out.shift = b;
  out.inliers = Mask(mask.width, mask.height);
  long count = 0;
  for (const DepthSample& s : samples) {
    if (std::abs(a * s.est + b - s.gt) <= thr) {
      out.inliers.at(s.row, s.col) = 1;
      ++count;
    }
  }
  out.inlier_fraction = double(count) / double(n);
  return out;
}

DepthErrorStats error_statistics(const Raster& est, const Raster& gt, const Mask& mask,
                                 double scale, double shift) {
  const std::vector<DepthSample> samples = collect_samples(est, gt, mask);
  if (samples.empty())
    raise(ErrorCode::TooFewPixels, "no usable pixels for error statistics");
  const double range = gt_range(samples);
  if (!(range > 0.0))
    raise(ErrorCode::ValidationError, "ground-truth depth range is zero");

  std::vector<double> errs;
  errs.reserve(samples.size());
  for (const DepthSample& s : samples)
    errs.push_back(std::abs(scale * s.est + shift - s.gt) / range * 100.0);
  std::sort(errs.begin(), errs.end());

  DepthErrorStats stats;
  const std::size_t n = errs.size();
  stats.pixel_count = long(n);
  stats.mean = std::accumulate(errs.begin(), errs.end(), 0.0) / double(n);
  double varsum = 0.0;
  for (double e : errs) varsum += (e - stats.mean) * (e - stats.mean);
  stats.stddev = std::sqrt(varsum / double(n));
  stats.median =
      n % 2 == 1 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
  const std::size_t k = 9 * n / 10;  // floor(0.9 n)
  double tail = 0.0;
  for (std::size_t idx = k; idx < n; ++idx) tail += errs[idx];
  stats.p90_mean = tail / double(n - k);
  stats.percentile90 = errs[std::min(n - 1, k)];
  return stats;
}

double normal_discrepancy(const Raster& est, const Raster& gt, const Mask& mask,
                          double pixel_size) {
  const std::vector<DepthSample> samples = collect_samples(est, gt, mask);
  // depth_to_normals expects a mask free of NaNs, so use only usable pixels.
  Mask usable(mask.width, mask.height);
  for (const DepthSample& s : samples) usable.at(s.row, s.col) = 1;
  const Raster ne = depth_to_normals(est, usable, pixel_size);
  const Raster ng = depth_to_normals(gt, usable, pixel_size);
  double sum = 0.0;
  long count = 0;
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      bool ok = usable.at(r, c);
      for (int ch = 0; ch < 3 && ok; ++ch)
        ok = std::isfinite(ne.at(r, c, ch)) && std::isfinite(ng.at(r, c, ch));
      if (!ok) continue;
      for (int ch = 0; ch < 3; ++ch)
        sum += std::abs(ne.at(r, c, ch) - ng.at(r, c, ch));
      ++count;
    }
  }
  if (count == 0)
    raise(ErrorCode::TooFewPixels, "no pixel has normals in both depth maps");
  return sum / double(count);
}

DepthEvalReport evaluate_depth(const Raster& est, const Raster& gt, const Mask& mask,
                               const EvalConfig& cfg) {
  if (cfg.ransac_iterations < 1 || !(cfg.threshold_percent > 0.0) ||
      !(cfg.pixel_size > 0.0))
    raise(ErrorCode::ValidationError, "bad evaluation configuration");
  const std::vector<DepthSample> samples = collect_samples(est, gt, mask);
  if (samples.size() < 2)
    raise(ErrorCode::TooFewPixels, "evaluation needs at least 2 usable pixels");
  const double range = gt_range(samples);
  if (!(range > 0.0))
    raise(ErrorCode::ValidationError, "ground-truth depth range is zero");

  RansacConfig rcfg;
  rcfg.iterations = cfg.ransac_iterations;
  rcfg.inlier_threshold = cfg.threshold_percent / 100.0 * range;
  rcfg.seed = cfg.seed;
  const DepthNormalization norm = normalize_depth_ransac(est, gt, mask, rcfg);

  DepthEvalReport report;
  report.stats = error_statistics(est, gt, mask, norm.scale, norm.shift);
  report.scale = norm.scale;
  report.shift = norm.shift;
  report.inlier_fraction = norm.inlier_fraction;
  report.normal_l1 = normal_discrepancy(est, gt, mask, cfg.pixel_size);
  return report;
}

DepthEvalReport aggregate_reports(const std::vector<DepthEvalReport>& reports) {
  if (reports.empty())
    raise(ErrorCode::ValidationError, "cannot aggregate zero reports");
  DepthEvalReport agg;
  agg.scale = 0.0;  // the field's default is 1, which must not leak into the sum
  for (const DepthEvalReport& r : reports) {
    agg.stats.mean += r.stats.mean;
    agg.stats.stddev += r.stats.stddev;
    agg.stats.median += r.stats.median;
    agg.stats.p90_mean += r.stats.p90_mean;
    agg.stats.percentile90 += r.stats.percentile90;
    agg.stats.pixel_count += r.stats.pixel_count;  // counts add up
    agg.scale += r.scale;
    agg.shift += r.shift;
    agg.inlier_fraction += r.inlier_fraction;
    agg.normal_l1 += r.normal_l1;
  }
  const double n = double(reports.size());
  agg.stats.mean /= n;
  agg.stats.stddev /= n;
  agg.stats.median /= n;
  agg.stats.p90_mean /= n;
  agg.stats.percentile90 /= n;
  agg.scale /= n;
  agg.shift /= n;
  agg.inlier_fraction /= n;
  agg.normal_l1 /= n;
  return agg;
}

namespace {

json report_json(const DepthEvalReport& r) {
  return json{{"mean_err", r.stats.mean},
              {"std_err", r.stats.stddev},
              {"median_err", r.stats.median},
              {"p90_err", r.stats.p90_mean},
              {"percentile90", r.stats.percentile90},
              {"pixel_count", r.stats.pixel_count},
              {"scale", r.scale},
              {"shift", r.shift},
              {"inlier_fraction", r.inlier_fraction},
              {"normal_l1", r.normal_l1}};
}

}  // namespace

std::string report_to_json(const DepthEvalReport& report) {
  return report_json(report).dump(2);
}

DepthEvalReport report_from_json(const std::string& text) {
  DepthEvalReport r;
  try {
    const json j = json::parse(text);
    r.stats.mean = j.at("mean_err").get<double>();
    r.stats.stddev = j.at("std_err").get<double>();
    r.stats.median = j.at("median_err").get<double>();
    r.stats.p90_mean = j.at("p90_err").get<double>();
    r.stats.percentile90 = j.at("percentile90").get<double>();
    r.stats.pixel_count = j.at("pixel_count").get<long>();
    r.scale = j.at("scale").get<double>();
    r.shift = j.at("shift").get<double>();
    r.inlier_fraction = j.at("inlier_fraction").get<double>();
    r.normal_l1 = j.at("normal_l1").get<double>();
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, std::string("bad report JSON: ") + e.what());
  }
  return r;
}

std::string report_table(const std::vector<std::string>& names,
                         const std::vector<DepthEvalReport>& reports) {
  if (names.size() != reports.size())
    raise(ErrorCode::DimensionMismatch, "names/reports length mismatch");
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-20s %9s %9s %9s %9s %9s %8s %9s %9s\n", "sample",
                "mean%", "std%", "median%", "p90%", "pct90%", "inlier", "scale",
                "normal_l1");
  out += line;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const DepthEvalReport& r = reports[i];
    std::snprintf(line, sizeof line,
                  "%-20s %9.4f %9.4f %9.4f %9.4f %9.4f %7.1f%% %9.4f %9.5f\n",
                  names[i].c_str(), r.stats.mean, r.stats.stddev, r.stats.median,
                  r.stats.p90_mean, r.stats.percentile90, 100.0 * r.inlier_fraction,
                  r.scale, r.normal_l1);
    out += line;
  }
  return out;
}

}  // namespace facegeom
