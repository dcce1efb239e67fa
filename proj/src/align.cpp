#include "facegeom/align.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "facegeom/error.hpp"
#include "facegeom/kdtree.hpp"
#include "facegeom/parallel.hpp"

namespace facegeom {

using nlohmann::json;

void validate_transform(const AffineTransform& t) {
  if (!t.linear.allFinite() || !t.translation.allFinite())
    raise(ErrorCode::ValidationError, "transform has non-finite entries");
  if (std::abs(t.linear.determinant()) <= 1e-9)
    raise(ErrorCode::ValidationError, "transform linear part is (near) singular");
}

void write_transform_json(const std::filesystem::path& path, const AffineTransform& t) {
  json lin = json::array();
  for (int r = 0; r < 3; ++r)
    lin.push_back({t.linear(r, 0), t.linear(r, 1), t.linear(r, 2)});
  json j{{"linear", lin},
         {"translation", {t.translation.x(), t.translation.y(), t.translation.z()}}};
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
}

AffineTransform read_transform_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad JSON in " + path.string() + ": " + e.what());
  }
  AffineTransform t;
  try {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) t.linear(r, c) = j.at("linear").at(r).at(c).get<double>();
    for (int k = 0; k < 3; ++k) t.translation[k] = j.at("translation").at(k).get<double>();
  } catch (const json::exception& e) {
    raise(ErrorCode::MalformedHeader, "bad transform in " + path.string() + ": " + e.what());
  }
  validate_transform(t);
  return t;
}

const char* match_space_name(MatchSpace space) {
  return space == MatchSpace::kEmbedding ? "embedding" : "euclidean";
}

int CorrespondenceSet::active_count() const {
  int n = 0;
  for (uint8_t a : active) n += a != 0;
  return n;
}

namespace {

CorrespondenceSet match_nn(const std::vector<Vec3>& queries,
                           const std::vector<Vec3>& points, MatchSpace space) {
  if (points.empty())
    raise(ErrorCode::ValidationError, "cannot match against an empty target");
  const KdTree3 tree(points);
  CorrespondenceSet set;
  set.space = space;
  set.pairs.resize(queries.size());
  set.active.assign(queries.size(), 1);
  parallel_for(queries.size(), [&](std::size_t i) {
    set.pairs[i] = {int(i), tree.nearest(queries[i])};
  });
  return set;
}

}  // namespace

CorrespondenceSet match_embedding_nn(const TemplateMesh& tmpl, const TargetMesh& target) {
  return match_nn(tmpl.embedding, target.embedding, MatchSpace::kEmbedding);
}

CorrespondenceSet match_euclidean_nn(const TriangleMesh& positions,
                                     const TargetMesh& target) {
  return match_nn(positions.vertices, target.mesh.vertices, MatchSpace::kEuclidean);
}

AffineTransform fit_affine_lsq(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  if (from.size() != to.size())
    raise(ErrorCode::DimensionMismatch, "point lists of different length");
  if (from.size() < 4)
    raise(ErrorCode::TooFewPairs, "affine fit needs at least 4 point pairs");
  // Normal equations in homogeneous coordinates with a small diagonal
  // damping so near-degenerate samples stay solvable.
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity() * 1e-12;
  Eigen::Matrix<double, 4, 3> rhs = Eigen::Matrix<double, 4, 3>::Zero();
  for (std::size_t k = 0; k < from.size(); ++k) {
    Eigen::Vector4d h(from[k].x(), from[k].y(), from[k].z(), 1.0);
    m += h * h.transpose();
    rhs += h * to[k].transpose();
  }
  const Eigen::Matrix<double, 4, 3> sol = m.ldlt().solve(rhs);
  AffineTransform t;
  t.linear = sol.topRows<3>().transpose();
  t.translation = sol.row(3).transpose();
  return t;
}

AffineEstimate estimate_affine_ransac(const CorrespondenceSet& matches,
                                      const TemplateMesh& tmpl, const TargetMesh& target,
                                      const RansacConfig& cfg) {
  if (cfg.iterations < 1 || cfg.min_sample < 4 || !(cfg.inlier_threshold > 0.0))
    raise(ErrorCode::ValidationError, "bad RANSAC configuration");

  std::vector<int> active_idx;
  for (std::size_t k = 0; k < matches.pairs.size(); ++k)
    if (matches.active[k]) active_idx.push_back(int(k));
  const int n_active = int(active_idx.size());
  if (n_active < cfg.min_sample)
    raise(ErrorCode::TooFewPairs, "RANSAC needs " + std::to_string(cfg.min_sample) +
                                      " active pairs, have " + std::to_string(n_active));

  std::vector<Vec3> from(active_idx.size()), to(active_idx.size());
  for (std::size_t k = 0; k < active_idx.size(); ++k) {
    const auto& pr = matches.pairs[active_idx[k]];
    from[k] = tmpl.mesh.vertices[pr.first];
    to[k] = target.mesh.vertices[pr.second];
  }

  SplitMix64 rng(cfg.seed);
  const double thr2 = cfg.inlier_threshold * cfg.inlier_threshold;

  AffineTransform best_model;
  int best_count = -1, best_iteration = -1;
  double best_mse = 0.0;
  bool any_valid_sample = false;
  std::vector<int> sample(std::size_t(cfg.min_sample));
  std::vector<Vec3> sf(sample.size()), st(sample.size());

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    // Distinct draws: rejected duplicates consume generator output, which is
    // part of the documented sampling sequence.
    for (std::size_t k = 0; k < sample.size(); ++k) {
      int idx;
      bool dup;
      do {
        idx = int(rng.next_index(uint64_t(n_active)));
        dup = false;
        for (std::size_t j = 0; j < k; ++j) dup = dup || sample[j] == idx;
      } while (dup);
      sample[k] = idx;
    }
    // Coplanar (or collinear/coincident) samples cannot pin an affine map.
    Vec3 mean = Vec3::Zero();
    for (std::size_t k = 0; k < sample.size(); ++k) {
      sf[k] = from[sample[k]];
      st[k] = to[sample[k]];
      mean += sf[k];
    }
    mean /= double(sample.size());
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    for (const Vec3& p : sf) scatter += (p - mean) * (p - mean).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(scatter);
    if (eig.eigenvalues()(0) <= 1e-9 * std::max(eig.eigenvalues()(2), 1e-30)) continue;

    const AffineTransform model = fit_affine_lsq(sf, st);
    if (!model.linear.allFinite() || !model.translation.allFinite()) continue;
    any_valid_sample = true;

    int count = 0;
    double sse = 0.0;
    for (std::size_t k = 0; k < from.size(); ++k) {
      const double d2 = (model.apply(from[k]) - to[k]).squaredNorm();
      if (d2 <= thr2) {
        ++count;
        sse += d2;
      }
    }
    if (count == 0) continue;
    const double mse = sse / double(count);
    // Strict improvement only, so exact ties keep the earliest iteration.
    if (count > best_count || (count == best_count && mse < best_mse)) {
      best_count = count;
      best_mse = mse;
      best_model = model;
      best_iteration = iter;
    }
  }
  if (!any_valid_sample)
    raise(ErrorCode::DegenerateSample, "every RANSAC sample was degenerate");

  // Refit over the consensus set, then reclassify under the refit model.
  std::vector<Vec3> in_from, in_to;
  for (std::size_t k = 0; k < from.size(); ++k)
    if ((best_model.apply(from[k]) - to[k]).squaredNorm() <= thr2) {
      in_from.push_back(from[k]);
      in_to.push_back(to[k]);
    }
  AffineEstimate est;
  est.transform = in_from.size() >= 4 ? fit_affine_lsq(in_from, in_to) : best_model;
  est.iteration = best_iteration;
  est.inliers.assign(matches.pairs.size(), 0);
  double sse = 0.0;
  for (std::size_t k = 0; k < from.size(); ++k) {
    const double d2 = (est.transform.apply(from[k]) - to[k]).squaredNorm();
    if (d2 <= thr2) {
      est.inliers[active_idx[k]] = 1;
      ++est.inlier_count;
      sse += d2;
    }
  }
  est.mse = est.inlier_count > 0 ? sse / double(est.inlier_count) : 0.0;
  validate_transform(est.transform);
  return est;
}

}  // namespace facegeom
