#include "facegeom/registration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <json.hpp>

#include "facegeom/error.hpp"

namespace facegeom {

using nlohmann::json;

void RegistrationConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      raise(ErrorCode::ValidationError, std::string(name) + " must be positive");
  };
  if (alpha_p2point < 0.0 || alpha_p2plane < 0.0)
    raise(ErrorCode::ValidationError, "data weights must be nonnegative");
  if (alpha_p2point == 0.0 && alpha_p2plane == 0.0)
    raise(ErrorCode::ValidationError, "at least one data weight must be positive");
  positive(alpha_memb_init, "alpha_memb_init");
  positive(alpha_memb_stop, "alpha_memb_stop");
  positive(stiffness_scale, "stiffness_scale");
  positive(prune_distance, "prune_distance");
  if (!(prune_angle_deg > 0.0) || prune_angle_deg > 180.0)
    raise(ErrorCode::ValidationError, "prune_angle_deg must be in (0, 180]");
  positive(inner_tol, "inner_tol");
  positive(outer_motion_tol, "outer_motion_tol");
  if (max_inner_rounds < 1 || max_outer_iterations < 1)
    raise(ErrorCode::ValidationError, "iteration limits must be at least 1");
  if (pair_diff_switch < 0)
    raise(ErrorCode::ValidationError, "pair_diff_switch must be nonnegative");
}

void write_trace_jsonl(const std::filesystem::path& path, const RegistrationTrace& trace) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  for (const OuterIterationRecord& rec : trace) {
    json inner = json::array();
    for (const InnerStepRecord& s : rec.inner)
      inner.push_back({{"pre", s.objective_pre},
                       {"post", s.objective_post},
                       {"active_pairs", s.active_pairs}});
    json j{{"iteration", rec.iteration},
           {"alpha_memb", rec.alpha_memb},
           {"alpha_memb_after", rec.alpha_memb_after},
           {"active_pairs", rec.active_pairs},
           {"energy", rec.energy},
           {"mean_motion", rec.mean_motion},
           {"match_space", match_space_name(rec.match_space)},
           {"inner", inner}};
    out << j.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoError, "write failed: " + path.string());
}

RegistrationTrace read_trace_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path.string());
  RegistrationTrace trace;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
      OuterIterationRecord rec;
      rec.iteration = j.at("iteration").get<int>();
      rec.alpha_memb = j.at("alpha_memb").get<double>();
      rec.alpha_memb_after = j.at("alpha_memb_after").get<double>();
      rec.active_pairs = j.at("active_pairs").get<int>();
      rec.energy = j.at("energy").get<double>();
      rec.mean_motion = j.at("mean_motion").get<double>();
      rec.match_space = j.at("match_space").get<std::string>() == "euclidean"
                            ? MatchSpace::kEuclidean
                            : MatchSpace::kEmbedding;
      for (const json& s : j.at("inner")) {
        InnerStepRecord step;
        step.objective_pre = s.at("pre").get<double>();
        step.objective_post = s.at("post").get<double>();
        step.active_pairs = s.at("active_pairs").get<int>();
        rec.inner.push_back(step);
      }
      trace.push_back(std::move(rec));
    } catch (const json::exception& e) {
      raise(ErrorCode::MalformedHeader, "bad trace line " + std::to_string(lineno) +
                                            " in " + path.string() + ": " + e.what());
    }
  }
  return trace;
}

namespace {

void check_pairs(const CorrespondenceSet& matches, int n_template, int n_target) {
  if (matches.pairs.size() != matches.active.size())
    raise(ErrorCode::DimensionMismatch, "pairs/active size mismatch");
  for (const auto& [i, q] : matches.pairs) {
    if (i < 0 || i >= n_template || q < 0 || q >= n_target)
      raise(ErrorCode::ValidationError, "correspondence index out of range");
  }
}

CorrespondenceSet prune_with_normals(const CorrespondenceSet& matches,
                                     const TriangleMesh& positions,
                                     const TargetMesh& target,
                                     const VertexNormals& position_normals,
                                     const VertexNormals& target_normals,
                                     const RegistrationConfig& cfg,
                                     double distance_factor) {
  const double max_dist = cfg.prune_distance * distance_factor;
  const double min_cos = std::cos(cfg.prune_angle_deg * 3.141592653589793 / 180.0);
  CorrespondenceSet out = matches;
  for (std::size_t k = 0; k < out.pairs.size(); ++k) {
    const auto& [i, q] = out.pairs[k];
    // Activity is re-decided from scratch: a pair pruned earlier can return
    // once the vertex moves back within range.
    bool keep = (positions.vertices[i] - target.mesh.vertices[q]).norm() <= max_dist;
    if (keep && position_normals.valid[i] && target_normals.valid[q])
      keep = position_normals.normals[i].dot(target_normals.normals[q]) >= min_cos;
    out.active[k] = keep ? 1 : 0;
  }
  return out;
}

// The quadratic the inner solve minimizes: data terms over the active pairs
// plus the membrane term measured on edge-vector change relative to the
// anchor positions. With anchor == positions the membrane part is zero.
double step_objective(const TriangleMesh& positions, const TriangleMesh& anchor,
                      const TargetMesh& target, const VertexNormals& target_normals,
                      const CorrespondenceSet& matches, const SparseOperator& weights,
                      double beta, const RegistrationConfig& cfg) {
  double data_point = 0.0, data_plane = 0.0;
  for (std::size_t k = 0; k < matches.pairs.size(); ++k) {
    if (!matches.active[k]) continue;
    const auto& [i, q] = matches.pairs[k];
    const Vec3 d = positions.vertices[i] - target.mesh.vertices[q];
    data_point += d.squaredNorm();
    if (target_normals.valid[q]) {
      const double along = target_normals.normals[q].dot(d);
      data_plane += along * along;
    }
  }
  double membrane = 0.0;
  const auto& w = weights.matrix();
  for (int c = 0; c < w.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(w, c); it; ++it) {
      if (it.row() == it.col()) continue;
      const int i = int(it.row()), j = int(it.col());
      const Vec3 rel = (positions.vertices[i] - positions.vertices[j]) -
                       (anchor.vertices[i] - anchor.vertices[j]);
      membrane += it.value() * rel.squaredNorm();
    }
  }
  return cfg.alpha_p2point * data_point + cfg.alpha_p2plane * data_plane +
         beta * membrane;
}

struct StepContext {
  const SparseOperator* weights = nullptr;  // per-edge membrane weights
  SparseOperator graph_lap;                 // their graph Laplacian
  VertexNormals target_normals;
  SpdSolver solver;
  bool analyzed = false;
};

// Solves for the displacement u from the anchor that minimizes the step
// objective with the given active set; rows of the 3N system interleave
// coordinates as (x0,y0,z0,x1,...). The sparsity pattern is independent of
// the active set so the symbolic analysis is reused.
TriangleMesh minimize_step(const TriangleMesh& anchor, const TargetMesh& target,
                           const CorrespondenceSet& matches, double beta,
                           const RegistrationConfig& cfg, StepContext& ctx) {
  const int n = anchor.vertex_count();
  std::vector<Eigen::Matrix3d> blocks(n, Eigen::Matrix3d::Zero());
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * n);
  for (std::size_t k = 0; k < matches.pairs.size(); ++k) {
    if (!matches.active[k]) continue;
    const auto& [i, q] = matches.pairs[k];
    const Vec3 r = target.mesh.vertices[q] - anchor.vertices[i];
    blocks[i] += cfg.alpha_p2point * Eigen::Matrix3d::Identity();
    rhs.segment<3>(3 * i) += cfg.alpha_p2point * r;
    if (ctx.target_normals.valid[q]) {
      const Vec3& nq = ctx.target_normals.normals[q];
      blocks[i] += cfg.alpha_p2plane * (nq * nq.transpose());
      rhs.segment<3>(3 * i) += cfg.alpha_p2plane * nq * nq.dot(r);
    }
  }

  std::vector<Eigen::Triplet<double>> trips;
  const auto& lap = ctx.graph_lap.matrix();
  trips.reserve(std::size_t(lap.nonZeros()) * 3 + std::size_t(n) * 9);
  for (int c = 0; c < lap.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lap, c); it; ++it)
      for (int k = 0; k < 3; ++k)
        trips.emplace_back(3 * int(it.row()) + k, 3 * int(it.col()) + k,
                           2.0 * beta * it.value());
  // Full 3x3 data blocks are always emitted (zero when inactive) to keep the
  // pattern stable across inner rounds and schedule stages.
  for (int i = 0; i < n; ++i)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        trips.emplace_back(3 * i + r, 3 * i + c, blocks[i](r, c));

  const SparseOperator system(3 * n, trips, true);
  if (!ctx.analyzed) {
    ctx.solver.analyze(system);
    ctx.analyzed = true;
  }
  ctx.solver.factorize(system);
  const Eigen::MatrixXd u = ctx.solver.solve(system, rhs);

  TriangleMesh out = anchor;
  for (int i = 0; i < n; ++i) out.vertices[i] += u.col(0).segment<3>(3 * i);
  return out;
}

double mean_motion_between(const TriangleMesh& a, const TriangleMesh& b) {
  double sum = 0.0;
  for (int i = 0; i < a.vertex_count(); ++i)
    sum += (a.vertices[i] - b.vertices[i]).norm();
  return a.vertex_count() > 0 ? sum / double(a.vertex_count()) : 0.0;
}

DeformationStepResult step_rounds(const TriangleMesh& start, const TargetMesh& target,
                                  const CorrespondenceSet& pruned, double beta,
                                  const RegistrationConfig& cfg, StepContext& ctx,
                                  double distance_factor,
                                  const RegistrationTrace& trace_so_far) {
  DeformationStepResult result;
  result.matches = pruned;
  TriangleMesh current = start;
  for (int round = 0; round < cfg.max_inner_rounds; ++round) {
    if (result.matches.active_count() == 0)
      throw NoActivePairsError("pruning left no active pairs", trace_so_far);
    InnerStepRecord rec;
    rec.active_pairs = result.matches.active_count();
    rec.objective_pre = step_objective(current, start, target, ctx.target_normals,
                                       result.matches, *ctx.weights, beta, cfg);
    TriangleMesh next = minimize_step(start, target, result.matches, beta, cfg, ctx);
    rec.objective_post = step_objective(next, start, target, ctx.target_normals,
                                        result.matches, *ctx.weights, beta, cfg);
    result.inner.push_back(rec);
    const double moved = mean_motion_between(next, current);
    current = std::move(next);
    // Re-decide pair activity against the moved surface; vertices that came
    // within range pull the next round further.
    result.matches = prune_with_normals(result.matches, current, target,
                                        vertex_normals(current), ctx.target_normals,
                                        cfg, distance_factor);
    if (moved < cfg.inner_tol) break;
  }
  if (result.matches.active_count() == 0)
    throw NoActivePairsError("pruning left no active pairs", trace_so_far);
  result.mesh = std::move(current);
  return result;
}

}  // namespace

CorrespondenceSet prune_pairs(const CorrespondenceSet& matches,
                              const TriangleMesh& positions, const TargetMesh& target,
                              const RegistrationConfig& cfg, double distance_factor) {
  check_pairs(matches, positions.vertex_count(), target.mesh.vertex_count());
  return prune_with_normals(matches, positions, target, vertex_normals(positions),
                            vertex_normals(target.mesh), cfg, distance_factor);
}

double deformation_energy(const TriangleMesh& positions, const TargetMesh& target,
                          const CorrespondenceSet& matches, const SparseOperator& weights,
                          double alpha_memb, const RegistrationConfig& cfg) {
  if (matches.pairs.empty())
    raise(ErrorCode::EmptyPairSet, "deformation energy of an empty pair set");
  check_pairs(matches, positions.vertex_count(), target.mesh.vertex_count());
  if (weights.dimension() != positions.vertex_count())
    raise(ErrorCode::DimensionMismatch, "weight operator does not match mesh");
  const VertexNormals target_normals = vertex_normals(target.mesh);
  double data_point = 0.0, data_plane = 0.0;
  for (std::size_t k = 0; k < matches.pairs.size(); ++k) {
    if (!matches.active[k]) continue;
    const auto& [i, q] = matches.pairs[k];
    const Vec3 d = positions.vertices[i] - target.mesh.vertices[q];
    data_point += d.squaredNorm();
    if (target_normals.valid[q]) {
      const double along = target_normals.normals[q].dot(d);
      data_plane += along * along;
    }
  }
  // Both edge directions, matching the neighbor-sum definition.
  double membrane = 0.0;
  const auto& w = weights.matrix();
  for (int c = 0; c < w.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(w, c); it; ++it)
      if (it.row() != it.col())
        membrane += it.value() *
                    (positions.vertices[it.row()] - positions.vertices[it.col()])
                        .squaredNorm();
  return cfg.alpha_p2point * data_point + cfg.alpha_p2plane * data_plane +
         alpha_memb * cfg.stiffness_scale * membrane;
}

DeformationStepResult solve_deformation_step(const TriangleMesh& positions,
                                             const TargetMesh& target,
                                             const CorrespondenceSet& matches,
                                             const SparseOperator& weights,
                                             double alpha_memb,
                                             const RegistrationConfig& cfg) {
  cfg.validate();
  check_pairs(matches, positions.vertex_count(), target.mesh.vertex_count());
  if (weights.dimension() != positions.vertex_count())
    raise(ErrorCode::DimensionMismatch, "weight operator does not match mesh");
  StepContext ctx;
  ctx.weights = &weights;
  ctx.graph_lap = weight_graph_laplacian(weights);
  ctx.target_normals = vertex_normals(target.mesh);
  return step_rounds(positions, target, matches, alpha_memb * cfg.stiffness_scale, cfg,
                     ctx, 1.0, {});
}

RegistrationResult register_template(const TemplateMesh& tmpl, const TargetMesh& target,
                                     const AffineTransform& init,
                                     const RegistrationConfig& cfg) {
  cfg.validate();
  validate_template(tmpl);
  validate_mesh(target.mesh);
  if (target.embedding.size() != std::size_t(target.mesh.vertex_count()))
    raise(ErrorCode::DimensionMismatch, "target embedding size mismatch");
  validate_transform(init);

  RegistrationResult result;
  result.mesh = transform_mesh(tmpl.mesh, init.linear, init.translation);
  if (cfg.alpha_memb_init < cfg.alpha_memb_stop) return result;  // empty schedule

  // Weights are computed once, on the affine-initialized template, and kept
  // fixed across the whole schedule.
  const SparseOperator weights = membrane_weights(result.mesh, cfg.membrane_scheme);
  StepContext ctx;
  ctx.weights = &weights;
  ctx.graph_lap = weight_graph_laplacian(weights);
  ctx.target_normals = vertex_normals(target.mesh);

  const CorrespondenceSet embedding_matches = match_embedding_nn(tmpl, target);

  double alpha = cfg.alpha_memb_init;
  MatchSpace space = MatchSpace::kEmbedding;
  bool switched = false;
  int prev_active = -1;

  const double decay_denom = std::log(cfg.alpha_memb_init / cfg.alpha_memb_stop);
  auto distance_factor = [&](double a) {
    if (!cfg.prune_distance_decay || decay_denom <= 0.0) return 1.0;
    const double p =
        std::clamp(std::log(cfg.alpha_memb_init / a) / decay_denom, 0.0, 1.0);
    return std::pow(10.0, 1.0 - p);
  };

  for (int outer = 0; outer < cfg.max_outer_iterations && alpha >= cfg.alpha_memb_stop;
       ++outer) {
    const CorrespondenceSet matches =
        space == MatchSpace::kEmbedding ? embedding_matches
                                        : match_euclidean_nn(result.mesh, target);
    const double factor = distance_factor(alpha);
    CorrespondenceSet pruned =
        prune_with_normals(matches, result.mesh, target, vertex_normals(result.mesh),
                           ctx.target_normals, cfg, factor);
    if (pruned.active_count() == 0)
      throw NoActivePairsError("pruning left no active pairs at stiffness " +
                                   std::to_string(alpha),
                               result.trace);

    DeformationStepResult step =
        step_rounds(result.mesh, target, pruned, alpha * cfg.stiffness_scale, cfg, ctx,
                    factor, result.trace);

    OuterIterationRecord rec;
    rec.iteration = outer;
    rec.alpha_memb = alpha;
    rec.match_space = space;
    rec.active_pairs = step.matches.active_count();
    rec.inner = std::move(step.inner);
    rec.energy = rec.inner.back().objective_post;
    rec.mean_motion = mean_motion_between(step.mesh, result.mesh);
    result.mesh = std::move(step.mesh);

    if (rec.mean_motion < cfg.outer_motion_tol) alpha *= 0.5;
    rec.alpha_memb_after = alpha;

    // One-way switch to euclidean matching once the active-pair count
    // stabilizes between consecutive iterations.
    if (!switched && prev_active >= 0 &&
        std::abs(rec.active_pairs - prev_active) < cfg.pair_diff_switch) {
      space = MatchSpace::kEuclidean;
      switched = true;
    }
    prev_active = rec.active_pairs;
    result.trace.push_back(std::move(rec));
  }
  return result;
}

}  // namespace facegeom
