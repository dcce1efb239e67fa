#include "facegeom/refine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "facegeom/error.hpp"
#include "facegeom/sparse.hpp"

namespace facegeom {

void RefineConfig::validate() const {
  if (!(dt >= 0.0) || !std::isfinite(dt))
    raise(ErrorCode::ValidationError, "dt must be nonnegative");
  if (!(eta >= 0.0 && eta <= 1.0))
    raise(ErrorCode::ValidationError, "eta must be in [0, 1]");
  if (!std::isfinite(gain) || gain < 0.0)
    raise(ErrorCode::ValidationError, "gain must be nonnegative");
  if (!std::isfinite(fairing_step) || fairing_step < 0.0)
    raise(ErrorCode::ValidationError, "fairing_step must be nonnegative");
  if (subdivision_levels < 0 || subdivision_levels > 3)
    raise(ErrorCode::ValidationError, "subdivision_levels must be in [0, 3]");
  if (!(sample_radius_px >= 0.0))
    raise(ErrorCode::ValidationError, "sample_radius_px must be nonnegative");
}

VertexTexture sample_intensity(const TriangleMesh& mesh, const MapStack& stack,
                               const RefineConfig& cfg) {
  cfg.validate();
  validate_mesh(mesh);
  const int n = mesh.vertex_count();
  const int w = stack.width(), h = stack.height();
  VertexTexture tex;
  tex.tau.assign(std::size_t(n), 0.0);
  std::vector<uint8_t> assigned(std::size_t(n), 0);

  const int radius = int(std::ceil(cfg.sample_radius_px));
  const double radius2 = cfg.sample_radius_px * cfg.sample_radius_px;
  for (int i = 0; i < n; ++i) {
    const double colf = x_to_col(stack.meta, mesh.vertices[i].x());
    const double rowf = y_to_row(stack.meta, mesh.vertices[i].y());
    const int r0 = int(std::llround(rowf));
    const int c0 = int(std::llround(colf));
    // Nearest valid pixel to the projected point within the search radius;
    // ties go to the smaller row, then column.
    double best_d2 = radius2;
    int best_r = -1, best_c = -1;
    for (int r = std::max(0, r0 - radius); r <= std::min(h - 1, r0 + radius); ++r) {
      for (int c = std::max(0, c0 - radius); c <= std::min(w - 1, c0 + radius); ++c) {
        if (!stack.mask.at(r, c)) continue;
        const double d2 = (r - rowf) * (r - rowf) + (c - colf) * (c - colf);
        if (d2 < best_d2 || (d2 == best_d2 && best_r < 0)) {
          best_d2 = d2;
          best_r = r;
          best_c = c;
        }
      }
    }
    if (best_r >= 0) {
      tex.tau[i] = stack.intensity.at(best_r, best_c);
      assigned[i] = 1;
    }
  }

  // Vertices that project off the mask inherit the mean of their sampled
  // ring neighbors; rounds use the previous round's assignment state so the
  // result does not depend on vertex order.
  const auto adjacency = vertex_adjacency(mesh);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<uint8_t> next_assigned = assigned;
    for (int i = 0; i < n; ++i) {
      if (assigned[i]) continue;
      double sum = 0.0;
      int cnt = 0;
      for (int j : adjacency[i]) {
        if (assigned[j]) {
          sum += tex.tau[j];
          ++cnt;
        }
      }
      if (cnt > 0) {
        tex.tau[i] = sum / cnt;
        next_assigned[i] = 1;
        changed = true;
      }
    }
    assigned.swap(next_assigned);
  }

  double global_sum = 0.0;
  long global_cnt = 0;
  for (int i = 0; i < n; ++i) {
    if (assigned[i]) {
      global_sum += tex.tau[i];
      ++global_cnt;
    }
  }
  if (global_cnt == 0)
    raise(ErrorCode::NoValidPixels, "no vertex projects near a valid pixel");
  for (int i = 0; i < n; ++i)
    if (!assigned[i]) tex.tau[i] = global_sum / double(global_cnt);
  return tex;
}

std::vector<double> highpass_texture(const TriangleMesh& mesh,
                                     const std::vector<double>& tau,
                                     const RefineConfig& cfg) {
  cfg.validate();
  if (int(tau.size()) != mesh.vertex_count())
    raise(ErrorCode::DimensionMismatch, "tau size does not match vertex count");
  const SparseOperator lap = cotangent_laplacian(mesh);
  // One implicit heat step (I - dt L) u = tau gives the smoothed field; the
  // detail is what smoothing removed.
  std::vector<Eigen::Triplet<double>> trips;
  const auto& m = lap.matrix();
  trips.reserve(std::size_t(m.nonZeros()) + std::size_t(mesh.vertex_count()));
  for (int c = 0; c < m.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it)
      trips.emplace_back(int(it.row()), int(it.col()), -cfg.dt * it.value());
  for (int i = 0; i < mesh.vertex_count(); ++i) trips.emplace_back(i, i, 1.0);
  const SparseOperator system(mesh.vertex_count(), trips, true);

  Eigen::VectorXd rhs(mesh.vertex_count());
  for (int i = 0; i < mesh.vertex_count(); ++i) rhs[i] = tau[i];
  const Eigen::MatrixXd smoothed = solve_spd(system, rhs);
  std::vector<double> mu(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) mu[i] = tau[i] - smoothed(long(i), 0);
  return mu;
}

std::vector<double> data_driven_displacement(const TriangleMesh& mesh,
                                             const std::vector<double>& mu,
                                             const RefineConfig& cfg) {
  cfg.validate();
  if (int(mu.size()) != mesh.vertex_count())
    raise(ErrorCode::DimensionMismatch, "mu size does not match vertex count");
  const auto adjacency = vertex_adjacency(mesh);
  const VertexNormals normals = vertex_normals(mesh);
  std::vector<double> delta(mu.size(), 0.0);
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    const auto& ring = adjacency[i];
    if (ring.empty()) continue;
    double acc = 0.0, wsum = 0.0;
    for (int j : ring) {
      const Vec3 d = mesh.vertices[i] - mesh.vertices[j];
      const double len = d.norm();
      if (len <= 0.0)
        raise(ErrorCode::ZeroLengthEdge, "vertices " + std::to_string(i) + " and " +
                                             std::to_string(j) + " coincide");
      const double weight = std::exp(-len);
      // Differences along the normal barely indicate in-surface detail, so
      // they are attenuated toward zero.
      const double along = std::abs(d.dot(normals.normals[i])) / len;
      acc += weight * (mu[i] - mu[std::size_t(j)]) * (1.0 - along);
      wsum += weight;
    }
    delta[std::size_t(i)] = cfg.gain * acc / wsum;
  }
  return delta;
}

std::vector<double> fairing_displacement(const TriangleMesh& mesh,
                                         const RefineConfig& cfg) {
  cfg.validate();
  const SparseOperator lap = cotangent_laplacian(mesh);
  const std::vector<double> areas = barycentric_vertex_areas(mesh);
  const VertexNormals normals = vertex_normals(mesh);
  const int n = mesh.vertex_count();
  Eigen::MatrixXd coords(n, 3);
  for (int i = 0; i < n; ++i) coords.row(i) = mesh.vertices[i].transpose();
  const Eigen::MatrixXd lap_coords = lap.matrix() * coords;
  std::vector<double> delta(std::size_t(n), 0.0);
  for (int i = 0; i < n; ++i) {
    if (!normals.valid[i] || areas[std::size_t(i)] <= 0.0) continue;
    const Vec3 mean_curv = lap_coords.row(i).transpose() / areas[std::size_t(i)];
    delta[std::size_t(i)] = cfg.fairing_step * mean_curv.dot(normals.normals[i]);
  }
  return delta;
}

TriangleMesh apply_detail_displacement(const TriangleMesh& mesh,
                                       const std::vector<double>& delta_mu,
                                       const std::vector<double>& delta_s,
                                       const RefineConfig& cfg) {
  cfg.validate();
  if (int(delta_mu.size()) != mesh.vertex_count() ||
      int(delta_s.size()) != mesh.vertex_count())
    raise(ErrorCode::DimensionMismatch, "displacement size does not match vertex count");
  const VertexNormals normals = vertex_normals(mesh);
  TriangleMesh out = mesh;
  for (int i = 0; i < mesh.vertex_count(); ++i) {
    const double amount =
        cfg.eta * delta_mu[std::size_t(i)] + (1.0 - cfg.eta) * delta_s[std::size_t(i)];
    out.vertices[i] += amount * normals.normals[i];
  }
  return out;
}

RefineResult refine_mesh(const TriangleMesh& deformed, const MapStack& stack,
                         const RefineConfig& cfg) {
  cfg.validate();
  validate_mesh(deformed);
  RefineResult result;
  const TriangleMesh fine = subdivide_midpoint(deformed, cfg.subdivision_levels);
  result.texture.tau = sample_intensity(fine, stack, cfg).tau;
  result.texture.mu = highpass_texture(fine, result.texture.tau, cfg);
  const std::vector<double> delta_mu =
      data_driven_displacement(fine, result.texture.mu, cfg);
  const std::vector<double> delta_s = fairing_displacement(fine, cfg);
  result.mesh = apply_detail_displacement(fine, delta_mu, delta_s, cfg);
  return result;
}

}  // namespace facegeom
