// Detail refinement: sample image intensity onto the mesh, high-pass it with
// a heat-kernel filter, turn the result into a normal-direction displacement
// attenuated by local geometry, and blend with a curvature fairing term.
#pragma once

#include <vector>

#include "facegeom/maps.hpp"
#include "facegeom/mesh.hpp"

namespace facegeom {

struct RefineConfig {
  double dt = 0.2;            // heat-filter time step
  double eta = 0.2;           // blend: eta * detail + (1 - eta) * fairing
  double gain = 1.0;          // scale of the data-driven displacement
  double fairing_step = 0.5;  // scale of the curvature fairing displacement
  int subdivision_levels = 1;
  double sample_radius_px = 5.0;  // search radius for off-mask projections

  void validate() const;
};

struct VertexTexture {
  std::vector<double> tau;  // sampled intensity
  std::vector<double> mu;   // high-passed intensity
};

// Orthographically projects each vertex into the intensity map and takes the
// nearest valid pixel within sample_radius_px. Vertices projecting farther
// from the mask inherit the mean of their already-sampled ring neighbors
// (iterated until stable; isolated leftovers get the global mean). Returns
// tau only; throws NoValidPixels when not a single vertex can be sampled.
VertexTexture sample_intensity(const TriangleMesh& mesh, const MapStack& stack,
                               const RefineConfig& cfg);

// mu = tau - (I - dt * L)^-1 tau with L the cotangent Laplacian: the
// low-pass residual of one implicit heat step, i.e. the fine-scale detail.
std::vector<double> highpass_texture(const TriangleMesh& mesh,
                                     const std::vector<double>& tau,
                                     const RefineConfig& cfg);

// Per-vertex detail displacement magnitude: an exp(-distance) weighted
// average of mu differences to the ring neighbors, each attenuated by how
// far the neighbor direction leans into the vertex normal, scaled by gain.
std::vector<double> data_driven_displacement(const TriangleMesh& mesh,
                                             const std::vector<double>& mu,
                                             const RefineConfig& cfg);

// fairing_step * <(L v) / area_i, n_i>: a normal-direction smoothing
// magnitude from the mean-curvature vector under barycentric vertex areas.
std::vector<double> fairing_displacement(const TriangleMesh& mesh,
                                         const RefineConfig& cfg);

// v' = v + (eta * delta_mu + (1 - eta) * delta_s) * n. Triangulation is
// preserved exactly.
TriangleMesh apply_detail_displacement(const TriangleMesh& mesh,
                                       const std::vector<double>& delta_mu,
                                       const std::vector<double>& delta_s,
                                       const RefineConfig& cfg);

struct RefineResult {
  TriangleMesh mesh;
  VertexTexture texture;  // tau and mu on the (subdivided) refined mesh
};

// Full chain: midpoint-subdivide, sample, high-pass, displace.
RefineResult refine_mesh(const TriangleMesh& deformed, const MapStack& stack,
                         const RefineConfig& cfg);

}  // namespace facegeom
