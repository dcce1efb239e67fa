// Non-rigid template registration: alternating nearest-neighbor pairing,
// pair pruning, and a regularized quadratic deformation solve, driven by a
// stiffness-halving schedule.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "facegeom/align.hpp"
#include "facegeom/error.hpp"
#include "facegeom/lifting.hpp"
#include "facegeom/mesh.hpp"
#include "facegeom/sparse.hpp"

namespace facegeom {

struct RegistrationConfig {
  double alpha_p2point = 0.1;   // point-to-point data weight
  double alpha_p2plane = 1.0;   // point-to-plane data weight
  double alpha_memb_init = 1e8; // membrane stiffness schedule start
  double alpha_memb_stop = 1e6; // loop exits once stiffness halves below this
  // The published stiffness range assumes the membrane energy is measured on
  // a normalized scale; this factor converts it to the raw edge-weight sum
  // the solver assembles. See RegistrationConfig notes in the README.
  double stiffness_scale = 1e-8;
  double prune_distance = 1.0;    // mm, pair kept when within this distance
  double prune_angle_deg = 5.0;   // max normal disagreement
  bool prune_distance_decay = false;  // start at 10x distance, tighten to 1x
  double inner_tol = 0.01;        // mm, mean motion between inner rounds
  int max_inner_rounds = 8;
  double outer_motion_tol = 0.1;  // mm, halve stiffness when motion drops below
  int pair_diff_switch = 500;     // active-pair delta that flips the match space
  int max_outer_iterations = 200;
  MembraneScheme membrane_scheme = MembraneScheme::kBilaplacian;

  void validate() const;
};

// One quadratic solve inside an outer iteration: the step objective (frozen
// active set, membrane anchored at the outer iteration's start positions)
// before and after the solve. post <= pre up to rounding by construction.
struct InnerStepRecord {
  double objective_pre = 0.0;
  double objective_post = 0.0;
  int active_pairs = 0;
};

struct OuterIterationRecord {
  int iteration = 0;
  double alpha_memb = 0.0;        // stiffness used by this iteration
  double alpha_memb_after = 0.0;  // after the end-of-iteration relax check
  int active_pairs = 0;           // after the final re-prune
  double energy = 0.0;            // step objective after the last inner round
  double mean_motion = 0.0;       // mean vertex displacement over the iteration
  MatchSpace match_space = MatchSpace::kEmbedding;
  std::vector<InnerStepRecord> inner;
};

using RegistrationTrace = std::vector<OuterIterationRecord>;

void write_trace_jsonl(const std::filesystem::path& path, const RegistrationTrace& trace);
RegistrationTrace read_trace_jsonl(const std::filesystem::path& path);

// Raised when pruning leaves nothing; carries the trace up to that point.
class NoActivePairsError : public Error {
 public:
  NoActivePairsError(const std::string& message, RegistrationTrace trace)
      : Error(ErrorCode::NoActivePairs, message), trace(std::move(trace)) {}
  RegistrationTrace trace;
};

// Deactivates pairs farther than the distance threshold or whose vertex
// normals disagree by more than the angle threshold (pairs where either
// normal is degenerate pass the angle test). Never drops entries.
CorrespondenceSet prune_pairs(const CorrespondenceSet& matches,
                              const TriangleMesh& positions, const TargetMesh& target,
                              const RegistrationConfig& cfg,
                              double distance_factor = 1.0);

// The registration energy at the given template positions:
//   alpha_p2point * sum ||v_i - c_i||^2
// + alpha_p2plane * sum (n(c_i) . (v_i - c_i))^2      over active pairs
// + alpha_memb * stiffness_scale * sum_ij w_ij ||v_i - v_j||^2  over edges (both directions)
// Throws EmptyPairSet when `matches` has no entries at all.
double deformation_energy(const TriangleMesh& positions, const TargetMesh& target,
                          const CorrespondenceSet& matches, const SparseOperator& weights,
                          double alpha_memb, const RegistrationConfig& cfg);

struct DeformationStepResult {
  TriangleMesh mesh;
  std::vector<InnerStepRecord> inner;
  CorrespondenceSet matches;  // activity refreshed by the inner re-prunes
};

// One outer-iteration body: repeat { solve the 3N quadratic with the active
// set frozen; re-prune against the moved vertices } until the mean vertex
// motion of a round falls below inner_tol or max_inner_rounds is reached.
// The membrane term penalizes change of each edge vector relative to the
// entry positions, so an exactly matching template stays put.
DeformationStepResult solve_deformation_step(const TriangleMesh& positions,
                                             const TargetMesh& target,
                                             const CorrespondenceSet& matches,
                                             const SparseOperator& weights,
                                             double alpha_memb,
                                             const RegistrationConfig& cfg);

struct RegistrationResult {
  TriangleMesh mesh;
  RegistrationTrace trace;
};

// Full schedule: apply `init`, then alternate matching (embedding space
// until the active-pair count stabilizes, euclidean afterwards), pruning,
// and deformation steps, halving alpha_memb whenever an iteration's mean
// motion drops below outer_motion_tol, until it falls below alpha_memb_stop.
RegistrationResult register_template(const TemplateMesh& tmpl, const TargetMesh& target,
                                     const AffineTransform& init,
                                     const RegistrationConfig& cfg);

}  // namespace facegeom
