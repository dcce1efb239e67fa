// Sparse symmetric operators on meshes: cotangent Laplacian, per-edge
// stiffness weights, and an SPD solve with a verified residual.
#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "facegeom/mesh.hpp"

namespace facegeom {

// Thin wrapper around a compressed sparse matrix; duplicate triplets are
// summed on construction. `symmetric` is a promise checked cheaply (pattern
// + values) when asserted.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(int dimension, const std::vector<Eigen::Triplet<double>>& triplets,
                 bool symmetric);

  int dimension() const { return int(matrix_.rows()); }
  bool symmetric() const { return symmetric_; }
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }

  double coeff(int i, int j) const { return matrix_.coeff(i, j); }
  double row_sum(int i) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

 private:
  Eigen::SparseMatrix<double> matrix_;
  bool symmetric_ = false;
};

// Discrete Laplace-Beltrami operator with cotangent weights:
//   off-diagonal  L(i,j) = (cot a + cot b) / 2  over the 1-2 triangles on edge ij
//   diagonal      L(i,i) = -sum_j L(i,j)
// Applying L to the coordinate functions yields, at interior vertices, the
// (integrated) mean-curvature normal pointing into the surface.
// Throws DegenerateTriangle when a face area falls below `area_epsilon`.
constexpr double kDegenerateAreaEpsilon = 1e-12;  // mm^2
SparseOperator cotangent_laplacian(const TriangleMesh& mesh);

// Per-edge stiffness weights for the membrane term, returned as a symmetric
// operator with zero diagonal: entry (i,j) is the weight of edge ij.
enum class MembraneScheme {
  kUniform,      // every edge weight 1
  kCotangent,    // cotangent Laplacian off-diagonals (may be negative on obtuse edges)
  kBilaplacian,  // |(L*L)(i,j)| restricted to 1-ring edges
};
SparseOperator membrane_weights(const TriangleMesh& mesh, MembraneScheme scheme);

// Graph Laplacian D - W of an edge-weight operator, so that
// x' (D - W) x = sum_{edges ij} w_ij (x_i - x_j)^2.
SparseOperator weight_graph_laplacian(const SparseOperator& weights);

// Direct LDL' solve of a symmetric positive (semi-)definite system, one
// right-hand side per column. The relative residual ||Ax-b|| / ||b|| of each
// column is verified against `tol`; failure raises NotConverged, a failed
// factorization raises SingularSystem.
Eigen::MatrixXd solve_spd(const SparseOperator& op, const Eigen::MatrixXd& rhs,
                          double tol = 1e-8);

// Same solve split into analyze / factorize / solve so callers with a fixed
// sparsity pattern can reuse the symbolic analysis across refactorizations.
class SpdSolver {
 public:
  void analyze(const SparseOperator& op);
  void factorize(const SparseOperator& op);
  Eigen::MatrixXd solve(const SparseOperator& op, const Eigen::MatrixXd& rhs,
                        double tol = 1e-8) const;

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  bool analyzed_ = false;
};

}  // namespace facegeom
