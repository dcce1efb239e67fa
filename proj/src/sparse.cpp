#include "facegeom/sparse.hpp"

#include <cmath>
#include <string>

#include "facegeom/error.hpp"

namespace facegeom {

SparseOperator::SparseOperator(int dimension,
                               const std::vector<Eigen::Triplet<double>>& triplets,
                               bool symmetric)
    : symmetric_(symmetric) {
  if (dimension < 0) raise(ErrorCode::ValidationError, "negative operator dimension");
  for (const auto& t : triplets) {
    if (t.row() < 0 || t.row() >= dimension || t.col() < 0 || t.col() >= dimension)
      raise(ErrorCode::ValidationError, "triplet index outside operator dimension");
  }
  matrix_.resize(dimension, dimension);
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();
  if (symmetric_) {
    // Assembly order can differ between (i,j) and (j,i), so allow rounding.
    const Eigen::SparseMatrix<double> diff =
        matrix_ - Eigen::SparseMatrix<double>(matrix_.transpose());
    double scale = 0.0;
    for (int k = 0; k < matrix_.nonZeros(); ++k)
      scale = std::max(scale, std::abs(matrix_.valuePtr()[k]));
    double worst = 0.0;
    for (int k = 0; k < diff.nonZeros(); ++k)
      worst = std::max(worst, std::abs(diff.valuePtr()[k]));
    if (worst > 1e-9 * std::max(scale, 1.0))
      raise(ErrorCode::ValidationError, "operator marked symmetric is not");
  }
}

double SparseOperator::row_sum(int i) const {
  double s = 0.0;
  // Stored column-major; walk the row via the transpose trick only when
  // needed. Symmetric operators can walk column i instead.
  if (symmetric_) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, i); it; ++it)
      s += it.value();
    return s;
  }
  for (int c = 0; c < matrix_.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator it(matrix_, c); it; ++it)
      if (it.row() == i) s += it.value();
  return s;
}

Eigen::VectorXd SparseOperator::apply(const Eigen::VectorXd& x) const {
  if (x.size() != matrix_.cols())
    raise(ErrorCode::DimensionMismatch,
          "operator of dimension " + std::to_string(matrix_.cols()) +
              " applied to vector of size " + std::to_string(x.size()));
  return matrix_ * x;
}

SparseOperator cotangent_laplacian(const TriangleMesh& mesh) {
  const int n = mesh.vertex_count();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.faces.size() * 12);
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const Face& f = mesh.faces[fi];
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    const double area = 0.5 * (b - a).cross(c - a).norm();
    if (area <= kDegenerateAreaEpsilon)
      raise(ErrorCode::DegenerateTriangle,
            "face " + std::to_string(fi) + " has area " + std::to_string(area) +
                " mm^2");
    // Half-cotangent of the angle opposite each edge.
    for (int k = 0; k < 3; ++k) {
      const Vec3& apex = mesh.vertices[f[k]];
      const int i = f[(k + 1) % 3];
      const int j = f[(k + 2) % 3];
      const Vec3 u = mesh.vertices[i] - apex;
      const Vec3 v = mesh.vertices[j] - apex;
      const double w = 0.5 * u.dot(v) / u.cross(v).norm();
      trips.emplace_back(i, j, w);
      trips.emplace_back(j, i, w);
      trips.emplace_back(i, i, -w);
      trips.emplace_back(j, j, -w);
    }
  }
  return SparseOperator(n, trips, true);
}

SparseOperator membrane_weights(const TriangleMesh& mesh, MembraneScheme scheme) {
  const int n = mesh.vertex_count();
  const auto edges = edge_list(mesh);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 2);

  auto push_edge = [&trips](int i, int j, double w) {
    trips.emplace_back(i, j, w);
    trips.emplace_back(j, i, w);
  };

  switch (scheme) {
    case MembraneScheme::kUniform:
      for (const auto& [i, j] : edges) push_edge(i, j, 1.0);
      break;
    case MembraneScheme::kCotangent: {
      const SparseOperator lap = cotangent_laplacian(mesh);
      for (const auto& [i, j] : edges) push_edge(i, j, lap.coeff(i, j));
      break;
    }
    case MembraneScheme::kBilaplacian: {
      const SparseOperator lap = cotangent_laplacian(mesh);
      const Eigen::SparseMatrix<double> squared = lap.matrix() * lap.matrix();
      for (const auto& [i, j] : edges)
        push_edge(i, j, std::abs(squared.coeff(i, j)));
      break;
    }
  }
  return SparseOperator(n, trips, true);
}

SparseOperator weight_graph_laplacian(const SparseOperator& weights) {
  const int n = weights.dimension();
  std::vector<Eigen::Triplet<double>> trips;
  const auto& m = weights.matrix();
  for (int c = 0; c < m.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) {
      if (it.row() == it.col()) continue;
      // Each undirected edge shows up twice ((i,j) and (j,i)); emitting the
      // half-contribution both times assembles the full Laplacian.
      trips.emplace_back(it.row(), it.col(), -it.value());
      trips.emplace_back(it.row(), it.row(), it.value());
    }
  }
  return SparseOperator(n, trips, true);
}

namespace {

Eigen::MatrixXd checked_solve(
    const Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>& ldlt,
    const Eigen::SparseMatrix<double>& matrix, const Eigen::MatrixXd& rhs,
    double tol) {
  Eigen::MatrixXd x = ldlt.solve(rhs);
  if (!x.allFinite())
    raise(ErrorCode::SingularSystem, "solution contains non-finite entries");
  for (int c = 0; c < rhs.cols(); ++c) {
    const double bn = rhs.col(c).norm();
    const double rn = (matrix * x.col(c) - rhs.col(c)).norm();
    const double rel = bn > 0.0 ? rn / bn : rn;
    if (rel > tol)
      raise(ErrorCode::NotConverged,
            "relative residual " + std::to_string(rel) + " exceeds tolerance " +
                std::to_string(tol));
  }
  return x;
}

}  // namespace

Eigen::MatrixXd solve_spd(const SparseOperator& op, const Eigen::MatrixXd& rhs,
                          double tol) {
  if (rhs.rows() != op.dimension())
    raise(ErrorCode::DimensionMismatch,
          "rhs has " + std::to_string(rhs.rows()) + " rows for operator of dimension " +
              std::to_string(op.dimension()));
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  ldlt.compute(op.matrix());
  if (ldlt.info() != Eigen::Success)
    raise(ErrorCode::SingularSystem, "LDL' factorization failed");
  return checked_solve(ldlt, op.matrix(), rhs, tol);
}

void SpdSolver::analyze(const SparseOperator& op) {
  ldlt_.analyzePattern(op.matrix());
  analyzed_ = true;
}

void SpdSolver::factorize(const SparseOperator& op) {
  if (!analyzed_) {
    ldlt_.compute(op.matrix());
  } else {
    ldlt_.factorize(op.matrix());
  }
  if (ldlt_.info() != Eigen::Success)
    raise(ErrorCode::SingularSystem, "LDL' factorization failed");
}

Eigen::MatrixXd SpdSolver::solve(const SparseOperator& op, const Eigen::MatrixXd& rhs,
                                 double tol) const {
  if (rhs.rows() != op.dimension())
    raise(ErrorCode::DimensionMismatch, "rhs rows do not match operator dimension");
  return checked_solve(ldlt_, op.matrix(), rhs, tol);
}

}  // namespace facegeom
