#include "csg/eigen_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <string>

#include "csg/error.hpp"
#include "csg/rng.hpp"

namespace csg {

void normalize_eigenvector_signs(MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

namespace {

MatrixXd orthonormal_basis(const MatrixXd& block) {
  Eigen::HouseholderQR<MatrixXd> qr(block);
  return qr.householderQ() * MatrixXd::Identity(block.rows(), block.cols());
}

}  // namespace

EigenPairs smallest_eigenpairs(const LaplacianMatrix& lap, int k, const EigenSolverOptions& options) {
  const int n = lap.size();
  if (k < 0 || k + 1 > n) {
    throw UsageError("requested " + std::to_string(k + 1) + " eigenpairs of a " + std::to_string(n) +
                     "-node Laplacian");
  }
  const int wanted = k + 1;
  const int block = std::min(n, std::max(2 * wanted, wanted + 8));

  SparseMatrixd shifted = lap.matrix;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += options.shift;
  shifted.makeCompressed();
  Eigen::SimplicialLDLT<SparseMatrixd> factor(shifted);
  if (factor.info() != Eigen::Success) throw NumericalError("factorization of the shifted Laplacian failed");

  Rng rng(options.seed);
  MatrixXd start(n, block);
  for (Eigen::Index c = 0; c < start.cols(); ++c) {
    for (Eigen::Index r = 0; r < start.rows(); ++r) start(r, c) = rng.normal();
  }
  MatrixXd basis = orthonormal_basis(start);

  EigenPairs out;
  double worst = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    basis = orthonormal_basis(factor.solve(basis));
    const MatrixXd lq = lap.matrix * basis;
    MatrixXd projected = basis.transpose() * lq;
    projected = 0.5 * (projected + projected.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> ritz(projected);
    basis = basis * ritz.eigenvectors();
    const MatrixXd l_ritz = lq * ritz.eigenvectors();

    worst = 0.0;
    for (int j = 0; j < wanted; ++j) {
      const double r = (l_ritz.col(j) - ritz.eigenvalues()[j] * basis.col(j)).norm();
      worst = std::max(worst, r);
    }
    if (worst <= options.tolerance) {
      out.values = ritz.eigenvalues().head(wanted);
      out.vectors = basis.leftCols(wanted);
      normalize_eigenvector_signs(out.vectors);
      out.iterations = it;
      out.max_residual = worst;
      return out;
    }
  }
  throw NumericalError("eigensolver did not converge in " + std::to_string(options.max_iterations) +
                       " iterations (worst residual " + std::to_string(worst) + ")");
}

EigenPairs dense_eig_oracle(const LaplacianMatrix& lap) {
  if (lap.size() > 2000) throw UsageError("dense eigen oracle is limited to N <= 2000");
  const MatrixXd dense = MatrixXd(lap.matrix);
  Eigen::SelfAdjointEigenSolver<MatrixXd> solver(dense);
  EigenPairs out;
  out.values = solver.eigenvalues();
  out.vectors = solver.eigenvectors();
  normalize_eigenvector_signs(out.vectors);
  out.iterations = 1;
  out.max_residual = (dense * out.vectors - out.vectors * out.values.asDiagonal()).colwise().norm().maxCoeff();
  return out;
}

}  // namespace csg
