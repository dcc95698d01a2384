#pragma once

#include <cstdint>

#include "csg/laplacian.hpp"

namespace csg {

struct EigenPairs {
  VectorXd values;   // ascending
  MatrixXd vectors;  // one unit eigenvector per column
  int iterations = 0;
  double max_residual = 0.0;
};

struct EigenSolverOptions {
  double tolerance = 1e-8;   // on ||L u - lambda u||, well inside the 1e-6 contract
  int max_iterations = 5000;
  std::uint64_t seed = 0;
  double shift = 1e-6;       // factorize L + shift * I
};

/// The k+1 smallest eigenpairs (trivial pair included) by shift-and-invert block subspace
/// iteration with Rayleigh-Ritz projection. Throws NumericalError carrying the worst residual
/// when the iteration cap is hit.
EigenPairs smallest_eigenpairs(const LaplacianMatrix& lap, int k, const EigenSolverOptions& options = {});

/// Full spectrum by dense symmetric decomposition, for N <= 2000. Test oracle.
EigenPairs dense_eig_oracle(const LaplacianMatrix& lap);

/// Flips each column so that its entry of largest magnitude (first on ties) is positive.
void normalize_eigenvector_signs(MatrixXd& vectors);

}  // namespace csg
