#pragma once

#include <filesystem>

#include "csg/eigen_solver.hpp"

namespace csg {

/// Normalized spectral coordinates: column j is sqrt(lambda_j) * u_j over the retained
/// nontrivial eigenpairs.
struct SpectralEmbedding {
  VectorXd eigenvalues;   // d, strictly positive, ascending
  MatrixXd eigenvectors;  // N x d orthonormal basis (rotated along with the coordinates)
  MatrixXd coordinates;   // N x d
  bool aligned = false;

  int dim() const { return static_cast<int>(coordinates.cols()); }
  int num_nodes() const { return static_cast<int>(coordinates.rows()); }
};

/// Eigenvalues below this are the numerical null space.
inline constexpr double kTrivialEigenvalue = 1e-8;

/// Drops the trivial pair and scales the next d eigenvectors by sqrt(lambda).
SpectralEmbedding spectral_coordinates(const EigenPairs& pairs, int d);

/// Laplacian, eigensolve and coordinates in one call.
SpectralEmbedding embed_graph(const BrainGraph& graph, int d, const EigenSolverOptions& options = {});

/// `<file>` holds `N d` then N rows; eigenvalues go to `eigenvalues.txt` beside it.
void write_embedding(const std::filesystem::path& file, const SpectralEmbedding& embedding);
SpectralEmbedding read_embedding(const std::filesystem::path& file, bool aligned);

}  // namespace csg
