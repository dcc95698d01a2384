#include "csg/embedding.hpp"

#include <string>

#include "csg/error.hpp"
#include "csg/text_io.hpp"

namespace csg {

SpectralEmbedding spectral_coordinates(const EigenPairs& pairs, int d) {
  if (d < 1) throw UsageError("embedding dimension must be positive");
  if (pairs.values.size() == 0 || !(pairs.values[0] < kTrivialEigenvalue)) {
    throw NumericalError("first eigenpair is not the trivial null-space pair");
  }
  const int available = static_cast<int>(pairs.values.size()) - 1;
  int nontrivial = 0;
  for (int j = 1; j <= available; ++j) {
    if (pairs.values[j] >= kTrivialEigenvalue) ++nontrivial;
  }
  if (d > available || d > nontrivial) {
    throw UsageError("requested embedding dimension " + std::to_string(d) + " but only " +
                     std::to_string(nontrivial) + " nontrivial eigenpairs are available");
  }
  for (int j = 1; j <= d; ++j) {
    if (!(pairs.values[j] >= kTrivialEigenvalue)) {
      throw UsageError("eigenpair " + std::to_string(j) + " is in the null space; the graph is disconnected");
    }
  }
  SpectralEmbedding e;
  e.eigenvalues = pairs.values.segment(1, d);
  e.eigenvectors = pairs.vectors.middleCols(1, d);
  e.coordinates = e.eigenvectors * e.eigenvalues.cwiseSqrt().asDiagonal();
  return e;
}

SpectralEmbedding embed_graph(const BrainGraph& graph, int d, const EigenSolverOptions& options) {
  const LaplacianMatrix lap = build_laplacian(graph);
  return spectral_coordinates(smallest_eigenpairs(lap, d, options), d);
}

void write_embedding(const std::filesystem::path& file, const SpectralEmbedding& embedding) {
  write_matrix_text(file, embedding.coordinates);
  write_vector_text(file.parent_path() / "eigenvalues.txt", embedding.eigenvalues);
}

SpectralEmbedding read_embedding(const std::filesystem::path& file, bool aligned) {
  SpectralEmbedding e;
  e.coordinates = read_matrix_text(file);
  e.eigenvalues = read_vector_text(file.parent_path() / "eigenvalues.txt");
  if (e.eigenvalues.size() != e.coordinates.cols()) {
    throw DataError(file.string() + ": dimension " + std::to_string(e.coordinates.cols()) +
                    " does not match " + std::to_string(e.eigenvalues.size()) + " eigenvalues");
  }
  e.aligned = aligned;
  if (!aligned && (e.eigenvalues.array() > 0.0).all()) {
    e.eigenvectors = e.coordinates * e.eigenvalues.cwiseSqrt().cwiseInverse().asDiagonal();
  }
  return e;
}

}  // namespace csg
