#include "csg/features.hpp"

#include <cmath>

#include "csg/error.hpp"
#include "csg/stats.hpp"

namespace csg {

ExperimentMode parse_experiment_mode(std::string_view name) {
  if (name == "euclidean") return ExperimentMode::euclidean;
  if (name == "spectral") return ExperimentMode::spectral;
  if (name == "pointwise" || name == "pointwise-spectral") return ExperimentMode::pointwise;
  throw UsageError("unknown mode '" + std::string(name) + "' (expected euclidean, spectral or pointwise)");
}

std::string to_string(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::euclidean:
      return "euclidean";
    case ExperimentMode::spectral:
      return "spectral";
    case ExperimentMode::pointwise:
      return "pointwise";
  }
  return "unknown";
}

FeatureMode feature_mode_of(ExperimentMode mode) {
  return mode == ExperimentMode::euclidean ? FeatureMode::euclidean : FeatureMode::spectral;
}

MatrixXd normalized_spectral_coordinates(const SpectralEmbedding& embedding) {
  const double mean_sq = embedding.coordinates.squaredNorm() / static_cast<double>(embedding.num_nodes());
  if (!(mean_sq > 0.0)) throw NumericalError("spectral coordinates are identically zero");
  return embedding.coordinates / std::sqrt(mean_sq);
}

MatrixXd build_feature_matrix(const SpectralEmbedding& embedding, const BrainGraph& graph, FeatureMode mode) {
  const int n = graph.num_nodes;
  if (mode == FeatureMode::euclidean) {
    MatrixXd x(n, 4);
    for (int c = 0; c < 3; ++c) x.col(c) = z_score(graph.features.col(c));
    x.col(3) = graph.features.col(3);
    return x;
  }
  if (embedding.num_nodes() != n) {
    throw UsageError("embedding has " + std::to_string(embedding.num_nodes()) + " rows for a " +
                     std::to_string(n) + "-node graph");
  }
  if (!embedding.aligned) throw UsageError("spectral features require an aligned embedding");
  const int d = embedding.dim();
  MatrixXd x(n, d + 1);
  x.leftCols(d) = normalized_spectral_coordinates(embedding);
  x.col(d) = graph.features.col(3);
  return x;
}

MatrixXd kernel_coordinates(const MatrixXd& coordinates, const BrainGraph& mesh_graph) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& e : mesh_graph.edges) {
    if (e.i == e.j) continue;
    total += (coordinates.row(e.i) - coordinates.row(e.j)).norm();
    ++count;
  }
  if (count == 0 || !(total > 0.0)) return coordinates;
  return coordinates * (static_cast<double>(count) / total);
}

}  // namespace csg
