#pragma once

#include <string>
#include <string_view>

#include "csg/embedding.hpp"
#include "csg/graph.hpp"

namespace csg {

/// Which coordinates feed the network: aligned spectral or Euclidean.
enum class FeatureMode { spectral, euclidean };

/// The three experiment arms. Pointwise uses spectral features, identity adjacency and
/// frozen kernels.
enum class ExperimentMode { euclidean, spectral, pointwise };

ExperimentMode parse_experiment_mode(std::string_view name);
std::string to_string(ExperimentMode mode);
FeatureMode feature_mode_of(ExperimentMode mode);

/// Spectral coordinates rescaled to unit RMS radius. A single scale factor per subject keeps
/// the orthogonal alignment intact.
MatrixXd normalized_spectral_coordinates(const SpectralEmbedding& embedding);

/// N x (d+1) in spectral mode: (u_1..u_d, sulcal depth); N x 4 in Euclidean mode:
/// (x, y, z z-scored per column, sulcal depth). Spectral mode requires an aligned embedding.
MatrixXd build_feature_matrix(const SpectralEmbedding& embedding, const BrainGraph& graph, FeatureMode mode);

/// Coordinates fed to the Gaussian kernels: the feature-space coordinates divided by the
/// mean mesh edge length in that space, so neighbour offsets are of order one.
MatrixXd kernel_coordinates(const MatrixXd& coordinates, const BrainGraph& mesh_graph);

}  // namespace csg
