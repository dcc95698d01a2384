#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "csg/embedding.hpp"
#include "csg/kdtree.hpp"

namespace csg {

/// Exhaustive search below this reference size, KD-tree above. Both give identical answers.
inline constexpr int kIndexedSearchThreshold = 5000;

/// Nearest reference row for each query row.
class NearestReference {
 public:
  explicit NearestReference(const MatrixXd& reference);

  NeighborHit query(const double* point) const;
  /// Correspondences and squared distances for every row of `points`.
  std::vector<NeighborHit> query_all(const MatrixXd& points) const;

  const RowMatrixXd& reference() const { return reference_; }

 private:
  RowMatrixXd reference_;
  std::unique_ptr<KdTree> tree_;
};

std::vector<int> nearest_reference(const MatrixXd& points, const MatrixXd& reference);

/// Orthogonal R minimizing ||source * R - target||_F (reflections allowed, no centering).
/// Throws NumericalError when the cross-covariance is rank deficient.
MatrixXd procrustes_transform(const MatrixXd& source, const MatrixXd& target);

struct IcpOptions {
  int max_iterations = 100;
  double tolerance = 1e-7;
  /// Try sign-flip and principal-axes initializations and keep the best basin.
  bool multi_start = true;
  int screening_points = 2000;
  int screening_iterations = 30;
};

struct AlignmentResult {
  MatrixXd rotation;               // d x d, applied as coordinates * rotation
  double rms_distance = 0.0;       // root-mean-square nearest-reference distance at the end
  double initial_rms_distance = 0.0;  // before any transform
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;     // non-increasing
};

struct AlignedEmbedding {
  AlignmentResult result;
  SpectralEmbedding embedding;
};

/// Alternates nearest-reference matching and Procrustes until the RMS distance improves by
/// less than the tolerance.
AlignedEmbedding icp_align(const SpectralEmbedding& moving, const SpectralEmbedding& reference,
                           const IcpOptions& options = {});

/// Applies an orthogonal transform to coordinates and basis, marking the result aligned.
SpectralEmbedding apply_transform(const SpectralEmbedding& embedding, const MatrixXd& rotation);

void write_alignment_json(const std::filesystem::path& path, const AlignmentResult& result);
AlignmentResult read_alignment_json(const std::filesystem::path& path);

}  // namespace csg
