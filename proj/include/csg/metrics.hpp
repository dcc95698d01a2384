#pragma once

#include <optional>
#include <vector>

#include "csg/mesh.hpp"

namespace csg {

/// 2|P & R| / (|P| + |R|) over vertices whose reference is labelled. Both empty gives 1.
double dice_per_parcel(const VectorXi& pred, const VectorXi& ref, int parcel);

/// Fraction of labelled reference vertices predicted correctly. Throws when none is labelled.
double node_accuracy(const VectorXi& pred, const VectorXi& ref);

/// Mean Dice over parcels 0..num_parcels-1.
double mean_dice(const VectorXi& pred, const VectorXi& ref, int num_parcels);

enum class HausdorffPoints { boundary, all };

struct HausdorffOptions {
  HausdorffPoints points = HausdorffPoints::boundary;
  /// 100 gives the classical max; lower values take that percentile of the directed distances.
  double percentile = 100.0;
};

/// Vertex positions and 1-ring topology shared by all metric calls on one surface.
class SurfaceGeometry {
 public:
  explicit SurfaceGeometry(const SurfaceMesh& mesh);

  const Vertices& vertices() const { return vertices_; }
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
  double diameter() const;

 private:
  Vertices vertices_;
  std::vector<std::vector<int>> neighbors_;
  mutable std::optional<double> diameter_;
};

/// Parcel vertices with at least one neighbour carrying a different label.
std::vector<int> parcel_boundary(const VectorXi& labels, int parcel, const std::vector<std::vector<int>>& neighbors);

/// Directed distances from each `from` point to its nearest `to` point.
std::vector<double> directed_distances(const Vertices& vertices, const std::vector<int>& from, const std::vector<int>& to);

/// Symmetric Hausdorff distance between predicted and reference parcel point sets. An empty
/// predicted (or reference) parcel scores the mesh diameter; both empty scores 0.
double hausdorff_per_parcel(const VectorXi& pred, const VectorXi& ref, int parcel, const SurfaceGeometry& geometry,
                            const HausdorffOptions& options = {});

/// Exhaustive O(|A||B|) symmetric Hausdorff between two vertex sets; oracle for tests.
double hausdorff_brute_force(const Vertices& vertices, const std::vector<int>& a, const std::vector<int>& b);

struct SubjectMetrics {
  std::vector<double> dice;       // per parcel
  std::vector<double> hausdorff;  // per parcel, mm
  std::vector<int> ref_count;
  std::vector<int> pred_count;
  double accuracy = 0.0;

  double mean_dice() const;
  double mean_hausdorff() const;
};

SubjectMetrics evaluate_subject(const VectorXi& pred, const VectorXi& ref, int num_parcels,
                                const SurfaceGeometry& geometry, const HausdorffOptions& options = {});

/// Dice and Hausdorff per parcel averaged over subjects, then summarized across parcels.
struct ParcelSummary {
  std::vector<double> parcel_dice;
  std::vector<double> parcel_hausdorff;
  double mean_dice = 0.0;
  double std_dice = 0.0;
  double min_dice = 0.0;
  double max_dice = 0.0;
  double mean_hausdorff = 0.0;
  double accuracy = 0.0;
};

ParcelSummary summarize(const std::vector<SubjectMetrics>& subjects);

}  // namespace csg
