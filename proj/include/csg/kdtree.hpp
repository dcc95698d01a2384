#pragma once

#include <vector>

#include "csg/types.hpp"

namespace csg {

/// Squared Euclidean distance accumulated in coordinate order. Every nearest-neighbour path
/// uses this so exhaustive and indexed searches compare bit-identical values.
inline double squared_distance(const double* a, const double* b, int dim) {
  double sum = 0.0;
  for (int c = 0; c < dim; ++c) {
    const double diff = a[c] - b[c];
    sum += diff * diff;
  }
  return sum;
}

struct NeighborHit {
  int index = -1;
  double squared_distance = 0.0;
};

/// Exact nearest-neighbour index; ties resolve to the lowest point index.
class KdTree {
 public:
  explicit KdTree(const MatrixXd& points);

  NeighborHit nearest(const double* query) const;

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(points_.rows()); }

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int split_dim = -1;  // -1 marks a leaf
    double split_value = 0.0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end);
  void search(int node, const double* query, NeighborHit& best) const;

  RowMatrixXd points_;
  int dim_ = 0;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Exhaustive scan with the same tie rule.
NeighborHit brute_force_nearest(const RowMatrixXd& points, const double* query);

}  // namespace csg
