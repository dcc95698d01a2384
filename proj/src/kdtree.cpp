#include "csg/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace csg {

namespace {
constexpr int kLeafSize = 8;

inline bool better(double d, int idx, const NeighborHit& best) {
  return best.index < 0 || d < best.squared_distance || (d == best.squared_distance && idx < best.index);
}
}  // namespace

KdTree::KdTree(const MatrixXd& points) : points_(points), dim_(static_cast<int>(points.cols())) {
  order_.resize(static_cast<std::size_t>(points_.rows()));
  std::iota(order_.begin(), order_.end(), 0);
  if (!order_.empty()) build(0, static_cast<int>(order_.size()));
}

int KdTree::build(int begin, int end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, -1, -1});
  if (end - begin <= kLeafSize) return id;

  int split_dim = 0;
  double widest = -1.0;
  for (int c = 0; c < dim_; ++c) {
    double lo = points_(order_[begin], c), hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      lo = std::min(lo, points_(order_[i], c));
      hi = std::max(hi, points_(order_[i], c));
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      split_dim = c;
    }
  }
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
    const double va = points_(a, split_dim), vb = points_(b, split_dim);
    return va < vb || (va == vb && a < b);
  });
  const double split_value = points_(order_[mid], split_dim);
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[id].split_dim = split_dim;
  nodes_[id].split_value = split_value;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(int node_id, const double* query, NeighborHit& best) const {
  const Node& node = nodes_[node_id];
  if (node.split_dim < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int idx = order_[i];
      const double d = squared_distance(query, points_.row(idx).data(), dim_);
      if (better(d, idx, best)) best = {idx, d};
    }
    return;
  }
  const double diff = query[node.split_dim] - node.split_value;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, query, best);
  // Points across the plane are at least |diff| away; equality must still be visited
  // because a tie may carry a lower index.
  if (diff * diff <= best.squared_distance) search(far, query, best);
}

NeighborHit KdTree::nearest(const double* query) const {
  NeighborHit best;
  if (!nodes_.empty()) search(0, query, best);
  return best;
}

NeighborHit brute_force_nearest(const RowMatrixXd& points, const double* query) {
  NeighborHit best;
  const int dim = static_cast<int>(points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double d = squared_distance(query, points.row(i).data(), dim);
    if (better(d, static_cast<int>(i), best)) best = {static_cast<int>(i), d};
  }
  return best;
}

}  // namespace csg
