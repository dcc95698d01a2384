#pragma once

#include <vector>

namespace csg {

/// s-t max-flow / min-cut on a directed graph with real capacities (Dinic's algorithm).
class MaxFlow {
 public:
  explicit MaxFlow(int num_nodes);

  /// Arc u -> v with capacity `cap` and reverse arc with `rev_cap`.
  void add_edge(int u, int v, double cap, double rev_cap = 0.0);
  /// Capacities source -> node and node -> sink.
  void add_terminal(int node, double source_cap, double sink_cap);

  double solve();

  /// After solve(): true when `node` is on the source side of the minimum cut.
  bool on_source_side(int node) const { return source_side_[node]; }
  /// Capacity of arcs from the source side to the sink side in the original network.
  double cut_value() const;

  int num_nodes() const { return num_nodes_; }

 private:
  struct Arc {
    int to;
    int rev;
    double cap;        // residual
    double original;
  };

  bool build_levels();
  double push(int u, double limit);

  int num_nodes_;
  int source_;
  int sink_;
  std::vector<std::vector<Arc>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> next_;
  std::vector<char> source_side_;
  double epsilon_ = 0.0;
};

}  // namespace csg
