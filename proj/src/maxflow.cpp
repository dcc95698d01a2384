#include "csg/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

namespace csg {

MaxFlow::MaxFlow(int num_nodes)
    : num_nodes_(num_nodes), source_(num_nodes), sink_(num_nodes + 1), adj_(static_cast<std::size_t>(num_nodes) + 2) {}

void MaxFlow::add_edge(int u, int v, double cap, double rev_cap) {
  if (cap <= 0.0 && rev_cap <= 0.0) return;
  adj_[u].push_back({v, static_cast<int>(adj_[v].size()), cap, cap});
  adj_[v].push_back({u, static_cast<int>(adj_[u].size()) - 1, rev_cap, rev_cap});
  epsilon_ = std::max(epsilon_, std::max(cap, rev_cap));
}

void MaxFlow::add_terminal(int node, double source_cap, double sink_cap) {
  if (source_cap > 0.0) add_edge(source_, node, source_cap);
  if (sink_cap > 0.0) add_edge(node, sink_, sink_cap);
}

bool MaxFlow::build_levels() {
  level_.assign(adj_.size(), -1);
  std::queue<int> queue;
  level_[source_] = 0;
  queue.push(source_);
  while (!queue.empty()) {
    const int u = queue.front();
    queue.pop();
    for (const Arc& a : adj_[u]) {
      if (a.cap > epsilon_ && level_[a.to] < 0) {
        level_[a.to] = level_[u] + 1;
        queue.push(a.to);
      }
    }
  }
  return level_[sink_] >= 0;
}

double MaxFlow::push(int u, double limit) {
  if (u == sink_) return limit;
  for (std::size_t& i = next_[u]; i < adj_[u].size(); ++i) {
    Arc& a = adj_[u][i];
    if (a.cap <= epsilon_ || level_[a.to] != level_[u] + 1) continue;
    const double pushed = push(a.to, std::min(limit, a.cap));
    if (pushed > 0.0) {
      a.cap -= pushed;
      adj_[a.to][a.rev].cap += pushed;
      return pushed;
    }
  }
  return 0.0;
}

double MaxFlow::solve() {
  // Residuals below this are treated as saturated.
  epsilon_ *= 1e-13;
  double flow = 0.0;
  while (build_levels()) {
    next_.assign(adj_.size(), 0);
    for (;;) {
      const double pushed = push(source_, std::numeric_limits<double>::infinity());
      if (pushed <= 0.0) break;
      flow += pushed;
    }
  }
  source_side_.assign(adj_.size(), 0);
  for (std::size_t v = 0; v < adj_.size(); ++v) source_side_[v] = level_[v] >= 0;
  return flow;
}

double MaxFlow::cut_value() const {
  double cut = 0.0;
  for (std::size_t u = 0; u < adj_.size(); ++u) {
    if (!source_side_[u]) continue;
    for (const Arc& a : adj_[u]) {
      if (!source_side_[a.to]) cut += a.original;
    }
  }
  return cut;
}

}  // namespace csg
