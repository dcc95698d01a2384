#include "csg/graph.hpp"

#include <algorithm>
#include <string>

#include "csg/error.hpp"

namespace csg {

SparseMatrixd BrainGraph::adjacency() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(edges.size() * 2);
  for (const auto& e : edges) {
    triplets.emplace_back(e.i, e.j, e.weight);
    if (e.i != e.j) triplets.emplace_back(e.j, e.i, e.weight);
  }
  SparseMatrixd a(num_nodes, num_nodes);
  a.setFromTriplets(triplets.begin(), triplets.end());
  return a;
}

double BrainGraph::weight(int a, int b) const {
  const int lo = std::min(a, b);
  const int hi = std::max(a, b);
  const auto it = std::lower_bound(edges.begin(), edges.end(), std::pair{lo, hi},
                                   [](const WeightedEdge& e, const std::pair<int, int>& key) {
                                     return std::pair{e.i, e.j} < key;
                                   });
  if (it != edges.end() && it->i == lo && it->j == hi) return it->weight;
  return 0.0;
}

BrainGraph build_graph(const SurfaceMesh& mesh, AdjacencyMode mode) {
  BrainGraph g;
  g.num_nodes = mesh.num_vertices();
  g.mode = mode;
  g.features.resize(g.num_nodes, 4);
  g.features.leftCols<3>() = mesh.vertices;
  g.features.col(3) = mesh.sulcal_depth;

  if (mode == AdjacencyMode::identity) {
    g.edges.reserve(static_cast<std::size_t>(g.num_nodes));
    for (int i = 0; i < g.num_nodes; ++i) g.edges.push_back({i, i, 1.0});
    return g;
  }

  const auto edges = unique_edges(mesh.faces);
  g.edges.reserve(edges.size());
  for (const auto& [a, b] : edges) {
    const double length = (mesh.vertices.row(a) - mesh.vertices.row(b)).norm();
    if (!(length > 0.0)) {
      throw DataError("zero-length edge between coincident vertices " + std::to_string(a) + " and " +
                      std::to_string(b));
    }
    g.edges.push_back({a, b, 1.0 / length});
  }
  return g;
}

ConvStencil conv_stencil(const BrainGraph& graph) {
  std::vector<std::vector<int>> lists(static_cast<std::size_t>(graph.num_nodes));
  for (int i = 0; i < graph.num_nodes; ++i) lists[i].push_back(i);
  for (const auto& e : graph.edges) {
    if (e.i == e.j) continue;
    lists[e.i].push_back(e.j);
    lists[e.j].push_back(e.i);
  }
  ConvStencil s;
  s.offsets.reserve(lists.size() + 1);
  s.offsets.push_back(0);
  for (auto& list : lists) {
    std::sort(list.begin(), list.end());
    s.nodes.insert(s.nodes.end(), list.begin(), list.end());
    s.offsets.push_back(static_cast<int>(s.nodes.size()));
  }
  return s;
}

ConvStencil path_stencil(int n) {
  ConvStencil s;
  s.offsets.push_back(0);
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - 1); j <= std::min(n - 1, i + 1); ++j) s.nodes.push_back(j);
    s.offsets.push_back(static_cast<int>(s.nodes.size()));
  }
  return s;
}

AdjacencyMode parse_adjacency_mode(std::string_view name) {
  if (name == "mesh_edges" || name == "mesh") return AdjacencyMode::mesh_edges;
  if (name == "identity") return AdjacencyMode::identity;
  throw UsageError("unknown adjacency mode '" + std::string(name) + "'");
}

}  // namespace csg
