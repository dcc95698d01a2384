#pragma once

#include <string_view>
#include <vector>

#include "csg/mesh.hpp"

namespace csg {

enum class AdjacencyMode { mesh_edges, identity };

struct WeightedEdge {
  int i = 0;
  int j = 0;  // i < j for mesh edges, i == j for identity self-loops
  double weight = 0.0;
};

/// Surface graph with per-node features (x, y, z, sulcal depth).
struct BrainGraph {
  int num_nodes = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 4> features;
  std::vector<WeightedEdge> edges;
  AdjacencyMode mode = AdjacencyMode::mesh_edges;

  /// Symmetric weighted adjacency; self-loops on the diagonal in identity mode.
  SparseMatrixd adjacency() const;
  /// Symmetric weight lookup; 0 when the pair is not an edge.
  double weight(int a, int b) const;
};

/// Edges from the mesh 1-ring weighted by inverse Euclidean length, or self-loops only.
BrainGraph build_graph(const SurfaceMesh& mesh, AdjacencyMode mode);

/// Compressed neighbour lists N(i) with i itself included, as used by graph convolution.
struct ConvStencil {
  std::vector<int> offsets;  // size N+1
  std::vector<int> nodes;

  int num_nodes() const { return static_cast<int>(offsets.size()) - 1; }
  int num_slots() const { return static_cast<int>(nodes.size()); }
};

ConvStencil conv_stencil(const BrainGraph& graph);

/// Stencil for a path 0-1-...-(n-1), each node with its own self-loop.
ConvStencil path_stencil(int n);

AdjacencyMode parse_adjacency_mode(std::string_view name);

}  // namespace csg
