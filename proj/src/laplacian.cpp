#include "csg/laplacian.hpp"

#include <cmath>
#include <string>

#include "csg/error.hpp"

namespace csg {

LaplacianMatrix build_laplacian(const BrainGraph& graph) {
  const SparseMatrixd a = graph.adjacency();
  LaplacianMatrix lap;
  lap.degree = VectorXd::Zero(graph.num_nodes);
  for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrixd::InnerIterator it(a, col); it; ++it) lap.degree[it.row()] += it.value();
  }
  VectorXd inv_sqrt(graph.num_nodes);
  for (int i = 0; i < graph.num_nodes; ++i) {
    if (!(lap.degree[i] > 0.0)) throw DataError("node " + std::to_string(i) + " is isolated (zero degree)");
    inv_sqrt[i] = 1.0 / std::sqrt(lap.degree[i]);
  }

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(a.nonZeros()) + static_cast<std::size_t>(graph.num_nodes));
  VectorXd diagonal = VectorXd::Ones(graph.num_nodes);
  for (Eigen::Index col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrixd::InnerIterator it(a, col); it; ++it) {
      // The product of the two scalings commutes, so L is exactly symmetric.
      const double value = it.value() * (inv_sqrt[it.row()] * inv_sqrt[it.col()]);
      if (it.row() == it.col()) {
        diagonal[it.row()] -= value;
      } else {
        triplets.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), -value);
      }
    }
  }
  for (int i = 0; i < graph.num_nodes; ++i) {
    if (diagonal[i] != 0.0) triplets.emplace_back(i, i, diagonal[i]);
  }
  lap.matrix.resize(graph.num_nodes, graph.num_nodes);
  lap.matrix.setFromTriplets(triplets.begin(), triplets.end());
  return lap;
}

}  // namespace csg
