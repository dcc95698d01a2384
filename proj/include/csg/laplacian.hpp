#pragma once

#include "csg/graph.hpp"

namespace csg {

/// L = I - D^{-1/2} A D^{-1/2}.
struct LaplacianMatrix {
  SparseMatrixd matrix;
  VectorXd degree;

  int size() const { return static_cast<int>(matrix.rows()); }
};

/// Throws DataError when a node has zero degree.
LaplacianMatrix build_laplacian(const BrainGraph& graph);

}  // namespace csg
