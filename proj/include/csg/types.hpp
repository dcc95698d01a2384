#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace csg {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Eigen::MatrixXd;
using RowMatrixXd = RowMatrix<double>;
using VectorXd = Eigen::VectorXd;
using VectorXi = Eigen::VectorXi;
using SparseMatrixd = Eigen::SparseMatrix<double>;

/// Label value for vertices without a reference parcel.
inline constexpr int kUnlabeled = -1;

}  // namespace csg
