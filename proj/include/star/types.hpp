#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace star {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vectord = Vector<double>;
using Matrixd = Matrix<double>;

/// Rows are samples, columns are feature/embedding coordinates.
using SampleMatrix = Matrixd;

using SampleId = std::int64_t;
using Index = Eigen::Index;

}  // namespace star
