// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace bitsearch {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace bitsearch
