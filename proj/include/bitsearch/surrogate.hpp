// SPDX-License-Identifier: Apache-2.0
//
// Cubic radial-basis-function quality predictor with an affine tail:
//
//   s(x) = sum_i w_i * |x - x_i|^3 + b + a^T x,   with P^T w = 0.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bitsearch/config_space.hpp"
#include "bitsearch/error.hpp"
#include "bitsearch/linalg.hpp"

namespace bitsearch {

/// Free-layer bits scaled to [0, 1] by each layer's min/max choice.
inline Vector<double> encode(const BitConfig& config, const SearchSpace& space) {
  const auto& free = space.free_layers();
  Vector<double> features(static_cast<Eigen::Index>(free.size()));
  for (std::size_t k = 0; k < free.size(); ++k) {
    const auto& layer = space.layer(free[k]);
    const double span = layer.max_choice() - layer.min_choice();
    features(static_cast<Eigen::Index>(k)) =
        span > 0 ? (config[free[k]] - layer.min_choice()) / span : 0.0;
  }
  return features;
}

/// One row per config.
inline Matrix<double> encode_batch(std::span<const BitConfig> configs, const SearchSpace& space) {
  Matrix<double> rows(static_cast<Eigen::Index>(configs.size()),
                      static_cast<Eigen::Index>(space.free_layers().size()));
  for (std::size_t n = 0; n < configs.size(); ++n)
    rows.row(static_cast<Eigen::Index>(n)) = encode(configs[n], space).transpose();
  return rows;
}

template <typename Scalar>
inline Scalar cubic_kernel(Scalar r) {
  return r * r * r;
}

template <typename Scalar = double>
class RbfModel {
 public:
  RbfModel() = default;

  Eigen::Index dimension() const { return centers_.cols(); }
  Eigen::Index center_count() const { return centers_.rows(); }
  const Matrix<Scalar>& centers() const { return centers_; }
  const Vector<Scalar>& weights() const { return weights_; }
  /// Intercept followed by one coefficient per feature.
  const Vector<Scalar>& tail_coefficients() const { return tail_; }
  Scalar regularization() const { return regularization_; }

  template <typename Derived>
  Scalar predict(const Eigen::MatrixBase<Derived>& x) const {
    if (x.size() != dimension()) throw Error("rbf predict: dimension mismatch");
    Scalar value = tail_(0);
    for (Eigen::Index j = 0; j < dimension(); ++j) value += tail_(j + 1) * x(j);
    for (Eigen::Index i = 0; i < center_count(); ++i) {
      const Scalar r = (centers_.row(i).transpose() - x.derived()).norm();
      value += weights_(i) * cubic_kernel(r);
    }
    return value;
  }

  /// Predicts every row of `queries`. Distances come from one GEMM per block
  /// via |x-c|^2 = |x|^2 + |c|^2 - 2 x.c.
  template <typename Derived>
  Vector<Scalar> predict_batch(const Eigen::MatrixBase<Derived>& queries) const {
    if (queries.cols() != dimension()) throw Error("rbf predict: dimension mismatch");
    constexpr Eigen::Index kBlock = 512;
    Vector<Scalar> out(queries.rows());
    for (Eigen::Index start = 0; start < queries.rows(); start += kBlock) {
      const Eigen::Index rows = std::min(kBlock, queries.rows() - start);
      const auto block = queries.middleRows(start, rows);
      const Vector<Scalar> query_norms = block.rowwise().squaredNorm();
      Matrix<Scalar> dist = Scalar(-2) * (block * centers_.transpose());
      dist.colwise() += query_norms;
      dist.rowwise() += center_norms_.transpose();
      const Matrix<Scalar> phi =
          dist.array().max(Scalar(0)).sqrt().cube().matrix();
      out.segment(start, rows) = phi * weights_ +
                                 block * tail_.tail(dimension()) +
                                 Vector<Scalar>::Constant(rows, tail_(0));
    }
    return out;
  }

  template <typename S, typename DX, typename DY>
  friend RbfModel<S> fit_rbf_impl(const Eigen::MatrixBase<DX>&, const Eigen::MatrixBase<DY>&, S);

 private:
  Matrix<Scalar> centers_;
  Vector<Scalar> center_norms_;
  Vector<Scalar> weights_;
  Vector<Scalar> tail_;
  Scalar regularization_ = 0;
};

template <typename Scalar, typename DerivedX, typename DerivedY>
RbfModel<Scalar> fit_rbf_impl(const Eigen::MatrixBase<DerivedX>& inputs,
                              const Eigen::MatrixBase<DerivedY>& targets, Scalar regularization) {
  if (inputs.rows() != targets.size()) throw FitError("rbf fit: inputs and targets differ in length");
  if (regularization < 0) throw FitError("rbf fit: regularization must be non-negative");
  const Eigen::Index dim = inputs.cols();

  // Merge exact duplicates (average their targets), keeping first-seen order.
  std::map<std::vector<Scalar>, Eigen::Index> seen;
  std::vector<Eigen::Index> first_row;
  std::vector<Scalar> sums;
  std::vector<int> counts;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    std::vector<Scalar> key(static_cast<std::size_t>(dim));
    for (Eigen::Index j = 0; j < dim; ++j) key[static_cast<std::size_t>(j)] = inputs(i, j);
    auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(first_row.size()));
    if (inserted) {
      first_row.push_back(i);
      sums.push_back(targets(i));
      counts.push_back(1);
    } else {
      sums[static_cast<std::size_t>(it->second)] += targets(i);
      ++counts[static_cast<std::size_t>(it->second)];
    }
  }
  const auto n = static_cast<Eigen::Index>(first_row.size());
  if (n < dim + 2)
    throw FitError("rbf fit: need at least " + std::to_string(dim + 2) + " distinct samples, have " +
                   std::to_string(n));

  RbfModel<Scalar> model;
  model.regularization_ = regularization;
  model.centers_.resize(n, dim);
  Vector<Scalar> y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    model.centers_.row(k) = inputs.row(first_row[static_cast<std::size_t>(k)]);
    y(k) = sums[static_cast<std::size_t>(k)] / static_cast<Scalar>(counts[static_cast<std::size_t>(k)]);
  }
  model.center_norms_ = model.centers_.rowwise().squaredNorm();

  // Saddle-point system [Phi + lambda I, P; P^T, 0] [w; c] = [y; 0].
  const Eigen::Index size = n + dim + 1;
  Matrix<Scalar> system = Matrix<Scalar>::Zero(size, size);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Scalar phi = cubic_kernel((model.centers_.row(i) - model.centers_.row(j)).norm());
      system(i, j) = phi;
      system(j, i) = phi;
    }
    system(i, i) = regularization;
    system(i, n) = Scalar(1);
    system(n, i) = Scalar(1);
    system.block(i, n + 1, 1, dim) = model.centers_.row(i);
    system.block(n + 1, i, dim, 1) = model.centers_.row(i).transpose();
  }
  Vector<Scalar> rhs = Vector<Scalar>::Zero(size);
  rhs.head(n) = y;

  const Scalar scale = std::max(rhs.norm(), Scalar(1));
  auto acceptable = [&](const Vector<Scalar>& solution) {
    return solution.allFinite() && (system * solution - rhs).norm() <= Scalar(1e-7) * scale;
  };
  Vector<Scalar> solution = system.partialPivLu().solve(rhs);
  if (!acceptable(solution)) {
    solution = system.completeOrthogonalDecomposition().solve(rhs);
    if (!acceptable(solution))
      throw FitError("rbf fit: interpolation system is singular or ill-conditioned");
  }
  model.weights_ = solution.head(n);
  model.tail_ = solution.tail(dim + 1);
  return model;
}

/// Fits the interpolant on rows of `inputs`. Exact duplicate rows are merged
/// by averaging their targets.
template <typename DerivedX, typename DerivedY>
RbfModel<typename DerivedX::Scalar> fit_rbf(const Eigen::MatrixBase<DerivedX>& inputs,
                                            const Eigen::MatrixBase<DerivedY>& targets,
                                            typename DerivedX::Scalar regularization = 1e-8) {
  return fit_rbf_impl<typename DerivedX::Scalar>(inputs, targets, regularization);
}

}  // namespace bitsearch
