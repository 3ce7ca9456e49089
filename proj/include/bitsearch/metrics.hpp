// SPDX-License-Identifier: Apache-2.0
//
// Divergences between output distributions of a reference model and a
// quantized one. All logs are natural, so JSD is bounded by ln 2.
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

#include <Eigen/Core>

#include "bitsearch/error.hpp"
#include "bitsearch/linalg.hpp"

namespace bitsearch {

/// Max-shifted softmax; finite for any finite input.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar shift = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - shift).exp().matrix();
  return e / e.sum();
}

/// KL(p || q) in nats with 0 ln 0 = 0. Throws when p has mass where q has none.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar kl_divergence(const Eigen::MatrixBase<DerivedP>& p,
                                        const Eigen::MatrixBase<DerivedQ>& q) {
  using Scalar = typename DerivedP::Scalar;
  if (p.size() != q.size()) throw Error("kl_divergence: length mismatch");
  Scalar total(0);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) <= Scalar(0)) continue;
    if (q(i) <= Scalar(0)) throw Error("kl_divergence: undefined, q has zero mass where p does not");
    total += p(i) * std::log(p(i) / q(i));
  }
  return total;
}

/// JSD on already-normalized distributions.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar jsd_of_distributions(const Eigen::MatrixBase<DerivedA>& s,
                                               const Eigen::MatrixBase<DerivedB>& s_hat) {
  using Scalar = typename DerivedA::Scalar;
  if (s.size() != s_hat.size()) throw Error("jsd: length mismatch");
  const Vector<Scalar> m = (s + s_hat) / Scalar(2);
  const Scalar value = (kl_divergence(s, m) + kl_divergence(s_hat, m)) / Scalar(2);
  // Rounding can push near-disjoint pairs a few ulps past the bounds.
  return std::clamp(value, Scalar(0), Scalar(std::log(2.0)));
}

/// Jensen-Shannon divergence between the softmax distributions of two logit
/// vectors, using the midpoint mixture m = (s + s_hat) / 2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar jsd(const Eigen::MatrixBase<DerivedA>& logits,
                              const Eigen::MatrixBase<DerivedB>& logits_hat) {
  using Scalar = typename DerivedA::Scalar;
  if (logits.size() != logits_hat.size()) throw Error("jsd: length mismatch");
  const Vector<Scalar> s = softmax(logits);
  const Vector<Scalar> s_hat = softmax(logits_hat);
  return jsd_of_distributions(s, s_hat);
}

/// Unweighted mean JSD over (reference, quantized) logit pairs.
template <typename Scalar>
Scalar quality_score(std::span<const std::pair<Vector<Scalar>, Vector<Scalar>>> pairs) {
  if (pairs.empty()) throw Error("quality_score: empty calibration set");
  Scalar total(0);
  for (const auto& [reference, quantized] : pairs) total += jsd(reference, quantized);
  return total / static_cast<Scalar>(pairs.size());
}

}  // namespace bitsearch
