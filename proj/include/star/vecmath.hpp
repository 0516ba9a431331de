#pragma once

#include <cmath>
#include <limits>

#include "star/error.hpp"
#include "star/types.hpp"

namespace star {

/// Numerically stable vector primitives shared by the whole library.
/// All functions are pure and accept arbitrary Eigen expressions.
///
/// Conventions:
///  - a "unit embedding" is a real vector with Euclidean norm 1 (within 1e-6);
///  - a "probability vector" has entries in (0, 1] summing to 1, with every
///    entry at or above the smoothing floor used to build it.
namespace vecmath {

inline constexpr double kUnitNormTol = 1e-6;
inline constexpr double kDefaultProbTemperature = 1.0;
inline constexpr double kDefaultProbFloor = 1e-8;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& v) {
  return v.allFinite();
}

template <typename Derived>
bool is_unit(const Eigen::MatrixBase<Derived>& v, double tol = kUnitNormTol) {
  return std::abs(v.norm() - 1.0) <= tol;
}

/// v / ||v||. Throws NumericError for non-finite or (near-)zero input.
template <typename Derived>
Vector<typename Derived::Scalar> normalize(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (!v.allFinite()) throw NumericError("normalize: non-finite input");
  const Scalar n = v.norm();
  if (!(n > Scalar(1e-12)))
    throw NumericError("normalize: degenerate (near-zero) input vector");
  return v / n;
}

/// Dot product; equals cosine similarity for unit-norm inputs.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_sim(const Eigen::MatrixBase<DerivedA>& u,
                                     const Eigen::MatrixBase<DerivedB>& v) {
  return u.dot(v);
}

/// log sum_i exp(x_i), max-subtracted. Finite for any finite input.
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& xs) {
  using Scalar = typename Derived::Scalar;
  if (xs.size() == 0) throw NumericError("log_sum_exp: empty input");
  const Scalar m = xs.maxCoeff();
  return m + std::log((xs.array() - m).exp().sum());
}

/// Softmax over the coordinates of an embedding, at temperature
/// `temperature`, floored at `floor` and renormalized. The floor keeps every
/// downstream KL divergence finite; for unit-norm inputs at the default
/// temperature it never actually binds.
template <typename Derived>
Vector<typename Derived::Scalar> embed_to_prob(
    const Eigen::MatrixBase<Derived>& q,
    double temperature = kDefaultProbTemperature,
    double floor = kDefaultProbFloor) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> z = q / Scalar(temperature);
  const Scalar m = z.maxCoeff();
  Vector<Scalar> p = (z.array() - m).exp();
  p /= p.sum();
  p = p.array().max(Scalar(floor));
  p /= p.sum();
  return p;
}

/// KL(p||q) + KL(q||p) for probability vectors, computed in the cancellation
/// free form sum_i (p_i - q_i) * (log p_i - log q_i). Every summand is
/// nonnegative, so the result is >= 0 and exactly 0 iff p == q.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar symmetric_kl(const Eigen::MatrixBase<DerivedP>& p,
                                       const Eigen::MatrixBase<DerivedQ>& q) {
  return ((p.array() - q.array()) * (p.array().log() - q.array().log())).sum();
}

/// Bidirectional KL divergence between two unit embeddings: symmetric KL of
/// their coordinate-softmax distributions. Symmetric, nonnegative, finite.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar bidirectional_kl(
    const Eigen::MatrixBase<DerivedA>& q, const Eigen::MatrixBase<DerivedB>& h,
    double temperature = kDefaultProbTemperature,
    double floor = kDefaultProbFloor) {
  return symmetric_kl(embed_to_prob(q, temperature, floor),
                      embed_to_prob(h, temperature, floor));
}

}  // namespace vecmath
}  // namespace star
