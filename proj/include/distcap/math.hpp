// Numerically stable softmax / log-sum-exp kernels shared across modules.
#pragma once

#include <cmath>
#include <stdexcept>

#include "distcap/common.hpp"

namespace distcap {

// log(sum_i exp(v_i)), shifted by the max so large magnitudes cannot overflow.
template <class Derived>
Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  if (v.size() == 0) throw std::invalid_argument("log_sum_exp: empty input");
  const Scalar m = v.maxCoeff();
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp(v(i) - m);
  return m + std::log(acc);
}

// tau * log(sum_i exp(v_i / tau)). Smooth upper bound on max(v), exact as
// tau -> 0; the shift keeps tiny temperatures from overflowing.
template <class Derived>
Scalar tempered_lse(const Eigen::MatrixBase<Derived>& v, Scalar tau) {
  if (v.size() == 0) throw std::invalid_argument("tempered_lse: empty input");
  if (!(tau > 0)) throw std::invalid_argument("tempered_lse: tau must be > 0");
  const Scalar m = v.maxCoeff();
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) acc += std::exp((v(i) - m) / tau);
  return m + tau * std::log(acc);
}

template <class Derived>
VecT<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& logits) {
  VecT<typename Derived::Scalar> out = logits;
  out.array() -= log_sum_exp(logits);
  return out;
}

template <class Derived>
VecT<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  VecT<typename Derived::Scalar> out = logits;
  out.array() -= logits.maxCoeff();
  out = out.array().exp();
  out /= out.sum();
  return out;
}

inline Scalar sigmoid(Scalar z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow; log(sigmoid(z)) == -softplus(-z).
inline Scalar softplus(Scalar z) {
  if (z > 0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

}  // namespace distcap
