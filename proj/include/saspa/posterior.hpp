#pragma once

#include <memory>
#include <string>

#include "saspa/kernels.hpp"

namespace saspa {

/// Sparse posterior process q(f) with
///   m(x)     = K~(x, B) alpha
///   V(x, x') = K(x, x') - K~(x, B) beta K~(B, x').
/// alpha = 0, beta = 0 is the GP prior. The basis and the factorized blurred
/// Gram matrix are shared immutably between a fit and its predictions.
struct SparsePosterior {
  std::shared_ptr<const Basis> basis;
  std::shared_ptr<const GramFactor> gram;
  Vector alpha;
  Matrix beta;

  std::size_t size() const { return basis->size(); }
  const Matrix &khat() const { return gram->khat(); }
};

/// Prior posterior over `basis`, with the blurred Gram matrix factorized under
/// the escalating-jitter policy starting at `jitter_rel * trace / M`.
inline SparsePosterior make_prior(Basis basis, double jitter_rel = 1e-8) {
  auto shared = std::make_shared<const Basis>(std::move(basis));
  auto gram = std::make_shared<const GramFactor>(
      factorize_gram_stabilized(blurred_gram(*shared), jitter_rel));
  const auto m = static_cast<Eigen::Index>(shared->size());
  return {std::move(shared), std::move(gram), Vector::Zero(m),
          Matrix::Zero(m, m)};
}

/// Variances below this magnitude are treated as round-off and clamped to 0.
inline constexpr double kVarianceClampTol = 1e-10;

struct Predictive {
  double mean = 0.0;
  double var = 0.0;
};

namespace detail {

inline void check_dim(const SparsePosterior &post, Eigen::Index d) {
  if (d != post.basis->dim()) {
    throw UsageError("input dimension " + std::to_string(d) +
                     " does not match basis dimension " +
                     std::to_string(post.basis->dim()));
  }
}

inline double clamp_variance(double v) {
  if (v >= 0.0) {
    return v;
  }
  if (v > -kVarianceClampTol) {
    return 0.0;
  }
  throw InstabilityError("negative predictive variance " + std::to_string(v) +
                         "; EP state is unstable");
}

} // namespace detail

inline double predict_mean(const SparsePosterior &post, const Vector &x) {
  detail::check_dim(post, x.size());
  return blurred_cross_kernel(x, *post.basis).dot(post.alpha);
}

inline double predict_cov(const SparsePosterior &post, const Vector &x,
                          const Vector &x2) {
  detail::check_dim(post, x.size());
  detail::check_dim(post, x2.size());
  const Vector k1 = blurred_cross_kernel(x, *post.basis);
  const Vector k2 = blurred_cross_kernel(x2, *post.basis);
  return kernel_eval(x, x2, post.basis->kernel()) - k1.dot(post.beta * k2);
}

/// Marginal (mean, variance) at x; the variance is clamped per
/// kVarianceClampTol and larger negatives throw InstabilityError.
inline Predictive predictive(const SparsePosterior &post, const Vector &x) {
  detail::check_dim(post, x.size());
  const Vector k = blurred_cross_kernel(x, *post.basis);
  return {k.dot(post.alpha),
          detail::clamp_variance(1.0 - k.dot(post.beta * k))};
}

/// Mean and covariance of the blurred projections g_B(f) under q.
struct BasisMoments {
  Vector mean;
  Matrix cov;
};

inline BasisMoments basis_moments(const SparsePosterior &post) {
  const Matrix &khat = post.khat();
  Matrix cov = khat - khat * post.beta * khat;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {khat * post.alpha, std::move(cov)};
}

/// p = K^{-1} K~(B, x) through the cached factorization.
inline Vector projected_weight(const SparsePosterior &post, const Vector &x) {
  detail::check_dim(post, x.size());
  return post.gram->solve(blurred_cross_kernel(x, *post.basis));
}

} // namespace saspa
