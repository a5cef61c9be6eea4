#pragma once

// Gaussian kernel and its closed-form convolutions with Gaussian blurring
// functions. A basis point b = (a, c) observes the function through
// phi(x | b) = N(x | a, c); with c = 0 it degenerates to a point evaluation.

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "saspa/errors.hpp"

namespace saspa {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Length scale of k(x, x') = exp(-|x - x'|^2 / (2 eta^2)).
class KernelParams {
public:
  explicit KernelParams(double eta) : eta_(eta) {
    detail::require(std::isfinite(eta) && eta > 0.0,
                    "kernel length scale must be positive and finite");
  }

  double eta() const { return eta_; }
  double eta_sq() const { return eta_ * eta_; }

  friend bool operator==(const KernelParams &, const KernelParams &) = default;

private:
  double eta_;
};

inline double kernel_eval(const Eigen::Ref<const Vector> &x,
                          const Eigen::Ref<const Vector> &x2,
                          const KernelParams &params) {
  if (x.size() != x2.size()) {
    throw UsageError("kernel_eval: dimension mismatch (" +
                     std::to_string(x.size()) + " vs " +
                     std::to_string(x2.size()) + ")");
  }
  return std::exp(-(x - x2).squaredNorm() / (2.0 * params.eta_sq()));
}

struct BlurredBasisPoint {
  Vector center;
  Matrix local_cov;

  static BlurredBasisPoint delta(Vector center) {
    const auto d = center.size();
    return {std::move(center), Matrix::Zero(d, d)};
  }

  static BlurredBasisPoint sphere(Vector center, double s) {
    const auto d = center.size();
    return {std::move(center), s * Matrix::Identity(d, d)};
  }
};

/// M blurred pseudo-inputs sharing one kernel. Construction validates the
/// local covariances and caches the Cholesky factor of c_j + eta^2 I for each
/// point, so cross-kernel rows cost O(M d^2).
class Basis {
public:
  Basis(std::vector<BlurredBasisPoint> points, KernelParams kernel)
      : points_(std::move(points)), kernel_(kernel) {
    detail::require(!points_.empty(), "basis must contain at least one point");
    dim_ = points_.front().center.size();
    detail::require(dim_ >= 1, "basis points must have dimension >= 1");
    factors_.reserve(points_.size());
    log_scale_.reserve(points_.size());
    const double half_d_log_eta_sq =
        0.5 * static_cast<double>(dim_) * std::log(kernel_.eta_sq());
    for (std::size_t j = 0; j < points_.size(); ++j) {
      const auto &pt = points_[j];
      if (pt.center.size() != dim_ || pt.local_cov.rows() != dim_ ||
          pt.local_cov.cols() != dim_) {
        throw UsageError("basis point " + std::to_string(j) +
                         " has inconsistent dimension");
      }
      if (!pt.center.allFinite() || !pt.local_cov.allFinite()) {
        throw UsageError("basis point " + std::to_string(j) +
                         " has non-finite entries");
      }
      check_psd(pt.local_cov, j);
      Matrix s = pt.local_cov;
      s.diagonal().array() += kernel_.eta_sq();
      Eigen::LLT<Matrix> llt(s);
      if (llt.info() != Eigen::Success) {
        throw UsageError("basis point " + std::to_string(j) +
                         ": c + eta^2 I is not positive definite");
      }
      const double half_log_det =
          llt.matrixLLT().diagonal().array().log().sum();
      log_scale_.push_back(half_d_log_eta_sq - half_log_det);
      factors_.push_back(std::move(llt));
    }
  }

  std::size_t size() const { return points_.size(); }
  Eigen::Index dim() const { return dim_; }
  const KernelParams &kernel() const { return kernel_; }
  const BlurredBasisPoint &operator[](std::size_t j) const {
    return points_[j];
  }
  const std::vector<BlurredBasisPoint> &points() const { return points_; }

  /// K~(x, b_j) = (2 pi eta^2)^{d/2} N(x | a_j, c_j + eta^2 I).
  double cross(const Eigen::Ref<const Vector> &x, std::size_t j) const {
    const Vector diff = x - points_[j].center;
    const double q =
        factors_[j].matrixL().solve(diff).squaredNorm();
    return std::exp(log_scale_[j] - 0.5 * q);
  }

private:
  static void check_psd(const Matrix &c, std::size_t j) {
    const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
    if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
      throw UsageError("basis point " + std::to_string(j) +
                       ": local covariance is not symmetric");
    }
    if (c.isZero(0.0)) {
      return;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(c, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw UsageError("basis point " + std::to_string(j) +
                       ": local covariance is not positive semi-definite");
    }
  }

  std::vector<BlurredBasisPoint> points_;
  KernelParams kernel_;
  Eigen::Index dim_ = 0;
  std::vector<Eigen::LLT<Matrix>> factors_;
  std::vector<double> log_scale_;
};

/// Row K~(x, B) as a length-M vector.
inline Vector blurred_cross_kernel(const Eigen::Ref<const Vector> &x,
                                   const Basis &basis) {
  if (x.size() != basis.dim()) {
    throw UsageError("blurred_cross_kernel: input dimension " +
                     std::to_string(x.size()) + " does not match basis " +
                     std::to_string(basis.dim()));
  }
  Vector out(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) {
    out(static_cast<Eigen::Index>(j)) = basis.cross(x, j);
  }
  return out;
}

/// K~(B, X) for the rows of `inputs` (N x d), returned as M x N.
inline Matrix blurred_cross_kernel_matrix(const Matrix &inputs,
                                          const Basis &basis) {
  Matrix out(static_cast<Eigen::Index>(basis.size()), inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out.col(i) = blurred_cross_kernel(inputs.row(i).transpose(), basis);
  }
  return out;
}

/// K^_ij = (2 pi eta^2)^{d/2} N(a_i | a_j, c_i + c_j + eta^2 I). Only the lower
/// triangle is computed; the upper is mirrored, so the result is exactly
/// symmetric.
inline Matrix blurred_gram(const Basis &basis) {
  const auto m = static_cast<Eigen::Index>(basis.size());
  const auto d = basis.dim();
  const double eta_sq = basis.kernel().eta_sq();
  const double half_d_log_eta_sq =
      0.5 * static_cast<double>(d) * std::log(eta_sq);
  Matrix khat(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto &bi = basis[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j <= i; ++j) {
      const auto &bj = basis[static_cast<std::size_t>(j)];
      Matrix s = bi.local_cov + bj.local_cov;
      s.diagonal().array() += eta_sq;
      Eigen::LLT<Matrix> llt(s);
      const Vector diff = bi.center - bj.center;
      const double q = llt.matrixL().solve(diff).squaredNorm();
      const double half_log_det =
          llt.matrixLLT().diagonal().array().log().sum();
      const double v = std::exp(half_d_log_eta_sq - half_log_det - 0.5 * q);
      khat(i, j) = v;
      khat(j, i) = v;
    }
  }
  return khat;
}

/// Cholesky factor of K^ + jitter I, kept together with the matrix it was
/// built from.
class GramFactor {
public:
  GramFactor(Matrix khat, double jitter, Eigen::LLT<Matrix> llt)
      : khat_(std::move(khat)), jitter_(jitter), llt_(std::move(llt)) {}

  const Matrix &khat() const { return khat_; }
  double jitter() const { return jitter_; }
  Eigen::Index size() const { return khat_.rows(); }
  Matrix lower() const { return llt_.matrixL(); }

  template <typename Rhs> auto solve(const Eigen::MatrixBase<Rhs> &rhs) const {
    return llt_.solve(rhs);
  }

private:
  Matrix khat_;
  double jitter_;
  Eigen::LLT<Matrix> llt_;
};

/// Single factorization attempt of khat + jitter I. Fails on a non-positive
/// pivot or one that is indistinguishable from zero at working precision.
inline GramFactor factorize_gram(const Matrix &khat, double jitter) {
  detail::require(khat.rows() == khat.cols() && khat.rows() > 0,
                  "factorize_gram: matrix must be square and nonempty");
  detail::require(jitter >= 0.0, "factorize_gram: jitter must be >= 0");
  Matrix a = khat;
  a.diagonal().array() += jitter;
  Eigen::LLT<Matrix> llt(a);
  const double max_diag = a.diagonal().cwiseAbs().maxCoeff();
  const double pivot_floor = static_cast<double>(a.rows()) *
                             std::numeric_limits<double>::epsilon() * max_diag;
  if (llt.info() != Eigen::Success ||
      !llt.matrixLLT().diagonal().allFinite() ||
      llt.matrixLLT().diagonal().array().square().minCoeff() <= pivot_floor) {
    throw FactorizationError(
        "blurred Gram matrix is not positive definite (jitter " +
        std::to_string(jitter) + "); basis may contain duplicate centers");
  }
  return GramFactor(khat, jitter, std::move(llt));
}

/// Jitter escalation: start at start_rel * trace/M and multiply by 10 until
/// max_rel * trace/M has been tried.
inline GramFactor factorize_gram_stabilized(const Matrix &khat,
                                            double start_rel = 1e-8,
                                            double max_rel = 1e-2) {
  detail::require(start_rel > 0.0 && max_rel >= start_rel,
                  "factorize_gram_stabilized: invalid jitter range");
  const double unit = khat.trace() / static_cast<double>(khat.rows());
  for (double rel = start_rel; rel <= max_rel * (1.0 + 1e-9); rel *= 10.0) {
    try {
      return factorize_gram(khat, rel * unit);
    } catch (const FactorizationError &) {
    }
  }
  throw FactorizationError(
      "blurred Gram matrix could not be factorized even with jitter " +
      std::to_string(max_rel * unit) + "; the basis is ill-conditioned");
}

} // namespace saspa
