#pragma once

// Brute-force tensor-grid quadrature of the defining integrals
//   K~(x, b)     = int K(x, x') phi(x' | b) dx'
//   K^(b_i, b_j) = int int phi(x | b_i) K(x, x') phi(x' | b_j) dx dx'
// used to validate the closed forms in kernels.hpp. Desk scale only (d <= 2).
//
// The kernel depends on x' - x only, and for independent Gaussian x, x' that
// difference is Gaussian with mean a_j - a_i and covariance c_i + c_j, so the
// double integral is evaluated as a single d-dimensional one.

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>

#include "saspa/kernels.hpp"

namespace saspa {

struct QuadratureGrid {
  /// Truncation of each whitened axis, in standard deviations.
  double half_width = 8.0;
  /// Trapezoid nodes per axis for 1-D integrals (odd, so the coarse grid
  /// nests).
  int points = 4001;
  /// Nodes per axis for 2-D integrals.
  int points_2d = 801;
  /// Max allowed disagreement between this grid and the nested coarse grid.
  double refine_tol = 1e-9;
};

namespace detail {

/// Blur expressed as x = center + R t with t ~ N(0, I_r); directions with zero
/// variance are dropped, so a delta blur has r = 0.
struct WhitenedBlur {
  Vector center;
  Matrix root; // d x r
};

inline WhitenedBlur whiten(const Vector &center, const Matrix &cov) {
  const auto d = center.size();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < d; ++k) {
    if (eig.eigenvalues()(k) > 1e-14 * scale) {
      keep.push_back(k);
    }
  }
  Matrix root(d, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    root.col(static_cast<Eigen::Index>(c)) =
        eig.eigenvectors().col(keep[c]) * std::sqrt(eig.eigenvalues()(keep[c]));
  }
  return {center, root};
}

/// Trapezoid rule on [-hw, hw]^r (r <= 2) of E[K(x, center + R t)],
/// t ~ N(0, I_r).
inline double normal_grid_sum(const Vector &x, const WhitenedBlur &w,
                              const KernelParams &kernel, int points,
                              double half_width) {
  const auto d = x.size();
  const auto r = w.root.cols();
  const Vector base = w.center - x;
  const double inv_two_eta_sq = 0.5 / kernel.eta_sq();
  auto k_at = [&](double t0, double t1) {
    double sq = 0.0;
    for (Eigen::Index a = 0; a < d; ++a) {
      double diff = base(a);
      if (r > 0) {
        diff += w.root(a, 0) * t0;
      }
      if (r > 1) {
        diff += w.root(a, 1) * t1;
      }
      sq += diff * diff;
    }
    return std::exp(-sq * inv_two_eta_sq);
  };
  if (r == 0) {
    return k_at(0.0, 0.0);
  }
  const double step = 2.0 * half_width / (points - 1);
  std::vector<double> nodes(static_cast<std::size_t>(points));
  std::vector<double> weights(static_cast<std::size_t>(points));
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (int k = 0; k < points; ++k) {
    const double t = -half_width + k * step;
    const double end = (k == 0 || k == points - 1) ? 0.5 : 1.0;
    nodes[static_cast<std::size_t>(k)] = t;
    weights[static_cast<std::size_t>(k)] =
        end * step * inv_sqrt_2pi * std::exp(-0.5 * t * t);
  }
  double total = 0.0;
  if (r == 1) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      total += weights[k] * k_at(nodes[k], 0.0);
    }
    return total;
  }
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    double row = 0.0;
    for (std::size_t l = 0; l < nodes.size(); ++l) {
      row += weights[l] * k_at(nodes[k], nodes[l]);
    }
    total += weights[k] * row;
  }
  return total;
}

inline double refined_sum(const Vector &x, const WhitenedBlur &w,
                          const KernelParams &kernel, const QuadratureGrid &grid) {
  const auto r = w.root.cols();
  const int points = r > 1 ? grid.points_2d : grid.points;
  detail::require(points >= 5 && points % 2 == 1,
                  "quadrature grid needs an odd number (>= 5) of points");
  const double fine = normal_grid_sum(x, w, kernel, points, grid.half_width);
  if (r == 0) {
    return fine;
  }
  const double coarse =
      normal_grid_sum(x, w, kernel, (points + 1) / 2, grid.half_width);
  if (std::abs(fine - coarse) > grid.refine_tol) {
    throw NumericalError("quadrature grid too coarse: refinement changed the "
                         "result by " +
                         std::to_string(std::abs(fine - coarse)));
  }
  return fine;
}

} // namespace detail

inline double quadrature_cross_kernel(const Vector &x,
                                      const BlurredBasisPoint &b,
                                      const KernelParams &kernel,
                                      const QuadratureGrid &grid = {}) {
  detail::require(x.size() == b.center.size(), "dimension mismatch");
  detail::require(x.size() <= 2, "quadrature oracle supports d <= 2 only");
  return detail::refined_sum(x, detail::whiten(b.center, b.local_cov), kernel,
                             grid);
}

inline double quadrature_gram_entry(const BlurredBasisPoint &bi,
                                    const BlurredBasisPoint &bj,
                                    const KernelParams &kernel,
                                    const QuadratureGrid &grid = {}) {
  detail::require(bi.center.size() == bj.center.size(), "dimension mismatch");
  detail::require(bi.center.size() <= 2,
                  "quadrature oracle supports d <= 2 only");
  return detail::refined_sum(
      bi.center, detail::whiten(bj.center, bi.local_cov + bj.local_cov), kernel,
      grid);
}

} // namespace saspa
