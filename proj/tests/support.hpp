#pragma once

#include <cmath>
#include <random>

#include <boost/math/special_functions/erf.hpp>

#include "saspa/saspa.hpp"

namespace saspa::testing {

inline Vector random_vector(std::mt19937_64 &rng, Eigen::Index n,
                            double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = lo + (hi - lo) * detail::unit_uniform(rng);
  }
  return v;
}

/// Random SPD matrix A A^T / d + floor I.
inline Matrix random_spd(std::mt19937_64 &rng, Eigen::Index d, double scale = 1.0,
                         double floor = 0.05) {
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a(i) = detail::standard_normal(rng);
  }
  Matrix c = scale * a * a.transpose() / static_cast<double>(d);
  c.diagonal().array() += floor;
  return c;
}

inline Dataset random_regression(std::mt19937_64 &rng, Eigen::Index n,
                                 Eigen::Index d, double span = 3.0) {
  Dataset data;
  data.task = Task::regression;
  data.inputs.resize(n, d);
  data.outputs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    data.inputs.row(i) = random_vector(rng, d, -span, span).transpose();
    data.outputs(i) = std::sin(data.inputs.row(i).sum()) +
                      0.1 * detail::standard_normal(rng);
  }
  return data;
}

/// Central differences of f at x with step h: (f', f'').
template <typename F>
std::pair<double, double> central_diff(F f, double x, double h = 1e-4) {
  const double fp = f(x + h);
  const double f0 = f(x);
  const double fm = f(x - h);
  return {(fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)};
}

/// Richardson-extrapolated central differences (error O(h^4)).
template <typename F>
std::pair<double, double> richardson_diff(F f, double x, double h = 1e-3) {
  const auto [d1a, d2a] = central_diff(f, x, h);
  const auto [d1b, d2b] = central_diff(f, x, h / 2.0);
  return {(4.0 * d1b - d1a) / 3.0, (4.0 * d2b - d2a) / 3.0};
}

/// log Z of the label-noise step likelihood in extended precision, from
/// erfc directly (no tail asymptotics).
inline long double class_log_z_ld(long double m, long double v, long double y,
                                  long double eps) {
  const long double z = m * y / std::sqrt(v);
  const long double cdf = 0.5L * boost::math::erfc(-z / std::sqrt(2.0L));
  return std::log(eps + (1.0L - 2.0L * eps) * cdf);
}

/// log N(y | m, v_y + v) in extended precision.
inline long double reg_log_z_ld(long double m, long double v, long double y,
                                long double vy) {
  const long double s = v + vy;
  const long double pi = 3.141592653589793238462643383279502884L;
  return -0.5L * std::log(2.0L * pi * s) - 0.5L * (y - m) * (y - m) / s;
}

/// Richardson-extrapolated central differences in extended precision.
template <typename F>
std::pair<double, double> richardson_diff_ld(F f, long double x, long double h = 1e-3L) {
  auto cd = [&](long double hh) {
    const long double fp = f(x + hh);
    const long double f0 = f(x);
    const long double fm = f(x - hh);
    return std::pair<long double, long double>{(fp - fm) / (2.0L * hh),
                                               (fp - 2.0L * f0 + fm) / (hh * hh)};
  };
  const auto [d1a, d2a] = cd(h);
  const auto [d1b, d2b] = cd(h / 2.0L);
  return {static_cast<double>((4.0L * d1b - d1a) / 3.0L),
          static_cast<double>((4.0L * d2b - d2a) / 3.0L)};
}

} // namespace saspa::testing
