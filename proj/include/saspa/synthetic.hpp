#pragma once

// Synthetic benchmark generators: noisy points on the unit circle with a
// per-quadrant output, and two overlapping 2-D Gaussian classes.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

#include <Eigen/Cholesky>

#include "saspa/dataset.hpp"
#include "saspa/random.hpp"

namespace saspa {

struct CircleOptions {
  double radius_noise = 0.1;
  double output_noise = 0.1;
};

/// Angles uniform on [0, 2 pi); points at unit radius plus isotropic noise;
/// output by quadrant in {-3, -1, 1, 3} plus Gaussian noise.
inline Dataset gen_circle_regression(Eigen::Index n, std::uint64_t seed,
                                     const CircleOptions &opts = {}) {
  detail::require(n >= 4, "circle generator needs n >= 4");
  std::mt19937_64 rng(seed);
  Dataset out;
  out.task = Task::regression;
  out.feature_names = {"x1", "x2"};
  out.inputs.resize(n, 2);
  out.outputs.resize(n);
  static constexpr double kLevels[4] = {-3.0, -1.0, 1.0, 3.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const double theta = 2.0 * std::numbers::pi * detail::unit_uniform(rng);
    out.inputs(i, 0) = std::cos(theta) + opts.radius_noise * detail::standard_normal(rng);
    out.inputs(i, 1) = std::sin(theta) + opts.radius_noise * detail::standard_normal(rng);
    const auto quadrant =
        std::min(3, static_cast<int>(theta / (0.5 * std::numbers::pi)));
    out.outputs(i) = kLevels[quadrant] + opts.output_noise * detail::standard_normal(rng);
  }
  return out;
}

/// Parameters of the two-class problem; class -1 first.
struct GaussianClassSpec {
  Eigen::Vector2d mean_neg{-1.0, 0.0};
  Eigen::Matrix2d cov_neg{{1.0, 0.0}, {0.0, 2.0}};
  Eigen::Vector2d mean_pos{1.0, 0.0};
  Eigen::Matrix2d cov_pos{{1.0, 0.5}, {0.5, 1.0}};
};

namespace detail {

inline Dataset sample_gaussian_classes(Eigen::Index n, std::mt19937_64 &rng,
                                       const GaussianClassSpec &spec) {
  const Eigen::Matrix2d l_neg = spec.cov_neg.llt().matrixL();
  const Eigen::Matrix2d l_pos = spec.cov_pos.llt().matrixL();
  Dataset out;
  out.task = Task::classification;
  out.feature_names = {"x1", "x2"};
  out.inputs.resize(n, 2);
  out.outputs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool pos = (i % 2) == 0;
    Eigen::Vector2d z{standard_normal(rng), standard_normal(rng)};
    const Eigen::Vector2d x =
        pos ? Eigen::Vector2d(spec.mean_pos + l_pos * z)
            : Eigen::Vector2d(spec.mean_neg + l_neg * z);
    out.inputs.row(i) = x.transpose();
    out.outputs(i) = pos ? 1.0 : -1.0;
  }
  return out;
}

} // namespace detail

/// Balanced (alternating) labels; the test set is drawn after the training
/// set from the same stream.
inline std::pair<Dataset, Dataset>
gen_gaussian_classes(Eigen::Index n_train, Eigen::Index n_test,
                     std::uint64_t seed, const GaussianClassSpec &spec = {}) {
  detail::require(n_train >= 2 && n_test >= 2,
                  "gaussian class generator needs sizes >= 2");
  std::mt19937_64 rng(seed);
  auto train = detail::sample_gaussian_classes(n_train, rng, spec);
  auto test = detail::sample_gaussian_classes(n_test, rng, spec);
  return {std::move(train), std::move(test)};
}

} // namespace saspa
