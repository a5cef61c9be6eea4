#pragma once

// Non-sparse reference models and the metrics used to compare against them.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <string>

#include "saspa/basis_selection.hpp"
#include "saspa/ep.hpp"

namespace saspa {

/// Predictive process over the N training inputs:
///   mean(x) = k(x)^T weights,  var(x) = k(x, x) - k(x)^T reduction k(x).
struct FullGpModel {
  Matrix inputs;
  KernelParams kernel{1.0};
  Vector weights;
  Matrix reduction;
};

inline Predictive predictive(const FullGpModel &model, const Vector &x) {
  if (x.size() != model.inputs.cols()) {
    throw UsageError("full GP: input dimension mismatch");
  }
  Vector k(model.inputs.rows());
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    k(i) = kernel_eval(x, model.inputs.row(i).transpose(), model.kernel);
  }
  return {k.dot(model.weights),
          detail::clamp_variance(1.0 - k.dot(model.reduction * k))};
}

template <typename M>
concept PredictiveModel = requires(const M &m, const Vector &x) {
  { predictive(m, x) } -> std::same_as<Predictive>;
};

/// Exact Gaussian conditioning: weights = (K + v_y I)^{-1} y,
/// reduction = (K + v_y I)^{-1}.
inline FullGpModel exact_gp_regression(const Dataset &data,
                                       const KernelParams &kernel,
                                       double noise_var) {
  if (data.size() == 0) {
    throw UsageError("exact_gp_regression: dataset is empty");
  }
  detail::require(noise_var >= 0.0, "noise variance must be >= 0");
  const Eigen::Index n = data.size();
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      k(i, j) = kernel_eval(data.inputs.row(i).transpose(),
                            data.inputs.row(j).transpose(), kernel);
      k(j, i) = k(i, j);
    }
  }
  k.diagonal().array() += noise_var;
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError(
        "exact GP: K + v_y I is not positive definite (duplicate inputs?)");
  }
  FullGpModel model{data.inputs, kernel, llt.solve(data.outputs),
                    llt.solve(Matrix::Identity(n, n))};
  detail::symmetrize(model.reduction);
  return model;
}

/// EP with every training input as a delta-blurred basis point (M = N).
inline FullGpModel full_gp_classification_ep(const Dataset &data,
                                             const KernelParams &kernel,
                                             double epsilon,
                                             const EpConfig &cfg = {},
                                             FitReport *report = nullptr) {
  if (data.size() == 0) {
    throw UsageError("full_gp_classification_ep: dataset is empty");
  }
  std::vector<BlurredBasisPoint> pts;
  pts.reserve(static_cast<std::size_t>(data.size()));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    pts.push_back(BlurredBasisPoint::delta(data.inputs.row(i).transpose()));
  }
  auto fit = ep_fit(data, Basis(std::move(pts), kernel),
                    ClassificationLik(epsilon), cfg);
  if (report != nullptr) {
    *report = fit.report;
  }
  return {data.inputs, kernel, std::move(fit.posterior.alpha),
          std::move(fit.posterior.beta)};
}

inline constexpr double kProbClamp = 1e-12;

inline double bernoulli_kl(double p, double q) {
  p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  q = std::clamp(q, kProbClamp, 1.0 - kProbClamp);
  return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

inline double gaussian_kl(double m1, double v1, double m2, double v2) {
  return 0.5 * (std::log(v2 / v1) + (v1 + (m1 - m2) * (m1 - m2)) / v2 - 1.0);
}

/// sum_i KL(p(y_i | x_i) || q(y_i | x_i)) over the rows of `inputs`: Bernoulli
/// class probabilities for classification, Gaussian predictive densities over
/// y (latent variance plus v_y) for regression. Summed in row order.
template <PredictiveModel Ref, PredictiveModel Approx>
double kl_predictive(const Ref &reference, const Approx &approx,
                     const Matrix &inputs, const Likelihood &lik) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const Vector x = inputs.row(i).transpose();
    const auto p = predictive(reference, x);
    const auto q = predictive(approx, x);
    if (const auto *c = std::get_if<ClassificationLik>(&lik)) {
      total += bernoulli_kl(predictive_class_prob(p.mean, p.var, *c),
                            predictive_class_prob(q.mean, q.var, *c));
    } else {
      const double vy = std::get<RegressionLik>(lik).noise_var();
      total += gaussian_kl(p.mean, p.var + vy, q.mean, q.var + vy);
    }
  }
  return std::max(total, 0.0);
}

/// Fraction of points whose predicted class disagrees with the label; a
/// probability of exactly 0.5 counts as an error.
inline double error_rate_from_probs(const Vector &prob_pos,
                                    const Vector &labels) {
  if (labels.size() == 0) {
    throw UsageError("error_rate: empty test set");
  }
  long wrong = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double pr = prob_pos(i);
    const bool ok = (pr > 0.5 && labels(i) > 0.0) || (pr < 0.5 && labels(i) < 0.0);
    wrong += ok ? 0 : 1;
  }
  return static_cast<double>(wrong) / static_cast<double>(labels.size());
}

template <PredictiveModel Model>
Vector class_probabilities(const Model &model, const Matrix &inputs,
                           const ClassificationLik &lik) {
  Vector out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const auto pr = predictive(model, Vector(inputs.row(i).transpose()));
    out(i) = predictive_class_prob(pr.mean, pr.var, lik);
  }
  return out;
}

template <PredictiveModel Model>
double error_rate(const Model &model, const Dataset &test,
                  const ClassificationLik &lik) {
  if (test.size() == 0) {
    throw UsageError("error_rate: empty test set");
  }
  return error_rate_from_probs(class_probabilities(model, test.inputs, lik),
                               test.outputs);
}

template <PredictiveModel Model>
Vector predictive_means(const Model &model, const Matrix &inputs) {
  Vector out(inputs.rows());
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    out(i) = predictive(model, Vector(inputs.row(i).transpose())).mean;
  }
  return out;
}

template <PredictiveModel Model>
double rmse(const Model &model, const Dataset &test) {
  if (test.size() == 0) {
    throw UsageError("rmse: empty test set");
  }
  const Vector r = predictive_means(model, test.inputs) - test.outputs;
  return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

} // namespace saspa
