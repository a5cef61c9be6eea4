#pragma once

// End-to-end training: K-means basis -> blur -> EP.

#include <optional>

#include "saspa/model_file.hpp"

namespace saspa {

struct TrainOptions {
  Eigen::Index num_basis = 10;
  BlurMode blur = BlurMode::full;
  double eta = 1.0;
  double noise_var = 0.1;
  double epsilon = 0.01;
  EpConfig ep;
  std::uint64_t seed = 0;
  bool standardize = false;
  /// Full-blur diagonal floor; defaults to default_cov_floor(inputs).
  std::optional<double> cov_floor;
  int kmeans_iters = 100;
  int kmeans_restarts = 5;

  Likelihood likelihood(Task task) const {
    if (task == Task::classification) {
      return ClassificationLik(epsilon);
    }
    return RegressionLik(noise_var);
  }
};

struct TrainResult {
  ModelFile model;
  FitReport report;
};

/// EP fit on a basis built from precomputed clusters, so several blur modes
/// can share one set of centers. `data` must already be in model input space.
inline TrainResult fit_on_clusters(const Dataset &data,
                                   const std::vector<ClusterSummary> &clusters,
                                   const TrainOptions &opts) {
  const double floor = opts.blur == BlurMode::full
                           ? opts.cov_floor.value_or(default_cov_floor(data.inputs))
                           : 0.0;
  const auto lik = opts.likelihood(data.task);
  auto fit = ep_fit(data,
                    build_basis(clusters, opts.blur, KernelParams(opts.eta), floor),
                    lik, opts.ep);
  TrainResult out;
  out.model.task = data.task;
  out.model.blur_mode = opts.blur;
  out.model.likelihood = lik;
  out.model.jitter = opts.ep.jitter;
  out.model.posterior = std::move(fit.posterior);
  out.model.fit = FitSummary::from(fit.report);
  out.report = std::move(fit.report);
  return out;
}

inline TrainResult train_model(const Dataset &raw, const TrainOptions &opts) {
  raw.validate();
  if (opts.num_basis < 1 || opts.num_basis > raw.size()) {
    throw UsageError("number of basis points must lie in [1, N]; N = " +
                     std::to_string(raw.size()));
  }
  Dataset data = raw;
  std::optional<Standardizer> transform;
  if (opts.standardize) {
    transform = Standardizer::fit(raw.inputs);
    data.inputs = transform->apply(raw.inputs);
  }
  const auto km = kmeans(data.inputs, opts.num_basis, opts.seed,
                         opts.kmeans_iters, opts.kmeans_restarts);
  auto res = fit_on_clusters(data, km.clusters, opts);
  res.model.input_transform = std::move(transform);
  return res;
}

} // namespace saspa
