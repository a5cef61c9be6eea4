#pragma once

// Predictive grids over a 2-D rectangle and basis ellipse parameters, for
// external plotting.

#include <Eigen/Eigenvalues>

#include "saspa/model_file.hpp"

namespace saspa {

struct GridSpec {
  double xmin = -1.5;
  double xmax = 1.5;
  double ymin = -1.5;
  double ymax = 1.5;
  int resolution = 50;

  void validate() const {
    if (!(xmax > xmin) || !(ymax > ymin)) {
      throw UsageError("degenerate grid bounds");
    }
    detail::require(resolution >= 2, "grid resolution must be >= 2");
  }
};

/// Rows (x1, x2, value), x1-major. The value is the predictive mean for
/// regression and P(y = +1) for classification.
inline Matrix heatmap_grid(const ModelFile &model, const GridSpec &spec) {
  spec.validate();
  if (model.posterior.basis->dim() != 2) {
    throw UsageError("heatmap needs a model with 2-D inputs");
  }
  const auto *cls = std::get_if<ClassificationLik>(&model.likelihood);
  const int r = spec.resolution;
  Matrix out(static_cast<Eigen::Index>(r) * r, 3);
  Eigen::Index row = 0;
  for (int i = 0; i < r; ++i) {
    const double x1 = spec.xmin + (spec.xmax - spec.xmin) * i / (r - 1);
    for (int j = 0; j < r; ++j) {
      const double x2 = spec.ymin + (spec.ymax - spec.ymin) * j / (r - 1);
      const auto pr = predictive(model, Vector{{x1, x2}});
      out(row, 0) = x1;
      out(row, 1) = x2;
      out(row, 2) = cls ? predictive_class_prob(pr.mean, pr.var, *cls) : pr.mean;
      ++row;
    }
  }
  return out;
}

/// One basis point in raw input coordinates: center, ascending eigenvalues of
/// the local covariance and the matching unit eigenvectors (columns).
struct BasisEllipse {
  Vector center;
  Vector eigenvalues;
  Matrix eigenvectors;
};

inline std::vector<BasisEllipse> basis_ellipses(const ModelFile &model) {
  std::vector<BasisEllipse> out;
  for (const auto &pt : model.posterior.basis->points()) {
    Vector c = pt.center;
    Matrix cov = pt.local_cov;
    if (model.input_transform) {
      const auto &t = *model.input_transform;
      c = t.mean + t.scale.cwiseProduct(c);
      cov = t.scale.asDiagonal() * cov * t.scale.asDiagonal();
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    out.push_back({std::move(c), eig.eigenvalues(), eig.eigenvectors()});
  }
  return out;
}

} // namespace saspa
