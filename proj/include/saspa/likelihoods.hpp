#pragma once

// Site normalizers Z = int N(f | m, v) p(y | f) df and their derivatives with
// respect to the cavity mean m, for Gaussian regression and for the
// labeling-error step-function classifier.

#include <cmath>
#include <numbers>
#include <string>
#include <variant>

#include "saspa/errors.hpp"

namespace saspa {

struct SiteDerivatives {
  double log_z = 0.0;
  double dlogz_dm = 0.0;
  double d2logz_dm2 = 0.0;
};

class RegressionLik {
public:
  explicit RegressionLik(double noise_var) : v_y_(noise_var) {
    detail::require(std::isfinite(noise_var) && noise_var > 0.0,
                    "regression noise variance must be positive");
  }
  double noise_var() const { return v_y_; }

private:
  double v_y_;
};

class ClassificationLik {
public:
  explicit ClassificationLik(double epsilon = 0.01) : eps_(epsilon) {
    detail::require(epsilon >= 0.0 && epsilon < 0.5,
                    "labeling error epsilon must lie in [0, 0.5)");
  }
  double epsilon() const { return eps_; }

private:
  double eps_;
};

using Likelihood = std::variant<RegressionLik, ClassificationLik>;

inline bool is_classification(const Likelihood &lik) {
  return std::holds_alternative<ClassificationLik>(lik);
}

namespace normal {

inline double pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Psi(z) / N(z), evaluated without forming either factor for z < -8 (both
/// underflow long before the ratio does).
inline double cdf_over_pdf(double z) {
  if (z >= -8.0) {
    return cdf(z) / pdf(z);
  }
  // Continued fraction of the asymptotic expansion:
  //   Psi(z) / N(z) = 1 / (|z| + 1 / (|z| + 2 / (|z| + 3 / ...))).
  const double a = -z;
  double tail = a;
  for (int k = 60; k >= 1; --k) {
    tail = a + k / tail;
  }
  return 1.0 / tail;
}

/// Inverse Mills ratio N(z) / Psi(z).
inline double mills(double z) { return 1.0 / cdf_over_pdf(z); }

inline double log_cdf(double z) {
  if (z >= -8.0) {
    return std::log(cdf(z));
  }
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log(cdf_over_pdf(z));
}

} // namespace normal

/// log N(y | m, v_y + v) and its first two derivatives in m.
inline SiteDerivatives site_derivs_regression(double m, double v, double y,
                                              const RegressionLik &lik) {
  const double s = lik.noise_var() + v;
  if (!(s > 0.0)) {
    throw NumericalError("degenerate regression site: v_y + v = " +
                         std::to_string(s));
  }
  const double r = y - m;
  return {-0.5 * std::log(2.0 * std::numbers::pi * s) - 0.5 * r * r / s, r / s,
          -1.0 / s};
}

/// Z = eps + (1 - 2 eps) Psi(z), z = m y / sqrt(v).
inline SiteDerivatives site_derivs_classification(double m, double v, double y,
                                                  const ClassificationLik &lik) {
  if (!(v > 0.0)) {
    throw NumericalError("classification site needs positive cavity variance");
  }
  if (y != 1.0 && y != -1.0) {
    throw UsageError("classification labels must be -1 or +1");
  }
  const double eps = lik.epsilon();
  const double sd = std::sqrt(v);
  const double z = m * y / sd;
  double log_z = 0.0;
  double gamma = 0.0;
  if (eps == 0.0) {
    log_z = normal::log_cdf(z);
    gamma = normal::mills(z) / sd;
  } else {
    log_z = std::log(eps + (1.0 - 2.0 * eps) * normal::cdf(z));
    // gamma = (1-2eps) N(z) / (Z sqrt v), divided through by N(z); when N(z)
    // underflows eps / N(z) is +inf and gamma correctly goes to 0.
    const double pdf = normal::pdf(z);
    const double denom = eps / pdf + (1.0 - 2.0 * eps) * normal::cdf_over_pdf(z);
    gamma = (1.0 - 2.0 * eps) / (denom * sd);
  }
  return {log_z, gamma * y, -gamma * (m * y + v * gamma) / v};
}

inline SiteDerivatives site_derivs(const Likelihood &lik, double m, double v,
                                   double y) {
  return std::visit(
      [&](const auto &l) -> SiteDerivatives {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, RegressionLik>) {
          return site_derivs_regression(m, v, y, l);
        } else {
          return site_derivs_classification(m, v, y, l);
        }
      },
      lik);
}

/// P(y = +1) under a Gaussian latent marginal N(m, v).
inline double predictive_class_prob(double m, double v,
                                    const ClassificationLik &lik) {
  detail::require(v >= 0.0, "predictive variance must be >= 0");
  const double eps = lik.epsilon();
  return eps + (1.0 - 2.0 * eps) * normal::cdf(m / std::sqrt(v + 1e-12));
}

} // namespace saspa
