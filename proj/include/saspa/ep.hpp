#pragma once

// Expectation propagation onto the sparse posterior family. Each training
// point i owns a Gaussian message on the projected function value
// p_i^T g_B(f) with mean g_i and precision tau_i; a sweep deletes, projects
// and re-includes every message at O(M^2) cost per site.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "saspa/dataset.hpp"
#include "saspa/likelihoods.hpp"
#include "saspa/posterior.hpp"
#include "saspa/random.hpp"

namespace saspa {

enum class SiteOrder { natural, shuffled };

struct EpConfig {
  int max_sweeps = 50;
  /// Threshold on max |delta g_i| and |delta tau_i| over one sweep.
  double convergence_tol = 1e-4;
  /// Weight of the proposed message in natural parameters (tau, tau g).
  double damping = 1.0;
  /// Starting relative jitter for the blurred Gram factorization.
  double jitter = 1e-8;
  SiteOrder site_order = SiteOrder::natural;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    detail::require(max_sweeps >= 1, "max_sweeps must be >= 1");
    detail::require(convergence_tol > 0.0, "convergence_tol must be > 0");
    detail::require(damping > 0.0 && damping <= 1.0,
                    "damping must lie in (0, 1]");
    detail::require(jitter > 0.0, "jitter must be > 0");
  }
};

/// Per-site message parameters plus the cached K~(B, x_i) and
/// p_i = K^{-1} K~(B, x_i) columns (both M x N).
struct SiteMessages {
  Vector g;
  Vector tau;
  Matrix kx;
  Matrix p;

  Eigen::Index size() const { return g.size(); }

  static SiteMessages init(const SparsePosterior &post, const Matrix &inputs) {
    SiteMessages s;
    s.g = Vector::Zero(inputs.rows());
    s.tau = Vector::Zero(inputs.rows());
    s.kx = blurred_cross_kernel_matrix(inputs, *post.basis);
    s.p = post.gram->solve(s.kx);
    return s;
  }
};

class DegenerateCavityError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NegativeCavityVarianceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Denominators of the deletion step closer to zero than this are degenerate.
inline constexpr double kDegenerateCavityTol = 1e-12;

/// (alpha, beta) of a process in the sparse family, detached from the basis.
struct ProcessParams {
  Vector alpha;
  Matrix beta;
};

struct Marginal {
  double mean = 0.0;
  double var = 0.0;
};

struct SiteParams {
  double g = 0.0;
  double tau = 0.0;
};

namespace detail {

inline void symmetrize(Matrix &a) {
  a = (0.5 * (a + a.transpose())).eval();
}

} // namespace detail

/// Removes message (g_i, tau_i) from q. An empty message (tau_i = 0) is the
/// identity.
inline ProcessParams cavity(const ProcessParams &q, const SiteParams &msg,
                            const Vector &kx, const Vector &p) {
  if (msg.tau == 0.0) {
    return q;
  }
  const Vector h = p - q.beta * kx;
  const double s = kx.dot(h);
  const double m = kx.dot(q.alpha);
  const double denom = s - 1.0 / msg.tau;
  if (!std::isfinite(denom) || std::abs(denom) < kDegenerateCavityTol) {
    throw DegenerateCavityError("degenerate cavity: -1/tau + K~h = " +
                                std::to_string(denom));
  }
  // d log Z_d / dm = (g - m) / denom, d2 log Z_d / dm2 = -1 / denom.
  ProcessParams out{q.alpha + h * ((msg.g - m) / denom),
                    q.beta + h * h.transpose() / denom};
  detail::symmetrize(out.beta);
  return out;
}

inline ProcessParams cavity(const SparsePosterior &post,
                            const SiteMessages &sites, Eigen::Index i,
                            const Vector &x_i) {
  const Vector kx = blurred_cross_kernel(x_i, *post.basis);
  return cavity(ProcessParams{post.alpha, post.beta},
                SiteParams{sites.g(i), sites.tau(i)}, kx, sites.p.col(i));
}

/// h = p_i - beta K~(B, x_i), equal to K^{-1} V~(B, x_i).
inline Vector cavity_direction(const ProcessParams &cav, const Vector &kx,
                               const Vector &p) {
  return p - cav.beta * kx;
}

/// Marginal of f(x_i) under the cavity; K(x_i, x_i) = 1 for the Gaussian
/// kernel.
inline Marginal cavity_marginal(const ProcessParams &cav, const Vector &kx) {
  const double v = 1.0 - kx.dot(cav.beta * kx);
  if (!(v > 0.0)) {
    throw NegativeCavityVarianceError("non-positive cavity variance " +
                                      std::to_string(v));
  }
  return {kx.dot(cav.alpha), v};
}

/// Moment-matching projection of cavity x likelihood back onto the family.
inline ProcessParams project(const ProcessParams &cav, const Vector &kx,
                             const SiteDerivatives &d, const Vector &p) {
  const Vector h = cavity_direction(cav, kx, p);
  ProcessParams out{cav.alpha + h * d.dlogz_dm,
                    cav.beta - d.d2logz_dm2 * h * h.transpose()};
  detail::symmetrize(out.beta);
  return out;
}

/// New message from the projection: tau^{-1} = (-d2)^{-1} - K~(x_i, B) h and
/// g = m + d1 / (-d2). `projected_var` is K~(x_i, B) h. Returns nullopt when
/// the curvature is not strictly negative or the result is not finite.
inline std::optional<SiteParams>
propose_message(const SiteDerivatives &d, double cavity_mean,
                double projected_var) {
  if (!(d.d2logz_dm2 < 0.0)) {
    return std::nullopt;
  }
  const double inv_curv = -1.0 / d.d2logz_dm2;
  const SiteParams out{cavity_mean + inv_curv * d.dlogz_dm,
                       1.0 / (inv_curv - projected_var)};
  if (!std::isfinite(out.g) || !std::isfinite(out.tau)) {
    return std::nullopt;
  }
  return out;
}

/// Convex combination in natural parameters (tau, tau g).
inline SiteParams damp_message(const SiteParams &old, const SiteParams &proposed,
                               double damping) {
  if (damping == 1.0) {
    return proposed;
  }
  const double tau = damping * proposed.tau + (1.0 - damping) * old.tau;
  const double nu =
      damping * proposed.tau * proposed.g + (1.0 - damping) * old.tau * old.g;
  return {tau != 0.0 ? nu / tau : 0.0, tau};
}

/// Writes the (damped) proposal for site i into `sites`. Returns false and
/// leaves the message untouched when no valid proposal exists.
inline bool update_message(SiteMessages &sites, Eigen::Index i,
                           const SiteDerivatives &d, const Marginal &cav_marg,
                           const Vector &h, const Vector &kx,
                           double damping = 1.0) {
  const auto proposal = propose_message(d, cav_marg.mean, kx.dot(h));
  if (!proposal) {
    return false;
  }
  const auto next =
      damp_message({sites.g(i), sites.tau(i)}, *proposal, damping);
  sites.g(i) = next.g;
  sites.tau(i) = next.tau;
  return true;
}

struct SkipCounts {
  long degenerate_cavity = 0;
  long negative_cavity_variance = 0;
  long nonnegative_curvature = 0;
  long nonfinite = 0;

  long total() const {
    return degenerate_cavity + negative_cavity_variance +
           nonnegative_curvature + nonfinite;
  }
};

struct FitReport {
  int sweeps = 0;
  bool converged = false;
  double final_max_change = 0.0;
  std::vector<double> max_change;
  std::vector<double> sweep_seconds;
  std::vector<long> skipped_per_sweep;
  SkipCounts skips;
};

struct EpResult {
  SparsePosterior posterior;
  SiteMessages sites;
  FitReport report;
};

namespace detail {

enum class SiteOutcome {
  updated,
  degenerate_cavity,
  negative_cavity_variance,
  nonnegative_curvature,
  nonfinite
};

/// One delete / project / include step on site i, fused into a single rank-1
/// update. Deletion and projection both move along h1 = p - beta kx, so
///   beta_new = beta + c h1 h1^T,  alpha_new = alpha + a h1.
/// Only the lower triangle of beta is read and written.
struct SiteKernel {
  Vector u;
  Vector h1;

  SiteOutcome step(Vector &alpha, Matrix &beta, SiteParams &msg, double y,
                   const Eigen::Ref<const Vector> &kx,
                   const Eigen::Ref<const Vector> &p, const Likelihood &lik,
                   double damping, double &change) {
    u.noalias() = beta.selfadjointView<Eigen::Lower>() * kx;
    h1 = p - u;
    const double s1 = kx.dot(h1);
    const double m = kx.dot(alpha);
    const double kbk = kx.dot(u);

    double c1 = 0.0;
    if (msg.tau != 0.0) {
      const double denom = s1 - 1.0 / msg.tau;
      if (!std::isfinite(denom) || std::abs(denom) < kDegenerateCavityTol) {
        return SiteOutcome::degenerate_cavity;
      }
      c1 = 1.0 / denom;
    }
    const double a1 = c1 * (msg.g - m);
    const double m_cav = m + a1 * s1;
    const double v_cav = 1.0 - kbk - c1 * s1 * s1;
    if (!(v_cav > 0.0)) {
      return SiteOutcome::negative_cavity_variance;
    }
    const double shrink = 1.0 - c1 * s1; // h2 = shrink * h1
    const double s2 = shrink * s1;

    SiteDerivatives d;
    try {
      d = site_derivs(lik, m_cav, v_cav, y);
    } catch (const NumericalError &) {
      return SiteOutcome::nonfinite;
    }
    if (!std::isfinite(d.dlogz_dm) || !std::isfinite(d.d2logz_dm2)) {
      return SiteOutcome::nonfinite;
    }
    if (!(d.d2logz_dm2 < 0.0)) {
      return SiteOutcome::nonnegative_curvature;
    }
    const auto proposal = propose_message(d, m_cav, s2);
    if (!proposal) {
      return SiteOutcome::nonfinite;
    }

    SiteParams next;
    double beta_coef = 0.0;
    double alpha_coef = 0.0;
    if (damping == 1.0) {
      next = *proposal;
      beta_coef = c1 - d.d2logz_dm2 * shrink * shrink;
      alpha_coef = a1 + d.dlogz_dm * shrink;
    } else {
      next = damp_message(msg, *proposal, damping);
      const double denom2 = 1.0 + next.tau * s2;
      if (!(denom2 > 0.0)) {
        return SiteOutcome::nonfinite;
      }
      const double kappa = next.tau / denom2;
      beta_coef = c1 + kappa * shrink * shrink;
      alpha_coef = a1 + kappa * (next.g - m_cav) * shrink;
    }
    if (!std::isfinite(beta_coef) || !std::isfinite(alpha_coef)) {
      return SiteOutcome::nonfinite;
    }
    beta.selfadjointView<Eigen::Lower>().rankUpdate(h1, beta_coef);
    alpha.noalias() += alpha_coef * h1;
    change = std::max(std::abs(next.g - msg.g), std::abs(next.tau - msg.tau));
    msg = next;
    return SiteOutcome::updated;
  }
};

} // namespace detail

/// Runs EP sweeps in place, starting from the current (post, sites) state.
inline FitReport ep_run(const Dataset &data, SparsePosterior &post,
                        SiteMessages &sites, const Likelihood &lik,
                        const EpConfig &cfg) {
  cfg.validate();
  const Eigen::Index n = data.size();
  if (n == 0) {
    throw UsageError("ep_fit: dataset is empty");
  }
  if (data.dim() != post.basis->dim()) {
    throw UsageError("ep_fit: data dimension " + std::to_string(data.dim()) +
                     " does not match basis dimension " +
                     std::to_string(post.basis->dim()));
  }
  if (sites.size() != n || sites.p.cols() != n) {
    throw UsageError("ep_fit: site messages do not match the dataset");
  }
  if (is_classification(lik) != (data.task == Task::classification)) {
    throw UsageError("ep_fit: likelihood does not match the dataset task");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(cfg.shuffle_seed);

  detail::SiteKernel kernel;
  FitReport report;
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    if (cfg.site_order == SiteOrder::shuffled) {
      detail::shuffle(order, rng);
    }
    const auto start = std::chrono::steady_clock::now();
    double max_change = 0.0;
    long skipped = 0;
    for (const Eigen::Index i : order) {
      SiteParams msg{sites.g(i), sites.tau(i)};
      double change = 0.0;
      const auto outcome =
          kernel.step(post.alpha, post.beta, msg, data.outputs(i),
                      sites.kx.col(i), sites.p.col(i), lik, cfg.damping,
                      change);
      switch (outcome) {
      case detail::SiteOutcome::updated:
        sites.g(i) = msg.g;
        sites.tau(i) = msg.tau;
        max_change = std::max(max_change, change);
        continue;
      case detail::SiteOutcome::degenerate_cavity:
        ++report.skips.degenerate_cavity;
        break;
      case detail::SiteOutcome::negative_cavity_variance:
        ++report.skips.negative_cavity_variance;
        break;
      case detail::SiteOutcome::nonnegative_curvature:
        ++report.skips.nonnegative_curvature;
        break;
      case detail::SiteOutcome::nonfinite:
        ++report.skips.nonfinite;
        break;
      }
      ++skipped;
    }
    const auto stop = std::chrono::steady_clock::now();
    report.sweep_seconds.push_back(
        std::chrono::duration<double>(stop - start).count());
    report.max_change.push_back(max_change);
    report.skipped_per_sweep.push_back(skipped);
    report.sweeps = sweep + 1;
    report.final_max_change = max_change;
    if (skipped == n) {
      post.beta.triangularView<Eigen::StrictlyUpper>() = post.beta.transpose();
      throw DivergenceError("EP diverged: every site was skipped in sweep " +
                            std::to_string(sweep + 1));
    }
    if (max_change < cfg.convergence_tol) {
      report.converged = true;
      break;
    }
  }
  post.beta.triangularView<Eigen::StrictlyUpper>() = post.beta.transpose();
  return report;
}

/// Fits the sparse posterior over `basis` to `data` by EP, starting from the
/// prior with all messages empty.
inline EpResult ep_fit(const Dataset &data, Basis basis, const Likelihood &lik,
                       const EpConfig &cfg = {}) {
  cfg.validate();
  if (data.size() == 0) {
    throw UsageError("ep_fit: dataset is empty");
  }
  auto post = make_prior(std::move(basis), cfg.jitter);
  if (data.dim() != post.basis->dim()) {
    throw UsageError("ep_fit: data dimension does not match basis");
  }
  auto sites = SiteMessages::init(post, data.inputs);
  auto report = ep_run(data, post, sites, lik, cfg);
  return {std::move(post), std::move(sites), std::move(report)};
}

/// Largest gap, over the basis moments (m~_B, V~_B), between the current q and
/// the projection of the tilted distribution of site i. Zero at an EP fixed
/// point. Returns nullopt if site i cannot be processed from this state.
inline std::optional<double> tilted_moment_gap(const SparsePosterior &post,
                                               const SiteMessages &sites,
                                               const Dataset &data,
                                               const Likelihood &lik,
                                               Eigen::Index i) {
  const ProcessParams q{post.alpha, post.beta};
  const Vector kx = sites.kx.col(i);
  const Vector p = sites.p.col(i);
  try {
    const auto cav = cavity(q, {sites.g(i), sites.tau(i)}, kx, p);
    const auto marg = cavity_marginal(cav, kx);
    const auto d = site_derivs(lik, marg.mean, marg.var, data.outputs(i));
    if (!(d.d2logz_dm2 < 0.0)) {
      return std::nullopt;
    }
    const auto tilted = project(cav, kx, d, p);
    const Matrix &khat = post.khat();
    const double mean_gap = (khat * (tilted.alpha - q.alpha)).cwiseAbs().maxCoeff();
    const double cov_gap =
        (khat * (tilted.beta - q.beta) * khat).cwiseAbs().maxCoeff();
    return std::max(mean_gap, cov_gap);
  } catch (const NumericalError &) {
    return std::nullopt;
  }
}

} // namespace saspa
