#pragma once

// K-means selection of pseudo-inputs. Cluster means become basis centers and
// cluster covariances become the local blur, reduced according to BlurMode.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "saspa/kernels.hpp"
#include "saspa/random.hpp"

namespace saspa {

enum class BlurMode { delta, sphere, full };

inline std::string to_string(BlurMode m) {
  switch (m) {
  case BlurMode::delta:
    return "delta";
  case BlurMode::sphere:
    return "sphere";
  case BlurMode::full:
    return "full";
  }
  return "unknown";
}

inline BlurMode parse_blur_mode(const std::string &s) {
  if (s == "delta") {
    return BlurMode::delta;
  }
  if (s == "sphere") {
    return BlurMode::sphere;
  }
  if (s == "full") {
    return BlurMode::full;
  }
  throw UsageError("unknown blur mode '" + s + "' (expected delta|sphere|full)");
}

struct ClusterSummary {
  Vector mean;
  Matrix cov;
  Eigen::Index count = 0;
};

struct KMeansResult {
  std::vector<ClusterSummary> clusters;
  std::vector<Eigen::Index> assignment;
  double objective = 0.0;
  /// Objective after every Lloyd iteration of the winning restart.
  std::vector<double> objective_trace;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<Eigen::Index> kmeanspp_seed(const Matrix &x, Eigen::Index k,
                                               std::mt19937_64 &rng) {
  const Eigen::Index n = x.rows();
  std::vector<Eigen::Index> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  chosen.push_back(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(n)));
  Vector d2 = (x.rowwise() - x.row(chosen.back())).rowwise().squaredNorm();
  while (static_cast<Eigen::Index>(chosen.size()) < k) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = unit_uniform(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (d2(i) > 0.0 && acc > target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) { // round-off at the top end
        d2.maxCoeff(&pick);
      }
    } else {
      // All remaining points coincide with a chosen center.
      for (Eigen::Index i = 0; i < n && pick < 0; ++i) {
        if (std::find(chosen.begin(), chosen.end(), i) == chosen.end()) {
          pick = i;
        }
      }
    }
    chosen.push_back(pick);
    d2 = d2.cwiseMin(
        (x.rowwise() - x.row(pick)).rowwise().squaredNorm().eval());
  }
  return chosen;
}

inline KMeansResult kmeans_once(const Matrix &x, Eigen::Index k,
                                std::uint64_t seed, int max_iters) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  std::mt19937_64 rng(seed);
  Matrix centers(k, d);
  const auto init = kmeanspp_seed(x, k, rng);
  for (Eigen::Index c = 0; c < k; ++c) {
    centers.row(c) = x.row(init[static_cast<std::size_t>(c)]);
  }

  KMeansResult res;
  res.seed = seed;
  res.assignment.assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best = 0;
      const double best_d =
          (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      dist(i) = best_d;
      if (res.assignment[static_cast<std::size_t>(i)] != best) {
        res.assignment[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (const auto a : res.assignment) {
      ++counts[static_cast<std::size_t>(a)];
    }
    // Empty clusters take the point farthest from its assigned mean.
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) {
        continue;
      }
      Eigen::Index far = -1;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto a = res.assignment[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(a)] > 1 && dist(i) > far_d) {
          far_d = dist(i);
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(res.assignment[static_cast<std::size_t>(far)])];
      res.assignment[static_cast<std::size_t>(far)] = c;
      ++counts[static_cast<std::size_t>(c)];
      dist(far) = 0.0;
      changed = true;
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      centers.row(res.assignment[static_cast<std::size_t>(i)]) += x.row(i);
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      centers.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
    }
    double obj = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      obj += (x.row(i) - centers.row(res.assignment[static_cast<std::size_t>(i)]))
                 .squaredNorm();
    }
    res.objective_trace.push_back(obj);
    res.objective = obj;
    if (!changed) {
      break;
    }
  }

  res.clusters.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    auto &cl = res.clusters[static_cast<std::size_t>(c)];
    cl.mean = centers.row(c).transpose();
    cl.cov = Matrix::Zero(d, d);
    cl.count = 0;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    auto &cl = res.clusters[static_cast<std::size_t>(
        res.assignment[static_cast<std::size_t>(i)])];
    const Vector diff = x.row(i).transpose() - cl.mean;
    cl.cov.noalias() += diff * diff.transpose();
    ++cl.count;
  }
  for (auto &cl : res.clusters) {
    if (cl.count > 1) {
      cl.cov /= static_cast<double>(cl.count - 1);
    } else {
      cl.cov.setZero();
    }
  }
  return res;
}

} // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Runs `restarts` independent
/// seeds (seed, seed + 1, ...) and keeps the lowest objective, ties going to
/// the lowest seed. Cluster covariances use the n - 1 denominator.
inline KMeansResult kmeans(const Matrix &inputs, Eigen::Index num_clusters,
                           std::uint64_t seed, int max_iters = 100,
                           int restarts = 5) {
  if (inputs.rows() == 0) {
    throw UsageError("kmeans: empty input");
  }
  detail::require(num_clusters >= 1, "kmeans: number of clusters must be >= 1");
  if (num_clusters > inputs.rows()) {
    throw UsageError("kmeans: number of clusters (" +
                     std::to_string(num_clusters) +
                     ") exceeds number of points (" +
                     std::to_string(inputs.rows()) + ")");
  }
  detail::require(max_iters >= 1 && restarts >= 1,
                  "kmeans: max_iters and restarts must be >= 1");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    auto res = detail::kmeans_once(inputs, num_clusters,
                                   seed + static_cast<std::uint64_t>(r),
                                   max_iters);
    if (r == 0 || res.objective < best.objective) {
      best = std::move(res);
    }
  }
  return best;
}

/// 1e-6 * median pairwise squared distance / d, over at most 1000 evenly
/// strided inputs.
inline double default_cov_floor(const Matrix &inputs) {
  const Eigen::Index n = inputs.rows();
  if (n < 2) {
    return 1e-6;
  }
  const Eigen::Index stride = std::max<Eigen::Index>(1, n / 1000);
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < n; i += stride) {
    rows.push_back(i);
  }
  std::vector<double> d2;
  d2.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      d2.push_back((inputs.row(rows[a]) - inputs.row(rows[b])).squaredNorm());
    }
  }
  if (d2.empty()) {
    return 1e-6;
  }
  auto mid = d2.begin() + static_cast<std::ptrdiff_t>(d2.size() / 2);
  std::nth_element(d2.begin(), mid, d2.end());
  const double floor = 1e-6 * *mid / static_cast<double>(inputs.cols());
  return floor > 0.0 ? floor : 1e-6;
}

/// Centers are cluster means. delta: c = 0; sphere: (trace / d) I;
/// full: cov + cov_floor I.
inline Basis build_basis(const std::vector<ClusterSummary> &clusters,
                         BlurMode mode, const KernelParams &kernel,
                         double cov_floor = 0.0) {
  detail::require(!clusters.empty(), "build_basis: no clusters");
  detail::require(cov_floor >= 0.0, "build_basis: cov_floor must be >= 0");
  std::vector<BlurredBasisPoint> pts;
  pts.reserve(clusters.size());
  for (const auto &cl : clusters) {
    const auto d = cl.mean.size();
    switch (mode) {
    case BlurMode::delta:
      pts.push_back(BlurredBasisPoint::delta(cl.mean));
      break;
    case BlurMode::sphere:
      pts.push_back(BlurredBasisPoint::sphere(
          cl.mean, cl.cov.trace() / static_cast<double>(d)));
      break;
    case BlurMode::full: {
      Matrix c = 0.5 * (cl.cov + cl.cov.transpose());
      c.diagonal().array() += cov_floor;
      pts.push_back({cl.mean, std::move(c)});
      break;
    }
    }
  }
  return Basis(std::move(pts), kernel);
}

} // namespace saspa
