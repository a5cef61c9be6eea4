#pragma once

// Versioned JSON model files. Doubles are written in shortest round-trip
// form, so save -> load reproduces every parameter bit for bit.

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "saspa/basis_selection.hpp"
#include "saspa/csv.hpp"
#include "saspa/ep.hpp"

namespace saspa {

inline constexpr const char *kModelFormat = "saspa-model";
inline constexpr int kModelSchemaVersion = 1;

/// Deterministic part of a FitReport (no wall-clock times).
struct FitSummary {
  int sweeps = 0;
  bool converged = false;
  double final_max_change = 0.0;
  std::vector<double> max_change;
  SkipCounts skips;

  static FitSummary from(const FitReport &r) {
    return {r.sweeps, r.converged, r.final_max_change, r.max_change, r.skips};
  }
};

struct ModelFile {
  Task task = Task::regression;
  BlurMode blur_mode = BlurMode::full;
  Likelihood likelihood = RegressionLik(1.0);
  /// Relative starting jitter used to factorize the blurred Gram matrix.
  double jitter = 1e-8;
  SparsePosterior posterior;
  /// Applied to raw inputs before the posterior sees them.
  std::optional<Standardizer> input_transform;
  FitSummary fit;

  const KernelParams &kernel() const { return posterior.basis->kernel(); }
};

inline Predictive predictive(const ModelFile &model, const Vector &x) {
  if (model.input_transform) {
    return predictive(model.posterior, model.input_transform->apply(x));
  }
  return predictive(model.posterior, x);
}

namespace detail {

using nlohmann::json;

inline json to_json_vec(const Vector &v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline json to_json_mat(const Matrix &m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(to_json_vec(m.row(r).transpose()));
  }
  return rows;
}

inline Vector vec_from_json(const json &j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix mat_from_json(const json &j, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(j.size()) != rows) {
    throw DataError("model file: matrix has wrong number of rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Vector row = vec_from_json(j.at(static_cast<std::size_t>(r)));
    if (row.size() != cols) {
      throw DataError("model file: matrix row has wrong length");
    }
    m.row(r) = row.transpose();
  }
  return m;
}

inline json skips_to_json(const SkipCounts &s) {
  return {{"degenerate_cavity", s.degenerate_cavity},
          {"negative_cavity_variance", s.negative_cavity_variance},
          {"nonnegative_curvature", s.nonnegative_curvature},
          {"nonfinite", s.nonfinite}};
}

inline SkipCounts skips_from_json(const json &j) {
  return {j.at("degenerate_cavity").get<long>(),
          j.at("negative_cavity_variance").get<long>(),
          j.at("nonnegative_curvature").get<long>(),
          j.at("nonfinite").get<long>()};
}

} // namespace detail

inline nlohmann::json fit_report_json(const FitReport &r, bool with_timing) {
  nlohmann::json j = {{"sweeps", r.sweeps},
                      {"converged", r.converged},
                      {"final_max_change", r.final_max_change},
                      {"max_change", r.max_change},
                      {"skipped_per_sweep", r.skipped_per_sweep},
                      {"skips", detail::skips_to_json(r.skips)}};
  if (with_timing) {
    j["sweep_seconds"] = r.sweep_seconds;
  }
  return j;
}

inline nlohmann::json model_to_json(const ModelFile &m) {
  using nlohmann::json;
  json basis = json::array();
  for (const auto &pt : m.posterior.basis->points()) {
    basis.push_back({{"center", detail::to_json_vec(pt.center)},
                     {"local_cov", detail::to_json_mat(pt.local_cov)}});
  }
  json lik;
  if (const auto *c = std::get_if<ClassificationLik>(&m.likelihood)) {
    lik = {{"type", "classification"}, {"epsilon", c->epsilon()}};
  } else {
    lik = {{"type", "regression"},
           {"noise_var", std::get<RegressionLik>(m.likelihood).noise_var()}};
  }
  json transform = nullptr;
  if (m.input_transform) {
    transform = {{"mean", detail::to_json_vec(m.input_transform->mean)},
                 {"scale", detail::to_json_vec(m.input_transform->scale)}};
  }
  return {
      {"format", kModelFormat},
      {"schema_version", kModelSchemaVersion},
      {"task", to_string(m.task)},
      {"kernel", {{"eta", m.kernel().eta()}}},
      {"blur_mode", to_string(m.blur_mode)},
      {"likelihood", lik},
      {"jitter", m.jitter},
      {"basis", basis},
      {"alpha", detail::to_json_vec(m.posterior.alpha)},
      {"beta", detail::to_json_mat(m.posterior.beta)},
      {"input_transform", transform},
      {"fit",
       {{"sweeps", m.fit.sweeps},
        {"converged", m.fit.converged},
        {"final_max_change", m.fit.final_max_change},
        {"max_change", m.fit.max_change},
        {"skips", detail::skips_to_json(m.fit.skips)}}},
  };
}

inline ModelFile model_from_json(const nlohmann::json &j) {
  try {
    if (j.at("format").get<std::string>() != kModelFormat) {
      throw DataError("not a saspa model file");
    }
    const int version = j.at("schema_version").get<int>();
    if (version != kModelSchemaVersion) {
      throw DataError("unsupported model schema version " +
                      std::to_string(version));
    }
    ModelFile m;
    m.task = parse_task(j.at("task").get<std::string>());
    m.blur_mode = parse_blur_mode(j.at("blur_mode").get<std::string>());
    const auto &lik = j.at("likelihood");
    const auto type = lik.at("type").get<std::string>();
    if (type == "classification") {
      m.likelihood = ClassificationLik(lik.at("epsilon").get<double>());
    } else if (type == "regression") {
      m.likelihood = RegressionLik(lik.at("noise_var").get<double>());
    } else {
      throw DataError("unknown likelihood type '" + type + "'");
    }
    m.jitter = j.at("jitter").get<double>();
    const KernelParams kernel(j.at("kernel").at("eta").get<double>());
    std::vector<BlurredBasisPoint> pts;
    for (const auto &b : j.at("basis")) {
      Vector c = detail::vec_from_json(b.at("center"));
      const auto d = c.size();
      pts.push_back({std::move(c), detail::mat_from_json(b.at("local_cov"), d, d)});
    }
    m.posterior = make_prior(Basis(std::move(pts), kernel), m.jitter);
    const auto msize = static_cast<Eigen::Index>(m.posterior.size());
    m.posterior.alpha = detail::vec_from_json(j.at("alpha"));
    if (m.posterior.alpha.size() != msize) {
      throw DataError("model file: alpha has wrong length");
    }
    m.posterior.beta = detail::mat_from_json(j.at("beta"), msize, msize);
    if (!j.at("input_transform").is_null()) {
      m.input_transform = Standardizer{
          detail::vec_from_json(j.at("input_transform").at("mean")),
          detail::vec_from_json(j.at("input_transform").at("scale"))};
    }
    const auto &fit = j.at("fit");
    m.fit.sweeps = fit.at("sweeps").get<int>();
    m.fit.converged = fit.at("converged").get<bool>();
    m.fit.final_max_change = fit.at("final_max_change").get<double>();
    m.fit.max_change = fit.at("max_change").get<std::vector<double>>();
    m.fit.skips = detail::skips_from_json(fit.at("skips"));
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  } catch (const UsageError &e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
}

inline void save_model(const std::string &path, const ModelFile &m) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  out << model_to_json(m).dump(2) << '\n';
}

inline ModelFile load_model(const std::string &path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open model file '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
  return model_from_json(j);
}

} // namespace saspa
