#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "saspa/errors.hpp"

namespace saspa {

enum class Task { regression, classification };

inline std::string to_string(Task t) {
  return t == Task::regression ? "regression" : "classification";
}

inline Task parse_task(const std::string &s) {
  if (s == "regression") {
    return Task::regression;
  }
  if (s == "classification") {
    return Task::classification;
  }
  throw UsageError("unknown task '" + s + "'");
}

/// N inputs of dimension d (one per row) with scalar outputs; classification
/// outputs are -1 / +1.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::VectorXd outputs;
  Task task = Task::regression;
  std::vector<std::string> feature_names;

  Eigen::Index size() const { return inputs.rows(); }
  Eigen::Index dim() const { return inputs.cols(); }

  void validate() const {
    if (inputs.rows() != outputs.size()) {
      throw DataError("dataset has " + std::to_string(inputs.rows()) +
                      " inputs but " + std::to_string(outputs.size()) +
                      " outputs");
    }
    if (!inputs.allFinite() || !outputs.allFinite()) {
      throw DataError("dataset contains NaN or Inf");
    }
    if (task == Task::classification) {
      for (Eigen::Index i = 0; i < outputs.size(); ++i) {
        if (outputs(i) != 1.0 && outputs(i) != -1.0) {
          throw DataError("classification label at row " + std::to_string(i) +
                          " is not -1 or +1");
        }
      }
    }
  }

  Dataset subset(const std::vector<Eigen::Index> &rows) const {
    Dataset out;
    out.task = task;
    out.feature_names = feature_names;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), dim());
    out.outputs.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      out.inputs.row(static_cast<Eigen::Index>(k)) = inputs.row(rows[k]);
      out.outputs(static_cast<Eigen::Index>(k)) = outputs(rows[k]);
    }
    return out;
  }
};

} // namespace saspa
