// Command-line front end: generate | split | train | eval | heatmap.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "saspa/saspa.hpp"

namespace {

using namespace saspa;
using nlohmann::json;

struct DataArgs {
  std::string path;
  std::string task;
  char delimiter = ',';
  int label_column = -1;
  std::string positive_label = "1";
};

void add_data_args(CLI::App *cmd, DataArgs &a, bool task_required) {
  cmd->add_option("--data", a.path, "Delimited data file")->required();
  auto *task = cmd->add_option("--task", a.task, "regression | classification")
                   ->check(CLI::IsMember({"regression", "classification"}));
  if (task_required) {
    task->required();
  }
  cmd->add_option("--delimiter", a.delimiter, "Field delimiter");
  cmd->add_option("--label-column", a.label_column,
                  "Output column (negative counts from the end)");
  cmd->add_option("--positive-label", a.positive_label,
                  "Label value mapped to +1 for classification");
}

Dataset read_data(const DataArgs &a, Task task) {
  CsvOptions opts;
  opts.task = task;
  opts.delimiter = a.delimiter;
  opts.label_column = a.label_column;
  opts.positive_label = a.positive_label;
  return load_csv(a.path, opts);
}

void write_json(const std::string &path, const json &j) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write '" + path + "'");
  }
  out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string kind;
  long n = 0;
  long n_test = 2000;
  std::uint64_t seed = 0;
  double radius_noise = 0.1;
  double output_noise = 0.1;
  std::string out;
  std::string out_test;
};

void run_generate(const GenerateArgs &a) {
  if (a.kind == "circle") {
    const long n = a.n > 0 ? a.n : 100;
    write_csv(a.out, gen_circle_regression(n, a.seed,
                                           {a.radius_noise, a.output_noise}));
    std::cout << "wrote " << n << " points to " << a.out << '\n';
    return;
  }
  const long n = a.n > 0 ? a.n : 200;
  auto [train, test] = gen_gaussian_classes(n, a.n_test, a.seed);
  write_csv(a.out, train);
  std::cout << "wrote " << n << " training points to " << a.out << '\n';
  if (!a.out_test.empty()) {
    write_csv(a.out_test, test);
    std::cout << "wrote " << a.n_test << " test points to " << a.out_test
              << '\n';
  }
}

// ------------------------------------------------------------------- split

struct SplitArgs {
  std::string path;
  long train_size = 0;
  std::uint64_t seed = 0;
  bool has_header = false;
  std::string out_train;
  std::string out_test;
};

/// Splits raw lines, so symbolic labels and formatting survive untouched.
void run_split(const SplitArgs &a) {
  std::ifstream in(a.path);
  if (!in) {
    throw DataError("cannot open '" + a.path + "'");
  }
  std::string header;
  std::vector<std::string> lines;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && a.has_header) {
      header = line;
      first = false;
      continue;
    }
    first = false;
    if (line.find_first_not_of(" \t\r") != std::string::npos) {
      lines.push_back(line);
    }
  }
  if (a.train_size < 1 || a.train_size >= static_cast<long>(lines.size())) {
    throw UsageError("--train-size must lie in [1, N - 1]; N = " +
                     std::to_string(lines.size()));
  }
  std::vector<std::size_t> idx(lines.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = i;
  }
  std::mt19937_64 rng(a.seed);
  detail::shuffle(idx, rng);
  std::ofstream tr(a.out_train);
  std::ofstream te(a.out_test);
  if (!tr || !te) {
    throw DataError("cannot write split outputs");
  }
  if (a.has_header) {
    tr << header << '\n';
    te << header << '\n';
  }
  for (std::size_t k = 0; k < idx.size(); ++k) {
    (static_cast<long>(k) < a.train_size ? tr : te) << lines[idx[k]] << '\n';
  }
  std::cout << "train " << a.train_size << ", test "
            << lines.size() - static_cast<std::size_t>(a.train_size) << '\n';
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  DataArgs data;
  TrainOptions opts;
  std::string blur = "full";
  std::string site_order = "natural";
  double cov_floor = -1.0;
  std::string out;
  std::string report;
};

void run_train(TrainArgs a) {
  const Task task = parse_task(a.data.task);
  const Dataset data = read_data(a.data, task);
  a.opts.blur = parse_blur_mode(a.blur);
  a.opts.ep.site_order =
      a.site_order == "shuffled" ? SiteOrder::shuffled : SiteOrder::natural;
  a.opts.ep.shuffle_seed = a.opts.seed;
  if (a.cov_floor >= 0.0) {
    a.opts.cov_floor = a.cov_floor;
  }
  if (a.opts.num_basis > data.size()) {
    throw UsageError("--num-basis (" + std::to_string(a.opts.num_basis) +
                     ") exceeds the number of training points (" +
                     std::to_string(data.size()) + ")");
  }
  const auto res = train_model(data, a.opts);
  save_model(a.out, res.model);
  const json report = fit_report_json(res.report, false);
  std::cout << json{{"model", a.out},
                    {"num_basis", a.opts.num_basis},
                    {"blur", a.blur},
                    {"fit", report}}
                   .dump(2)
            << '\n';
  if (!a.report.empty()) {
    write_json(a.report, fit_report_json(res.report, true));
  }
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  std::vector<std::string> models;
  DataArgs data;
  std::string reference_train;
  std::string reference_model;
  double reference_tol = 1e-4;
  int reference_max_sweeps = 50;
  std::string out;
};

struct Reference {
  std::optional<FullGpModel> full;
  std::optional<ModelFile> model;
  std::optional<Standardizer> transform;

  Predictive operator()(const Vector &x) const {
    if (model) {
      return predictive(*model, x);
    }
    return predictive(*full, transform ? transform->apply(x) : x);
  }
};

/// Adapts a callable to the PredictiveModel interface.
struct ReferenceView {
  const Reference *ref;
};
Predictive predictive(const ReferenceView &v, const Vector &x) {
  return (*v.ref)(x);
}

void run_eval(const EvalArgs &a) {
  std::vector<ModelFile> models;
  for (const auto &p : a.models) {
    models.push_back(load_model(p));
  }
  const Task task = models.front().task;
  for (std::size_t k = 1; k < models.size(); ++k) {
    if (models[k].task != task) {
      throw DataError("models disagree on task");
    }
  }
  if (!a.data.task.empty() && parse_task(a.data.task) != task) {
    throw DataError("task mismatch: model is " + to_string(task) +
                    " but --task is " + a.data.task);
  }
  const Dataset test = read_data(a.data, task);
  const ModelFile &lead = models.front();
  if (test.dim() != lead.posterior.basis->dim()) {
    throw DataError("test data dimension does not match the model");
  }

  std::optional<Reference> ref;
  if (!a.reference_model.empty()) {
    ref = Reference{};
    ref->model = load_model(a.reference_model);
    if (ref->model->task != task) {
      throw DataError("task mismatch between reference and candidate models");
    }
  } else if (!a.reference_train.empty()) {
    DataArgs rd = a.data;
    rd.path = a.reference_train;
    Dataset train = read_data(rd, task);
    ref = Reference{};
    ref->transform = lead.input_transform;
    if (ref->transform) {
      train.inputs = ref->transform->apply(train.inputs);
    }
    if (const auto *c = std::get_if<ClassificationLik>(&lead.likelihood)) {
      EpConfig cfg;
      cfg.convergence_tol = a.reference_tol;
      cfg.max_sweeps = a.reference_max_sweeps;
      ref->full = full_gp_classification_ep(train, lead.kernel(), c->epsilon(), cfg);
    } else {
      ref->full = exact_gp_regression(
          train, lead.kernel(), std::get<RegressionLik>(lead.likelihood).noise_var());
    }
  }

  json rows = json::array();
  std::cout << std::left << std::setw(32) << "model" << std::setw(10) << "blur"
            << std::setw(16) << (task == Task::classification ? "error_rate" : "rmse");
  if (ref) {
    std::cout << std::setw(16) << "kl_to_reference";
  }
  std::cout << '\n';
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto &m = models[k];
    json row = {{"model", a.models[k]},
                {"blur", to_string(m.blur_mode)},
                {"num_basis", m.posterior.size()},
                {"n_test", test.size()}};
    double metric = 0.0;
    if (const auto *c = std::get_if<ClassificationLik>(&m.likelihood)) {
      metric = error_rate(m, test, *c);
      row["error_rate"] = metric;
    } else {
      metric = rmse(m, test);
      row["rmse"] = metric;
    }
    std::cout << std::setw(32) << a.models[k] << std::setw(10)
              << to_string(m.blur_mode) << std::setw(16) << metric;
    if (ref) {
      const double kl =
          kl_predictive(ReferenceView{&*ref}, m, test.inputs, m.likelihood);
      row["kl_to_reference"] = kl;
      std::cout << std::setw(16) << kl;
    }
    std::cout << '\n';
    rows.push_back(row);
  }
  if (!a.out.empty()) {
    write_json(a.out, {{"format", "saspa-metrics"},
                       {"schema_version", 1},
                       {"task", to_string(task)},
                       {"test_data", a.data.path},
                       {"results", rows}});
  }
}

// ----------------------------------------------------------------- heatmap

struct HeatmapArgs {
  std::string model;
  GridSpec grid;
  std::string out;
  std::string basis_out;
};

void run_heatmap(const HeatmapArgs &a) {
  const ModelFile m = load_model(a.model);
  const Matrix grid = heatmap_grid(m, a.grid);
  std::ofstream out(a.out);
  if (!out) {
    throw DataError("cannot write '" + a.out + "'");
  }
  out << std::setprecision(17) << "x1,x2,value\n";
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    out << grid(r, 0) << ',' << grid(r, 1) << ',' << grid(r, 2) << '\n';
  }
  if (a.basis_out.empty()) {
    return;
  }
  std::ofstream side(a.basis_out);
  if (!side) {
    throw DataError("cannot write '" + a.basis_out + "'");
  }
  side << std::setprecision(17)
       << "index,center_x1,center_x2,eig1,eig2,v1_x1,v1_x2,v2_x1,v2_x2\n";
  const auto ellipses = basis_ellipses(m);
  for (std::size_t k = 0; k < ellipses.size(); ++k) {
    const auto &e = ellipses[k];
    side << k << ',' << e.center(0) << ',' << e.center(1) << ','
         << e.eigenvalues(0) << ',' << e.eigenvalues(1) << ','
         << e.eigenvectors(0, 0) << ',' << e.eigenvectors(1, 0) << ','
         << e.eigenvectors(0, 1) << ',' << e.eigenvectors(1, 1) << '\n';
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Sparse blurred-basis Gaussian process inference by EP"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto *gcmd = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  gcmd->add_option("--kind", gen.kind, "circle | gaussian-classes")
      ->required()
      ->check(CLI::IsMember({"circle", "gaussian-classes"}));
  gcmd->add_option("--n", gen.n, "Points (training points for gaussian-classes)");
  gcmd->add_option("--n-test", gen.n_test, "Test points (gaussian-classes)");
  gcmd->add_option("--seed", gen.seed, "Random seed");
  gcmd->add_option("--radius-noise", gen.radius_noise, "Circle radial noise sd");
  gcmd->add_option("--output-noise", gen.output_noise, "Circle output noise sd");
  gcmd->add_option("--out", gen.out, "Output CSV")->required();
  gcmd->add_option("--out-test", gen.out_test, "Test-set CSV (gaussian-classes)");

  SplitArgs split;
  auto *scmd = app.add_subcommand("split", "Seeded train/test split of a data file");
  scmd->add_option("--data", split.path, "Input file")->required();
  scmd->add_option("--train-size", split.train_size, "Rows in the training split")
      ->required();
  scmd->add_option("--seed", split.seed, "Shuffle seed");
  scmd->add_flag("--header", split.has_header, "First line is a header");
  scmd->add_option("--out-train", split.out_train, "Training output")->required();
  scmd->add_option("--out-test", split.out_test, "Test output")->required();

  TrainArgs tr;
  auto *tcmd = app.add_subcommand("train", "K-means basis + EP fit; writes a model file");
  add_data_args(tcmd, tr.data, true);
  tcmd->add_flag("--standardize", tr.opts.standardize,
                 "Standardize features with training statistics");
  tcmd->add_option("--num-basis", tr.opts.num_basis, "Number of basis points M");
  tcmd->add_option("--blur", tr.blur, "delta | sphere | full")
      ->check(CLI::IsMember({"delta", "sphere", "full"}));
  tcmd->add_option("--eta", tr.opts.eta, "Kernel length scale");
  tcmd->add_option("--noise", tr.opts.noise_var, "Regression noise variance v_y");
  tcmd->add_option("--eps", tr.opts.epsilon, "Classification labeling error");
  tcmd->add_option("--tol", tr.opts.ep.convergence_tol, "EP convergence threshold");
  tcmd->add_option("--max-sweeps", tr.opts.ep.max_sweeps, "EP sweep cap");
  tcmd->add_option("--damping", tr.opts.ep.damping, "Message damping in (0, 1]");
  tcmd->add_option("--jitter", tr.opts.ep.jitter, "Relative Gram jitter start");
  tcmd->add_option("--site-order", tr.site_order, "natural | shuffled")
      ->check(CLI::IsMember({"natural", "shuffled"}));
  tcmd->add_option("--cov-floor", tr.cov_floor, "Full-blur covariance floor");
  tcmd->add_option("--seed", tr.opts.seed, "K-means / shuffle seed");
  tcmd->add_option("--out", tr.out, "Model file")->required();
  tcmd->add_option("--report", tr.report, "Write the full fit report (JSON)");

  EvalArgs ev;
  auto *ecmd = app.add_subcommand("eval", "Evaluate model files on test data");
  ecmd->add_option("--model", ev.models, "Model file (repeatable)")->required();
  add_data_args(ecmd, ev.data, false);
  auto *rt = ecmd->add_option("--reference-train", ev.reference_train,
                              "Fit a full GP on this training file as reference");
  auto *rm = ecmd->add_option("--reference-model", ev.reference_model,
                              "Use this model file as the KL reference");
  rt->excludes(rm);
  ecmd->add_option("--reference-tol", ev.reference_tol, "Full-GP EP tolerance");
  ecmd->add_option("--reference-max-sweeps", ev.reference_max_sweeps,
                   "Full-GP EP sweep cap");
  ecmd->add_option("--out", ev.out, "Metrics file (JSON)");

  HeatmapArgs hm;
  auto *hcmd = app.add_subcommand("heatmap", "Predictive grid over a 2-D rectangle");
  hcmd->add_option("--model", hm.model, "Model file")->required();
  hcmd->add_option("--xmin", hm.grid.xmin);
  hcmd->add_option("--xmax", hm.grid.xmax);
  hcmd->add_option("--ymin", hm.grid.ymin);
  hcmd->add_option("--ymax", hm.grid.ymax);
  hcmd->add_option("--resolution", hm.grid.resolution, "Grid points per axis");
  hcmd->add_option("--out", hm.out, "Grid CSV")->required();
  hcmd->add_option("--basis-out", hm.basis_out, "Basis sidecar CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gcmd) {
      run_generate(gen);
    } else if (*scmd) {
      run_split(split);
    } else if (*tcmd) {
      run_train(tr);
    } else if (*ecmd) {
      run_eval(ev);
    } else if (*hcmd) {
      run_heatmap(hm);
    }
  } catch (const UsageError &e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError &e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
