#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace saspa;
using saspa::testing::random_vector;

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
  const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "saspa_tests" / info->name();
  fs::create_directories(dir);
  return dir / name;
}

fs::path write_text(const std::string &name, const std::string &text) {
  const auto path = scratch(name);
  std::ofstream(path) << text;
  return path;
}

std::string read_text(const fs::path &path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_message(const std::function<void()> &f) {
  try {
    f();
  } catch (const std::exception &e) {
    return e.what();
  }
  return {};
}

double density2(const Eigen::Vector2d &x, const Eigen::Vector2d &m, const Eigen::Matrix2d &c) {
  const Eigen::Vector2d r = x - m;
  return std::exp(-0.5 * r.dot(c.inverse() * r)) / (2.0 * M_PI * std::sqrt(c.determinant()));
}

TrainResult circle_model(std::uint64_t seed, BlurMode blur = BlurMode::full) {
  TrainOptions opts;
  opts.num_basis = 4;
  opts.blur = blur;
  opts.eta = 0.5;
  opts.noise_var = 0.3;
  opts.seed = seed;
  return train_model(gen_circle_regression(100, seed), opts);
}

} // namespace

TEST(LoadCsv, SmallClassificationFile) {
  const auto path = write_text("d.csv", "0.5,1.0,1\n-0.2,3.5,-1\n1e-3,-2,1\n");
  CsvOptions opts;
  opts.task = Task::classification;
  const auto d = load_csv(path, opts);
  EXPECT_EQ(d.size(), 3);
  EXPECT_EQ(d.dim(), 2);
  EXPECT_TRUE(d.outputs == (Vector{{1.0, -1.0, 1.0}}));
  EXPECT_EQ(d.inputs(2, 0), 1e-3);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"x1", "x2"}));
}

TEST(LoadCsv, HeaderDelimiterAndLabelColumn) {
  const auto path = write_text("d.tsv", "label\ta\tb\n2.5\t1\t2\n\n-1\t3\t4\n");
  CsvOptions opts;
  opts.delimiter = '\t';
  opts.label_column = 0;
  const auto d = load_csv(path, opts);
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_TRUE(d.outputs == (Vector{{2.5, -1.0}}));
  EXPECT_TRUE(d.inputs == (Matrix{{1.0, 2.0}, {3.0, 4.0}}));
}

TEST(LoadCsv, SymbolicLabels) {
  const auto path = write_text("d.csv", "1,2,spam\n3,4,ham\n5,6,spam\n");
  CsvOptions opts;
  opts.task = Task::classification;
  opts.positive_label = "spam";
  EXPECT_TRUE(load_csv(path, opts).outputs == (Vector{{1.0, -1.0, 1.0}}));
  // Numeric spellings of the same value are one label.
  const auto p2 = write_text("e.csv", "1,2,1\n3,4,0\n5,6,0.0\n");
  opts.positive_label = "1.0";
  EXPECT_TRUE(load_csv(p2, opts).outputs == (Vector{{1.0, -1.0, -1.0}}));
}

TEST(LoadCsv, ErrorsNameLineAndColumn) {
  const auto path = write_text("d.csv", "1,2,3\n4,oops,6\n");
  const auto msg = error_message([&] { load_csv(path); });
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column 2"), std::string::npos) << msg;
  EXPECT_THROW(load_csv(path), DataError);

  const auto ragged = write_text("r.csv", "1,2,3\n4,5\n");
  EXPECT_NE(error_message([&] { load_csv(ragged); }).find("line 2"), std::string::npos);
  EXPECT_THROW(load_csv(ragged), DataError);

  CsvOptions cls;
  cls.task = Task::classification;
  const auto three = write_text("t.csv", "1,2,1\n3,4,0\n5,6,2\n");
  EXPECT_THROW(load_csv(three, cls), DataError);
  EXPECT_THROW(load_csv(scratch("missing.csv").string()), DataError);
  EXPECT_THROW(load_csv(write_text("empty.csv", "\n\n")), DataError);
  EXPECT_THROW(load_csv(write_text("nan.csv", "1,nan\n")), DataError);
  CsvOptions far;
  far.label_column = 7;
  EXPECT_THROW(load_csv(write_text("f.csv", "1,2\n"), far), UsageError);
}

TEST(WriteCsv, RoundTripsExactly) {
  std::mt19937_64 rng(401);
  Dataset d = saspa::testing::random_regression(rng, 25, 3);
  d.feature_names = {"a", "b", "c"};
  const auto path = scratch("out.csv");
  write_csv(path, d);
  const auto back = load_csv(path);
  EXPECT_TRUE(back.inputs == d.inputs);
  EXPECT_TRUE(back.outputs == d.outputs);
  EXPECT_EQ(back.feature_names, d.feature_names);
}

TEST(Standardizer, ZeroMeanUnitVarianceAndRoundTrip) {
  std::mt19937_64 rng(403);
  Matrix x(40, 3);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = 100.0 + 5.0 * detail::standard_normal(rng);
    x(i, 1) = -3.0 + 0.01 * detail::standard_normal(rng);
    x(i, 2) = 7.0;
  }
  const auto s = Standardizer::fit(x);
  const Matrix z = s.apply(x);
  for (Eigen::Index c = 0; c < 2; ++c) {
    EXPECT_NEAR(z.col(c).mean(), 0.0, 1e-12);
    EXPECT_NEAR((z.col(c).array() - z.col(c).mean()).square().sum() / 39.0, 1.0, 1e-12);
  }
  EXPECT_EQ(s.scale(2), 1.0);
  EXPECT_LE((s.invert(z) - x).cwiseAbs().maxCoeff(), 1e-12 * x.cwiseAbs().maxCoeff());
  const Vector row = x.row(5).transpose();
  EXPECT_TRUE(s.apply(row).isApprox(z.row(5).transpose(), 1e-15));
}

TEST(TrainTestSplit, PartitionsDeterministically) {
  std::mt19937_64 rng(405);
  Dataset d = saspa::testing::random_regression(rng, 30, 1);
  d.inputs.col(0) = Vector::LinSpaced(30, 0.0, 29.0);
  const auto [tr, te] = train_test_split(d, 20, 7);
  EXPECT_EQ(tr.size(), 20);
  EXPECT_EQ(te.size(), 10);
  std::set<double> seen;
  for (Eigen::Index i = 0; i < 20; ++i) {
    seen.insert(tr.inputs(i, 0));
  }
  for (Eigen::Index i = 0; i < 10; ++i) {
    seen.insert(te.inputs(i, 0));
  }
  EXPECT_EQ(seen.size(), 30u);
  const auto again = train_test_split(d, 20, 7);
  EXPECT_TRUE(again.first.inputs == tr.inputs);
  EXPECT_FALSE(train_test_split(d, 20, 8).first.inputs == tr.inputs);
  EXPECT_THROW(train_test_split(d, 0, 0), UsageError);
  EXPECT_THROW(train_test_split(d, 30, 0), UsageError);
}

TEST(CircleGenerator, RadiiAndLevels) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto d = gen_circle_regression(100, seed);
    ASSERT_EQ(d.size(), 100);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      const double r = d.inputs.row(i).norm();
      ASSERT_GE(r, 0.5);
      ASSERT_LE(r, 1.5);
    }
  }
  CircleOptions clean;
  clean.output_noise = 0.0;
  const auto d = gen_circle_regression(200, 3, clean);
  std::set<double> levels(d.outputs.data(), d.outputs.data() + d.size());
  EXPECT_EQ(levels, (std::set<double>{-3.0, -1.0, 1.0, 3.0}));
}

TEST(CircleGenerator, DeterministicPerSeed) {
  const auto a = gen_circle_regression(50, 11);
  EXPECT_TRUE(a.inputs == gen_circle_regression(50, 11).inputs);
  EXPECT_FALSE(a.inputs == gen_circle_regression(50, 12).inputs);
  EXPECT_THROW(gen_circle_regression(3, 0), UsageError);
}

TEST(GaussianClasses, SizesBalanceAndDisjointSamples) {
  const auto [train, test] = gen_gaussian_classes(200, 2000, 0);
  EXPECT_EQ(train.size(), 200);
  EXPECT_EQ(test.size(), 2000);
  EXPECT_NEAR(train.outputs.sum(), 0.0, 1.0);
  EXPECT_NEAR(test.outputs.sum(), 0.0, 1.0);
  EXPECT_FALSE(train.inputs.topRows(10) == test.inputs.topRows(10));
  EXPECT_THROW(gen_gaussian_classes(1, 5, 0), UsageError);
}

TEST(GaussianClasses, BayesErrorMonteCarloMatchesQuadrature) {
  const GaussianClassSpec spec;
  // Bayes error 0.5 * int min(p_-, p_+) by a midpoint grid on [-10, 10]^2.
  const int n = 800;
  const double h = 20.0 / n;
  double quad = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d x{-10.0 + (i + 0.5) * h, -10.0 + (j + 0.5) * h};
      quad += std::min(density2(x, spec.mean_neg, spec.cov_neg),
                       density2(x, spec.mean_pos, spec.cov_pos));
    }
  }
  quad *= 0.5 * h * h;
  // Monte Carlo over 10^6 generator draws, classified by the true densities.
  const auto samples = gen_gaussian_classes(1000000, 2, 12345).first;
  long wrong = 0;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const Eigen::Vector2d x = samples.inputs.row(i).transpose();
    const bool say_pos =
        density2(x, spec.mean_pos, spec.cov_pos) > density2(x, spec.mean_neg, spec.cov_neg);
    wrong += (say_pos != (samples.outputs(i) > 0)) ? 1 : 0;
  }
  const double mc = static_cast<double>(wrong) / 1e6;
  const double se = std::sqrt(quad * (1.0 - quad) / 1e6);
  EXPECT_NEAR(mc, quad, 4.0 * se);
  EXPECT_NEAR(quad, 0.1433, 5e-4);
}

TEST(ModelFile, RoundTripReproducesPredictions) {
  const auto res = circle_model(5);
  const auto path = scratch("m.json");
  save_model(path, res.model);
  const auto back = load_model(path);
  std::mt19937_64 rng(407);
  for (int t = 0; t < 100; ++t) {
    const Vector x = random_vector(rng, 2, -1.5, 1.5);
    const auto a = predictive(res.model, x);
    const auto b = predictive(back, x);
    EXPECT_NEAR(a.mean, b.mean, 1e-12);
    EXPECT_NEAR(a.var, b.var, 1e-12);
  }
  const auto path2 = scratch("m2.json");
  save_model(path2, back);
  EXPECT_EQ(read_text(path), read_text(path2));
  EXPECT_TRUE(back.posterior.beta == res.model.posterior.beta);
  EXPECT_TRUE(back.posterior.alpha == res.model.posterior.alpha);
}

TEST(ModelFile, RoundTripWithInputTransform) {
  auto [train, test] = gen_gaussian_classes(80, 50, 9);
  train.inputs.col(0) = 1000.0 * train.inputs.col(0).array() + 5.0;
  TrainOptions opts;
  opts.num_basis = 6;
  opts.standardize = true;
  const auto res = train_model(train, opts);
  ASSERT_TRUE(res.model.input_transform.has_value());
  const auto back = model_from_json(nlohmann::json::parse(model_to_json(res.model).dump()));
  ASSERT_TRUE(back.input_transform.has_value());
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    const Vector x = train.inputs.row(i).transpose();
    EXPECT_NEAR(predictive(res.model, x).mean, predictive(back, x).mean, 1e-12);
  }
  EXPECT_EQ(std::get<ClassificationLik>(back.likelihood).epsilon(), 0.01);
}

TEST(ModelFile, TrainingIsDeterministic) {
  const auto a = model_to_json(circle_model(3).model).dump(2);
  const auto b = model_to_json(circle_model(3).model).dump(2);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, model_to_json(circle_model(4).model).dump(2));
}

TEST(ModelFile, RejectsMalformedFiles) {
  auto j = model_to_json(circle_model(1).model);
  auto bad_format = j;
  bad_format["format"] = "other";
  EXPECT_THROW(model_from_json(bad_format), DataError);
  auto bad_version = j;
  bad_version["schema_version"] = 99;
  EXPECT_THROW(model_from_json(bad_version), DataError);
  auto missing = j;
  missing.erase("alpha");
  EXPECT_THROW(model_from_json(missing), DataError);
  auto short_alpha = j;
  short_alpha["alpha"] = {1.0};
  EXPECT_THROW(model_from_json(short_alpha), DataError);
  auto bad_eta = j;
  bad_eta["kernel"]["eta"] = -1.0;
  EXPECT_THROW(model_from_json(bad_eta), DataError);
  EXPECT_THROW(load_model(write_text("junk.json", "{not json")), DataError);
  EXPECT_THROW(load_model(scratch("nope.json").string()), DataError);
}

TEST(Train, RejectsMoreBasisPointsThanData) {
  TrainOptions opts;
  opts.num_basis = 11;
  EXPECT_THROW(train_model(gen_circle_regression(10, 0), opts), UsageError);
}

TEST(Heatmap, GridShapeAndOrdering) {
  const auto res = circle_model(2);
  const Matrix g = heatmap_grid(res.model, GridSpec{});
  ASSERT_EQ(g.rows(), 2500);
  ASSERT_EQ(g.cols(), 3);
  EXPECT_EQ(g(0, 0), -1.5);
  EXPECT_EQ(g(0, 1), -1.5);
  EXPECT_EQ(g(1, 0), -1.5);
  EXPECT_EQ(g(49, 1), 1.5);
  EXPECT_EQ(g(50, 0), g(0, 0) + 3.0 / 49.0);
  EXPECT_EQ(g(2499, 0), 1.5);
  const Vector x{{g(1234, 0), g(1234, 1)}};
  EXPECT_EQ(g(1234, 2), predictive(res.model, x).mean);
}

TEST(Heatmap, PriorModelIsConstant) {
  const auto b = BlurredBasisPoint::sphere(Vector{{0.0, 0.0}}, 0.2);
  ModelFile reg;
  reg.posterior = make_prior(Basis({b}, KernelParams(1.0)));
  const Matrix g = heatmap_grid(reg, GridSpec{-3, 3, -2, 2, 20});
  EXPECT_TRUE((g.col(2).array() == 0.0).all());
  ModelFile cls = reg;
  cls.task = Task::classification;
  cls.likelihood = ClassificationLik(0.05);
  const Matrix gc = heatmap_grid(cls, GridSpec{-3, 3, -2, 2, 20});
  EXPECT_TRUE((gc.col(2).array() == 0.5).all());
}

TEST(Heatmap, RejectsBadGrids) {
  const auto res = circle_model(2);
  EXPECT_THROW(heatmap_grid(res.model, GridSpec{1, 1, -1, 1, 10}), UsageError);
  EXPECT_THROW(heatmap_grid(res.model, GridSpec{-1, 1, 2, 1, 10}), UsageError);
  EXPECT_THROW(heatmap_grid(res.model, GridSpec{-1, 1, -1, 1, 1}), UsageError);
  ModelFile one_d;
  one_d.posterior = make_prior(Basis({BlurredBasisPoint::delta(Vector{{0.0}})}, KernelParams(1.0)));
  EXPECT_THROW(heatmap_grid(one_d, GridSpec{}), UsageError);
}

TEST(Heatmap, ThreeBasisDecisionBoundaryIsClosed) {
  // A compact positive class inside a broad negative one, with one blurred
  // basis point per positive class and per half of the negatives. The 0.5
  // level set must enclose a bounded region: no sign changes of p - 0.5
  // around the grid border, both signs inside.
  GaussianClassSpec spec;
  spec.mean_neg = {0.0, 0.0};
  spec.cov_neg = Eigen::Matrix2d{{4.0, 0.0}, {0.0, 4.0}};
  spec.mean_pos = {0.0, 0.0};
  spec.cov_pos = Eigen::Matrix2d{{0.3, 0.1}, {0.1, 0.2}};
  const auto train = gen_gaussian_classes(200, 2, 0, spec).first;
  std::vector<std::vector<Eigen::Index>> groups(3);
  for (Eigen::Index i = 0; i < train.size(); ++i) {
    groups[train.outputs(i) > 0 ? 0 : (train.inputs(i, 0) < 0 ? 1 : 2)].push_back(i);
  }
  std::vector<ClusterSummary> clusters;
  for (const auto &rows : groups) {
    const Matrix x = train.subset(rows).inputs;
    const Vector mean = x.colwise().mean().transpose();
    const Matrix z = x.rowwise() - mean.transpose();
    clusters.push_back({mean, z.transpose() * z / static_cast<double>(x.rows() - 1),
                        x.rows()});
  }
  TrainOptions opts;
  opts.eta = 0.5;
  const auto res = fit_on_clusters(train, clusters, opts);
  const int r = 50;
  const Matrix g = heatmap_grid(res.model, GridSpec{-3, 3, -3, 3, r});
  auto sign = [&](int i, int j) { return g(static_cast<Eigen::Index>(i) * r + j, 2) > 0.5; };
  std::vector<bool> ring;
  for (int j = 0; j < r; ++j) ring.push_back(sign(0, j));
  for (int i = 1; i < r; ++i) ring.push_back(sign(i, r - 1));
  for (int j = r - 2; j >= 0; --j) ring.push_back(sign(r - 1, j));
  for (int i = r - 2; i > 0; --i) ring.push_back(sign(i, 0));
  int changes = 0;
  for (std::size_t k = 0; k < ring.size(); ++k) {
    changes += ring[k] != ring[(k + 1) % ring.size()] ? 1 : 0;
  }
  EXPECT_EQ(changes, 0);
  EXPECT_FALSE(ring.front());
  int above = 0;
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    above += g(k, 2) > 0.5 ? 1 : 0;
  }
  EXPECT_GT(above, 0);
  EXPECT_LT(above, g.rows() / 4);
  EXPECT_GT(g((r / 2) * r + r / 2, 2), 0.5);
}

TEST(BasisEllipses, RawCoordinatesUnderStandardization) {
  const auto b = BlurredBasisPoint{Vector{{1.0, -1.0}}, Matrix{{0.5, 0.0}, {0.0, 0.125}}};
  ModelFile m;
  m.posterior = make_prior(Basis({b}, KernelParams(1.0)));
  m.input_transform = Standardizer{Vector{{10.0, 20.0}}, Vector{{2.0, 4.0}}};
  const auto e = basis_ellipses(m);
  ASSERT_EQ(e.size(), 1u);
  EXPECT_TRUE(e[0].center.isApprox(Vector{{12.0, 16.0}}));
  EXPECT_NEAR(e[0].eigenvalues(0), 2.0, 1e-14);
  EXPECT_NEAR(e[0].eigenvalues(1), 2.0, 1e-14);
  const auto plain = basis_ellipses(ModelFile{.posterior = m.posterior});
  EXPECT_NEAR(plain[0].eigenvalues(0), 0.125, 1e-15);
  EXPECT_NEAR(std::abs(plain[0].eigenvectors(1, 0)), 1.0, 1e-15);
}
