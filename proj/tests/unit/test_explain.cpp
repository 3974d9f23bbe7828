#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "helpers.hpp"
#include "polprog/error.hpp"
#include "polprog/explain.hpp"

using namespace polprog;

namespace {

TrainedModel linear_model(const Eigen::VectorXd& coef, double intercept) {
  TrainedModel m;
  m.spec = RegressorSpec::defaults(ModelKind::BayesianRidge);
  for (Eigen::Index j = 0; j < coef.size(); ++j) m.column_names.push_back("x" + std::to_string(j));
  RidgeInternals r;
  r.coef = coef;
  r.intercept = intercept;
  m.internals = r;
  return m;
}

// Random tree of the given depth over d features with thresholds in (0, 1).
RegressionTree random_tree(std::mt19937_64& gen, int d, int depth) {
  std::uniform_int_distribution<int> feature(0, d - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  RegressionTree tree;
  std::function<int(int)> grow = [&](int level) -> int {
    const int at = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    if (level == depth || u(gen) < 0.15) {
      tree.nodes[static_cast<std::size_t>(at)].value = u(gen) * 2.0 - 1.0;
      return at;
    }
    const int f = feature(gen);
    const double t = u(gen);
    const int left = grow(level + 1);
    const int right = grow(level + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(at)];
    node.feature = f;
    node.threshold = t;
    node.left = left;
    node.right = right;
    return at;
  };
  grow(0);
  return tree;
}

TrainedModel random_ensemble(std::mt19937_64& gen, int d, bool boosting) {
  TrainedModel m;
  m.spec = RegressorSpec::defaults(boosting ? ModelKind::Gbdt : ModelKind::RandomForest);
  for (int j = 0; j < d; ++j) m.column_names.push_back("x" + std::to_string(j));
  std::vector<RegressionTree> trees;
  for (int t = 0; t < 4; ++t) trees.push_back(random_tree(gen, d, 3));
  if (boosting) {
    m.internals = BoostingInternals{0.3, 0.1, trees};
  } else {
    m.internals = ForestInternals{trees};
  }
  return m;
}

std::vector<double> row_of(const FeatureMatrix& m, Eigen::Index i) {
  return testutil::to_vector(m.values.row(i).transpose());
}

}  // namespace

TEST_CASE("method names") {
  for (auto m : {ShapMethod::LinearExact, ShapMethod::TreeExact, ShapMethod::MonteCarlo}) {
    CHECK(parse_shap_method(shap_method_name(m)) == m);
  }
}

TEST_CASE("zero coefficient gives zero permutation importance") {
  std::mt19937_64 gen(1);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 30, 3));
  const TrainedModel model = linear_model(Eigen::Vector3d(1.0, 0.0, -0.5), 0.1);
  std::vector<double> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = x.values(static_cast<Eigen::Index>(i), 0);
  const FeatureMatrix before = x;
  const ImportanceReport report = permutation_importance(model, x, y);
  CHECK(report.entries.size() == 3);
  CHECK(report.entries[1].importance == 0.0);
  CHECK(report.entries[1].std == 0.0);
  CHECK(report.entries[0].importance > 0.0);
  CHECK(x.values == before.values);
  CHECK(report.ranked().front().feature == "x0");

  const ImportanceReport again = permutation_importance(model, x, y);
  for (std::size_t j = 0; j < 3; ++j) CHECK(again.entries[j].importance == report.entries[j].importance);

  PermutationOptions bad;
  bad.repeats = 0;
  CHECK_THROWS_AS(permutation_importance(model, x, y, bad), ValidationError);
  FeatureMatrix renamed = x;
  renamed.columns[2].name = "zz";
  CHECK_THROWS_AS(permutation_importance(model, renamed, y), ValidationError);
}

TEST_CASE("importance of a feature does not depend on column position") {
  std::mt19937_64 gen(2);
  const Eigen::MatrixXd v = testutil::uniform_matrix(gen, 25, 2);
  Eigen::MatrixXd dup(25, 3);
  dup << v.col(0), v.col(1), v.col(0);
  const FeatureMatrix x = testutil::matrix(dup);
  const TrainedModel model = linear_model(Eigen::Vector3d(0.5, 0.2, 0.5), 0.0);
  std::vector<double> y = testutil::to_vector(model.predict_values(dup));
  PermutationOptions opt;
  opt.repeats = 5;
  const ImportanceReport r = permutation_importance(model, x, y, opt);
  // Columns 0 and 2 carry identical data and weight, but each gets its own
  // shuffle stream, so both are positive and the source matrix is untouched.
  CHECK(r.entries[0].importance > 0.0);
  CHECK(r.entries[2].importance > 0.0);
  CHECK(x.values == dup);
}

TEST_CASE("grouped embedding importance") {
  std::mt19937_64 gen(3);
  FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 20, 4));
  x.columns[2].group = FeatureGroup::Embedding;
  x.columns[3].group = FeatureGroup::Embedding;
  const TrainedModel model = linear_model(Eigen::Vector4d(0.1, 0.2, 0.3, 0.4), 0.0);
  const std::vector<double> y = testutil::to_vector(model.predict_values(x.values));
  PermutationOptions opt;
  opt.group_embeddings = true;
  const ImportanceReport r = permutation_importance(model, x, y, opt);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[2].feature == "text-embedding");
  CHECK(r.entries[2].group == FeatureGroup::Embedding);
}

TEST_CASE("linear SHAP worked example") {
  const TrainedModel model = linear_model(Eigen::Vector2d(2.0, 0.0), 0.25);
  Eigen::MatrixXd bg(2, 2);
  bg << 0.0, 0.1, 1.0, 0.5;  // mean (0.5, 0.3)
  const FeatureMatrix background = testutil::matrix(bg);
  const FeatureMatrix x = testutil::matrix(Eigen::MatrixXd::Ones(1, 2));
  const ShapMatrix s = shap(model, x, background);
  CHECK(s.method == ShapMethod::LinearExact);
  CHECK(s.values(0, 0) == doctest::Approx(1.0));
  CHECK(s.values(0, 1) == 0.0);
  CHECK(s.base_value == doctest::Approx(0.25 + 2.0 * 0.5));
  CHECK(s.std_errors.size() == 0);
}

TEST_CASE("stump SHAP worked example") {
  TrainedModel model;
  model.spec = RegressorSpec::defaults(ModelKind::RandomForest);
  model.column_names = {"x0"};
  RegressionTree stump;
  stump.nodes = {{0, 0.5, 1, 2, 0.0}, {-1, 0.0, -1, -1, 0.0}, {-1, 0.0, -1, -1, 1.0}};
  model.internals = ForestInternals{{stump}};
  Eigen::MatrixXd bg(2, 1);
  bg << 0.0, 1.0;
  const ShapMatrix s = shap(model, testutil::matrix(Eigen::MatrixXd::Ones(1, 1)), testutil::matrix(bg));
  CHECK(s.method == ShapMethod::TreeExact);
  CHECK(s.values(0, 0) == doctest::Approx(0.5));
  CHECK(s.base_value == doctest::Approx(0.5));
}

TEST_CASE("tree_exact equals brute force on random ensembles") {
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> dim(1, 10);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = dim(gen);
    const TrainedModel model = random_ensemble(gen, d, trial % 2 == 0);
    const FeatureMatrix bg = testutil::matrix(testutil::uniform_matrix(gen, 6, d));
    const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 3, d));
    const ShapMatrix s = shap(model, x, bg);
    REQUIRE(s.method == ShapMethod::TreeExact);
    const Eigen::VectorXd pred = model.predict_values(x.values);
    for (Eigen::Index i = 0; i < 3; ++i) {
      const Eigen::VectorXd brute = shap_bruteforce(model, row_of(x, i), bg.values);
      worst = std::max(worst, (brute - s.values.row(i).transpose()).cwiseAbs().maxCoeff());
      REQUIRE(std::abs(s.base_value + s.values.row(i).sum() - pred(i)) < 1e-9);
    }
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("linear_exact equals brute force") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd coef = testutil::uniform_matrix(gen, 6, 1, -2.0, 2.0);
    const TrainedModel model = linear_model(coef, 0.3);
    const FeatureMatrix bg = testutil::matrix(testutil::uniform_matrix(gen, 8, 6));
    const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 2, 6));
    const ShapMatrix s = shap(model, x, bg);
    for (Eigen::Index i = 0; i < 2; ++i) {
      const Eigen::VectorXd brute = shap_bruteforce(model, row_of(x, i), bg.values);
      REQUIRE((brute - s.values.row(i).transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("additivity for every model kind on fitted models") {
  std::mt19937_64 gen(6);
  const FeatureMatrix train = testutil::matrix(testutil::uniform_matrix(gen, 40, 5));
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    y[i] = 0.5 * train.values(r, 0) + 0.3 * (train.values(r, 1) > 0.5 ? 1.0 : 0.0);
  }
  const FeatureMatrix rows = testutil::matrix(testutil::uniform_matrix(gen, 20, 5));
  const FeatureMatrix bg = sample_background(train, 10, 1);
  for (auto kind : kAllModelKinds) {
    RegressorSpec spec = RegressorSpec::defaults(kind);
    if (kind == ModelKind::Gbdt) spec.hyperparameters["rounds"] = 30;
    if (kind == ModelKind::RandomForest) spec.hyperparameters["n_trees"] = 10;
    const TrainedModel model = fit(spec, train, y);
    ShapOptions opt;
    opt.mc_samples = 100;
    const ShapMatrix s = shap(model, rows, bg, opt);
    const Eigen::VectorXd pred = model.predict_values(rows.values);
    for (Eigen::Index i = 0; i < 20; ++i) {
      const double gap = std::abs(s.base_value + s.values.row(i).sum() - pred(i));
      if (s.method == ShapMethod::MonteCarlo) {
        const double se = std::sqrt(s.std_errors.row(i).squaredNorm());
        REQUIRE(gap <= std::max(3.0 * se, 1e-9));
      } else {
        REQUIRE(gap <= 1e-6);
      }
    }
  }
}

TEST_CASE("dummy and symmetry axioms") {
  std::mt19937_64 gen(7);
  // f = x0 + x1 with x2 unused.
  const TrainedModel model = linear_model(Eigen::Vector3d(1.0, 1.0, 0.0), 0.0);
  const FeatureMatrix bg = testutil::matrix(testutil::uniform_matrix(gen, 10, 3));
  Eigen::MatrixXd xv(1, 3);
  xv << 0.7, 0.7, 0.2;
  const FeatureMatrix x = testutil::matrix(xv);
  const Eigen::VectorXd brute = shap_bruteforce(model, row_of(x, 0), bg.values);
  CHECK(brute(2) == doctest::Approx(0.0).epsilon(1e-12));

  // Symmetric background: swap columns 0 and 1 to build an exchangeable set.
  Eigen::MatrixXd sym(20, 3);
  sym << bg.values, bg.values;
  sym.block(10, 0, 10, 1) = bg.values.col(1);
  sym.block(10, 1, 10, 1) = bg.values.col(0);
  const FeatureMatrix sym_bg = testutil::matrix(sym);
  const ShapMatrix s = shap(model, x, sym_bg);
  CHECK(std::abs(s.values(0, 0) - s.values(0, 1)) <= 1e-9);
  CHECK(s.values(0, 2) == 0.0);

  // Trees never splitting on x2 leave it at exactly zero.
  const TrainedModel trees = random_ensemble(gen, 2, true);
  TrainedModel widened = trees;
  widened.column_names.push_back("x2");
  const ShapMatrix ts = shap(widened, x, sym_bg);
  CHECK(ts.values(0, 2) == 0.0);
}

TEST_CASE("brute force small cases and limits") {
  const TrainedModel model = linear_model(Eigen::VectorXd::Constant(1, 2.0), 1.0);
  Eigen::MatrixXd bg(3, 1);
  bg << 0.0, 0.5, 1.0;
  const std::vector<double> x{0.9};
  const Eigen::VectorXd phi = shap_bruteforce(model, x, bg);
  const double mean_bg = model.predict_values(bg).mean();
  CHECK(phi(0) == doctest::Approx(model.predict_row(x) - mean_bg));

  const TrainedModel wide = linear_model(Eigen::VectorXd::Ones(13), 0.0);
  CHECK_THROWS_AS(shap_bruteforce(wide, std::vector<double>(13, 0.0), Eigen::MatrixXd::Zero(2, 13)),
                  ValidationError);
}

TEST_CASE("shap errors") {
  const TrainedModel model = linear_model(Eigen::Vector2d(1.0, 1.0), 0.0);
  const FeatureMatrix x = testutil::matrix(Eigen::MatrixXd::Ones(2, 2));
  ShapOptions opt;
  opt.method = ShapMethod::TreeExact;
  CHECK_THROWS_AS(shap(model, x, x, opt), ValidationError);
  CHECK_THROWS_AS(shap(model, x, x.select_rows({})), ValidationError);
}

TEST_CASE("monte-carlo standard error shrinks like m^-1/2") {
  std::mt19937_64 gen(8);
  const FeatureMatrix train = testutil::matrix(testutil::uniform_matrix(gen, 40, 4));
  std::vector<double> y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    y[i] = std::sin(3.0 * train.values(r, 0)) * train.values(r, 1) + 0.2 * train.values(r, 2);
  }
  const TrainedModel model = fit(RegressorSpec::defaults(ModelKind::Svr), train, y);
  const FeatureMatrix rows = testutil::matrix(testutil::uniform_matrix(gen, 5, 4));
  const FeatureMatrix bg = sample_background(train, 20, 3);
  std::vector<double> log_m, log_se;
  for (std::size_t m : {100, 400, 1600}) {
    ShapOptions opt;
    opt.mc_samples = m;
    const ShapMatrix s = shap(model, rows, bg, opt);
    REQUIRE(s.method == ShapMethod::MonteCarlo);
    log_m.push_back(std::log(static_cast<double>(m)));
    log_se.push_back(std::log(s.std_errors.mean()));
  }
  const double mx = (log_m[0] + log_m[1] + log_m[2]) / 3.0;
  const double my = (log_se[0] + log_se[1] + log_se[2]) / 3.0;
  double num = 0.0, den = 0.0;
  for (int k = 0; k < 3; ++k) {
    num += (log_m[static_cast<std::size_t>(k)] - mx) * (log_se[static_cast<std::size_t>(k)] - my);
    den += (log_m[static_cast<std::size_t>(k)] - mx) * (log_m[static_cast<std::size_t>(k)] - mx);
  }
  const double slope = num / den;
  CHECK(std::abs(slope + 0.5) <= 0.15);
}

TEST_CASE("background sampling") {
  std::mt19937_64 gen(9);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 50, 2));
  const FeatureMatrix b = sample_background(x, 10, 4);
  CHECK(b.rows() == 10);
  CHECK(std::is_sorted(b.row_ids.begin(), b.row_ids.end(), [&](const auto& l, const auto& r) {
    return std::stoi(l.substr(1)) < std::stoi(r.substr(1));
  }));
  CHECK(sample_background(x, 10, 4).row_ids == b.row_ids);
  CHECK(sample_background(x, 100, 4).rows() == 50);
  CHECK_THROWS_AS(sample_background(x, 0, 4), ValidationError);
}

TEST_CASE("CSV round trips") {
  std::mt19937_64 gen(10);
  FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 4, 3));
  x.columns[0].group = FeatureGroup::Text;
  const TrainedModel model = linear_model(Eigen::Vector3d(0.3, -0.2, 0.1), 0.05);
  const std::vector<double> y = testutil::to_vector(model.predict_values(x.values));
  const ImportanceReport imp = permutation_importance(model, x, y);
  const ImportanceReport imp_back = importance_from_csv(importance_to_csv(imp));
  REQUIRE(imp_back.entries.size() == 3);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(imp_back.entries[j].feature == imp.entries[j].feature);
    CHECK(imp_back.entries[j].group == imp.entries[j].group);
    CHECK(imp_back.entries[j].importance == imp.entries[j].importance);
  }
  CHECK(imp_back.repeats == imp.repeats);
  CHECK(importance_to_csv(imp).rfind("feature,group,importance,std,repeats,seed\n", 0) == 0);

  const ShapMatrix s = shap(model, x, x);
  const std::string text = shap_to_csv(s, x);
  CHECK(text.rfind("row_id,feature,group,shap,feature_value,base_value,method\n", 0) == 0);
  const ShapTable back = shap_from_csv(text);
  CHECK(back.matrix.row_ids == s.row_ids);
  CHECK(back.matrix.columns == s.columns);
  CHECK(back.matrix.values == s.values);
  CHECK(back.matrix.base_value == s.base_value);
  CHECK(back.matrix.method == s.method);
  CHECK(back.feature_values.values == x.values);
  CHECK_THROWS_AS(shap_from_csv("bad,header\n"), ValidationError);
}
