#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "helpers.hpp"
#include "polprog/error.hpp"
#include "polprog/eval.hpp"
#include "polprog/models.hpp"

using namespace polprog;

namespace {

RegressorSpec spec(ModelKind kind, std::map<std::string, double> hp = {}, std::uint64_t seed = 42) {
  RegressorSpec s = RegressorSpec::defaults(kind, seed);
  for (const auto& [k, v] : hp) s.hyperparameters[k] = v;
  return s;
}

std::vector<double> random_targets(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y(n);
  for (auto& v : y) v = u(gen);
  return y;
}

void check_tree_invariants(const RegressionTree& tree, const Eigen::MatrixXd& x) {
  REQUIRE_FALSE(tree.nodes.empty());
  for (const auto& node : tree.nodes) {
    REQUIRE(std::isfinite(node.value));
    if (node.is_leaf()) continue;
    REQUIRE(node.feature < x.cols());
    REQUIRE(node.left > 0);
    REQUIRE(node.right > 0);
    const auto col = x.col(node.feature);
    REQUIRE(node.threshold >= col.minCoeff());
    REQUIRE(node.threshold <= col.maxCoeff());
  }
}

}  // namespace

TEST_CASE("kind names round trip") {
  for (auto kind : kAllModelKinds) CHECK(parse_kind(kind_name(kind)) == kind);
  CHECK_FALSE(parse_kind("catboost").has_value());
}

TEST_CASE("hyperparameter validation") {
  CHECK_THROWS_AS(spec(ModelKind::Gbdt, {{"learning_rate", 0.0}}).validate(), ValidationError);
  CHECK_THROWS_AS(spec(ModelKind::Gbdt, {{"max_depth", 0}}).validate(), ValidationError);
  CHECK_THROWS_AS(spec(ModelKind::RandomForest, {{"n_trees", 0}}).validate(), ValidationError);
  CHECK_THROWS_AS(spec(ModelKind::Svr, {{"C", -1}}).validate(), ValidationError);
  CHECK_THROWS_AS(spec(ModelKind::Svr, {{"epsilon", 0}}).validate(), ValidationError);
  CHECK_THROWS_AS(spec(ModelKind::BayesianRidge, {{"unknown", 1}}).validate(), ValidationError);
  for (auto kind : kAllModelKinds) CHECK_NOTHROW(RegressorSpec::defaults(kind).validate());
  CHECK(RegressorSpec::defaults(ModelKind::Gbdt).get("rounds") == 500);
  CHECK(RegressorSpec::defaults(ModelKind::Gbdt).get("learning_rate") == doctest::Approx(0.03));
}

TEST_CASE("ridge posterior mean matches a direct solve") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> prec(0.01, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd x = testutil::uniform_matrix(gen, 50, 10, -1.0, 1.0);
    const Eigen::VectorXd y = testutil::uniform_matrix(gen, 50, 1);
    const double alpha = prec(gen), lambda = prec(gen);
    const Eigen::MatrixXd a =
        lambda * Eigen::MatrixXd::Identity(10, 10) + alpha * x.transpose() * x;
    const Eigen::VectorXd direct = a.ldlt().solve(alpha * x.transpose() * y);
    const Eigen::VectorXd fast = ridge_posterior_mean(x, y, alpha, lambda);
    REQUIRE((direct - fast).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("ridge posterior mean with more columns than rows") {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd x = testutil::uniform_matrix(gen, 6, 15, -1.0, 1.0);
  const Eigen::VectorXd y = testutil::uniform_matrix(gen, 6, 1);
  const Eigen::MatrixXd a = 0.5 * Eigen::MatrixXd::Identity(15, 15) + 2.0 * x.transpose() * x;
  const Eigen::VectorXd direct = a.ldlt().solve(2.0 * x.transpose() * y);
  CHECK((direct - ridge_posterior_mean(x, y, 2.0, 0.5)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("ridge recovers a noiseless linear signal") {
  std::mt19937_64 gen(5);
  const Eigen::MatrixXd values = testutil::uniform_matrix(gen, 50, 5);
  std::vector<double> y(50);
  for (int i = 0; i < 50; ++i) y[static_cast<std::size_t>(i)] = 3.0 * values(i, 1);
  const FeatureMatrix x = testutil::matrix(values);
  const TrainedModel model = fit(spec(ModelKind::BayesianRidge), x, y);
  const auto& ridge = std::get<RidgeInternals>(model.internals);
  CHECK(ridge.coef(1) == doctest::Approx(3.0).epsilon(1e-3 / 3.0));
  for (Eigen::Index j : {0, 2, 3, 4}) CHECK(std::abs(ridge.coef(j)) < 1e-3);

  // The coefficients equal the closed form at the converged precisions on
  // centred data.
  const Eigen::MatrixXd xc = values.rowwise() - values.colwise().mean();
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), 50);
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const Eigen::MatrixXd a = ridge.lambda * Eigen::MatrixXd::Identity(5, 5) + ridge.alpha * xc.transpose() * xc;
  const Eigen::VectorXd closed = a.ldlt().solve(ridge.alpha * xc.transpose() * yc);
  CHECK((closed - ridge.coef).cwiseAbs().maxCoeff() < 1e-6);

  const Eigen::VectorXd pred = predict(model, x);
  CHECK(rmse(y, testutil::to_vector(pred)) < 1e-3);
  CHECK_FALSE(model.training_log.empty());
}

TEST_CASE("gbdt on a constant target") {
  std::mt19937_64 gen(6);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 30, 4));
  const std::vector<double> y(30, 0.5);
  const TrainedModel model = fit(spec(ModelKind::Gbdt, {{"rounds", 5}}), x, y);
  const Eigen::VectorXd pred = predict(model, x);
  for (Eigen::Index i = 0; i < pred.size(); ++i) CHECK(std::abs(pred(i) - 0.5) < 1e-9);
}

TEST_CASE("svr on a constant target stays inside the tube") {
  std::mt19937_64 gen(7);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 40, 3));
  for (double c : {0.0, 0.3, 1.0}) {
    const std::vector<double> y(40, c);
    const TrainedModel model = fit(spec(ModelKind::Svr, {{"epsilon", 0.1}}), x, y);
    const Eigen::VectorXd pred = predict(model, x);
    for (Eigen::Index i = 0; i < pred.size(); ++i) REQUIRE(std::abs(pred(i) - c) <= 0.1 + 1e-6);
  }
}

TEST_CASE("gbdt training RMSE never increases") {
  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 3; ++trial) {
    const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 60, 6));
    const std::vector<double> y = random_targets(gen, 60);
    const TrainedModel model = fit(spec(ModelKind::Gbdt), x, y);
    const auto curve = training_curve(model);
    REQUIRE(curve.size() == 500);
    for (std::size_t r = 1; r < curve.size(); ++r) REQUIRE(curve[r] <= curve[r - 1] + 1e-12);
  }
}

TEST_CASE("svr dual objective never decreases and KKT holds") {
  std::mt19937_64 gen(10);
  std::uniform_int_distribution<int> rows(10, 40), cols(1, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd values = testutil::uniform_matrix(gen, rows(gen), cols(gen));
    const FeatureMatrix x = testutil::matrix(values);
    const std::vector<double> y = random_targets(gen, x.rows());
    const double eps = 0.1;
    const TrainedModel model = fit(spec(ModelKind::Svr, {{"epsilon", eps}, {"tol", 1e-9}}), x, y);
    const auto curve = training_curve(model);
    REQUIRE(curve.size() >= 1);
    for (std::size_t s = 1; s < curve.size(); ++s) REQUIRE(curve[s] >= curve[s - 1] - 1e-12);

    // Non-support vectors are the training rows absent from support_vectors.
    const auto& svr = std::get<SvrInternals>(model.internals);
    const Eigen::VectorXd pred = predict(model, x);
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      bool support = false;
      for (Eigen::Index s = 0; s < svr.support_vectors.rows() && !support; ++s) {
        support = (svr.support_vectors.row(s) - values.row(i)).norm() == 0.0;
      }
      if (!support) REQUIRE(std::abs(y[static_cast<std::size_t>(i)] - pred(i)) <= eps + 1e-6);
    }
  }
}

TEST_CASE("svr reports non-convergence at the iteration cap") {
  std::mt19937_64 gen(12);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 30, 3));
  const std::vector<double> y = random_targets(gen, 30);
  try {
    fit(spec(ModelKind::Svr, {{"max_iter", 1}, {"epsilon", 0.01}}), x, y);
    FAIL("expected ConvergenceError");
  } catch (const ConvergenceError& e) {
    CHECK(e.final_violation() > 0.0);
  }
}

TEST_CASE("forest curve is a single value and trees are well formed") {
  std::mt19937_64 gen(13);
  const Eigen::MatrixXd values = testutil::uniform_matrix(gen, 40, 5);
  const FeatureMatrix x = testutil::matrix(values);
  const std::vector<double> y = random_targets(gen, 40);
  const TrainedModel forest = fit(spec(ModelKind::RandomForest, {{"n_trees", 20}}), x, y);
  CHECK(training_curve(forest).size() == 1);
  for (const auto& tree : std::get<ForestInternals>(forest.internals).trees) check_tree_invariants(tree, values);
  const TrainedModel gbdt = fit(spec(ModelKind::Gbdt, {{"rounds", 30}}), x, y);
  for (const auto& tree : std::get<BoostingInternals>(gbdt.internals).trees) {
    check_tree_invariants(tree, values);
    CHECK(tree.depth() <= 6);
  }
}

TEST_CASE("fits are deterministic and row-independent") {
  std::mt19937_64 gen(14);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 50, 4));
  const std::vector<double> y = random_targets(gen, 50);
  const FeatureMatrix probe = testutil::matrix(testutil::uniform_matrix(gen, 12, 4));
  for (auto kind : kAllModelKinds) {
    std::map<std::string, double> hp;
    if (kind == ModelKind::Gbdt) hp["rounds"] = 50;
    if (kind == ModelKind::RandomForest) hp["n_trees"] = 20;
    const TrainedModel a = fit(spec(kind, hp, 99), x, y);
    const TrainedModel b = fit(spec(kind, hp, 99), x, y);
    const Eigen::VectorXd pa = predict(a, probe);
    REQUIRE(pa == predict(b, probe));

    std::vector<std::string> reversed(probe.row_ids.rbegin(), probe.row_ids.rend());
    const Eigen::VectorXd pr = predict(a, probe.select_rows(reversed));
    for (Eigen::Index i = 0; i < pa.size(); ++i) REQUIRE(pr(pa.size() - 1 - i) == pa(i));
  }
}

TEST_CASE("gbdt capacity") {
  std::mt19937_64 gen(15);
  for (int trial = 0; trial < 3; ++trial) {
    const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 50, 5));
    const std::vector<double> y = random_targets(gen, 50);
    const TrainedModel model = fit(spec(ModelKind::Gbdt, {{"learning_rate", 0.1}}), x, y);
    CHECK(rmse(y, testutil::to_vector(predict(model, x))) < 0.05);
  }
}

TEST_CASE("predict checks columns and handles empty input") {
  std::mt19937_64 gen(16);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 20, 3));
  const std::vector<double> y = random_targets(gen, 20);
  for (auto kind : kAllModelKinds) {
    std::map<std::string, double> hp;
    if (kind == ModelKind::Gbdt) hp["rounds"] = 5;
    if (kind == ModelKind::RandomForest) hp["n_trees"] = 5;
    const TrainedModel model = fit(spec(kind, hp), x, y);
    FeatureMatrix renamed = x;
    renamed.columns[1].name = "other";
    try {
      predict(model, renamed);
      FAIL("expected mismatch");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("other") != std::string::npos);
    }
    const FeatureMatrix empty = x.select_rows({});
    CHECK(predict(model, empty).size() == 0);
  }
}

TEST_CASE("fit rejects bad inputs") {
  const FeatureMatrix x = testutil::matrix(Eigen::MatrixXd::Ones(3, 2));
  CHECK_THROWS_AS(fit(spec(ModelKind::BayesianRidge), x, std::vector<double>{1, 2}), ValidationError);
  CHECK_THROWS_AS(fit(spec(ModelKind::BayesianRidge), x.select_rows({"r0"}), std::vector<double>{1}),
                  ValidationError);
  CHECK_THROWS_AS(fit(spec(ModelKind::BayesianRidge), x, std::vector<double>{0, std::nan(""), 1}),
                  ValidationError);
  FeatureMatrix bad = x;
  bad.values(0, 0) = INFINITY;
  CHECK_THROWS_AS(fit(spec(ModelKind::Gbdt), bad, std::vector<double>{0, 1, 0}), ValidationError);
}

TEST_CASE("model JSON round trip") {
  std::mt19937_64 gen(17);
  const FeatureMatrix x = testutil::matrix(testutil::uniform_matrix(gen, 30, 4));
  const std::vector<double> y = random_targets(gen, 30);
  const FeatureMatrix probe = testutil::matrix(testutil::uniform_matrix(gen, 10, 4));
  const auto dir = std::filesystem::temp_directory_path() / "polprog_model_roundtrip";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (auto kind : kAllModelKinds) {
    const TrainedModel model = fit(spec(kind, kind == ModelKind::Gbdt
                                                  ? std::map<std::string, double>{{"rounds", 20}}
                                                  : std::map<std::string, double>{}),
                                   x, y);
    const TrainedModel back = model_from_json(model_to_json(model));
    CHECK(back.kind() == kind);
    CHECK(back.column_names == model.column_names);
    CHECK(back.spec.seed == model.spec.seed);
    CHECK(back.training_log == model.training_log);
    CHECK(predict(back, probe) == predict(model, probe));

    const auto path = dir / (std::string(kind_name(kind)) + ".json");
    save_model(model, path);
    CHECK(predict(load_model(path), probe) == predict(model, probe));
  }
  std::filesystem::remove_all(dir);

  nlohmann::json doc = model_to_json(fit(spec(ModelKind::BayesianRidge), x, y));
  doc["version"] = 99;
  CHECK_THROWS_AS(model_from_json(doc), ValidationError);
  CHECK_THROWS_AS(model_from_json(nlohmann::json::object()), ValidationError);
}
