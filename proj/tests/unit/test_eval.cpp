#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

#include "helpers.hpp"
#include "polprog/error.hpp"
#include "polprog/eval.hpp"

using namespace polprog;

TEST_CASE("rmse examples") {
  CHECK(rmse(std::vector<double>{0.2, 0.4}, std::vector<double>{0.2, 0.4}) == 0.0);
  CHECK(rmse(std::vector<double>{0, 1}, std::vector<double>{1, 0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), ValidationError);
  CHECK_THROWS_AS(rmse(std::vector<double>{1}, std::vector<double>{1, 2}), ValidationError);
}

TEST_CASE("rmse and r2 agree with naive two-pass loops") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> len(2, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = len(gen);
    std::vector<double> y(static_cast<std::size_t>(n)), yhat(y.size());
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = u(gen);
      yhat[static_cast<std::size_t>(i)] = u(gen);
    }
    double sse = 0.0, mean = 0.0;
    for (int i = 0; i < n; ++i) mean += y[static_cast<std::size_t>(i)];
    mean /= n;
    double sst = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = y[static_cast<std::size_t>(i)] - yhat[static_cast<std::size_t>(i)];
      const double d = y[static_cast<std::size_t>(i)] - mean;
      sse += e * e;
      sst += d * d;
    }
    REQUIRE(std::abs(rmse(y, yhat) - std::sqrt(sse / n)) < 1e-12);
    REQUIRE(std::abs(r2(y, yhat) - (1.0 - sse / sst)) < 1e-12);
  }
}

TEST_CASE("r2 examples") {
  const std::vector<double> y{0.0, 0.25, 0.5, 1.0};
  CHECK(r2(y, y) == 1.0);
  const double m = (0.0 + 0.25 + 0.5 + 1.0) / 4.0;
  CHECK(r2(y, std::vector<double>(4, m)) == doctest::Approx(0.0));
  CHECK(r2(std::vector<double>{0, 1}, std::vector<double>{1, 0}) == doctest::Approx(-3.0));
  CHECK_THROWS_AS(r2(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.4}), ValidationError);
  CHECK_THROWS_AS(r2(std::vector<double>{0.5}, std::vector<double>{0.5}), ValidationError);

  const Metrics met = evaluate(y, y);
  CHECK(met.rmse == 0.0);
  CHECK(met.r2 == 1.0);
  CHECK(met.n == 4);
}

TEST_CASE("r2 drops when noise is added") {
  int decreases = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(static_cast<std::uint64_t>(seed));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> y(40), yhat(40), noisy(40);
    for (std::size_t i = 0; i < 40; ++i) {
      y[i] = u(gen);
      yhat[i] = y[i] + noise(gen);
      noisy[i] = yhat[i] + noise(gen);
    }
    if (r2(y, noisy) < r2(y, yhat)) ++decreases;
  }
  CHECK(decreases > 50);
}

TEST_CASE("snap_to_category examples") {
  CHECK(snap_to_category(0.6) == StageLevel::Tabled);
  CHECK(snap_to_category(0.875) == StageLevel::CloseToAdoption);
  CHECK(snap_to_category(1.2) == StageLevel::AdoptedCompleted);
  CHECK(snap_to_category(-0.4) == StageLevel::BlockedWithdrawn);
  CHECK(snap_to_category(0.125) == StageLevel::BlockedWithdrawn);
  CHECK(snap_to_category(0.1250001) == StageLevel::Announced);
  CHECK(level_name(snap_to_category(0.0)) == "Blocked/Withdrawn");
  CHECK_THROWS_AS(snap_to_category(std::nan("")), ValidationError);
  CHECK_THROWS_AS(snap_to_category(INFINITY), ValidationError);
}

TEST_CASE("snap inverts the stage mapping") {
  for (auto label : kAllStages) CHECK(snap_to_category(map_stage(label)) == level_of(label));
}

TEST_CASE("stage accuracy") {
  const std::vector<double> y{0.0, 0.5, 1.0, 0.75};
  CHECK(stage_accuracy(y, std::vector<double>{0.1, 0.55, 0.9, 0.2}) == doctest::Approx(0.75));
}

TEST_CASE("representation names") {
  for (auto rep : kAllRepresentations) CHECK(parse_representation(representation_name(rep)) == rep);
  CHECK_FALSE(parse_representation("bert").has_value());
}

namespace {

GridConfig small_grid() {
  GridConfig config;
  config.seed = 3;
  config.hyperparameters[ModelKind::Gbdt] = {{"rounds", 40}};
  config.hyperparameters[ModelKind::RandomForest] = {{"n_trees", 20}};
  return config;
}

}  // namespace

TEST_CASE("tfidf-only grid has eight unique cells and is reproducible") {
  const Corpus corpus = generate_synthetic(7, 120, 150);
  GridConfig config = small_grid();
  const GridResult a = run_grid(corpus, config);
  REQUIRE(a.rows.size() == 8);
  std::set<std::tuple<Representation, ModelKind, bool>> keys;
  for (const auto& row : a.rows) {
    keys.insert({row.representation, row.model, row.with_metadata});
    CHECK(row.metrics.n == 24);
    CHECK(row.seed == cell_seed(config.seed, row.representation, row.model, row.with_metadata));
    CHECK(std::isfinite(row.metrics.rmse));
  }
  CHECK(keys.size() == 8);

  config.jobs = 3;
  const GridResult b = run_grid(corpus, config);
  REQUIRE(b.rows.size() == a.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].metrics.rmse == b.rows[i].metrics.rmse);
    CHECK(a.rows[i].metrics.r2 == b.rows[i].metrics.r2);
    CHECK(a.rows[i].model == b.rows[i].model);
  }
}

TEST_CASE("grid over three representations") {
  const Corpus corpus = generate_synthetic(7, 60, 100);
  const auto dir = std::filesystem::temp_directory_path() / "polprog_grid_embeddings";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n01;
  for (const char* name : {"a.csv", "b.csv"}) {
    std::ofstream out(dir / name);
    out << "policy_id,e0,e1,e2\n";
    for (const auto& r : corpus.records()) out << r.id << "," << n01(gen) << "," << n01(gen) << "," << n01(gen) << "\n";
  }
  GridConfig config = small_grid();
  config.features.embedding_a = dir / "a.csv";
  config.features.embedding_b = dir / "b.csv";
  CHECK(run_grid(corpus, config).rows.size() == 24);

  config.representations = {Representation::EmbeddingA};
  config.features.embedding_a = dir / "missing.csv";
  CHECK_THROWS_AS(run_grid(corpus, config), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("featurizer builds train-only features") {
  const Corpus corpus = generate_synthetic(5, 80, 120);
  const SplitIndices s = split(corpus, 0.2, 5);
  const Featurizer featurizer(corpus, {}, s);
  const FeatureSet fs = featurizer.build(Representation::Tfidf);
  CHECK(fs.train.rows() == s.train_ids.size());
  CHECK(fs.test.rows() == s.test_ids.size());
  CHECK(fs.train.column_names() == fs.test.column_names());
  CHECK(fs.train_with_metadata.cols() == fs.train.cols() + fs.schema.columns().size());
  CHECK(fs.y_train.size() == s.train_ids.size());
  CHECK(fs.train_with_metadata.columns.front().name.rfind("text:", 0) == 0);
  CHECK(fs.train_with_metadata.columns.back().name.rfind("metadata:", 0) == 0);
  for (std::size_t i = 0; i < s.test_ids.size(); ++i) {
    CHECK(fs.y_test[i] == map_stage(corpus.find(s.test_ids[i])->stage));
  }
}
