#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "polprog/features.hpp"

namespace polprog {

enum class ModelKind { BayesianRidge, RandomForest, Gbdt, Svr };

inline constexpr std::array<ModelKind, 4> kAllModelKinds = {
    ModelKind::BayesianRidge, ModelKind::RandomForest, ModelKind::Gbdt, ModelKind::Svr};

/// "bayesian_ridge", "random_forest", "gbdt", "svr"
std::string_view kind_name(ModelKind kind);
std::optional<ModelKind> parse_kind(std::string_view text);

/// Model family plus hyperparameters. Missing hyperparameters take the
/// documented defaults:
///
///   bayesian_ridge  max_iter 300, tol 1e-3, alpha_1 alpha_2 lambda_1 lambda_2 1e-6
///   random_forest   n_trees 100, max_features 0 (= ceil(p/3)), max_depth 0
///                   (= unlimited), min_samples_leaf 1
///   gbdt            rounds 500, max_depth 6, learning_rate 0.03, min_samples_leaf 1
///   svr             C 1, epsilon 0.1, gamma 0 (= 1 / (p * var(X))), tol 1e-3,
///                   max_iter 10000000
/// The documented defaults for `kind`, keyed by hyperparameter name.
const std::map<std::string, double>& default_hyperparameters(ModelKind kind);

struct RegressorSpec {
  ModelKind kind = ModelKind::BayesianRidge;
  std::map<std::string, double> hyperparameters;
  std::uint64_t seed = 42;

  static RegressorSpec defaults(ModelKind kind, std::uint64_t seed = 42);

  /// Value for `name`, falling back to the kind's default.
  double get(std::string_view name) const;

  /// Throws ValidationError on unknown names or out-of-range values.
  void validate() const;
};

/// Binary regression tree. Rows with x[feature] <= threshold go left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  double predict(const Row& row) const {
    int at = 0;
    while (!nodes[at].is_leaf()) {
      const TreeNode& n = nodes[at];
      at = row[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[at].value;
  }

  int depth() const;
};

struct RidgeInternals {
  Eigen::VectorXd coef;
  double intercept = 0.0;
  double alpha = 1.0;   // noise precision
  double lambda = 1.0;  // weight precision
  int iterations = 0;
};

/// Prediction is the mean over trees.
struct ForestInternals {
  std::vector<RegressionTree> trees;
};

/// Prediction is init + learning_rate * sum over trees.
struct BoostingInternals {
  double init = 0.0;
  double learning_rate = 0.03;
  std::vector<RegressionTree> trees;
};

/// f(x) = sum_i coef_i * exp(-gamma * |x - sv_i|^2) + bias
struct SvrInternals {
  Eigen::MatrixXd support_vectors;  // one row per support vector
  Eigen::VectorXd coef;
  double bias = 0.0;
  double gamma = 1.0;
  double epsilon = 0.1;
  double C = 1.0;
  double final_violation = 0.0;
  std::int64_t iterations = 0;
};

using ModelInternals =
    std::variant<RidgeInternals, ForestInternals, BoostingInternals, SvrInternals>;

struct TrainedModel {
  RegressorSpec spec;
  std::vector<std::string> column_names;
  ModelInternals internals;
  /// Ridge: log marginal likelihood per iteration. GBDT: training RMSE per
  /// round. SVR: dual objective per sweep. Forest: final training RMSE.
  std::vector<double> training_log;

  ModelKind kind() const noexcept { return spec.kind; }

  /// Predicts without checking column names.
  Eigen::VectorXd predict_values(const Eigen::MatrixXd& x) const;
  double predict_row(std::span<const double> row) const;
};

/// Fits `spec` on (x, y). Deterministic in (spec, x, y). Throws
/// ValidationError on bad hyperparameters or inputs, ConvergenceError when
/// SMO hits its iteration cap.
TrainedModel fit(const RegressorSpec& spec, const FeatureMatrix& x, std::span<const double> y);

/// Throws ValidationError naming the first column that differs from the
/// model's training columns. Output is not clamped.
Eigen::VectorXd predict(const TrainedModel& model, const FeatureMatrix& x);

std::vector<double> training_curve(const TrainedModel& model);

/// Posterior mean of Bayesian ridge for fixed precisions:
/// w = alpha * (lambda I + alpha X^T X)^{-1} X^T y, solved through the SVD
/// of X (handles p > n). No centering.
Eigen::VectorXd ridge_posterior_mean(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     double alpha, double lambda);

/// Versioned JSON document: {"format": "polprog-model", "version": 1, ...}.
nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& doc);
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace polprog
