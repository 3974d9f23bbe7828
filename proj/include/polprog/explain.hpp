#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "polprog/features.hpp"
#include "polprog/models.hpp"

namespace polprog {

struct ImportanceEntry {
  std::string feature;
  FeatureGroup group = FeatureGroup::Text;
  double importance = 0.0;  // mean RMSE increase after shuffling
  double std = 0.0;         // population std over repeats
};

struct ImportanceReport {
  std::vector<ImportanceEntry> entries;  // column order
  int repeats = 10;
  std::uint64_t seed = 42;

  /// Entries by importance, descending; ties keep column order.
  std::vector<ImportanceEntry> ranked() const;
};

struct PermutationOptions {
  int repeats = 10;
  std::uint64_t seed = 42;
  /// Shuffle all embedding columns with one shared permutation and report
  /// them as a single "text-embedding" entry.
  bool group_embeddings = false;
};

/// importance(j) = mean over repeats of RMSE(X with column j shuffled) - RMSE(X).
/// The permutation for (feature j, repeat r) depends only on (seed, j, r).
ImportanceReport permutation_importance(const TrainedModel& model, const FeatureMatrix& x_test,
                                        std::span<const double> y_test,
                                        const PermutationOptions& options = {});

enum class ShapMethod { LinearExact, TreeExact, MonteCarlo };

std::string_view shap_method_name(ShapMethod method);
std::optional<ShapMethod> parse_shap_method(std::string_view text);

struct ShapMatrix {
  std::vector<std::string> row_ids;
  std::vector<Column> columns;
  Eigen::MatrixXd values;  // rows x features
  /// Monte-Carlo standard errors; empty for exact methods.
  Eigen::MatrixXd std_errors;
  double base_value = 0.0;
  ShapMethod method = ShapMethod::LinearExact;
  std::size_t background_size = 0;
  std::size_t samples = 0;
  std::uint64_t seed = 42;
};

struct ShapOptions {
  std::optional<ShapMethod> method;  // auto by model kind when unset
  std::size_t mc_samples = 200;
  std::uint64_t seed = 42;
};

/// Interventional Shapley values against `background`.
///
/// Auto-selection: ridge -> linear_exact, forest and GBDT -> tree_exact,
/// SVR -> montecarlo. linear_exact uses phi_j = w_j (x_j - mean_b x_j) with
/// base f(mean_b x). tree_exact enumerates, per tree and background row, the
/// leaves reachable when each split feature follows either x or the
/// background row, and credits every leaf to the features that decided it.
/// montecarlo averages marginal contributions over random feature orders,
/// cycling through background rows, so additivity is exact whenever
/// mc_samples is a multiple of the background size.
ShapMatrix shap(const TrainedModel& model, const FeatureMatrix& x, const FeatureMatrix& background,
                const ShapOptions& options = {});

/// Largest feature count accepted by shap_bruteforce.
inline constexpr std::size_t kMaxBruteforceFeatures = 12;

/// Exact interventional Shapley values by enumerating all 2^d coalitions.
Eigen::VectorXd shap_bruteforce(const TrainedModel& model, std::span<const double> x,
                                const Eigen::MatrixXd& background);

/// Up to `max_rows` rows drawn without replacement with `seed`, kept in
/// their original order.
FeatureMatrix sample_background(const FeatureMatrix& x, std::size_t max_rows,
                                std::uint64_t seed);

// CSV interchange

std::string importance_to_csv(const ImportanceReport& report);
ImportanceReport importance_from_csv(std::string_view text);

/// Long format: row_id,feature,group,shap,feature_value,base_value,method
std::string shap_to_csv(const ShapMatrix& matrix, const FeatureMatrix& feature_values);

struct ShapTable {
  ShapMatrix matrix;
  FeatureMatrix feature_values;
};
ShapTable shap_from_csv(std::string_view text);

}  // namespace polprog
