#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "polprog/eval.hpp"
#include "polprog/explain.hpp"

namespace polprog {

/// Resolved settings for one CLI invocation.
///
/// Every field has a flat dotted key (see keys()). Values are layered:
/// defaults, then a JSON config file of {"dotted.key": value} pairs, then
/// command-line flags.
struct RunConfig {
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> scores;
  std::optional<std::filesystem::path> embedding_a;
  std::optional<std::filesystem::path> embedding_b;
  std::optional<std::filesystem::path> voting_weights;
  std::optional<std::filesystem::path> seat_shares;

  std::uint64_t seed = 42;
  double split_ratio = 0.2;
  bool stratified = true;
  std::size_t min_df = 2;
  std::size_t max_features = 0;  // 0: unlimited

  std::vector<Representation> representations;  // empty: all available
  std::map<ModelKind, std::map<std::string, double>> hyperparameters;

  int repeats = 10;
  std::size_t background_size = 100;
  std::size_t mc_samples = 200;
  std::size_t explain_rows = 0;  // 0: every test row
  Representation explain_representation = Representation::Tfidf;
  ModelKind importance_model = ModelKind::BayesianRidge;
  ModelKind shap_model = ModelKind::Gbdt;
  int top_k = 20;

  unsigned jobs = 1;
  std::filesystem::path output_root = "runs";

  /// Sets one dotted key from JSON. Throws ValidationError on unknown keys
  /// or wrongly typed values. Model overrides use "model.<kind>.<name>".
  void set(std::string_view key, const nlohmann::json& value);
  /// Same, from command-line text (numbers and booleans are parsed).
  void set_from_string(std::string_view key, std::string_view text);

  /// Applies a JSON object of dotted keys.
  void merge(const nlohmann::json& flat);

  /// Flat JSON with every key, sorted; stable input for config hashing.
  nlohmann::json to_flat_json() const;
  std::string hash() const;

  /// Checks ranges and that every referenced file exists.
  void validate() const;

  GridConfig grid_config() const;
  FeaturizeConfig featurize_config() const;
  MetadataLookups lookups() const;

  static std::vector<std::string> keys();
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace polprog
