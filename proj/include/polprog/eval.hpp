#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polprog/corpus.hpp"
#include "polprog/features.hpp"
#include "polprog/models.hpp"

namespace polprog {

struct Metrics {
  double rmse = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// sqrt(mean((y - yhat)^2)). Throws ValidationError on empty or mismatched input.
double rmse(std::span<const double> y, std::span<const double> yhat);

/// 1 - SS_res / SS_tot. Throws ValidationError when y is constant or has
/// fewer than two entries.
double r2(std::span<const double> y, std::span<const double> yhat);

Metrics evaluate(std::span<const double> y, std::span<const double> yhat);

/// Clamps to [0, 1] and rounds to the nearest stage level; exact midpoints
/// go to the lower level. Throws ValidationError on non-finite input.
StageLevel snap_to_category(double yhat);

/// Fraction of predictions whose snapped level equals the true level.
double stage_accuracy(std::span<const double> y, std::span<const double> yhat);

enum class Representation { Tfidf, EmbeddingA, EmbeddingB };

inline constexpr std::array<Representation, 3> kAllRepresentations = {
    Representation::Tfidf, Representation::EmbeddingA, Representation::EmbeddingB};

/// "tfidf", "embedding_a", "embedding_b"
std::string_view representation_name(Representation rep);
std::optional<Representation> parse_representation(std::string_view text);

struct GridRow {
  Representation representation = Representation::Tfidf;
  ModelKind model = ModelKind::BayesianRidge;
  bool with_metadata = false;
  Metrics metrics;
  /// Supplementary snapped-category accuracy; not part of the CSV layout.
  double stage_accuracy = 0.0;
  std::uint64_t seed = 0;
};

struct GridResult {
  std::vector<GridRow> rows;
};

/// Everything a featurization needs besides the corpus.
struct FeaturizeConfig {
  std::size_t min_df = 2;
  std::optional<std::size_t> max_features;
  MetadataLookups lookups;
  std::optional<std::filesystem::path> embedding_a;
  std::optional<std::filesystem::path> embedding_b;
};

struct GridConfig {
  FeaturizeConfig features;
  /// Representations to run; empty means tfidf plus every embedding with a path.
  std::vector<Representation> representations;
  std::vector<ModelKind> models{kAllModelKinds.begin(), kAllModelKinds.end()};
  /// Per-kind hyperparameter overrides.
  std::map<ModelKind, std::map<std::string, double>> hyperparameters;
  double split_ratio = 0.2;
  bool stratified = true;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
};

/// Train/test design matrices for one representation, with and without
/// the metadata block, all built from training data only.
struct FeatureSet {
  SplitIndices split;
  std::vector<double> y_train;
  std::vector<double> y_test;
  FeatureMatrix train;  // representation block only
  FeatureMatrix test;
  FeatureMatrix train_with_metadata;
  FeatureMatrix test_with_metadata;
  MetadataSchema schema;
};

/// Shared featurization used by the grid and by explanations.
class Featurizer {
 public:
  Featurizer(const Corpus& corpus, const FeaturizeConfig& config, const SplitIndices& split);

  FeatureSet build(Representation rep) const;
  const SplitIndices& split() const noexcept { return split_; }
  const MetadataSchema& schema() const noexcept { return schema_; }

 private:
  const Corpus& corpus_;
  FeaturizeConfig config_;
  SplitIndices split_;
  std::vector<PolicyRecord> train_records_;
  std::vector<PolicyRecord> test_records_;
  MetadataSchema schema_;
  FeatureMatrix meta_train_;
  FeatureMatrix meta_test_;
};

/// Seed used for one grid cell, derived from the run seed and the cell key.
std::uint64_t cell_seed(std::uint64_t seed, Representation rep, ModelKind kind,
                        bool with_metadata);

/// Fits every (representation, model, metadata on/off) cell on one shared
/// split and scores it on the test side. Rows come back in a fixed order
/// regardless of `jobs`.
GridResult run_grid(const Corpus& corpus, const GridConfig& config);

}  // namespace polprog
