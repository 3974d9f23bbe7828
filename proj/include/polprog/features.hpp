#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "polprog/corpus.hpp"
#include "polprog/textprep.hpp"

namespace polprog {

enum class FeatureGroup { Text, Metadata, Embedding };

std::string_view group_name(FeatureGroup group);
std::optional<FeatureGroup> parse_group(std::string_view text);

struct Column {
  std::string name;
  FeatureGroup group = FeatureGroup::Text;

  bool operator==(const Column&) const = default;
};

/// Dense, named design matrix. Rows are policies, columns are features.
struct FeatureMatrix {
  std::vector<std::string> row_ids;
  std::vector<Column> columns;
  Eigen::MatrixXd values;

  std::size_t rows() const noexcept { return row_ids.size(); }
  std::size_t cols() const noexcept { return columns.size(); }
  std::vector<std::string> column_names() const;
  std::optional<std::size_t> column_index(std::string_view name) const;

  /// Checks shape, unique names and ids, and that every cell is finite.
  void validate() const;

  /// Rows in the order of `ids`; throws ValidationError on unknown ids.
  FeatureMatrix select_rows(const std::vector<std::string>& ids) const;
};

// ---------------------------------------------------------------- TF-IDF

struct TfidfModel {
  /// token -> column index, indices 0..V-1 assigned in lexicographic order.
  std::map<std::string, std::size_t, std::less<>> vocabulary;
  /// Document frequency per column index.
  std::vector<std::size_t> doc_freq;
  std::size_t n_docs = 0;
  std::size_t min_df = 2;
  std::optional<std::size_t> max_features;

  /// ln((1 + n_docs) / (1 + df)) + 1
  double idf(std::size_t column) const;
  std::vector<std::string> tokens_in_column_order() const;
};

/// Keeps tokens with df >= min_df, then the max_features highest-df tokens
/// (ties: lexicographically smaller first). Throws ValidationError when
/// nothing survives.
TfidfModel fit_tfidf(std::span<const CleanDoc> train_docs, std::size_t min_df = 2,
                     std::optional<std::size_t> max_features = std::nullopt);

/// Raw-count tf times smoothed idf, each non-zero row scaled to unit L2
/// norm. Out-of-vocabulary tokens are ignored; rows with no vocabulary
/// token stay all-zero.
FeatureMatrix transform_tfidf(const TfidfModel& model, std::span<const CleanDoc> docs);

// ------------------------------------------------------------ embeddings

struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>, std::less<>> vectors;
  std::string source_tag;
};

/// Reads `policy_id,e0,...,e{d-1}` CSV. Leading '#' lines are metadata.
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::string_view csv_text, std::string source_tag = {});

/// Rows for `ids`, columns e0..e{d-1} tagged as embedding. Throws
/// ValidationError when an id has no vector.
FeatureMatrix embedding_block(const EmbeddingTable& table, const std::vector<std::string>& ids);

// -------------------------------------------------------------- metadata

struct MetadataLookups {
  std::map<std::string, double, std::less<>> voting_weight;  // country -> weight
  std::map<std::string, double, std::less<>> seat_share;     // party -> share
};

/// Two-column CSV `key,value` with a header row.
std::map<std::string, double, std::less<>> load_lookup_csv(const std::filesystem::path& path);
std::map<std::string, double, std::less<>> parse_lookup_csv(std::string_view text);

/// Per-group caps on one-hot columns; rarer categories are dropped.
inline constexpr std::size_t kMaxCountryColumns = 20;
inline constexpr std::size_t kMaxPartyColumns = 7;
inline constexpr std::size_t kMaxSpotlightColumns = 5;
inline constexpr std::size_t kMaxProcedureColumns = 4;

struct MetadataSchema {
  std::vector<std::string> country_columns;
  std::vector<std::string> party_columns;
  std::vector<std::string> spotlight_columns;
  std::vector<std::string> procedure_columns;
  std::vector<std::string> sidecar_columns;
  std::map<std::string, double, std::less<>> voting_weight_lookup;
  std::map<std::string, double, std::less<>> seat_share_lookup;
  /// Countries/parties seen in training without a lookup entry.
  std::vector<std::string> warnings;

  std::vector<Column> columns() const;
};

MetadataSchema fit_metadata_schema(std::span<const PolicyRecord> train,
                                   const MetadataLookups& lookups);

/// One-hot, count and lookup encoding of the policy metadata. Output for a record depends only on that record
/// and the schema.
FeatureMatrix encode_metadata(std::span<const PolicyRecord> records,
                              const MetadataSchema& schema);

// -------------------------------------------------------------- assembly

/// Horizontal concatenation. With two or more blocks every column name is
/// prefixed with "<group>:"; a single block is returned unchanged.
FeatureMatrix assemble(std::span<const FeatureMatrix> blocks);

}  // namespace polprog
