#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polprog/error.hpp"

namespace polprog {

/// Legislative status of a policy, in progression order.
enum class StageLabel {
  Withdrawn,
  Blocked,
  Announced,
  Tabled,
  CloseToAdoption,
  AdoptedCompleted,
};

inline constexpr std::array<StageLabel, 6> kAllStages = {
    StageLabel::Withdrawn,       StageLabel::Blocked, StageLabel::Announced,
    StageLabel::Tabled,          StageLabel::CloseToAdoption,
    StageLabel::AdoptedCompleted,
};

/// The five distinct points of the ordinal scale. Withdrawn and Blocked
/// share the bottom level.
enum class StageLevel {
  BlockedWithdrawn,
  Announced,
  Tabled,
  CloseToAdoption,
  AdoptedCompleted,
};

/// Canonical display spelling ("Close to Adoption", "Adopted/Completed", ...).
std::string_view stage_name(StageLabel label);

/// snake_case alias ("close_to_adoption", ...), used in JSONL output.
std::string_view stage_key(StageLabel label);

/// Case-insensitive parse of a canonical name, a snake_case alias or the
/// CamelCase enumerator name. Returns nullopt for anything else.
std::optional<StageLabel> parse_stage(std::string_view text);

/// Fixed ordinal target: Withdrawn/Blocked 0, Announced 0.25, Tabled 0.5,
/// CloseToAdoption 0.75, AdoptedCompleted 1.
double map_stage(StageLabel label);

StageLevel level_of(StageLabel label);
double level_value(StageLevel level);
std::string_view level_name(StageLevel level);

struct Rapporteur {
  std::string name;
  std::string country;
  std::optional<std::string> party;  // absent: no major party

  bool operator==(const Rapporteur&) const = default;
};

struct PolicyRecord {
  std::string id;
  std::string title;
  std::string body;
  StageLabel stage = StageLabel::Announced;
  int month = 1;
  int year = 2020;
  std::vector<Rapporteur> rapporteurs;
  std::optional<std::string> spotlight;
  std::optional<std::string> procedure_type;
  std::optional<int> procedure_year;
  bool legislative = false;
  std::map<std::string, double> sidecar_scores;

  bool operator==(const PolicyRecord&) const = default;
};

/// Non-empty ordered collection of policies with pairwise distinct ids.
class Corpus {
 public:
  /// Throws ValidationError if empty or if ids repeat.
  explicit Corpus(std::vector<PolicyRecord> records);

  const std::vector<PolicyRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  const PolicyRecord* find(std::string_view id) const;

  /// Records in the order of `ids`; throws ValidationError on unknown ids.
  std::vector<PolicyRecord> select(const std::vector<std::string>& ids) const;

  bool operator==(const Corpus&) const = default;

 private:
  std::vector<PolicyRecord> records_;
};

/// Reads a JSON Lines corpus. All problems in the file are collected and
/// reported together as one ValidationError whose issues() carry
/// "line N: field: message" entries.
Corpus parse_corpus(const std::filesystem::path& path);
Corpus parse_corpus_text(std::string_view jsonl);

/// Serializes to JSON Lines; parse_corpus_text(to_jsonl(c)) == c.
std::string to_jsonl(const Corpus& corpus);

/// Merges a sidecar-score CSV (header `policy_id,<col>,...`) into the
/// records' sidecar_scores. Ids absent from the file get no entries;
/// ids in the file but not in the corpus are an error.
Corpus attach_sidecar_scores(const Corpus& corpus, const std::filesystem::path& path);
Corpus attach_sidecar_scores_text(const Corpus& corpus, std::string_view csv_text);

struct SplitIndices {
  std::vector<std::string> train_ids;  // corpus order
  std::vector<std::string> test_ids;   // corpus order
  std::uint64_t seed = 42;
  double ratio = 0.2;
  bool stratified = true;
};

/// Train/test split with |test| = round(ratio * N), clamped so both sides
/// are non-empty. Stratified mode apportions the test quota across stage
/// labels by largest remainder, so every stratum gets floor or ceil of its
/// proportional share.
SplitIndices split(const Corpus& corpus, double ratio, std::uint64_t seed,
                   bool stratified = true);

namespace synthetic {

/// Tokens whose per-document count grows with the stage value.
inline constexpr std::array<std::string_view, 3> kMarkerTokens = {
    "agreement", "climate", "energy"};

/// Metadata column carrying the planted anti-correlated signal.
inline constexpr std::string_view kPlantedMetadataColumn = "no_party";

/// Stage label probabilities used when sampling, in kAllStages order.
inline constexpr std::array<double, 6> kLabelDistribution = {0.03, 0.04, 0.15,
                                                             0.25, 0.15, 0.38};

/// Voting-weight and seat-share tables matching the generated countries
/// and parties.
std::map<std::string, double> voting_weights();
std::map<std::string, double> seat_shares();

}  // namespace synthetic

/// Deterministic planted-signal corpus; see README "Synthetic corpora".
/// Requires n >= 20 and vocab_size >= 50.
Corpus generate_synthetic(std::uint64_t seed, int n, int vocab_size);

}  // namespace polprog
