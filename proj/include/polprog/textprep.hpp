#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace polprog {

using StopList = std::set<std::string, std::less<>>;

/// Lowercased, ASCII-alphabetic tokens of one policy.
struct CleanDoc {
  std::string id;
  std::vector<std::string> tokens;

  bool operator==(const CleanDoc&) const = default;
};

/// Replaces every byte outside [A-Za-z] with a space, lowercases, collapses
/// whitespace runs and trims. Non-ASCII letters count as non-alphabetic.
std::string clean_text(std::string_view raw);

/// Splits cleaned text on spaces.
std::vector<std::string> tokenize(std::string_view cleaned);

std::vector<std::string> remove_stopwords(std::vector<std::string> tokens,
                                          const StopList& stoplist);

/// Parses a one-word-per-line list; '#' starts a comment line.
StopList parse_stoplist(std::string_view text);

/// Noun-oriented suffix stripping plus an exception table.
///
/// A token found as a key in the table maps to its value; a token that
/// appears as a value is a protected lemma and maps to itself. Otherwise
/// plural rules apply to tokens longer than three letters, in order:
/// "ies" -> "y" (length > 4), "sses" -> "ss", "ches"/"shes"/"xes" drop
/// "es", and a final "s" is dropped unless preceded by "s", "u" or "i".
/// Rules are applied until a fixed point, which makes the mapping
/// idempotent.
class Lemmatizer {
 public:
  Lemmatizer() = default;
  explicit Lemmatizer(std::map<std::string, std::string, std::less<>> exceptions);

  /// Parses "<inflected> <lemma>" lines; '#' starts a comment line.
  static Lemmatizer from_table(std::string_view text);

  std::string lemma(std::string_view token) const;
  std::vector<std::string> operator()(std::vector<std::string> tokens) const;

  const std::map<std::string, std::string, std::less<>>& exceptions() const noexcept {
    return exceptions_;
  }

 private:
  std::map<std::string, std::string, std::less<>> exceptions_;
  std::set<std::string, std::less<>> protected_;
};

/// Bundled English stop-word list.
const StopList& default_stoplist();
/// Lemmatizer backed by the bundled exception table.
const Lemmatizer& default_lemmatizer();

/// Raw bytes of the bundled data files and their SHA-256 digests.
std::string_view bundled_stopwords_text();
std::string_view bundled_lemma_table_text();
std::map<std::string, std::string> data_file_hashes();

/// clean -> tokenize -> drop stop words -> lemmatize -> drop stop words.
class TextPipeline {
 public:
  TextPipeline();
  TextPipeline(StopList stoplist, Lemmatizer lemmatizer);

  std::vector<std::string> tokens(std::string_view raw) const;
  CleanDoc operator()(std::string id, std::string_view raw) const;

  const StopList& stoplist() const noexcept { return stoplist_; }

 private:
  StopList stoplist_;
  Lemmatizer lemmatizer_;
};

}  // namespace polprog
