#include "polprog/textprep.hpp"

#include <cctype>

#include "polprog/error.hpp"
#include "polprog/hash.hpp"

namespace polprog {

namespace detail {
extern const std::string_view kStopwordsText;
extern const std::string_view kLemmaTableText;
}  // namespace detail

std::string clean_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    const unsigned char c = static_cast<unsigned char>(ch);
    const bool alpha = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (!alpha) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view cleaned) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < cleaned.size()) {
    const std::size_t end = std::min(cleaned.find(' ', pos), cleaned.size());
    if (end > pos) tokens.emplace_back(cleaned.substr(pos, end - pos));
    pos = end + 1;
  }
  return tokens;
}

std::vector<std::string> remove_stopwords(std::vector<std::string> tokens,
                                          const StopList& stoplist) {
  std::erase_if(tokens, [&](const std::string& t) { return stoplist.contains(t); });
  return tokens;
}

namespace {

template <typename Fn>
void for_each_data_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    fn(line);
  }
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// One application of the plural rules; returns the input when none applies.
std::string strip_once(const std::string& t) {
  if (t.size() <= 3) return t;
  if (t.size() > 4 && ends_with(t, "ies")) return t.substr(0, t.size() - 3) + "y";
  if (ends_with(t, "sses")) return t.substr(0, t.size() - 2);
  if (ends_with(t, "ches") || ends_with(t, "shes") || ends_with(t, "xes")) {
    return t.substr(0, t.size() - 2);
  }
  if (ends_with(t, "s") && !ends_with(t, "ss") && !ends_with(t, "us") && !ends_with(t, "is")) {
    return t.substr(0, t.size() - 1);
  }
  return t;
}

}  // namespace

StopList parse_stoplist(std::string_view text) {
  StopList out;
  for_each_data_line(text, [&](std::string_view line) { out.emplace(line); });
  return out;
}

Lemmatizer::Lemmatizer(std::map<std::string, std::string, std::less<>> exceptions)
    : exceptions_(std::move(exceptions)) {
  for (const auto& [from, to] : exceptions_) protected_.insert(to);
}

Lemmatizer Lemmatizer::from_table(std::string_view text) {
  std::map<std::string, std::string, std::less<>> table;
  for_each_data_line(text, [&](std::string_view line) {
    const std::size_t space = line.find_first_of(" \t");
    if (space == std::string_view::npos) {
      throw ValidationError("lemma table line needs two words: " + std::string(line));
    }
    std::string_view to = line.substr(space);
    while (!to.empty() && std::isspace(static_cast<unsigned char>(to.front()))) to.remove_prefix(1);
    table.emplace(std::string(line.substr(0, space)), std::string(to));
  });
  return Lemmatizer(std::move(table));
}

std::string Lemmatizer::lemma(std::string_view token) const {
  std::string current(token);
  // Every rule shortens the token, so this terminates.
  for (;;) {
    if (protected_.contains(current)) return current;
    if (auto it = exceptions_.find(current); it != exceptions_.end()) return it->second;
    std::string next = strip_once(current);
    if (next == current) return current;
    current = std::move(next);
  }
}

std::vector<std::string> Lemmatizer::operator()(std::vector<std::string> tokens) const {
  for (auto& t : tokens) t = lemma(t);
  return tokens;
}

std::string_view bundled_stopwords_text() { return detail::kStopwordsText; }
std::string_view bundled_lemma_table_text() { return detail::kLemmaTableText; }

const StopList& default_stoplist() {
  static const StopList list = parse_stoplist(detail::kStopwordsText);
  return list;
}

const Lemmatizer& default_lemmatizer() {
  static const Lemmatizer lemmatizer = Lemmatizer::from_table(detail::kLemmaTableText);
  return lemmatizer;
}

std::map<std::string, std::string> data_file_hashes() {
  return {
      {"stopwords_en.txt", sha256_hex(detail::kStopwordsText)},
      {"lemma_exceptions.txt", sha256_hex(detail::kLemmaTableText)},
  };
}

TextPipeline::TextPipeline() : TextPipeline(default_stoplist(), default_lemmatizer()) {}

TextPipeline::TextPipeline(StopList stoplist, Lemmatizer lemmatizer)
    : stoplist_(std::move(stoplist)), lemmatizer_(std::move(lemmatizer)) {}

std::vector<std::string> TextPipeline::tokens(std::string_view raw) const {
  auto toks = remove_stopwords(tokenize(clean_text(raw)), stoplist_);
  toks = lemmatizer_(std::move(toks));
  return remove_stopwords(std::move(toks), stoplist_);
}

CleanDoc TextPipeline::operator()(std::string id, std::string_view raw) const {
  return CleanDoc{std::move(id), tokens(raw)};
}

}  // namespace polprog
