#include "polprog/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "polprog/csv.hpp"
#include "polprog/io.hpp"
#include "polprog/rng.hpp"
#include "polprog/textprep.hpp"

namespace polprog {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string_view stage_name(StageLabel label) {
  switch (label) {
    case StageLabel::Withdrawn: return "Withdrawn";
    case StageLabel::Blocked: return "Blocked";
    case StageLabel::Announced: return "Announced";
    case StageLabel::Tabled: return "Tabled";
    case StageLabel::CloseToAdoption: return "Close to Adoption";
    case StageLabel::AdoptedCompleted: return "Adopted/Completed";
  }
  return "?";
}

std::string_view stage_key(StageLabel label) {
  switch (label) {
    case StageLabel::Withdrawn: return "withdrawn";
    case StageLabel::Blocked: return "blocked";
    case StageLabel::Announced: return "announced";
    case StageLabel::Tabled: return "tabled";
    case StageLabel::CloseToAdoption: return "close_to_adoption";
    case StageLabel::AdoptedCompleted: return "adopted_completed";
  }
  return "?";
}

std::optional<StageLabel> parse_stage(std::string_view text) {
  const std::string key = lower(trim(text));
  for (StageLabel label : kAllStages) {
    if (key == lower(stage_name(label)) || key == stage_key(label)) return label;
  }
  if (key == "closetoadoption") return StageLabel::CloseToAdoption;
  if (key == "adoptedcompleted") return StageLabel::AdoptedCompleted;
  return std::nullopt;
}

double map_stage(StageLabel label) { return level_value(level_of(label)); }

StageLevel level_of(StageLabel label) {
  switch (label) {
    case StageLabel::Withdrawn:
    case StageLabel::Blocked: return StageLevel::BlockedWithdrawn;
    case StageLabel::Announced: return StageLevel::Announced;
    case StageLabel::Tabled: return StageLevel::Tabled;
    case StageLabel::CloseToAdoption: return StageLevel::CloseToAdoption;
    case StageLabel::AdoptedCompleted: return StageLevel::AdoptedCompleted;
  }
  return StageLevel::BlockedWithdrawn;
}

double level_value(StageLevel level) {
  switch (level) {
    case StageLevel::BlockedWithdrawn: return 0.0;
    case StageLevel::Announced: return 0.25;
    case StageLevel::Tabled: return 0.5;
    case StageLevel::CloseToAdoption: return 0.75;
    case StageLevel::AdoptedCompleted: return 1.0;
  }
  return 0.0;
}

std::string_view level_name(StageLevel level) {
  switch (level) {
    case StageLevel::BlockedWithdrawn: return "Blocked/Withdrawn";
    case StageLevel::Announced: return "Announced";
    case StageLevel::Tabled: return "Tabled";
    case StageLevel::CloseToAdoption: return "Close to Adoption";
    case StageLevel::AdoptedCompleted: return "Adopted/Completed";
  }
  return "?";
}

// ------------------------------------------------------------------ Corpus

Corpus::Corpus(std::vector<PolicyRecord> records) : records_(std::move(records)) {
  if (records_.empty()) throw ValidationError("corpus is empty");
  std::unordered_set<std::string> seen;
  std::vector<std::string> dups;
  for (const auto& r : records_) {
    if (!seen.insert(r.id).second) dups.push_back(r.id);
  }
  if (!dups.empty()) {
    std::string msg = "duplicate policy id:";
    for (const auto& d : dups) msg += " " + d;
    throw ValidationError(msg, dups);
  }
}

const PolicyRecord* Corpus::find(std::string_view id) const {
  for (const auto& r : records_) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<PolicyRecord> Corpus::select(const std::vector<std::string>& ids) const {
  std::map<std::string_view, const PolicyRecord*> index;
  for (const auto& r : records_) index.emplace(r.id, &r);
  std::vector<PolicyRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw ValidationError("unknown policy id: " + id);
    out.push_back(*it->second);
  }
  return out;
}

// ----------------------------------------------------------------- parsing

namespace {

class IssueLog {
 public:
  void add(std::size_t line, std::string_view field, std::string_view message) {
    std::ostringstream os;
    os << "line " << line << ": " << field << ": " << message;
    issues_.push_back(os.str());
  }
  bool empty() const { return issues_.empty(); }
  std::vector<std::string> take() { return std::move(issues_); }

 private:
  std::vector<std::string> issues_;
};

std::optional<std::string> optional_string(const json& obj, const char* field, std::size_t line,
                                           IssueLog& log) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    log.add(line, field, "expected a string");
    return std::nullopt;
  }
  std::string value = it->get<std::string>();
  if (trim(value).empty()) return std::nullopt;
  return value;
}

std::optional<int> integer_field(const json& obj, const char* field, std::size_t line,
                                 IssueLog& log, bool required) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) {
    if (required) log.add(line, field, "missing");
    return std::nullopt;
  }
  if (!it->is_number_integer()) {
    log.add(line, field, "expected an integer");
    return std::nullopt;
  }
  return it->get<int>();
}

std::optional<PolicyRecord> parse_record(const json& obj, std::size_t line, IssueLog& log) {
  if (!obj.is_object()) {
    log.add(line, "<record>", "expected a JSON object");
    return std::nullopt;
  }
  bool ok = true;
  PolicyRecord rec;

  auto id = optional_string(obj, "id", line, log);
  if (!id) {
    log.add(line, "id", "missing or empty");
    ok = false;
  } else {
    rec.id = *id;
  }

  if (auto it = obj.find("title"); it != obj.end() && !it->is_null()) {
    if (it->is_string()) {
      rec.title = it->get<std::string>();
    } else {
      log.add(line, "title", "expected a string");
      ok = false;
    }
  }

  auto body_it = obj.find("body");
  if (body_it == obj.end() || !body_it->is_string()) {
    log.add(line, "body", "missing or not a string");
    ok = false;
  } else {
    rec.body = body_it->get<std::string>();
    if (trim(rec.body).empty()) {
      log.add(line, "body", "empty after trimming whitespace");
      ok = false;
    }
  }

  auto stage_it = obj.find("stage");
  if (stage_it == obj.end() || !stage_it->is_string()) {
    log.add(line, "stage", "missing or not a string");
    ok = false;
  } else if (auto stage = parse_stage(stage_it->get<std::string>())) {
    rec.stage = *stage;
  } else {
    log.add(line, "stage", "unknown stage label \"" + stage_it->get<std::string>() + "\"");
    ok = false;
  }

  if (auto month = integer_field(obj, "month", line, log, true)) {
    if (*month < 1 || *month > 12) {
      log.add(line, "month", "must be in 1..12, got " + std::to_string(*month));
      ok = false;
    }
    rec.month = *month;
  } else {
    ok = false;
  }

  if (auto year = integer_field(obj, "year", line, log, true)) {
    rec.year = *year;
  } else {
    ok = false;
  }

  if (auto it = obj.find("rapporteurs"); it != obj.end() && !it->is_null()) {
    if (!it->is_array()) {
      log.add(line, "rapporteurs", "expected an array");
      ok = false;
    } else {
      for (std::size_t k = 0; k < it->size(); ++k) {
        const json& r = (*it)[k];
        const std::string field = "rapporteurs[" + std::to_string(k) + "]";
        if (!r.is_object()) {
          log.add(line, field, "expected an object");
          ok = false;
          continue;
        }
        Rapporteur rap;
        if (auto n = r.find("name"); n != r.end() && n->is_string()) rap.name = n->get<std::string>();
        auto country = optional_string(r, "country", line, log);
        if (!country) {
          log.add(line, field + ".country", "missing or empty");
          ok = false;
        } else {
          rap.country = *country;
        }
        rap.party = optional_string(r, "party", line, log);
        rec.rapporteurs.push_back(std::move(rap));
      }
    }
  }

  rec.spotlight = optional_string(obj, "spotlight", line, log);
  rec.procedure_type = optional_string(obj, "procedure_type", line, log);
  rec.procedure_year = integer_field(obj, "procedure_year", line, log, false);

  if (auto it = obj.find("legislative"); it != obj.end() && !it->is_null()) {
    if (!it->is_boolean()) {
      log.add(line, "legislative", "expected a boolean");
      ok = false;
    } else {
      rec.legislative = it->get<bool>();
    }
  }

  if (auto it = obj.find("sidecar_scores"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) {
      log.add(line, "sidecar_scores", "expected an object");
      ok = false;
    } else {
      for (const auto& [name, value] : it->items()) {
        if (!value.is_number() || !std::isfinite(value.get<double>())) {
          log.add(line, "sidecar_scores." + name, "expected a finite number");
          ok = false;
          continue;
        }
        rec.sidecar_scores[name] = value.get<double>();
      }
    }
  }

  if (!ok) return std::nullopt;
  return rec;
}

}  // namespace

Corpus parse_corpus_text(std::string_view jsonl) {
  IssueLog log;
  std::vector<PolicyRecord> records;
  std::map<std::string, std::size_t> first_line;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= jsonl.size()) {
    const std::size_t end = std::min(jsonl.find('\n', pos), jsonl.size());
    std::string_view line = jsonl.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (trim(line).empty()) {
      if (end == jsonl.size()) break;
      continue;
    }
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      log.add(line_no, "<json>", e.what());
      continue;
    }
    auto rec = parse_record(obj, line_no, log);
    if (!rec) continue;
    auto [it, inserted] = first_line.emplace(rec->id, line_no);
    if (!inserted) {
      log.add(line_no, "id", "duplicate id \"" + rec->id + "\" (first seen on line " +
                                 std::to_string(it->second) + ")");
      continue;
    }
    records.push_back(std::move(*rec));
    if (end == jsonl.size()) break;
  }

  if (!log.empty()) {
    auto issues = log.take();
    std::string msg = "invalid corpus (" + std::to_string(issues.size()) + " issue" +
                      (issues.size() == 1 ? "" : "s") + "):";
    for (const auto& i : issues) msg += "\n  " + i;
    throw ValidationError(msg, std::move(issues));
  }
  return Corpus(std::move(records));
}

Corpus parse_corpus(const std::filesystem::path& path) {
  return parse_corpus_text(io::read_file(path));
}

std::string to_jsonl(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.records()) {
    ordered_json obj;
    obj["id"] = r.id;
    obj["title"] = r.title;
    obj["body"] = r.body;
    obj["stage"] = std::string(stage_key(r.stage));
    obj["month"] = r.month;
    obj["year"] = r.year;
    ordered_json raps = ordered_json::array();
    for (const auto& rap : r.rapporteurs) {
      ordered_json o;
      o["name"] = rap.name;
      o["country"] = rap.country;
      o["party"] = rap.party ? ordered_json(*rap.party) : ordered_json(nullptr);
      raps.push_back(std::move(o));
    }
    obj["rapporteurs"] = std::move(raps);
    obj["spotlight"] = r.spotlight ? ordered_json(*r.spotlight) : ordered_json(nullptr);
    obj["procedure_type"] =
        r.procedure_type ? ordered_json(*r.procedure_type) : ordered_json(nullptr);
    obj["procedure_year"] =
        r.procedure_year ? ordered_json(*r.procedure_year) : ordered_json(nullptr);
    obj["legislative"] = r.legislative;
    if (!r.sidecar_scores.empty()) {
      ordered_json scores = ordered_json::object();
      for (const auto& [k, v] : r.sidecar_scores) scores[k] = v;
      obj["sidecar_scores"] = std::move(scores);
    }
    out += obj.dump();
    out += '\n';
  }
  return out;
}

Corpus attach_sidecar_scores_text(const Corpus& corpus, std::string_view csv_text) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty()) throw ValidationError("sidecar-score file has no header row");
  const auto& header = rows.front().fields;
  if (header.empty() || header.front() != "policy_id") {
    throw ValidationError("sidecar-score header must start with policy_id");
  }

  std::map<std::string, std::map<std::string, double>> scores;
  std::vector<std::string> issues;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::string where = "line " + std::to_string(row.line);
    if (row.fields.size() != header.size()) {
      issues.push_back(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(row.fields.size()));
      continue;
    }
    const std::string& id = row.fields.front();
    if (!corpus.find(id)) {
      issues.push_back(where + ": policy_id \"" + id + "\" not in corpus");
      continue;
    }
    if (scores.count(id)) {
      issues.push_back(where + ": duplicate policy_id \"" + id + "\"");
      continue;
    }
    auto& entry = scores[id];
    for (std::size_t c = 1; c < header.size(); ++c) {
      double v = 0.0;
      if (!csv::parse_double(row.fields[c], v) || !std::isfinite(v)) {
        issues.push_back(where + ": column " + header[c] + ": not a finite number");
        continue;
      }
      entry[header[c]] = v;
    }
  }
  if (!issues.empty()) {
    std::string msg = "invalid sidecar-score file:";
    for (const auto& i : issues) msg += "\n  " + i;
    throw ValidationError(msg, issues);
  }

  std::vector<PolicyRecord> records = corpus.records();
  for (auto& rec : records) {
    auto it = scores.find(rec.id);
    if (it == scores.end()) continue;
    for (const auto& [k, v] : it->second) rec.sidecar_scores[k] = v;
  }
  return Corpus(std::move(records));
}

Corpus attach_sidecar_scores(const Corpus& corpus, const std::filesystem::path& path) {
  return attach_sidecar_scores_text(corpus, io::read_file(path));
}

// ------------------------------------------------------------------- split

SplitIndices split(const Corpus& corpus, double ratio, std::uint64_t seed, bool stratified) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("split ratio must lie in (0, 1), got " + csv::format_double(ratio));
  }
  const std::size_t n = corpus.size();
  if (n < 2) throw ValidationError("corpus needs at least 2 records to split");

  long target = std::lround(ratio * static_cast<double>(n));
  target = std::clamp<long>(target, 1, static_cast<long>(n) - 1);

  std::vector<char> in_test(n, 0);
  Rng rng(mix_seed({seed, 0x5B117ULL}));

  if (!stratified) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (long k = 0; k < target; ++k) in_test[order[static_cast<std::size_t>(k)]] = 1;
  } else {
    std::vector<std::vector<std::size_t>> strata(kAllStages.size());
    for (std::size_t i = 0; i < n; ++i) {
      strata[static_cast<std::size_t>(corpus.records()[i].stage)].push_back(i);
    }
    const std::size_t s_count = strata.size();
    std::vector<long> quota(s_count, 0);
    std::vector<double> remainder(s_count, 0.0);
    long assigned = 0;
    for (std::size_t s = 0; s < s_count; ++s) {
      const double share = ratio * static_cast<double>(strata[s].size());
      quota[s] = static_cast<long>(std::floor(share));
      remainder[s] = share - static_cast<double>(quota[s]);
      assigned += quota[s];
    }
    // Largest remainder; ties go to the earlier stage.
    std::vector<std::size_t> by_remainder(s_count);
    for (std::size_t s = 0; s < s_count; ++s) by_remainder[s] = s;
    std::stable_sort(by_remainder.begin(), by_remainder.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < target && k < s_count; ++k) {
      const std::size_t s = by_remainder[k];
      if (quota[s] < static_cast<long>(strata[s].size())) {
        ++quota[s];
        ++assigned;
      }
    }
    for (std::size_t k = s_count; assigned > target && k-- > 0;) {
      const std::size_t s = by_remainder[k];
      if (quota[s] > 0) {
        --quota[s];
        --assigned;
      }
    }
    for (std::size_t s = 0; s < s_count; ++s) {
      auto& members = strata[s];
      rng.shuffle(std::span<std::size_t>(members));
      for (long k = 0; k < quota[s]; ++k) in_test[members[static_cast<std::size_t>(k)]] = 1;
    }
  }

  SplitIndices out;
  out.seed = seed;
  out.ratio = ratio;
  out.stratified = stratified;
  for (std::size_t i = 0; i < n; ++i) {
    (in_test[i] ? out.test_ids : out.train_ids).push_back(corpus.records()[i].id);
  }
  return out;
}

// --------------------------------------------------------------- synthetic

namespace synthetic {
namespace {

struct Weighted {
  std::string_view name;
  double weight;
};

// Sampling weight doubles as the voting-weight lookup value.
constexpr Weighted kCountries[] = {
    {"Germany", 0.186},   {"France", 0.153},   {"Italy", 0.131},     {"Spain", 0.106},
    {"Poland", 0.084},    {"Romania", 0.042},  {"Netherlands", 0.039}, {"Belgium", 0.026},
    {"Czechia", 0.024},   {"Sweden", 0.023},   {"Greece", 0.023},    {"Portugal", 0.023},
    {"Hungary", 0.022},   {"Austria", 0.020},  {"Bulgaria", 0.015},  {"Denmark", 0.013},
    {"Finland", 0.012},   {"Slovakia", 0.012}, {"Ireland", 0.011},   {"Croatia", 0.009},
    {"Lithuania", 0.006}, {"Slovenia", 0.005}, {"Latvia", 0.004},    {"Estonia", 0.003},
    {"Luxembourg", 0.001},
};

constexpr Weighted kParties[] = {
    {"EPP", 0.25},  {"S&D", 0.20},      {"Renew", 0.14}, {"Greens/EFA", 0.10},
    {"ECR", 0.09},  {"ID", 0.08},       {"The Left", 0.05}, {"EFDD", 0.03},
    {"NI-Group", 0.02},
};

constexpr std::string_view kSpotlights[] = {"JD21", "JD22", "JD23", "JD24"};
constexpr Weighted kProcedures[] = {
    {"COD", 0.6}, {"CNS", 0.15}, {"NLE", 0.12}, {"APP", 0.08}, {"RSP", 0.05}};

constexpr std::string_view kNoiseWords[] = {"the", "of", "and", "to", "in", "for", "on", "with"};

template <std::size_t N>
std::string_view draw(Rng& rng, const Weighted (&table)[N]) {
  double total = 0.0;
  for (const auto& w : table) total += w.weight;
  double u = rng.uniform() * total;
  for (const auto& w : table) {
    if (u < w.weight) return w.name;
    u -= w.weight;
  }
  return table[N - 1].name;
}

StageLabel draw_stage(Rng& rng) {
  double u = rng.uniform();
  for (std::size_t k = 0; k < kAllStages.size(); ++k) {
    if (u < kLabelDistribution[k]) return kAllStages[k];
    u -= kLabelDistribution[k];
  }
  return kAllStages.back();
}

std::vector<std::string> pseudo_vocabulary(std::uint64_t seed, int size) {
  static constexpr std::string_view kConsonants = "bdfgklmnprtvz";
  static constexpr std::string_view kVowels = "aeiou";
  const TextPipeline pipeline;
  Rng rng(mix_seed({seed, fnv1a("vocabulary")}));
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (static_cast<int>(words.size()) < size) {
    const int syllables = 2 + static_cast<int>(rng.index(3));
    std::string w;
    for (int s = 0; s < syllables; ++s) {
      w += kConsonants[rng.index(kConsonants.size())];
      w += kVowels[rng.index(kVowels.size())];
    }
    const auto toks = pipeline.tokens(w);
    if (toks.size() != 1 || toks.front() != w) continue;
    if (std::find(kMarkerTokens.begin(), kMarkerTokens.end(), w) != kMarkerTokens.end()) continue;
    if (!seen.insert(w).second) continue;
    words.push_back(std::move(w));
  }
  return words;
}

}  // namespace

std::map<std::string, double> voting_weights() {
  std::map<std::string, double> out;
  for (const auto& c : kCountries) out.emplace(c.name, c.weight);
  return out;
}

std::map<std::string, double> seat_shares() {
  std::map<std::string, double> out;
  for (const auto& p : kParties) out.emplace(p.name, p.weight);
  return out;
}

}  // namespace synthetic

Corpus generate_synthetic(std::uint64_t seed, int n, int vocab_size) {
  using namespace synthetic;
  if (n < 20) throw ValidationError("synthetic corpus needs n >= 20, got " + std::to_string(n));
  if (vocab_size < 50) {
    throw ValidationError("synthetic corpus needs vocab_size >= 50, got " +
                          std::to_string(vocab_size));
  }

  const auto vocab = pseudo_vocabulary(seed, vocab_size);
  Rng rng(mix_seed({seed, fnv1a("records")}));
  std::vector<PolicyRecord> records;
  records.reserve(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    PolicyRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "syn-%04d", i + 1);
    rec.id = id;
    rec.stage = draw_stage(rng);
    const double s = map_stage(rec.stage);

    // Filler drawn with a skew towards low vocabulary ranks.
    std::vector<std::string> words;
    const std::size_t filler = 30 + rng.index(41);
    for (std::size_t k = 0; k < filler; ++k) {
      const double u = rng.uniform();
      words.push_back(vocab[static_cast<std::size_t>(u * u * static_cast<double>(vocab.size()))]);
    }
    // Planted markers: 4 s copies (one more per stage level) plus 0 to 3 extra.
    for (auto marker : kMarkerTokens) {
      const long count = std::lround(4.0 * s) + static_cast<long>(rng.index(4));
      for (long c = 0; c < count; ++c) {
        const std::size_t at = rng.index(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), std::string(marker));
      }
    }
    // Cleaning noise: stop words, digits, punctuation, capitals.
    std::string body;
    for (std::size_t k = 0; k < words.size(); ++k) {
      if (k) body += ' ';
      if (rng.bernoulli(0.15)) {
        body += kNoiseWords[rng.index(std::size(kNoiseWords))];
        body += ' ';
      }
      std::string w = words[k];
      if (rng.bernoulli(0.08)) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
      body += w;
      if (rng.bernoulli(0.05)) body += " 2030";
      if (rng.bernoulli(0.1)) body += rng.bernoulli(0.5) ? "," : ".";
    }
    rec.body = std::move(body);
    rec.title = "Regulation on " + vocab[rng.index(vocab.size())] + " " +
                vocab[rng.index(vocab.size())];

    rec.month = 1 + static_cast<int>(rng.index(12));
    rec.year = 2019 + static_cast<int>(rng.index(6));

    // Planted metadata: missing party support is more likely early on.
    const bool no_party = rng.bernoulli(0.95 - 0.9 * s);
    if (no_party) {
      if (rng.bernoulli(0.5)) {
        Rapporteur rap;
        rap.name = "Rapporteur " + std::to_string(i + 1);
        rap.country = std::string(draw(rng, kCountries));
        rec.rapporteurs.push_back(std::move(rap));
      }
    } else {
      const int count = rng.bernoulli(0.3) ? 2 : 1;
      for (int k = 0; k < count; ++k) {
        Rapporteur rap;
        rap.name = "Rapporteur " + std::to_string(i + 1) + "-" + std::to_string(k + 1);
        rap.country = std::string(draw(rng, kCountries));
        rap.party = std::string(draw(rng, kParties));
        rec.rapporteurs.push_back(std::move(rap));
      }
    }

    if (rng.bernoulli(0.35)) {
      rec.spotlight = std::string(kSpotlights[rng.index(std::size(kSpotlights))]);
    }
    if (rng.bernoulli(0.85)) {
      rec.procedure_type = std::string(draw(rng, kProcedures));
      rec.procedure_year = rec.year - static_cast<int>(rng.index(2));
      rec.legislative = rng.bernoulli(0.8);
    }
    records.push_back(std::move(rec));
  }
  return Corpus(std::move(records));
}

}  // namespace polprog
