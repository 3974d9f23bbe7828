#include "polprog/config.hpp"

#include <cmath>

#include "polprog/error.hpp"
#include "polprog/hash.hpp"
#include "polprog/io.hpp"

namespace polprog {

using nlohmann::json;

namespace {

std::string key_error(std::string_view key, const std::string& what) {
  return "config key '" + std::string(key) + "': " + what;
}

std::filesystem::path as_path(std::string_view key, const json& v) {
  if (!v.is_string() || v.get<std::string>().empty()) {
    throw ValidationError(key_error(key, "expected a non-empty path string"));
  }
  return v.get<std::string>();
}

std::optional<std::filesystem::path> as_optional_path(std::string_view key, const json& v) {
  if (v.is_null()) return std::nullopt;
  return as_path(key, v);
}

double as_number(std::string_view key, const json& v) {
  if (!v.is_number()) throw ValidationError(key_error(key, "expected a number"));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ValidationError(key_error(key, "expected a finite number"));
  return d;
}

std::uint64_t as_count(std::string_view key, const json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw ValidationError(key_error(key, "expected a non-negative integer"));
}

bool as_bool(std::string_view key, const json& v) {
  if (!v.is_boolean()) throw ValidationError(key_error(key, "expected true or false"));
  return v.get<bool>();
}

std::string as_string(std::string_view key, const json& v) {
  if (!v.is_string()) throw ValidationError(key_error(key, "expected a string"));
  return v.get<std::string>();
}

Representation as_representation(std::string_view key, const json& v) {
  const std::string s = as_string(key, v);
  auto rep = parse_representation(s);
  if (!rep) throw ValidationError(key_error(key, "unknown representation '" + s + "'"));
  return *rep;
}

ModelKind as_kind(std::string_view key, const json& v) {
  const std::string s = as_string(key, v);
  auto kind = parse_kind(s);
  if (!kind) throw ValidationError(key_error(key, "unknown model kind '" + s + "'"));
  return *kind;
}

json path_json(const std::optional<std::filesystem::path>& p) {
  return p ? json(p->string()) : json(nullptr);
}

const std::vector<std::string> kStaticKeys = {
    "corpus",
    "scores",
    "embedding.embedding_a",
    "embedding.embedding_b",
    "lookups.voting_weights",
    "lookups.seat_shares",
    "seed",
    "split.ratio",
    "split.stratified",
    "tfidf.min_df",
    "tfidf.max_features",
    "grid.representations",
    "explain.repeats",
    "explain.background_size",
    "explain.mc_samples",
    "explain.rows",
    "explain.representation",
    "explain.importance_model",
    "explain.shap_model",
    "report.top_k",
    "jobs",
    "output.root",
};

}  // namespace

void RunConfig::set(std::string_view key, const json& value) {
  if (key == "corpus") {
    corpus = as_optional_path(key, value);
  } else if (key == "scores") {
    scores = as_optional_path(key, value);
  } else if (key == "embedding.embedding_a") {
    embedding_a = as_optional_path(key, value);
  } else if (key == "embedding.embedding_b") {
    embedding_b = as_optional_path(key, value);
  } else if (key == "lookups.voting_weights") {
    voting_weights = as_optional_path(key, value);
  } else if (key == "lookups.seat_shares") {
    seat_shares = as_optional_path(key, value);
  } else if (key == "seed") {
    seed = as_count(key, value);
  } else if (key == "split.ratio") {
    split_ratio = as_number(key, value);
  } else if (key == "split.stratified") {
    stratified = as_bool(key, value);
  } else if (key == "tfidf.min_df") {
    min_df = as_count(key, value);
  } else if (key == "tfidf.max_features") {
    max_features = as_count(key, value);
  } else if (key == "grid.representations") {
    std::vector<Representation> reps;
    if (value.is_string()) {
      const std::string s = value.get<std::string>();
      std::size_t start = 0;
      while (start <= s.size()) {
        const std::size_t comma = std::min(s.find(',', start), s.size());
        const std::string item = s.substr(start, comma - start);
        if (!item.empty()) reps.push_back(as_representation(key, item));
        start = comma + 1;
      }
    } else if (value.is_array()) {
      for (const auto& item : value) reps.push_back(as_representation(key, item));
    } else {
      throw ValidationError(key_error(key, "expected a list of representation names"));
    }
    representations = std::move(reps);
  } else if (key == "explain.repeats") {
    repeats = static_cast<int>(as_count(key, value));
  } else if (key == "explain.background_size") {
    background_size = as_count(key, value);
  } else if (key == "explain.mc_samples") {
    mc_samples = as_count(key, value);
  } else if (key == "explain.rows") {
    explain_rows = as_count(key, value);
  } else if (key == "explain.representation") {
    explain_representation = as_representation(key, value);
  } else if (key == "explain.importance_model") {
    importance_model = as_kind(key, value);
  } else if (key == "explain.shap_model") {
    shap_model = as_kind(key, value);
  } else if (key == "report.top_k") {
    top_k = static_cast<int>(as_count(key, value));
  } else if (key == "jobs") {
    jobs = static_cast<unsigned>(as_count(key, value));
  } else if (key == "output.root") {
    output_root = as_path(key, value);
  } else if (key.starts_with("model.")) {
    const std::string_view rest = key.substr(6);
    const std::size_t dot = rest.find('.');
    if (dot == std::string_view::npos) {
      throw ValidationError(key_error(key, "expected model.<kind>.<hyperparameter>"));
    }
    auto kind = parse_kind(rest.substr(0, dot));
    if (!kind) throw ValidationError(key_error(key, "unknown model kind"));
    const std::string name(rest.substr(dot + 1));
    RegressorSpec probe = RegressorSpec::defaults(*kind);
    probe.hyperparameters[name] = as_number(key, value);
    probe.get(name);  // rejects unknown names
    hyperparameters[*kind][name] = probe.hyperparameters[name];
  } else {
    throw ValidationError("unknown config key '" + std::string(key) + "'");
  }
}

void RunConfig::set_from_string(std::string_view key, std::string_view text) {
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded() || value.is_object()) value = std::string(text);
  set(key, value);
}

void RunConfig::merge(const json& flat) {
  if (!flat.is_object()) throw ValidationError("config must be a JSON object of dotted keys");
  for (const auto& [key, value] : flat.items()) set(key, value);
}

json RunConfig::to_flat_json() const {
  json out = json::object();
  out["corpus"] = path_json(corpus);
  out["scores"] = path_json(scores);
  out["embedding.embedding_a"] = path_json(embedding_a);
  out["embedding.embedding_b"] = path_json(embedding_b);
  out["lookups.voting_weights"] = path_json(voting_weights);
  out["lookups.seat_shares"] = path_json(seat_shares);
  out["seed"] = seed;
  out["split.ratio"] = split_ratio;
  out["split.stratified"] = stratified;
  out["tfidf.min_df"] = min_df;
  out["tfidf.max_features"] = max_features;
  json reps = json::array();
  for (auto r : representations) reps.push_back(std::string(representation_name(r)));
  out["grid.representations"] = reps;
  out["explain.repeats"] = repeats;
  out["explain.background_size"] = background_size;
  out["explain.mc_samples"] = mc_samples;
  out["explain.rows"] = explain_rows;
  out["explain.representation"] = std::string(representation_name(explain_representation));
  out["explain.importance_model"] = std::string(kind_name(importance_model));
  out["explain.shap_model"] = std::string(kind_name(shap_model));
  out["report.top_k"] = top_k;
  out["jobs"] = jobs;
  out["output.root"] = output_root.string();
  for (const auto& [kind, params] : hyperparameters) {
    for (const auto& [name, value] : params) {
      out["model." + std::string(kind_name(kind)) + "." + name] = value;
    }
  }
  return out;
}

std::string RunConfig::hash() const {
  json flat = to_flat_json();
  // Settings that cannot change results stay out of the hash.
  flat.erase("jobs");
  flat.erase("output.root");
  return sha256_hex(flat.dump());
}

void RunConfig::validate() const {
  std::vector<std::string> issues;
  auto check_file = [&](const char* key, const std::optional<std::filesystem::path>& p) {
    if (p && !std::filesystem::is_regular_file(*p)) {
      issues.push_back(std::string(key) + ": file not found: " + p->string());
    }
  };
  check_file("corpus", corpus);
  check_file("scores", scores);
  check_file("embedding.embedding_a", embedding_a);
  check_file("embedding.embedding_b", embedding_b);
  check_file("lookups.voting_weights", voting_weights);
  check_file("lookups.seat_shares", seat_shares);
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) issues.push_back("split.ratio must lie in (0, 1)");
  if (min_df < 1) issues.push_back("tfidf.min_df must be >= 1");
  if (repeats < 1) issues.push_back("explain.repeats must be >= 1");
  if (background_size < 1) issues.push_back("explain.background_size must be >= 1");
  if (mc_samples < 2) issues.push_back("explain.mc_samples must be >= 2");
  if (top_k < 1) issues.push_back("report.top_k must be >= 1");
  if (jobs < 1) issues.push_back("jobs must be >= 1");
  for (const auto& [kind, params] : hyperparameters) {
    try {
      RegressorSpec{kind, params, seed}.validate();
    } catch (const ValidationError& e) {
      issues.emplace_back(e.what());
    }
  }
  for (auto rep : representations) {
    if (rep == Representation::EmbeddingA && !embedding_a) {
      issues.push_back("grid.representations names embedding_a but embedding.embedding_a is not set");
    }
    if (rep == Representation::EmbeddingB && !embedding_b) {
      issues.push_back("grid.representations names embedding_b but embedding.embedding_b is not set");
    }
  }
  if (!issues.empty()) {
    std::string msg = "invalid configuration: " + issues.front();
    if (issues.size() > 1) msg += " (and " + std::to_string(issues.size() - 1) + " more)";
    throw ValidationError(msg, issues);
  }
}

MetadataLookups RunConfig::lookups() const {
  MetadataLookups out;
  if (voting_weights) out.voting_weight = load_lookup_csv(*voting_weights);
  if (seat_shares) out.seat_share = load_lookup_csv(*seat_shares);
  return out;
}

FeaturizeConfig RunConfig::featurize_config() const {
  FeaturizeConfig out;
  out.min_df = min_df;
  if (max_features > 0) out.max_features = max_features;
  out.lookups = lookups();
  out.embedding_a = embedding_a;
  out.embedding_b = embedding_b;
  return out;
}

GridConfig RunConfig::grid_config() const {
  GridConfig out;
  out.features = featurize_config();
  out.representations = representations;
  out.hyperparameters = hyperparameters;
  out.split_ratio = split_ratio;
  out.stratified = stratified;
  out.seed = seed;
  out.jobs = jobs;
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out = kStaticKeys;
  for (auto kind : kAllModelKinds) {
    for (const auto& [name, value] : default_hyperparameters(kind)) {
      out.push_back("model." + std::string(kind_name(kind)) + "." + name);
    }
  }
  return out;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  RunConfig config;
  config.merge(doc);
  return config;
}

}  // namespace polprog
