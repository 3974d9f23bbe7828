// polprog command-line entry point.
//
// Exit codes: 0 success, 1 invalid input, 2 runtime failure, 64 usage error.

#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polprog/config.hpp"
#include "polprog/corpus.hpp"
#include "polprog/csv.hpp"
#include "polprog/error.hpp"
#include "polprog/io.hpp"
#include "polprog/pipeline.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitUsage = 64;

void log_line(const std::string& line) { std::cerr << "[polprog] " << line << "\n"; }

/// Flag values collected before the config file is applied, so that
/// flags can override it.
struct Flags {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> set;
  std::optional<std::string> out_root;
  bool provenance = false;

  std::map<std::string, std::string> paths;    // key -> path text
  std::map<std::string, std::string> values;   // key -> value text
  std::vector<std::string> representations;
  bool no_stratify = false;
  std::optional<std::string> run_dir;
};

void add_path(CLI::App* app, Flags& f, const std::string& flag, const std::string& key,
              const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&f, key](const std::string& v) { f.paths[key] = v; }, help);
}

void add_value(CLI::App* app, Flags& f, const std::string& flag, const std::string& key,
               const std::string& help) {
  app->add_option_function<std::string>(
      flag, [&f, key](const std::string& v) { f.values[key] = v; }, help);
}

void add_input_options(CLI::App* app, Flags& f) {
  add_path(app, f, "--corpus", "corpus", "Policy corpus (JSONL)");
  add_path(app, f, "--scores", "scores", "Sidecar classifier scores (CSV)");
}

void add_feature_options(CLI::App* app, Flags& f) {
  add_path(app, f, "--embedding-a", "embedding.embedding_a", "Embedding sidecar for embedding_a");
  add_path(app, f, "--embedding-b", "embedding.embedding_b", "Embedding sidecar for embedding_b");
  add_path(app, f, "--voting-weights", "lookups.voting_weights", "Country voting-weight table (CSV)");
  add_path(app, f, "--seat-shares", "lookups.seat_shares", "Party seat-share table (CSV)");
  add_value(app, f, "--ratio", "split.ratio", "Test fraction in (0, 1)");
  app->add_flag("--no-stratify", f.no_stratify, "Plain random split instead of per-stage");
  add_value(app, f, "--min-df", "tfidf.min_df", "Minimum document frequency for TF-IDF tokens");
  add_value(app, f, "--max-features", "tfidf.max_features", "Keep at most this many TF-IDF tokens (0: all)");
  add_value(app, f, "--jobs", "jobs", "Grid cells to run concurrently");
}

void add_grid_options(CLI::App* app, Flags& f) {
  app->add_option("--representation", f.representations,
                  "Representation to include (tfidf, embedding_a, embedding_b); repeatable")
      ->delimiter(',');
}

void add_explain_options(CLI::App* app, Flags& f) {
  add_value(app, f, "--repeats", "explain.repeats", "Permutation repeats per feature");
  add_value(app, f, "--background", "explain.background_size", "SHAP background rows");
  add_value(app, f, "--mc-samples", "explain.mc_samples", "Monte-Carlo SHAP samples per row");
  add_value(app, f, "--explain-rows", "explain.rows", "Explain the first N test rows (0: all)");
  add_value(app, f, "--explain-representation", "explain.representation",
            "Representation used for explanations");
  add_value(app, f, "--importance-model", "explain.importance_model", "Model for permutation importance");
  add_value(app, f, "--shap-model", "explain.shap_model", "Model for SHAP values");
}

void add_report_options(CLI::App* app, Flags& f) {
  add_value(app, f, "--top-k", "report.top_k", "Features shown per chart");
}

polprog::RunConfig resolve(const Flags& f) {
  polprog::RunConfig config;
  // Precedence: flag > config file > POLPROG_OUT_ROOT > built-in default.
  if (const char* env = std::getenv("POLPROG_OUT_ROOT"); env && *env) config.output_root = env;
  if (!f.config_file.empty()) {
    const std::string text = polprog::io::read_file(f.config_file);
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw polprog::ValidationError(f.config_file + ": not valid JSON");
    config.merge(doc);
  }
  for (const auto& [key, path] : f.paths) config.set(key, nlohmann::json(path));
  for (const auto& [key, text] : f.values) config.set_from_string(key, text);
  if (!f.representations.empty()) config.set("grid.representations", nlohmann::json(f.representations));
  if (f.no_stratify) config.stratified = false;
  if (f.seed) config.seed = *f.seed;
  if (f.out_root) config.output_root = *f.out_root;
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw polprog::ValidationError("--set expects key=value, got '" + kv + "'");
    }
    config.set_from_string(kv.substr(0, eq), kv.substr(eq + 1));
  }
  config.validate();
  return config;
}

void print_corpus_summary(const polprog::Corpus& corpus) {
  std::map<polprog::StageLabel, std::size_t> histogram;
  for (const auto& r : corpus.records()) ++histogram[r.stage];
  std::cout << "records: " << corpus.size() << "\n";
  for (auto label : polprog::kAllStages) {
    std::cout << "  " << polprog::stage_name(label) << ": " << histogram[label] << "\n";
  }
}

void write_lookup(const std::filesystem::path& path, const std::map<std::string, double>& table) {
  std::string text = "key,value\n";
  for (const auto& [k, v] : table) text += polprog::csv::join({k, polprog::csv::format_double(v)}) + "\n";
  polprog::io::write_new_file(path, text);
}

std::filesystem::path open_run_dir(const Flags& f, const polprog::RunConfig& config) {
  if (f.run_dir) {
    if (!std::filesystem::is_directory(*f.run_dir)) {
      throw polprog::ValidationError("run directory not found: " + *f.run_dir);
    }
    return *f.run_dir;
  }
  const auto dir = polprog::create_run_dir(config.output_root, config.hash());
  polprog::write_run_header(config, dir);
  log_line("run directory " + dir.string());
  return dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Explainable climate-policy progression pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags flags;
  app.add_option("--config", flags.config_file, "JSON config of dotted keys")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Seed for every random choice");
  app.add_option("--set", flags.set, "Override a config key (key=value); repeatable");
  app.add_option("--out-root", flags.out_root, "Directory that receives run directories");
  app.add_flag("--provenance", flags.provenance, "Print data-file and config hashes as JSON");

  auto* validate_cmd = app.add_subcommand("validate", "Check a corpus and print a label histogram");
  add_input_options(validate_cmd, flags);

  int synth_n = 300;
  int synth_vocab = 400;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-signal synthetic corpus");
  synth_cmd->add_option("--n", synth_n, "Number of policies")->capture_default_str();
  synth_cmd->add_option("--vocab", synth_vocab, "Filler vocabulary size")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  auto* grid_cmd = app.add_subcommand("grid", "Run the representation x model benchmark grid");
  add_input_options(grid_cmd, flags);
  add_feature_options(grid_cmd, flags);
  add_grid_options(grid_cmd, flags);

  auto* explain_cmd = app.add_subcommand("explain", "Permutation importance and SHAP values");
  add_input_options(explain_cmd, flags);
  add_feature_options(explain_cmd, flags);
  add_explain_options(explain_cmd, flags);
  explain_cmd->add_option_function<std::string>(
      "--run-dir", [&flags](const std::string& v) { flags.run_dir = v; },
      "Existing run directory to add outputs to");

  auto* report_cmd = app.add_subcommand("report", "Render charts from an explained run directory");
  add_report_options(report_cmd, flags);
  report_cmd->add_option_function<std::string>(
      "--run-dir", [&flags](const std::string& v) { flags.run_dir = v; }, "Run directory")
      ->required();

  auto* all_cmd = app.add_subcommand("all", "grid, explain and report into one run directory");
  add_input_options(all_cmd, flags);
  add_feature_options(all_cmd, flags);
  add_grid_options(all_cmd, flags);
  add_explain_options(all_cmd, flags);
  add_report_options(all_cmd, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    polprog::RunConfig config = resolve(flags);
    if (flags.provenance) std::cout << polprog::provenance(config).dump(2) << "\n";

    if (*validate_cmd) {
      print_corpus_summary(polprog::load_corpus(config));
    } else if (*synth_cmd) {
      const polprog::Corpus corpus = polprog::generate_synthetic(config.seed, synth_n, synth_vocab);
      const std::filesystem::path out = synth_out;
      polprog::io::write_new_file(out / "corpus.jsonl", polprog::to_jsonl(corpus));
      write_lookup(out / "voting_weights.csv", polprog::synthetic::voting_weights());
      write_lookup(out / "seat_shares.csv", polprog::synthetic::seat_shares());
      log_line("wrote " + std::to_string(corpus.size()) + " synthetic policies to " + out.string());
    } else if (*grid_cmd) {
      const polprog::Corpus corpus = polprog::load_corpus(config);
      const auto dir = open_run_dir(flags, config);
      polprog::grid_step(config, corpus, dir, log_line);
      std::cout << dir.string() << "\n";
    } else if (*explain_cmd) {
      const polprog::Corpus corpus = polprog::load_corpus(config);
      const auto dir = open_run_dir(flags, config);
      polprog::explain_step(config, corpus, dir, log_line);
      std::cout << dir.string() << "\n";
    } else if (*report_cmd) {
      polprog::report_step(config, *flags.run_dir, log_line);
    } else if (*all_cmd) {
      const polprog::Corpus corpus = polprog::load_corpus(config);
      const auto dir = open_run_dir(flags, config);
      polprog::grid_step(config, corpus, dir, log_line);
      polprog::explain_step(config, corpus, dir, log_line);
      polprog::report_step(config, dir, log_line);
      std::cout << dir.string() << "\n";
    }
    return 0;
  } catch (const polprog::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& issue : e.issues()) std::cerr << "  " << issue << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
