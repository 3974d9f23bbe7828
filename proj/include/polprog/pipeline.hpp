#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "polprog/config.hpp"
#include "polprog/corpus.hpp"
#include "polprog/eval.hpp"
#include "polprog/explain.hpp"

namespace polprog {

/// Progress callback for the run steps; receives one plain-text line.
using LogFn = std::function<void(const std::string&)>;

/// Reads the configured corpus and merges the sidecar scores, if any.
/// Throws ValidationError when no corpus is configured.
Corpus load_corpus(const RunConfig& config);

/// Creates `<root>/<UTC yyyymmddTHHMMSSZ>-<first 8 hex of config hash>`,
/// adding "-2", "-3", ... when the name is taken. Never reuses a directory.
std::filesystem::path create_run_dir(const std::filesystem::path& root,
                                     const std::string& config_hash);

/// Config hash, bundled data-file hashes and SHA-256 of every input file.
nlohmann::json provenance(const RunConfig& config);

/// Writes config.json and provenance.json into a fresh run directory.
void write_run_header(const RunConfig& config, const std::filesystem::path& run_dir);

/// Runs the grid and writes grid.csv and grid.md.
GridResult grid_step(const RunConfig& config, const Corpus& corpus,
                     const std::filesystem::path& run_dir, const LogFn& log = {});

struct ExplainResult {
  ImportanceReport importance;
  ShapMatrix shap;
  FeatureMatrix shap_feature_values;
};

/// Fits the importance and SHAP models on the explanation representation
/// (with metadata) and writes importance.csv and shap.csv.
ExplainResult explain_step(const RunConfig& config, const Corpus& corpus,
                           const std::filesystem::path& run_dir, const LogFn& log = {});

/// Renders importance.svg and shap_summary.svg from the CSVs in run_dir.
void report_step(const RunConfig& config, const std::filesystem::path& run_dir,
                 const LogFn& log = {});

}  // namespace polprog
