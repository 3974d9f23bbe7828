#include "polprog/pipeline.hpp"

#include <chrono>
#include <ctime>

#include "polprog/error.hpp"
#include "polprog/hash.hpp"
#include "polprog/io.hpp"
#include "polprog/report.hpp"
#include "polprog/textprep.hpp"

namespace polprog {

using nlohmann::json;

namespace {

void emit(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

}  // namespace

Corpus load_corpus(const RunConfig& config) {
  if (!config.corpus) throw ValidationError("no corpus configured (use --corpus or the 'corpus' key)");
  Corpus corpus = parse_corpus(*config.corpus);
  if (config.scores) corpus = attach_sidecar_scores(corpus, *config.scores);
  return corpus;
}

std::filesystem::path create_run_dir(const std::filesystem::path& root,
                                     const std::string& config_hash) {
  std::filesystem::create_directories(root);
  const std::string base = utc_stamp() + "-" + config_hash.substr(0, 8);
  for (int attempt = 1; attempt < 10000; ++attempt) {
    const std::filesystem::path dir = root / (attempt == 1 ? base : base + "-" + std::to_string(attempt));
    // create_directory reports false when the directory already existed.
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw Error("could not create a fresh run directory under " + root.string());
}

json provenance(const RunConfig& config) {
  json out;
  out["tool"] = "polprog";
  out["config_hash"] = config.hash();
  json data = json::object();
  for (const auto& [name, digest] : data_file_hashes()) data[name] = digest;
  out["bundled_data_sha256"] = data;
  json inputs = json::object();
  auto add = [&](const char* key, const std::optional<std::filesystem::path>& p) {
    if (p) inputs[key] = {{"path", p->string()}, {"sha256", sha256_file(*p)}};
  };
  add("corpus", config.corpus);
  add("scores", config.scores);
  add("embedding_a", config.embedding_a);
  add("embedding_b", config.embedding_b);
  add("voting_weights", config.voting_weights);
  add("seat_shares", config.seat_shares);
  out["inputs_sha256"] = inputs;
  return out;
}

void write_run_header(const RunConfig& config, const std::filesystem::path& run_dir) {
  io::write_new_file(run_dir / "config.json", config.to_flat_json().dump(2) + "\n");
  io::write_new_file(run_dir / "provenance.json", provenance(config).dump(2) + "\n");
}

GridResult grid_step(const RunConfig& config, const Corpus& corpus,
                     const std::filesystem::path& run_dir, const LogFn& log) {
  const GridConfig grid = config.grid_config();
  emit(log, "grid: " + std::to_string(corpus.size()) + " policies, split ratio " +
                std::to_string(config.split_ratio) + ", seed " + std::to_string(config.seed));
  GridResult result = run_grid(corpus, grid);
  const GridTables tables = render_grid(result);
  io::write_new_file(run_dir / "grid.csv", tables.csv);
  io::write_new_file(run_dir / "grid.md", tables.markdown);
  emit(log, "grid: wrote " + std::to_string(result.rows.size()) + " cells to " +
                (run_dir / "grid.csv").string());
  return result;
}

ExplainResult explain_step(const RunConfig& config, const Corpus& corpus,
                           const std::filesystem::path& run_dir, const LogFn& log) {
  const SplitIndices shared = split(corpus, config.split_ratio, config.seed, config.stratified);
  const Featurizer featurizer(corpus, config.featurize_config(), shared);
  const Representation rep = config.explain_representation;
  const FeatureSet fs = featurizer.build(rep);
  for (const auto& w : fs.schema.warnings) emit(log, "warning: " + w);

  auto spec_for = [&](ModelKind kind) {
    RegressorSpec spec = RegressorSpec::defaults(kind);
    if (auto it = config.hyperparameters.find(kind); it != config.hyperparameters.end()) {
      spec.hyperparameters = it->second;
    }
    spec.seed = cell_seed(config.seed, rep, kind, true);
    return spec;
  };

  ExplainResult out;
  emit(log, "explain: permutation importance with " +
                std::string(kind_name(config.importance_model)) + " on " +
                std::string(representation_name(rep)) + " + metadata");
  const TrainedModel importance_model =
      fit(spec_for(config.importance_model), fs.train_with_metadata, fs.y_train);
  PermutationOptions perm;
  perm.repeats = config.repeats;
  perm.seed = config.seed;
  perm.group_embeddings = rep != Representation::Tfidf;
  out.importance = permutation_importance(importance_model, fs.test_with_metadata, fs.y_test, perm);
  io::write_new_file(run_dir / "importance.csv", importance_to_csv(out.importance));

  emit(log, "explain: SHAP values with " + std::string(kind_name(config.shap_model)));
  const TrainedModel shap_model = fit(spec_for(config.shap_model), fs.train_with_metadata, fs.y_train);
  const FeatureMatrix background =
      sample_background(fs.train_with_metadata, config.background_size, config.seed);
  FeatureMatrix rows = fs.test_with_metadata;
  if (config.explain_rows > 0 && config.explain_rows < rows.rows()) {
    std::vector<std::string> ids(rows.row_ids.begin(),
                                 rows.row_ids.begin() + static_cast<std::ptrdiff_t>(config.explain_rows));
    rows = rows.select_rows(ids);
  }
  ShapOptions options;
  options.mc_samples = config.mc_samples;
  options.seed = config.seed;
  out.shap = shap(shap_model, rows, background, options);
  out.shap_feature_values = rows;
  io::write_new_file(run_dir / "shap.csv", shap_to_csv(out.shap, rows));
  emit(log, "explain: wrote importance.csv and shap.csv (" +
                std::string(shap_method_name(out.shap.method)) + ", " +
                std::to_string(rows.rows()) + " rows, background " +
                std::to_string(background.rows()) + ")");
  return out;
}

void report_step(const RunConfig& config, const std::filesystem::path& run_dir, const LogFn& log) {
  const ImportanceReport importance = importance_from_csv(io::read_file(run_dir / "importance.csv"));
  const ShapTable raw = shap_from_csv(io::read_file(run_dir / "shap.csv"));
  const ShapTable table = collapse_embedding_columns(raw.matrix, raw.feature_values);

  ChartSpec importance_spec;
  importance_spec.title = "Permutation feature importance";
  importance_spec.top_k = config.top_k;
  const SvgOutput bars = render_importance_chart(importance, importance_spec);
  for (const auto& w : bars.warnings) emit(log, "warning: " + w);
  io::write_new_file(run_dir / "importance.svg", bars.svg);

  ChartSpec shap_spec;
  shap_spec.title = "SHAP summary (" + std::string(shap_method_name(table.matrix.method)) + ")";
  shap_spec.top_k = config.top_k;
  const SvgOutput summary = render_shap_summary(table.matrix, table.feature_values, shap_spec);
  for (const auto& w : summary.warnings) emit(log, "warning: " + w);
  io::write_new_file(run_dir / "shap_summary.svg", summary.svg);
  emit(log, "report: wrote importance.svg and shap_summary.svg");
}

}  // namespace polprog
