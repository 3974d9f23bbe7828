#include "polprog/eval.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <thread>

#include "polprog/error.hpp"
#include "polprog/rng.hpp"

namespace polprog {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat, std::size_t min_n,
                   const char* what) {
  if (y.size() != yhat.size()) {
    throw ValidationError(std::string(what) + ": length mismatch (" + std::to_string(y.size()) +
                          " targets, " + std::to_string(yhat.size()) + " predictions)");
  }
  if (y.size() < min_n) {
    throw ValidationError(std::string(what) + ": needs at least " + std::to_string(min_n) +
                          " values");
  }
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - yhat[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

double r2(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 2, "r2");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_tot += (y[i] - mean) * (y[i] - mean);
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  }
  if (!(ss_tot > 0.0)) throw ValidationError("r2 is undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

Metrics evaluate(std::span<const double> y, std::span<const double> yhat) {
  return Metrics{rmse(y, yhat), r2(y, yhat), y.size()};
}

StageLevel snap_to_category(double yhat) {
  if (!std::isfinite(yhat)) throw ValidationError("snap_to_category: non-finite prediction");
  const double v = std::clamp(yhat, 0.0, 1.0) * 4.0;
  // Nearest quarter, exact midpoints going down.
  const double lower = std::floor(v);
  const int level = static_cast<int>(v - lower > 0.5 ? lower + 1.0 : lower);
  return static_cast<StageLevel>(std::min(level, 4));
}

double stage_accuracy(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat, 1, "stage_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (snap_to_category(y[i]) == snap_to_category(yhat[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

std::string_view representation_name(Representation rep) {
  switch (rep) {
    case Representation::Tfidf: return "tfidf";
    case Representation::EmbeddingA: return "embedding_a";
    case Representation::EmbeddingB: return "embedding_b";
  }
  return "?";
}

std::optional<Representation> parse_representation(std::string_view text) {
  for (auto r : kAllRepresentations) {
    if (text == representation_name(r)) return r;
  }
  return std::nullopt;
}

// -------------------------------------------------------------- Featurizer

Featurizer::Featurizer(const Corpus& corpus, const FeaturizeConfig& config,
                       const SplitIndices& split)
    : corpus_(corpus), config_(config), split_(split) {
  train_records_ = corpus_.select(split_.train_ids);
  test_records_ = corpus_.select(split_.test_ids);
  schema_ = fit_metadata_schema(train_records_, config_.lookups);
  meta_train_ = encode_metadata(train_records_, schema_);
  meta_test_ = encode_metadata(test_records_, schema_);
}

namespace {

std::vector<CleanDoc> clean_docs(const TextPipeline& pipeline,
                                 const std::vector<PolicyRecord>& records) {
  std::vector<CleanDoc> docs;
  docs.reserve(records.size());
  for (const auto& r : records) docs.push_back(pipeline(r.id, r.title + "\n" + r.body));
  return docs;
}

std::vector<double> targets(const std::vector<PolicyRecord>& records) {
  std::vector<double> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(map_stage(r.stage));
  return y;
}

}  // namespace

FeatureSet Featurizer::build(Representation rep) const {
  FeatureSet set;
  set.split = split_;
  set.schema = schema_;
  set.y_train = targets(train_records_);
  set.y_test = targets(test_records_);

  if (rep == Representation::Tfidf) {
    const TextPipeline pipeline;
    const auto train_docs = clean_docs(pipeline, train_records_);
    const auto test_docs = clean_docs(pipeline, test_records_);
    const TfidfModel model = fit_tfidf(train_docs, config_.min_df, config_.max_features);
    set.train = transform_tfidf(model, train_docs);
    set.test = transform_tfidf(model, test_docs);
  } else {
    const auto& path = rep == Representation::EmbeddingA ? config_.embedding_a : config_.embedding_b;
    if (!path) {
      throw ValidationError("no embedding sidecar configured for representation " +
                            std::string(representation_name(rep)));
    }
    const EmbeddingTable table = load_embeddings(*path);
    set.train = embedding_block(table, split_.train_ids);
    set.test = embedding_block(table, split_.test_ids);
  }

  const std::array<FeatureMatrix, 2> train_blocks{set.train, meta_train_};
  const std::array<FeatureMatrix, 2> test_blocks{set.test, meta_test_};
  set.train_with_metadata = assemble(train_blocks);
  set.test_with_metadata = assemble(test_blocks);
  return set;
}

std::uint64_t cell_seed(std::uint64_t seed, Representation rep, ModelKind kind,
                        bool with_metadata) {
  return mix_seed({seed, fnv1a(representation_name(rep)), fnv1a(kind_name(kind)),
                   with_metadata ? 1ULL : 0ULL});
}

// ---------------------------------------------------------------- run_grid

GridResult run_grid(const Corpus& corpus, const GridConfig& config) {
  std::vector<Representation> reps = config.representations;
  if (reps.empty()) {
    reps.push_back(Representation::Tfidf);
    if (config.features.embedding_a) reps.push_back(Representation::EmbeddingA);
    if (config.features.embedding_b) reps.push_back(Representation::EmbeddingB);
  }
  for (std::size_t i = 0; i < reps.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (reps[i] == reps[j]) {
        throw ValidationError("representation listed twice: " +
                              std::string(representation_name(reps[i])));
      }
    }
  }
  if (config.models.empty()) throw ValidationError("grid needs at least one model kind");
  for (const auto& [kind, params] : config.hyperparameters) {
    RegressorSpec spec{kind, params, config.seed};
    spec.validate();
  }

  const SplitIndices shared = split(corpus, config.split_ratio, config.seed, config.stratified);
  const Featurizer featurizer(corpus, config.features, shared);
  std::vector<FeatureSet> sets;
  sets.reserve(reps.size());
  for (auto rep : reps) sets.push_back(featurizer.build(rep));

  struct Cell {
    std::size_t set = 0;
    ModelKind kind = ModelKind::BayesianRidge;
    bool with_metadata = false;
  };
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < reps.size(); ++s) {
    for (bool meta : {true, false}) {
      for (auto kind : config.models) cells.push_back({s, kind, meta});
    }
  }

  GridResult result;
  result.rows.resize(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  auto run_cell = [&](std::size_t c) {
    try {
      const Cell& cell = cells[c];
      const FeatureSet& fs = sets[cell.set];
      RegressorSpec spec = RegressorSpec::defaults(cell.kind);
      if (auto it = config.hyperparameters.find(cell.kind); it != config.hyperparameters.end()) {
        spec.hyperparameters = it->second;
      }
      spec.seed = cell_seed(config.seed, reps[cell.set], cell.kind, cell.with_metadata);
      const FeatureMatrix& train = cell.with_metadata ? fs.train_with_metadata : fs.train;
      const FeatureMatrix& test = cell.with_metadata ? fs.test_with_metadata : fs.test;
      const TrainedModel model = fit(spec, train, fs.y_train);
      const Eigen::VectorXd yhat = predict(model, test);
      const std::span<const double> pred(yhat.data(), static_cast<std::size_t>(yhat.size()));

      GridRow& row = result.rows[c];
      row.representation = reps[cell.set];
      row.model = cell.kind;
      row.with_metadata = cell.with_metadata;
      row.metrics = evaluate(fs.y_test, pred);
      row.stage_accuracy = stage_accuracy(fs.y_test, pred);
      row.seed = spec.seed;
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  const unsigned jobs = std::max(1U, std::min<unsigned>(config.jobs, static_cast<unsigned>(cells.size())));
  if (jobs == 1) {
    for (std::size_t c = 0; c < cells.size(); ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < jobs; ++t) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < cells.size(); c = next++) run_cell(c);
      });
    }
    for (auto& w : workers) w.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

}  // namespace polprog
