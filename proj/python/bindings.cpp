#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <string>
#include <vector>

#include "polprog/config.hpp"
#include "polprog/corpus.hpp"
#include "polprog/error.hpp"
#include "polprog/eval.hpp"
#include "polprog/explain.hpp"
#include "polprog/features.hpp"
#include "polprog/models.hpp"
#include "polprog/pipeline.hpp"
#include "polprog/report.hpp"
#include "polprog/textprep.hpp"

namespace py = pybind11;
using namespace polprog;

namespace {

FeatureMatrix make_matrix(const Eigen::MatrixXd& values, std::vector<std::string> names,
                          std::vector<std::string> row_ids, std::vector<FeatureGroup> groups) {
  FeatureMatrix m;
  if (names.empty()) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) names.push_back("x" + std::to_string(j));
  }
  if (row_ids.empty()) {
    for (Eigen::Index i = 0; i < values.rows(); ++i) row_ids.push_back("r" + std::to_string(i));
  }
  if (groups.empty()) groups.assign(names.size(), FeatureGroup::Metadata);
  if (groups.size() != names.size()) throw ValidationError("groups and columns differ in length");
  for (std::size_t j = 0; j < names.size(); ++j) m.columns.push_back({names[j], groups[j]});
  m.row_ids = std::move(row_ids);
  m.values = values;
  m.validate();
  return m;
}

std::vector<CleanDoc> to_docs(const std::vector<std::vector<std::string>>& token_lists) {
  std::vector<CleanDoc> docs;
  docs.reserve(token_lists.size());
  for (std::size_t i = 0; i < token_lists.size(); ++i) docs.push_back({"d" + std::to_string(i), token_lists[i]});
  return docs;
}

std::vector<double> stage_targets(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::vector<double> y;
  for (const auto& r : corpus.select(ids)) y.push_back(map_stage(r.stage));
  return y;
}

}  // namespace

PYBIND11_MODULE(_polprog, m) {
  m.doc() = "Policy progression regression, attribution and reporting";

  // Translators run newest first, so the base class goes in before its subclasses.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());

  py::enum_<StageLabel>(m, "StageLabel")
      .value("Withdrawn", StageLabel::Withdrawn)
      .value("Blocked", StageLabel::Blocked)
      .value("Announced", StageLabel::Announced)
      .value("Tabled", StageLabel::Tabled)
      .value("CloseToAdoption", StageLabel::CloseToAdoption)
      .value("AdoptedCompleted", StageLabel::AdoptedCompleted);
  py::enum_<ModelKind>(m, "ModelKind")
      .value("bayesian_ridge", ModelKind::BayesianRidge)
      .value("random_forest", ModelKind::RandomForest)
      .value("gbdt", ModelKind::Gbdt)
      .value("svr", ModelKind::Svr);
  py::enum_<Representation>(m, "Representation")
      .value("tfidf", Representation::Tfidf)
      .value("embedding_a", Representation::EmbeddingA)
      .value("embedding_b", Representation::EmbeddingB);
  py::enum_<FeatureGroup>(m, "FeatureGroup")
      .value("text", FeatureGroup::Text)
      .value("metadata", FeatureGroup::Metadata)
      .value("embedding", FeatureGroup::Embedding);
  py::enum_<ShapMethod>(m, "ShapMethod")
      .value("linear_exact", ShapMethod::LinearExact)
      .value("tree_exact", ShapMethod::TreeExact)
      .value("monte_carlo", ShapMethod::MonteCarlo);

  m.def("map_stage", [](const std::string& label) {
    const auto stage = parse_stage(label);
    if (!stage) throw ValidationError("unknown stage label \"" + label + "\"");
    return map_stage(*stage);
  }, py::arg("label"));
  m.def("snap", [](double yhat) { return level_value(snap_to_category(yhat)); }, py::arg("yhat"),
        "Snap a prediction to the nearest stage level value.");

  // Corpus
  py::class_<Rapporteur>(m, "Rapporteur")
      .def_readonly("name", &Rapporteur::name)
      .def_readonly("country", &Rapporteur::country)
      .def_readonly("party", &Rapporteur::party);
  py::class_<PolicyRecord>(m, "PolicyRecord")
      .def_readonly("id", &PolicyRecord::id)
      .def_readonly("title", &PolicyRecord::title)
      .def_readonly("body", &PolicyRecord::body)
      .def_property_readonly("stage", [](const PolicyRecord& r) { return std::string(stage_key(r.stage)); })
      .def_property_readonly("target", [](const PolicyRecord& r) { return map_stage(r.stage); })
      .def_readonly("month", &PolicyRecord::month)
      .def_readonly("year", &PolicyRecord::year)
      .def_readonly("rapporteurs", &PolicyRecord::rapporteurs)
      .def_readonly("spotlight", &PolicyRecord::spotlight)
      .def_readonly("legislative", &PolicyRecord::legislative)
      .def_readonly("sidecar_scores", &PolicyRecord::sidecar_scores);
  py::class_<Corpus>(m, "Corpus")
      .def("__len__", &Corpus::size)
      .def_property_readonly("records", &Corpus::records)
      .def_property_readonly("ids", [](const Corpus& c) {
        std::vector<std::string> ids;
        for (const auto& r : c.records()) ids.push_back(r.id);
        return ids;
      })
      .def("to_jsonl", [](const Corpus& c) { return to_jsonl(c); });
  m.def("parse_corpus", &parse_corpus, py::arg("path"));
  m.def("parse_corpus_text", [](const std::string& text) { return parse_corpus_text(text); }, py::arg("jsonl"));
  m.def("attach_sidecar_scores", &attach_sidecar_scores, py::arg("corpus"), py::arg("path"));
  m.def("generate_synthetic", &generate_synthetic, py::arg("seed") = 42, py::arg("n") = 300,
        py::arg("vocab_size") = 400);

  py::class_<SplitIndices>(m, "Split")
      .def_readonly("train_ids", &SplitIndices::train_ids)
      .def_readonly("test_ids", &SplitIndices::test_ids);
  m.def("split", &split, py::arg("corpus"), py::arg("ratio") = 0.2, py::arg("seed") = 42,
        py::arg("stratified") = true);

  // Text preparation
  m.def("clean_text", [](const std::string& raw) { return clean_text(raw); }, py::arg("raw"));
  m.def("tokenize", [](const std::string& cleaned) { return tokenize(cleaned); }, py::arg("cleaned"));
  m.def("lemma", [](const std::string& token) { return default_lemmatizer().lemma(token); }, py::arg("token"));
  m.def("preprocess", [](const std::string& raw) { return TextPipeline{}.tokens(raw); }, py::arg("raw"),
        "Clean, tokenize, drop stop words and lemmatize with the bundled data.");

  // Features
  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def(py::init(&make_matrix), py::arg("values"), py::arg("columns") = std::vector<std::string>{},
           py::arg("row_ids") = std::vector<std::string>{}, py::arg("groups") = std::vector<FeatureGroup>{})
      .def_readonly("row_ids", &FeatureMatrix::row_ids)
      .def_property_readonly("columns", &FeatureMatrix::column_names)
      .def_property_readonly("groups", [](const FeatureMatrix& f) {
        std::vector<FeatureGroup> g;
        for (const auto& c : f.columns) g.push_back(c.group);
        return g;
      })
      .def_readonly("values", &FeatureMatrix::values)
      .def_property_readonly("shape", [](const FeatureMatrix& f) { return py::make_tuple(f.rows(), f.cols()); })
      .def("select_rows", &FeatureMatrix::select_rows, py::arg("ids"));

  py::class_<TfidfModel>(m, "TfidfModel")
      .def_property_readonly("vocabulary", &TfidfModel::tokens_in_column_order)
      .def_readonly("n_docs", &TfidfModel::n_docs)
      .def("idf", [](const TfidfModel& t, const std::string& token) {
        const auto it = t.vocabulary.find(token);
        if (it == t.vocabulary.end()) throw ValidationError("token not in vocabulary: " + token);
        return t.idf(it->second);
      }, py::arg("token"))
      .def("transform", [](const TfidfModel& t, const std::vector<std::vector<std::string>>& docs) {
        const auto d = to_docs(docs);
        return transform_tfidf(t, d);
      }, py::arg("docs"));
  m.def("fit_tfidf", [](const std::vector<std::vector<std::string>>& docs, std::size_t min_df,
                        std::optional<std::size_t> max_features) {
    const auto d = to_docs(docs);
    return fit_tfidf(d, min_df, max_features);
  }, py::arg("docs"), py::arg("min_df") = 2, py::arg("max_features") = py::none());

  py::class_<FeatureSet>(m, "FeatureSet")
      .def_readonly("train", &FeatureSet::train)
      .def_readonly("test", &FeatureSet::test)
      .def_readonly("train_with_metadata", &FeatureSet::train_with_metadata)
      .def_readonly("test_with_metadata", &FeatureSet::test_with_metadata)
      .def_readonly("y_train", &FeatureSet::y_train)
      .def_readonly("y_test", &FeatureSet::y_test);
  m.def("featurize", [](const Corpus& corpus, const SplitIndices& s, Representation rep,
                        std::map<std::string, double> voting_weights, std::map<std::string, double> seat_shares,
                        std::optional<std::filesystem::path> embedding_a,
                        std::optional<std::filesystem::path> embedding_b, std::size_t min_df) {
    FeaturizeConfig fc;
    fc.min_df = min_df;
    fc.lookups.voting_weight.insert(voting_weights.begin(), voting_weights.end());
    fc.lookups.seat_share.insert(seat_shares.begin(), seat_shares.end());
    fc.embedding_a = std::move(embedding_a);
    fc.embedding_b = std::move(embedding_b);
    return Featurizer(corpus, fc, s).build(rep);
  }, py::arg("corpus"), py::arg("split"), py::arg("representation") = Representation::Tfidf,
     py::arg("voting_weights") = std::map<std::string, double>{},
     py::arg("seat_shares") = std::map<std::string, double>{}, py::arg("embedding_a") = py::none(),
     py::arg("embedding_b") = py::none(), py::arg("min_df") = 2);
  m.def("synthetic_voting_weights", &synthetic::voting_weights);
  m.def("synthetic_seat_shares", &synthetic::seat_shares);
  m.def("load_embeddings", [](const std::filesystem::path& path) {
    const EmbeddingTable t = load_embeddings(path);
    return py::make_tuple(t.dim, t.vectors, t.source_tag);
  }, py::arg("path"), "Returns (dim, {policy_id: vector}, header comment).");

  // Models
  py::class_<TrainedModel>(m, "Model")
      .def_property_readonly("kind", &TrainedModel::kind)
      .def_readonly("columns", &TrainedModel::column_names)
      .def_property_readonly("training_curve", [](const TrainedModel& t) { return training_curve(t); })
      .def("predict", [](const TrainedModel& t, const FeatureMatrix& x) { return predict(t, x); }, py::arg("x"))
      .def("to_json", [](const TrainedModel& t) { return model_to_json(t).dump(); })
      .def_static("from_json", [](const std::string& s) {
        nlohmann::json doc;
        try {
          doc = nlohmann::json::parse(s);
        } catch (const nlohmann::json::exception& e) {
          throw ValidationError(std::string("model JSON: ") + e.what());
        }
        return model_from_json(doc);
      }, py::arg("text"));
  m.def("default_hyperparameters", &default_hyperparameters, py::arg("kind"));
  m.def("fit", [](ModelKind kind, const FeatureMatrix& x, const std::vector<double>& y,
                  const std::map<std::string, double>& hyperparameters, std::uint64_t seed) {
    RegressorSpec spec = RegressorSpec::defaults(kind, seed);
    for (const auto& [k, v] : hyperparameters) spec.hyperparameters[k] = v;
    py::gil_scoped_release release;
    return fit(spec, x, y);
  }, py::arg("kind"), py::arg("x"), py::arg("y"), py::arg("hyperparameters") = std::map<std::string, double>{},
     py::arg("seed") = 42);

  // Evaluation
  m.def("rmse", [](const std::vector<double>& y, const std::vector<double>& p) { return rmse(y, p); });
  m.def("r2", [](const std::vector<double>& y, const std::vector<double>& p) { return r2(y, p); });
  m.def("stage_accuracy",
        [](const std::vector<double>& y, const std::vector<double>& p) { return stage_accuracy(y, p); });
  m.def("stage_targets", &stage_targets, py::arg("corpus"), py::arg("ids"));

  py::class_<GridRow>(m, "GridRow")
      .def_property_readonly("representation",
                             [](const GridRow& r) { return std::string(representation_name(r.representation)); })
      .def_property_readonly("model", [](const GridRow& r) { return std::string(kind_name(r.model)); })
      .def_readonly("with_metadata", &GridRow::with_metadata)
      .def_property_readonly("rmse", [](const GridRow& r) { return r.metrics.rmse; })
      .def_property_readonly("r2", [](const GridRow& r) { return r.metrics.r2; })
      .def_readonly("stage_accuracy", &GridRow::stage_accuracy);
  py::class_<GridResult>(m, "GridResult").def_readonly("rows", &GridResult::rows);
  m.def("run_grid", [](const Corpus& corpus, std::vector<Representation> reps, std::vector<ModelKind> models,
                       std::map<std::string, double> voting_weights, std::map<std::string, double> seat_shares,
                       std::uint64_t seed, unsigned jobs) {
    GridConfig gc;
    gc.representations = std::move(reps);
    if (!models.empty()) gc.models = std::move(models);
    gc.features.lookups.voting_weight.insert(voting_weights.begin(), voting_weights.end());
    gc.features.lookups.seat_share.insert(seat_shares.begin(), seat_shares.end());
    gc.seed = seed;
    gc.jobs = jobs;
    py::gil_scoped_release release;
    return run_grid(corpus, gc);
  }, py::arg("corpus"), py::arg("representations") = std::vector<Representation>{Representation::Tfidf},
     py::arg("models") = std::vector<ModelKind>{}, py::arg("voting_weights") = std::map<std::string, double>{},
     py::arg("seat_shares") = std::map<std::string, double>{}, py::arg("seed") = 42, py::arg("jobs") = 1);

  // Explanations
  py::class_<ImportanceEntry>(m, "ImportanceEntry")
      .def_readonly("feature", &ImportanceEntry::feature)
      .def_readonly("group", &ImportanceEntry::group)
      .def_readonly("importance", &ImportanceEntry::importance)
      .def_readonly("std", &ImportanceEntry::std);
  py::class_<ImportanceReport>(m, "ImportanceReport")
      .def_readonly("entries", &ImportanceReport::entries)
      .def("ranked", &ImportanceReport::ranked)
      .def("to_csv", [](const ImportanceReport& r) { return importance_to_csv(r); });
  m.def("permutation_importance", [](const TrainedModel& model, const FeatureMatrix& x, const std::vector<double>& y,
                                     int repeats, std::uint64_t seed, bool group_embeddings) {
    PermutationOptions opt{repeats, seed, group_embeddings};
    py::gil_scoped_release release;
    return permutation_importance(model, x, y, opt);
  }, py::arg("model"), py::arg("x"), py::arg("y"), py::arg("repeats") = 10, py::arg("seed") = 42,
     py::arg("group_embeddings") = false);

  py::class_<ShapMatrix>(m, "ShapMatrix")
      .def_readonly("row_ids", &ShapMatrix::row_ids)
      .def_property_readonly("columns", [](const ShapMatrix& s) {
        std::vector<std::string> names;
        for (const auto& c : s.columns) names.push_back(c.name);
        return names;
      })
      .def_readonly("values", &ShapMatrix::values)
      .def_readonly("std_errors", &ShapMatrix::std_errors)
      .def_readonly("base_value", &ShapMatrix::base_value)
      .def_property_readonly("method", [](const ShapMatrix& s) { return std::string(shap_method_name(s.method)); });
  m.def("shap", [](const TrainedModel& model, const FeatureMatrix& x, const FeatureMatrix& background,
                   std::optional<ShapMethod> method, std::size_t mc_samples, std::uint64_t seed) {
    ShapOptions opt;
    opt.method = method;
    opt.mc_samples = mc_samples;
    opt.seed = seed;
    py::gil_scoped_release release;
    return shap(model, x, background, opt);
  }, py::arg("model"), py::arg("x"), py::arg("background"), py::arg("method") = py::none(),
     py::arg("mc_samples") = 200, py::arg("seed") = 42);
  m.def("sample_background", &sample_background, py::arg("x"), py::arg("max_rows") = 100, py::arg("seed") = 42);

  // Reports
  m.def("render_grid", [](const GridResult& g) {
    const GridTables t = render_grid(g);
    return py::make_tuple(t.markdown, t.csv);
  }, py::arg("grid"), "Returns (markdown, csv).");
  m.def("render_importance_chart", [](const ImportanceReport& r, int top_k, const std::string& title) {
    ChartSpec spec;
    spec.top_k = top_k;
    spec.title = title;
    const SvgOutput out = render_importance_chart(r, spec);
    return py::make_tuple(out.svg, out.warnings);
  }, py::arg("report"), py::arg("top_k") = 20, py::arg("title") = "Feature importance");
  m.def("render_shap_summary", [](const ShapMatrix& s, const FeatureMatrix& values, int top_k) {
    ChartSpec spec;
    spec.title = "SHAP summary";
    spec.top_k = top_k;
    const SvgOutput out = render_shap_summary(s, values, spec);
    return py::make_tuple(out.svg, out.warnings);
  }, py::arg("shap"), py::arg("feature_values"), py::arg("top_k") = 20);
}
