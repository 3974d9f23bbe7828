#include "polprog/explain.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <map>
#include <numeric>

#include "polprog/csv.hpp"
#include "polprog/error.hpp"
#include "polprog/rng.hpp"

namespace polprog {

namespace {

constexpr std::string_view kEmbeddingGroupName = "text-embedding";

void require_columns(const TrainedModel& model, const FeatureMatrix& x, const char* what) {
  const auto names = x.column_names();
  if (names != model.column_names) {
    const std::size_t n = std::min(names.size(), model.column_names.size());
    std::size_t j = 0;
    while (j < n && names[j] == model.column_names[j]) ++j;
    std::string detail = j < n ? "model expects " + model.column_names[j] + ", got " + names[j]
                         : names.size() < model.column_names.size()
                             ? "missing column " + model.column_names[j]
                             : "unexpected extra column " + names[j];
    throw ValidationError(std::string(what) + ": column mismatch at position " +
                          std::to_string(j) + ": " + detail);
  }
}

double rmse_of(const Eigen::VectorXd& pred, std::span<const double> y) {
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = pred(static_cast<Eigen::Index>(i)) - y[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(y.size()));
}

}  // namespace

std::vector<ImportanceEntry> ImportanceReport::ranked() const {
  std::vector<ImportanceEntry> out = entries;
  std::stable_sort(out.begin(), out.end(), [](const ImportanceEntry& a, const ImportanceEntry& b) {
    return a.importance > b.importance;
  });
  return out;
}

ImportanceReport permutation_importance(const TrainedModel& model, const FeatureMatrix& x_test,
                                        std::span<const double> y_test,
                                        const PermutationOptions& options) {
  require_columns(model, x_test, "permutation_importance");
  if (options.repeats < 1) throw ValidationError("permutation_importance: repeats must be >= 1");
  if (x_test.rows() != y_test.size()) {
    throw ValidationError("permutation_importance: " + std::to_string(x_test.rows()) +
                          " rows but " + std::to_string(y_test.size()) + " targets");
  }
  if (x_test.rows() == 0) throw ValidationError("permutation_importance: empty test set");

  const std::size_t n = x_test.rows();
  const double baseline = rmse_of(model.predict_values(x_test.values), y_test);

  // Each unit is a set of columns shuffled together under one key.
  struct Unit {
    std::string name;
    FeatureGroup group;
    std::vector<Eigen::Index> columns;
    std::uint64_t key;
  };
  std::vector<Unit> units;
  std::ptrdiff_t embedding_unit = -1;
  for (std::size_t j = 0; j < x_test.cols(); ++j) {
    const Column& col = x_test.columns[j];
    const auto idx = static_cast<Eigen::Index>(j);
    if (options.group_embeddings && col.group == FeatureGroup::Embedding) {
      if (embedding_unit < 0) {
        embedding_unit = static_cast<std::ptrdiff_t>(units.size());
        units.push_back({std::string(kEmbeddingGroupName), FeatureGroup::Embedding, {},
                         fnv1a(kEmbeddingGroupName)});
      }
      units[static_cast<std::size_t>(embedding_unit)].columns.push_back(idx);
      continue;
    }
    units.push_back({col.name, col.group, {idx}, static_cast<std::uint64_t>(j)});
  }

  ImportanceReport report;
  report.repeats = options.repeats;
  report.seed = options.seed;
  Eigen::MatrixXd work = x_test.values;
  std::vector<std::size_t> perm(n);
  std::vector<double> deltas(static_cast<std::size_t>(options.repeats));
  for (const Unit& unit : units) {
    for (int r = 0; r < options.repeats; ++r) {
      Rng rng(mix_seed({options.seed, unit.key, static_cast<std::uint64_t>(r)}));
      std::iota(perm.begin(), perm.end(), 0);
      rng.shuffle(std::span<std::size_t>(perm));
      for (Eigen::Index c : unit.columns) {
        for (std::size_t i = 0; i < n; ++i) {
          work(static_cast<Eigen::Index>(i), c) = x_test.values(static_cast<Eigen::Index>(perm[i]), c);
        }
      }
      deltas[static_cast<std::size_t>(r)] = rmse_of(model.predict_values(work), y_test) - baseline;
      for (Eigen::Index c : unit.columns) work.col(c) = x_test.values.col(c);
    }
    double mean = 0.0;
    for (double d : deltas) mean += d;
    mean /= static_cast<double>(deltas.size());
    double var = 0.0;
    for (double d : deltas) var += (d - mean) * (d - mean);
    var /= static_cast<double>(deltas.size());
    report.entries.push_back({unit.name, unit.group, mean, std::sqrt(var)});
  }
  return report;
}

std::string_view shap_method_name(ShapMethod method) {
  switch (method) {
    case ShapMethod::LinearExact: return "linear_exact";
    case ShapMethod::TreeExact: return "tree_exact";
    case ShapMethod::MonteCarlo: return "montecarlo";
  }
  return "?";
}

std::optional<ShapMethod> parse_shap_method(std::string_view text) {
  for (auto m : {ShapMethod::LinearExact, ShapMethod::TreeExact, ShapMethod::MonteCarlo}) {
    if (text == shap_method_name(m)) return m;
  }
  return std::nullopt;
}

// ------------------------------------------------------------------- SHAP

namespace {

/// (a-1)! b! / (a+b)! for the leaf-reach game; cached by (a, b).
class CoalitionWeights {
 public:
  double operator()(std::size_t a, std::size_t b) {
    const std::size_t key = a * 4096 + b;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double w = std::exp(std::lgamma(static_cast<double>(a)) +
                              std::lgamma(static_cast<double>(b) + 1.0) -
                              std::lgamma(static_cast<double>(a + b) + 1.0));
    const double exact = a + b <= 20 ? small(a, b) : w;
    cache_.emplace(key, exact);
    return exact;
  }

 private:
  static double small(std::size_t a, std::size_t b) {
    double f[21];
    f[0] = 1.0;
    for (int i = 1; i <= 20; ++i) f[i] = f[i - 1] * i;
    return f[a - 1] * f[b] / f[a + b];
  }
  std::map<std::size_t, double> cache_;
};

/// Interventional Shapley values of one tree for foreground x and one
/// background row z, accumulated into phi with the given scale.
///
/// A feature lands in set A when the path followed x where z would have
/// gone elsewhere, in set B for the reverse. A leaf reached with sets (A, B)
/// is the value of the game "all of A present and none of B", whose Shapley
/// values are v (|A|-1)! |B|! / (|A|+|B|)! for A and minus
/// v |A|! (|B|-1)! / (|A|+|B|)! for B.
class TreeShapWalker {
 public:
  TreeShapWalker(std::size_t n_features, CoalitionWeights& weights)
      : state_(n_features, 0), weights_(weights) {}

  void run(const RegressionTree& tree, const double* x, const double* z, double scale,
           double* phi) {
    tree_ = &tree;
    x_ = x;
    z_ = z;
    scale_ = scale;
    phi_ = phi;
    walk(0);
  }

 private:
  void walk(int at) {
    const TreeNode& node = tree_->nodes[static_cast<std::size_t>(at)];
    if (node.is_leaf()) {
      credit(node.value);
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const int x_child = x_[f] <= node.threshold ? node.left : node.right;
    const int z_child = z_[f] <= node.threshold ? node.left : node.right;
    if (x_child == z_child) {
      walk(x_child);
    } else if (state_[f] == 1) {
      walk(x_child);
    } else if (state_[f] == 2) {
      walk(z_child);
    } else {
      state_[f] = 1;
      a_.push_back(f);
      walk(x_child);
      a_.pop_back();
      state_[f] = 2;
      b_.push_back(f);
      walk(z_child);
      b_.pop_back();
      state_[f] = 0;
    }
  }

  void credit(double value) {
    const std::size_t a = a_.size(), b = b_.size();
    if (a + b == 0) return;
    const double v = value * scale_;
    if (a > 0) {
      const double w = weights_(a, b) * v;
      for (std::size_t f : a_) phi_[f] += w;
    }
    if (b > 0) {
      const double w = weights_(b, a) * v;
      for (std::size_t f : b_) phi_[f] -= w;
    }
  }

  std::vector<char> state_;
  std::vector<std::size_t> a_, b_;
  CoalitionWeights& weights_;
  const RegressionTree* tree_ = nullptr;
  const double* x_ = nullptr;
  const double* z_ = nullptr;
  double scale_ = 1.0;
  double* phi_ = nullptr;
};

void tree_exact(const TrainedModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& bg,
                Eigen::MatrixXd& values) {
  const std::vector<RegressionTree>* trees = nullptr;
  double scale = 1.0;
  if (const auto* f = std::get_if<ForestInternals>(&model.internals)) {
    trees = &f->trees;
    scale = 1.0 / static_cast<double>(f->trees.size());
  } else if (const auto* g = std::get_if<BoostingInternals>(&model.internals)) {
    trees = &g->trees;
    scale = g->learning_rate;
  } else {
    throw ValidationError("tree_exact SHAP needs a random_forest or gbdt model, got " +
                          std::string(kind_name(model.kind())));
  }
  const auto d = static_cast<std::size_t>(x.cols());
  // Row-major copies so a row is a contiguous pointer.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xr = x, br = bg;
  CoalitionWeights weights;
  TreeShapWalker walker(d, weights);
  const double per_background = scale / static_cast<double>(bg.rows());
  std::vector<double> phi(d);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::fill(phi.begin(), phi.end(), 0.0);
    for (const auto& tree : *trees) {
      for (Eigen::Index k = 0; k < bg.rows(); ++k) {
        walker.run(tree, xr.row(i).data(), br.row(k).data(), per_background, phi.data());
      }
    }
    for (std::size_t j = 0; j < d; ++j) values(i, static_cast<Eigen::Index>(j)) = phi[j];
  }
}

/// Model output along a path that flips features from z to x one at a time.
/// Kernel models update their squared distances incrementally.
class IncrementalPredictor {
 public:
  explicit IncrementalPredictor(const TrainedModel& model) : model_(model) {}

  double reset(std::span<const double> z) {
    current_.assign(z.begin(), z.end());
    if (const auto* s = std::get_if<SvrInternals>(&model_.internals)) {
      const auto n_sv = s->support_vectors.rows();
      dist2_.assign(static_cast<std::size_t>(n_sv), 0.0);
      for (Eigen::Index k = 0; k < n_sv; ++k) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < s->support_vectors.cols(); ++j) {
          const double diff = s->support_vectors(k, j) - z[static_cast<std::size_t>(j)];
          acc += diff * diff;
        }
        dist2_[static_cast<std::size_t>(k)] = acc;
      }
      return svr_value(*s);
    }
    return model_.predict_row(current_);
  }

  double set(std::size_t j, double value) {
    if (const auto* s = std::get_if<SvrInternals>(&model_.internals)) {
      const auto jj = static_cast<Eigen::Index>(j);
      for (Eigen::Index k = 0; k < s->support_vectors.rows(); ++k) {
        const double old_diff = s->support_vectors(k, jj) - current_[j];
        const double new_diff = s->support_vectors(k, jj) - value;
        dist2_[static_cast<std::size_t>(k)] += new_diff * new_diff - old_diff * old_diff;
      }
      current_[j] = value;
      return svr_value(*s);
    }
    current_[j] = value;
    return model_.predict_row(current_);
  }

 private:
  double svr_value(const SvrInternals& s) const {
    double sum = s.bias;
    for (std::size_t k = 0; k < dist2_.size(); ++k) {
      sum += s.coef(static_cast<Eigen::Index>(k)) * std::exp(-s.gamma * std::max(dist2_[k], 0.0));
    }
    return sum;
  }

  const TrainedModel& model_;
  std::vector<double> current_;
  std::vector<double> dist2_;
};

void monte_carlo(const TrainedModel& model, const FeatureMatrix& x, const Eigen::MatrixXd& bg,
                 std::size_t samples, std::uint64_t seed, Eigen::MatrixXd& values,
                 Eigen::MatrixXd& std_errors) {
  if (samples < 2) throw ValidationError("montecarlo SHAP needs at least 2 samples");
  const auto d = static_cast<std::size_t>(x.values.cols());
  const auto nb = static_cast<std::size_t>(bg.rows());
  IncrementalPredictor predictor(model);
  std::vector<std::size_t> order(d);
  std::vector<double> z(d), sum(d), sum_sq(d);
  for (Eigen::Index i = 0; i < x.values.rows(); ++i) {
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(sum_sq.begin(), sum_sq.end(), 0.0);
    Rng rng(mix_seed({seed, fnv1a(x.row_ids[static_cast<std::size_t>(i)])}));
    for (std::size_t s = 0; s < samples; ++s) {
      const auto b = static_cast<Eigen::Index>(s % nb);
      for (std::size_t j = 0; j < d; ++j) z[j] = bg(b, static_cast<Eigen::Index>(j));
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(std::span<std::size_t>(order));
      double prev = predictor.reset(z);
      for (std::size_t j : order) {
        const double next = predictor.set(j, x.values(i, static_cast<Eigen::Index>(j)));
        const double delta = next - prev;
        sum[j] += delta;
        sum_sq[j] += delta * delta;
        prev = next;
      }
    }
    const auto m = static_cast<double>(samples);
    for (std::size_t j = 0; j < d; ++j) {
      const double mean = sum[j] / m;
      const double var = std::max(0.0, (sum_sq[j] - m * mean * mean) / (m - 1.0));
      values(i, static_cast<Eigen::Index>(j)) = mean;
      std_errors(i, static_cast<Eigen::Index>(j)) = std::sqrt(var / m);
    }
  }
}

}  // namespace

ShapMatrix shap(const TrainedModel& model, const FeatureMatrix& x, const FeatureMatrix& background,
                const ShapOptions& options) {
  require_columns(model, x, "shap");
  require_columns(model, background, "shap background");
  if (background.rows() == 0) throw ValidationError("shap: empty background set");

  ShapMethod method = ShapMethod::MonteCarlo;
  if (options.method) {
    method = *options.method;
  } else if (model.kind() == ModelKind::BayesianRidge) {
    method = ShapMethod::LinearExact;
  } else if (model.kind() == ModelKind::RandomForest || model.kind() == ModelKind::Gbdt) {
    method = ShapMethod::TreeExact;
  }

  ShapMatrix out;
  out.row_ids = x.row_ids;
  out.columns = x.columns;
  out.method = method;
  out.background_size = background.rows();
  out.seed = options.seed;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.rows()), static_cast<Eigen::Index>(x.cols()));

  switch (method) {
    case ShapMethod::LinearExact: {
      const auto* ridge = std::get_if<RidgeInternals>(&model.internals);
      if (!ridge) {
        throw ValidationError("linear_exact SHAP needs a bayesian_ridge model, got " +
                              std::string(kind_name(model.kind())));
      }
      const Eigen::RowVectorXd mean = background.values.colwise().mean();
      out.base_value = ridge->intercept + mean.dot(ridge->coef);
      for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
        out.values.row(i) = (x.values.row(i) - mean).cwiseProduct(ridge->coef.transpose());
      }
      break;
    }
    case ShapMethod::TreeExact:
      tree_exact(model, x.values, background.values, out.values);
      out.base_value = model.predict_values(background.values).mean();
      break;
    case ShapMethod::MonteCarlo:
      out.std_errors = Eigen::MatrixXd::Zero(out.values.rows(), out.values.cols());
      monte_carlo(model, x, background.values, options.mc_samples, options.seed, out.values,
                  out.std_errors);
      out.samples = options.mc_samples;
      out.base_value = model.predict_values(background.values).mean();
      break;
  }
  return out;
}

Eigen::VectorXd shap_bruteforce(const TrainedModel& model, std::span<const double> x,
                                const Eigen::MatrixXd& background) {
  const auto d = x.size();
  if (d > kMaxBruteforceFeatures) {
    throw ValidationError("shap_bruteforce: " + std::to_string(d) + " features exceeds the limit of " +
                          std::to_string(kMaxBruteforceFeatures));
  }
  if (background.rows() == 0) throw ValidationError("shap_bruteforce: empty background set");
  if (static_cast<std::size_t>(background.cols()) != d) {
    throw ValidationError("shap_bruteforce: background width does not match x");
  }
  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets);
  Eigen::MatrixXd filled = background;
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (mask >> j & 1U) {
        filled.col(jj).setConstant(x[j]);
      } else {
        filled.col(jj) = background.col(jj);
      }
    }
    value[mask] = model.predict_values(filled).mean();
  }
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t k = 1; k <= d; ++k) fact[k] = fact[k - 1] * static_cast<double>(k);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(mask));
    if (size == d) continue;
    const double w = fact[size] * fact[d - size - 1] / fact[d];
    for (std::size_t j = 0; j < d; ++j) {
      if (mask >> j & 1U) continue;
      phi(static_cast<Eigen::Index>(j)) += w * (value[mask | (std::size_t{1} << j)] - value[mask]);
    }
  }
  return phi;
}

FeatureMatrix sample_background(const FeatureMatrix& x, std::size_t max_rows, std::uint64_t seed) {
  if (max_rows == 0) throw ValidationError("background size must be at least 1");
  if (x.rows() <= max_rows) return x;
  std::vector<std::size_t> idx(x.rows());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(mix_seed({seed, 0xBA5EULL}));
  for (std::size_t i = 0; i < max_rows; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> ids;
  ids.reserve(max_rows);
  for (auto i : idx) ids.push_back(x.row_ids[i]);
  return x.select_rows(ids);
}

// -------------------------------------------------------------------- CSV

namespace {

FeatureGroup group_field(const csv::Row& row, std::size_t col) {
  auto g = parse_group(row.fields[col]);
  if (!g) {
    throw ValidationError("line " + std::to_string(row.line) + ": unknown group '" +
                          row.fields[col] + "'");
  }
  return *g;
}

double number_field(const csv::Row& row, std::size_t col) {
  double v = 0.0;
  if (!csv::parse_double(row.fields[col], v)) {
    throw ValidationError("line " + std::to_string(row.line) + ": not a number: '" +
                          row.fields[col] + "'");
  }
  return v;
}

std::vector<csv::Row> parse_with_header(std::string_view text,
                                        const std::vector<std::string>& header) {
  auto rows = csv::parse(text);
  if (rows.empty() || rows.front().fields != header) {
    throw ValidationError("expected CSV header " + csv::join(header));
  }
  for (const auto& r : rows) {
    if (r.fields.size() != header.size()) {
      throw ValidationError("line " + std::to_string(r.line) + ": expected " +
                            std::to_string(header.size()) + " fields");
    }
  }
  rows.erase(rows.begin());
  return rows;
}

const std::vector<std::string> kImportanceHeader = {"feature", "group", "importance", "std",
                                                    "repeats", "seed"};
const std::vector<std::string> kShapHeader = {"row_id", "feature", "group", "shap",
                                              "feature_value", "base_value", "method"};

}  // namespace

std::string importance_to_csv(const ImportanceReport& report) {
  std::string out = csv::join(kImportanceHeader) + "\n";
  for (const auto& e : report.entries) {
    out += csv::join({e.feature, std::string(group_name(e.group)), csv::format_double(e.importance),
                      csv::format_double(e.std), std::to_string(report.repeats),
                      std::to_string(report.seed)}) +
           "\n";
  }
  return out;
}

ImportanceReport importance_from_csv(std::string_view text) {
  ImportanceReport report;
  const auto rows = parse_with_header(text, kImportanceHeader);
  if (rows.empty()) throw ValidationError("importance CSV has no entries");
  for (const auto& r : rows) {
    report.entries.push_back({r.fields[0], group_field(r, 1), number_field(r, 2), number_field(r, 3)});
  }
  report.repeats = static_cast<int>(number_field(rows.front(), 4));
  report.seed = std::stoull(rows.front().fields[5]);
  return report;
}

std::string shap_to_csv(const ShapMatrix& matrix, const FeatureMatrix& feature_values) {
  if (feature_values.row_ids != matrix.row_ids || feature_values.columns != matrix.columns) {
    throw ValidationError("shap_to_csv: feature values are not aligned with the SHAP matrix");
  }
  std::string out = csv::join(kShapHeader) + "\n";
  const std::string base = csv::format_double(matrix.base_value);
  const std::string method(shap_method_name(matrix.method));
  for (std::size_t i = 0; i < matrix.row_ids.size(); ++i) {
    for (std::size_t j = 0; j < matrix.columns.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      out += csv::join({matrix.row_ids[i], matrix.columns[j].name,
                        std::string(group_name(matrix.columns[j].group)),
                        csv::format_double(matrix.values(ii, jj)),
                        csv::format_double(feature_values.values(ii, jj)), base, method}) +
             "\n";
    }
  }
  return out;
}

ShapTable shap_from_csv(std::string_view text) {
  const auto rows = parse_with_header(text, kShapHeader);
  if (rows.empty()) throw ValidationError("SHAP CSV has no entries");
  ShapTable table;
  std::map<std::string, std::size_t, std::less<>> row_index, col_index;
  for (const auto& r : rows) {
    if (!row_index.count(r.fields[0])) {
      row_index.emplace(r.fields[0], table.matrix.row_ids.size());
      table.matrix.row_ids.push_back(r.fields[0]);
    }
    if (!col_index.count(r.fields[1])) {
      col_index.emplace(r.fields[1], table.matrix.columns.size());
      table.matrix.columns.push_back({r.fields[1], group_field(r, 2)});
    }
  }
  const auto n = static_cast<Eigen::Index>(table.matrix.row_ids.size());
  const auto d = static_cast<Eigen::Index>(table.matrix.columns.size());
  if (static_cast<std::size_t>(n * d) != rows.size()) {
    throw ValidationError("SHAP CSV is not a complete row x feature grid");
  }
  table.matrix.values = Eigen::MatrixXd::Constant(n, d, std::nan(""));
  table.feature_values.values = Eigen::MatrixXd::Constant(n, d, std::nan(""));
  auto method = parse_shap_method(rows.front().fields[6]);
  if (!method) throw ValidationError("unknown SHAP method " + rows.front().fields[6]);
  table.matrix.method = *method;
  table.matrix.base_value = number_field(rows.front(), 5);
  for (const auto& r : rows) {
    const auto i = static_cast<Eigen::Index>(row_index.at(r.fields[0]));
    const auto j = static_cast<Eigen::Index>(col_index.at(r.fields[1]));
    if (!std::isnan(table.matrix.values(i, j))) {
      throw ValidationError("line " + std::to_string(r.line) + ": duplicate (row, feature) pair");
    }
    table.matrix.values(i, j) = number_field(r, 3);
    table.feature_values.values(i, j) = number_field(r, 4);
  }
  table.feature_values.row_ids = table.matrix.row_ids;
  table.feature_values.columns = table.matrix.columns;
  return table;
}

}  // namespace polprog
