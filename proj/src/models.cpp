#include "polprog/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "polprog/error.hpp"
#include "polprog/io.hpp"
#include "polprog/rng.hpp"
#include "tree_builder.hpp"

namespace polprog {

using nlohmann::json;

std::string_view kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::BayesianRidge: return "bayesian_ridge";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::Gbdt: return "gbdt";
    case ModelKind::Svr: return "svr";
  }
  return "?";
}

std::optional<ModelKind> parse_kind(std::string_view text) {
  for (auto k : kAllModelKinds) {
    if (text == kind_name(k)) return k;
  }
  return std::nullopt;
}

// ------------------------------------------------------------ RegressorSpec

const std::map<std::string, double>& default_hyperparameters(ModelKind kind) {
  static const std::map<std::string, double> ridge = {
      {"max_iter", 300}, {"tol", 1e-3},     {"alpha_1", 1e-6},
      {"alpha_2", 1e-6}, {"lambda_1", 1e-6}, {"lambda_2", 1e-6}};
  static const std::map<std::string, double> forest = {
      {"n_trees", 100}, {"max_features", 0}, {"max_depth", 0}, {"min_samples_leaf", 1}};
  static const std::map<std::string, double> gbdt = {
      {"rounds", 500}, {"max_depth", 6}, {"learning_rate", 0.03}, {"min_samples_leaf", 1}};
  static const std::map<std::string, double> svr = {
      {"C", 1.0}, {"epsilon", 0.1}, {"gamma", 0.0}, {"tol", 1e-3}, {"max_iter", 1e7}};
  switch (kind) {
    case ModelKind::BayesianRidge: return ridge;
    case ModelKind::RandomForest: return forest;
    case ModelKind::Gbdt: return gbdt;
    case ModelKind::Svr: return svr;
  }
  return ridge;
}

namespace {

bool is_whole(double v) { return std::isfinite(v) && v == std::floor(v); }

}  // namespace

RegressorSpec RegressorSpec::defaults(ModelKind kind, std::uint64_t seed) {
  RegressorSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return spec;
}

double RegressorSpec::get(std::string_view name) const {
  if (auto it = hyperparameters.find(std::string(name)); it != hyperparameters.end()) {
    return it->second;
  }
  const auto& defs = default_hyperparameters(kind);
  auto it = defs.find(std::string(name));
  if (it == defs.end()) {
    throw ValidationError("unknown hyperparameter " + std::string(name) + " for " +
                          std::string(kind_name(kind)));
  }
  return it->second;
}

void RegressorSpec::validate() const {
  const auto& defs = default_hyperparameters(kind);
  const std::string k(kind_name(kind));
  for (const auto& [name, value] : hyperparameters) {
    if (!defs.count(name)) throw ValidationError("unknown hyperparameter " + name + " for " + k);
    if (!std::isfinite(value)) throw ValidationError(k + "." + name + " must be finite");
  }
  auto require = [&](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(k + ": " + what);
  };
  switch (kind) {
    case ModelKind::BayesianRidge:
      require(is_whole(get("max_iter")) && get("max_iter") >= 1, "max_iter must be a positive integer");
      require(get("tol") > 0, "tol must be positive");
      for (auto name : {"alpha_1", "alpha_2", "lambda_1", "lambda_2"}) {
        require(get(name) >= 0, std::string(name) + " must be non-negative");
      }
      break;
    case ModelKind::RandomForest:
      require(is_whole(get("n_trees")) && get("n_trees") >= 1, "n_trees must be >= 1");
      require(is_whole(get("max_features")) && get("max_features") >= 0, "max_features must be >= 0");
      require(is_whole(get("max_depth")) && get("max_depth") >= 0, "max_depth must be >= 0");
      require(get("min_samples_leaf") >= 1, "min_samples_leaf must be >= 1");
      break;
    case ModelKind::Gbdt:
      require(is_whole(get("rounds")) && get("rounds") >= 1, "rounds must be >= 1");
      require(is_whole(get("max_depth")) && get("max_depth") >= 1, "max_depth must be >= 1");
      require(get("learning_rate") > 0 && get("learning_rate") <= 1, "learning_rate must lie in (0, 1]");
      require(get("min_samples_leaf") >= 1, "min_samples_leaf must be >= 1");
      break;
    case ModelKind::Svr:
      require(get("C") > 0, "C must be positive");
      require(get("epsilon") > 0, "epsilon must be positive");
      require(get("gamma") >= 0, "gamma must be non-negative (0 selects 1/(p var X))");
      require(get("tol") > 0, "tol must be positive");
      require(is_whole(get("max_iter")) && get("max_iter") >= 1, "max_iter must be >= 1");
      break;
  }
}

int RegressionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

// ------------------------------------------------------------------ ridge

Eigen::VectorXd ridge_posterior_mean(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     double alpha, double lambda) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::VectorXd uty = svd.matrixU().transpose() * y;
  const double ratio = lambda / alpha;
  const Eigen::VectorXd scaled = (s.array() / (s.array().square() + ratio)) * uty.array();
  return svd.matrixV() * scaled;
}

namespace {

double mean_squared(const Eigen::VectorXd& v) { return v.squaredNorm() / static_cast<double>(v.size()); }

RidgeInternals fit_ridge(const RegressorSpec& spec, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, std::vector<double>& log) {
  const auto n = static_cast<double>(x.rows());
  const auto p = static_cast<double>(x.cols());
  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  const double alpha_1 = spec.get("alpha_1"), alpha_2 = spec.get("alpha_2");
  const double lambda_1 = spec.get("lambda_1"), lambda_2 = spec.get("lambda_2");
  const double tol = spec.get("tol");
  const int max_iter = static_cast<int>(spec.get("max_iter"));

  Eigen::BDCSVD<Eigen::MatrixXd> svd(xc, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const Eigen::ArrayXd eig = s.array().square();
  const Eigen::VectorXd uty = svd.matrixU().transpose() * yc;
  const Eigen::Index k = s.size();

  auto posterior = [&](double a, double l) -> Eigen::VectorXd {
    const Eigen::VectorXd scaled = (s.array() / (eig + l / a)) * uty.array();
    return svd.matrixV() * scaled;
  };

  double alpha = 1.0 / (mean_squared(yc) + std::numeric_limits<double>::epsilon());
  double lambda = 1.0;
  Eigen::VectorXd coef = posterior(alpha, lambda);
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    coef = posterior(alpha, lambda);
    const double rss = (yc - xc * coef).squaredNorm();
    const double gamma = (alpha * eig / (lambda + alpha * eig)).sum();

    // Log marginal likelihood at the current precisions.
    double logdet_sigma = -(lambda + alpha * eig).log().sum();
    if (static_cast<double>(k) < p) logdet_sigma -= (p - static_cast<double>(k)) * std::log(lambda);
    double score = lambda_1 * std::log(lambda) - lambda_2 * lambda + alpha_1 * std::log(alpha) -
                   alpha_2 * alpha;
    score += 0.5 * (p * std::log(lambda) + n * std::log(alpha) - alpha * rss -
                    lambda * coef.squaredNorm() + logdet_sigma - n * std::log(2.0 * std::numbers::pi));
    log.push_back(score);

    const double lambda_new = (gamma + 2.0 * lambda_1) / (coef.squaredNorm() + 2.0 * lambda_2);
    const double alpha_new = (n - gamma + 2.0 * alpha_1) / (rss + 2.0 * alpha_2);
    const bool converged = std::abs(alpha_new - alpha) <= tol * alpha &&
                           std::abs(lambda_new - lambda) <= tol * lambda;
    alpha = alpha_new;
    lambda = lambda_new;
    if (!std::isfinite(alpha) || !std::isfinite(lambda) || alpha <= 0 || lambda <= 0) {
      throw Error("Bayesian ridge precisions diverged");
    }
    if (converged) {
      ++iter;
      break;
    }
  }

  RidgeInternals out;
  out.coef = posterior(alpha, lambda);
  out.intercept = y_mean - x_mean.dot(out.coef);
  out.alpha = alpha;
  out.lambda = lambda;
  out.iterations = iter;
  return out;
}

// ------------------------------------------------------------------ trees

double training_rmse(const Eigen::VectorXd& y, const Eigen::VectorXd& f) {
  return std::sqrt((y - f).squaredNorm() / static_cast<double>(y.size()));
}

ForestInternals fit_forest(const RegressorSpec& spec, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, std::vector<double>& log) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  detail::TreeParams params;
  params.max_depth = static_cast<int>(spec.get("max_depth"));
  params.min_samples_leaf = spec.get("min_samples_leaf");
  const auto mtry = static_cast<std::size_t>(spec.get("max_features"));
  params.max_features = mtry > 0 ? std::min(mtry, p) : (p + 2) / 3;

  const detail::TreeBuilder builder(x);
  const auto n_trees = static_cast<std::size_t>(spec.get("n_trees"));
  ForestInternals forest;
  forest.trees.reserve(n_trees);
  std::vector<double> weight(n);
  const std::span<const double> target(y.data(), n);
  for (std::size_t b = 0; b < n_trees; ++b) {
    Rng rng(mix_seed({spec.seed, 0xF0257ULL, b}));
    std::fill(weight.begin(), weight.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) weight[rng.index(n)] += 1.0;
    forest.trees.push_back(builder.build(target, weight, params, &rng));
  }

  Eigen::VectorXd f = Eigen::VectorXd::Zero(y.size());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    for (const auto& t : forest.trees) sum += t.predict(x.row(i));
    f(i) = sum / static_cast<double>(forest.trees.size());
  }
  log.push_back(training_rmse(y, f));
  return forest;
}

BoostingInternals fit_gbdt(const RegressorSpec& spec, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, std::vector<double>& log) {
  const auto n = static_cast<std::size_t>(x.rows());
  detail::TreeParams params;
  params.max_depth = static_cast<int>(spec.get("max_depth"));
  params.min_samples_leaf = spec.get("min_samples_leaf");

  BoostingInternals model;
  model.learning_rate = spec.get("learning_rate");
  model.init = y.mean();
  const auto rounds = static_cast<std::size_t>(spec.get("rounds"));
  model.trees.reserve(rounds);

  const detail::TreeBuilder builder(x);
  const std::vector<double> weight(n, 1.0);
  Eigen::VectorXd f = Eigen::VectorXd::Constant(y.size(), model.init);
  std::vector<double> residual(n);
  for (std::size_t m = 0; m < rounds; ++m) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y(static_cast<Eigen::Index>(i)) - f(static_cast<Eigen::Index>(i));
    RegressionTree tree = builder.build(residual, weight, params, nullptr);
    for (Eigen::Index i = 0; i < x.rows(); ++i) f(i) += model.learning_rate * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    log.push_back(training_rmse(y, f));
  }
  return model;
}

// -------------------------------------------------------------------- SVR

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (a * b.transpose());
  k.colwise() += an;
  k.rowwise() += bn.transpose();
  return (-gamma * k.array().max(0.0)).exp().matrix();
}

// SMO on the 2n-variable epsilon-SVR dual with second-order working set
// selection:
//   min 1/2 b^T Q b + p^T b  s.t.  sum_i s_i b_i = 0,  0 <= b_i <= C
// with s = (+1..., -1...), Q_ij = s_i s_j K(i mod n, j mod n),
// p = (eps - y, eps + y).
SvrInternals fit_svr(const RegressorSpec& spec, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                     std::vector<double>& log) {
  const auto n = static_cast<std::size_t>(x.rows());
  const std::size_t l = 2 * n;
  const double c = spec.get("C");
  const double eps = spec.get("epsilon");
  const double tol = spec.get("tol");
  const auto max_iter = static_cast<std::int64_t>(spec.get("max_iter"));
  constexpr double kTau = 1e-12;

  double gamma = spec.get("gamma");
  if (gamma == 0.0) {
    const double mean = x.mean();
    const double var = (x.array() - mean).square().mean();
    gamma = var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * var) : 1.0;
  }
  const Eigen::MatrixXd kernel = rbf_kernel(x, x, gamma);

  std::vector<double> sign(l), lin(l), alpha(l, 0.0), grad(l);
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y(static_cast<Eigen::Index>(i));
    sign[i] = 1.0;
    sign[i + n] = -1.0;
    lin[i] = eps - yi;
    lin[i + n] = eps + yi;
  }
  grad = lin;
  auto q = [&](std::size_t i, std::size_t j) {
    return sign[i] * sign[j] * kernel(static_cast<Eigen::Index>(i % n), static_cast<Eigen::Index>(j % n));
  };
  auto qd = [&](std::size_t i) { return kernel(static_cast<Eigen::Index>(i % n), static_cast<Eigen::Index>(i % n)); };
  auto at_upper = [&](std::size_t i) { return alpha[i] >= c; };
  auto at_lower = [&](std::size_t i) { return alpha[i] <= 0.0; };
  auto dual_objective = [&] {
    double v = 0.0;
    for (std::size_t i = 0; i < l; ++i) v += alpha[i] * (grad[i] + lin[i]);
    return -0.5 * v;
  };

  log.push_back(dual_objective());
  std::int64_t iter = 0;
  double violation = std::numeric_limits<double>::infinity();
  for (;;) {
    // Working set: i maximizes the violation, j the second-order gain.
    double gmax = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t i_sel = -1;
    for (std::size_t t = 0; t < l; ++t) {
      if (sign[t] > 0) {
        if (!at_upper(t) && -grad[t] >= gmax) {
          gmax = -grad[t];
          i_sel = static_cast<std::ptrdiff_t>(t);
        }
      } else if (!at_lower(t) && grad[t] >= gmax) {
        gmax = grad[t];
        i_sel = static_cast<std::ptrdiff_t>(t);
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::ptrdiff_t j_sel = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    if (i_sel >= 0) {
      const auto i = static_cast<std::size_t>(i_sel);
      for (std::size_t t = 0; t < l; ++t) {
        if (sign[t] > 0) {
          if (at_lower(t)) continue;
          const double diff = gmax + grad[t];
          gmax2 = std::max(gmax2, grad[t]);
          if (diff > 0) {
            double quad = qd(i) + qd(t) - 2.0 * sign[i] * q(i, t);
            if (quad <= 0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best_obj) {
              best_obj = obj;
              j_sel = static_cast<std::ptrdiff_t>(t);
            }
          }
        } else {
          if (at_upper(t)) continue;
          const double diff = gmax - grad[t];
          gmax2 = std::max(gmax2, -grad[t]);
          if (diff > 0) {
            double quad = qd(i) + qd(t) + 2.0 * sign[i] * q(i, t);
            if (quad <= 0) quad = kTau;
            const double obj = -(diff * diff) / quad;
            if (obj <= best_obj) {
              best_obj = obj;
              j_sel = static_cast<std::ptrdiff_t>(t);
            }
          }
        }
      }
    }
    violation = gmax + gmax2;
    if (!std::isfinite(violation)) violation = 0.0;
    if (violation < tol || j_sel < 0) break;
    if (iter >= max_iter) {
      throw ConvergenceError("SMO did not converge after " + std::to_string(iter) +
                                 " iterations (max KKT violation " + std::to_string(violation) + ")",
                             violation);
    }

    const auto i = static_cast<std::size_t>(i_sel);
    const auto j = static_cast<std::size_t>(j_sel);
    const double old_i = alpha[i], old_j = alpha[j];
    const double qij = q(i, j);
    if (sign[i] != sign[j]) {
      double quad = qd(i) + qd(j) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else if (alpha[i] < 0) {
        alpha[i] = 0; alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
      } else if (alpha[j] > c) {
        alpha[j] = c; alpha[i] = c + diff;
      }
    } else {
      double quad = qd(i) + qd(j) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
      } else if (alpha[j] < 0) {
        alpha[j] = 0; alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
      } else if (alpha[i] < 0) {
        alpha[i] = 0; alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < l; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;

    ++iter;
    if (iter % static_cast<std::int64_t>(l) == 0) log.push_back(dual_objective());
  }
  log.push_back(dual_objective());

  // Offset from free variables, or the middle of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < l; ++t) {
    const double yg = sign[t] * grad[t];
    if (at_upper(t)) {
      if (sign[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (at_lower(t)) {
      if (sign[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;

  SvrInternals out;
  out.gamma = gamma;
  out.epsilon = eps;
  out.C = c;
  out.bias = -rho;
  out.final_violation = violation;
  out.iterations = iter;
  std::vector<Eigen::Index> sv;
  std::vector<double> coef;
  for (std::size_t r = 0; r < n; ++r) {
    const double cr = alpha[r] - alpha[r + n];
    if (cr != 0.0) {
      sv.push_back(static_cast<Eigen::Index>(r));
      coef.push_back(cr);
    }
  }
  out.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
  out.coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    out.support_vectors.row(static_cast<Eigen::Index>(k)) = x.row(sv[k]);
    out.coef(static_cast<Eigen::Index>(k)) = coef[k];
  }
  return out;
}

template <typename Row>
double predict_one(const ModelInternals& internals, const Row& row) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RidgeInternals>) {
          double sum = m.intercept;
          for (Eigen::Index j = 0; j < m.coef.size(); ++j) sum += m.coef(j) * row[j];
          return sum;
        } else if constexpr (std::is_same_v<T, ForestInternals>) {
          double sum = 0.0;
          for (const auto& t : m.trees) sum += t.predict(row);
          return sum / static_cast<double>(m.trees.size());
        } else if constexpr (std::is_same_v<T, BoostingInternals>) {
          double sum = 0.0;
          for (const auto& t : m.trees) sum += t.predict(row);
          return m.init + m.learning_rate * sum;
        } else {
          double sum = m.bias;
          for (Eigen::Index k = 0; k < m.support_vectors.rows(); ++k) {
            double d2 = 0.0;
            for (Eigen::Index j = 0; j < m.support_vectors.cols(); ++j) {
              const double d = m.support_vectors(k, j) - row[j];
              d2 += d * d;
            }
            sum += m.coef(k) * std::exp(-m.gamma * d2);
          }
          return sum;
        }
      },
      internals);
}

}  // namespace

// ------------------------------------------------------------ TrainedModel

Eigen::VectorXd TrainedModel::predict_values(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  if (const auto* ridge = std::get_if<RidgeInternals>(&internals)) {
    if (x.rows() > 0) out = (x * ridge->coef).array() + ridge->intercept;
    return out;
  }
  if (const auto* svr = std::get_if<SvrInternals>(&internals)) {
    if (x.rows() == 0) return out;
    if (svr->support_vectors.rows() == 0) return Eigen::VectorXd::Constant(x.rows(), svr->bias);
    out = rbf_kernel(x, svr->support_vectors, svr->gamma) * svr->coef;
    out.array() += svr->bias;
    return out;
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict_one(internals, x.row(i));
  return out;
}

double TrainedModel::predict_row(std::span<const double> row) const {
  return predict_one(internals, row);
}

TrainedModel fit(const RegressorSpec& spec, const FeatureMatrix& x, std::span<const double> y) {
  spec.validate();
  x.validate();
  if (x.rows() != y.size()) {
    throw ValidationError("fit: " + std::to_string(x.rows()) + " rows but " +
                          std::to_string(y.size()) + " targets");
  }
  if (y.size() < 2) throw ValidationError("fit needs at least 2 rows");
  if (x.cols() == 0) throw ValidationError("fit needs at least one feature column");
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("fit: non-finite target value");
  }

  const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  TrainedModel model;
  model.spec = spec;
  model.column_names = x.column_names();
  switch (spec.kind) {
    case ModelKind::BayesianRidge:
      model.internals = fit_ridge(spec, x.values, target, model.training_log);
      break;
    case ModelKind::RandomForest:
      model.internals = fit_forest(spec, x.values, target, model.training_log);
      break;
    case ModelKind::Gbdt:
      model.internals = fit_gbdt(spec, x.values, target, model.training_log);
      break;
    case ModelKind::Svr:
      model.internals = fit_svr(spec, x.values, target, model.training_log);
      break;
  }
  return model;
}

Eigen::VectorXd predict(const TrainedModel& model, const FeatureMatrix& x) {
  const auto names = x.column_names();
  const std::size_t common = std::min(names.size(), model.column_names.size());
  for (std::size_t j = 0; j < common; ++j) {
    if (names[j] != model.column_names[j]) {
      throw ValidationError("column mismatch at position " + std::to_string(j) + ": model expects " +
                            model.column_names[j] + ", got " + names[j]);
    }
  }
  if (names.size() > common) throw ValidationError("unexpected extra column " + names[common]);
  if (model.column_names.size() > common) {
    throw ValidationError("missing column " + model.column_names[common]);
  }
  Eigen::VectorXd out = model.predict_values(x.values);
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out(i))) throw Error("non-finite prediction for row " + x.row_ids[static_cast<std::size_t>(i)]);
  }
  return out;
}

std::vector<double> training_curve(const TrainedModel& model) { return model.training_log; }

// ---------------------------------------------------------- serialization

namespace {

json tree_to_json(const RegressionTree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), value = json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

RegressionTree tree_from_json(const json& j, std::size_t n_features) {
  RegressionTree tree;
  const auto& feature = j.at("feature");
  const std::size_t count = feature.size();
  for (const char* key : {"threshold", "left", "right", "value"}) {
    if (j.at(key).size() != count) throw ValidationError("model file: ragged tree arrays");
  }
  tree.nodes.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    TreeNode& n = tree.nodes[i];
    n.feature = feature[i].get<int>();
    n.threshold = j["threshold"][i].get<double>();
    n.left = j["left"][i].get<int>();
    n.right = j["right"][i].get<int>();
    n.value = j["value"][i].get<double>();
    if (!n.is_leaf()) {
      const bool ok = static_cast<std::size_t>(n.feature) < n_features && n.left > static_cast<int>(i) &&
                      n.right > static_cast<int>(i) && static_cast<std::size_t>(n.left) < count &&
                      static_cast<std::size_t>(n.right) < count;
      if (!ok) throw ValidationError("model file: invalid tree node " + std::to_string(i));
    }
  }
  if (tree.nodes.empty()) throw ValidationError("model file: empty tree");
  return tree;
}

json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vector_from_json(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json model_to_json(const TrainedModel& model) {
  json doc;
  doc["format"] = "polprog-model";
  doc["version"] = 1;
  doc["kind"] = std::string(kind_name(model.kind()));
  doc["seed"] = model.spec.seed;
  doc["hyperparameters"] = model.spec.hyperparameters;
  doc["column_names"] = model.column_names;
  doc["training_log"] = model.training_log;
  json internals;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RidgeInternals>) {
          internals = {{"coef", vector_to_json(m.coef)}, {"intercept", m.intercept},
                       {"alpha", m.alpha}, {"lambda", m.lambda}, {"iterations", m.iterations}};
        } else if constexpr (std::is_same_v<T, ForestInternals>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          internals = {{"trees", trees}};
        } else if constexpr (std::is_same_v<T, BoostingInternals>) {
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_to_json(t));
          internals = {{"init", m.init}, {"learning_rate", m.learning_rate}, {"trees", trees}};
        } else {
          json svs = json::array();
          for (Eigen::Index k = 0; k < m.support_vectors.rows(); ++k) {
            svs.push_back(vector_to_json(m.support_vectors.row(k).transpose()));
          }
          internals = {{"support_vectors", svs}, {"coef", vector_to_json(m.coef)},
                       {"bias", m.bias},         {"gamma", m.gamma},
                       {"epsilon", m.epsilon},   {"C", m.C},
                       {"final_violation", m.final_violation}, {"iterations", m.iterations}};
        }
      },
      model.internals);
  doc["internals"] = std::move(internals);
  return doc;
}

TrainedModel model_from_json(const json& doc) {
  try {
    if (doc.at("format") != "polprog-model") throw ValidationError("not a polprog model document");
    if (doc.at("version") != 1) {
      throw ValidationError("unsupported model version " + doc.at("version").dump());
    }
    auto kind = parse_kind(doc.at("kind").get<std::string>());
    if (!kind) throw ValidationError("unknown model kind " + doc.at("kind").dump());

    TrainedModel model;
    model.spec.kind = *kind;
    model.spec.seed = doc.at("seed").get<std::uint64_t>();
    model.spec.hyperparameters = doc.at("hyperparameters").get<std::map<std::string, double>>();
    model.spec.validate();
    model.column_names = doc.at("column_names").get<std::vector<std::string>>();
    model.training_log = doc.at("training_log").get<std::vector<double>>();
    const std::size_t p = model.column_names.size();
    const json& in = doc.at("internals");
    switch (*kind) {
      case ModelKind::BayesianRidge: {
        RidgeInternals m;
        m.coef = vector_from_json(in.at("coef"));
        if (static_cast<std::size_t>(m.coef.size()) != p) throw ValidationError("coefficient length mismatch");
        m.intercept = in.at("intercept").get<double>();
        m.alpha = in.at("alpha").get<double>();
        m.lambda = in.at("lambda").get<double>();
        m.iterations = in.at("iterations").get<int>();
        model.internals = std::move(m);
        break;
      }
      case ModelKind::RandomForest: {
        ForestInternals m;
        for (const auto& t : in.at("trees")) m.trees.push_back(tree_from_json(t, p));
        if (m.trees.empty()) throw ValidationError("forest has no trees");
        model.internals = std::move(m);
        break;
      }
      case ModelKind::Gbdt: {
        BoostingInternals m;
        m.init = in.at("init").get<double>();
        m.learning_rate = in.at("learning_rate").get<double>();
        for (const auto& t : in.at("trees")) m.trees.push_back(tree_from_json(t, p));
        model.internals = std::move(m);
        break;
      }
      case ModelKind::Svr: {
        SvrInternals m;
        const auto& svs = in.at("support_vectors");
        m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), static_cast<Eigen::Index>(p));
        for (std::size_t k = 0; k < svs.size(); ++k) {
          const Eigen::VectorXd row = vector_from_json(svs[k]);
          if (static_cast<std::size_t>(row.size()) != p) throw ValidationError("support vector length mismatch");
          m.support_vectors.row(static_cast<Eigen::Index>(k)) = row.transpose();
        }
        m.coef = vector_from_json(in.at("coef"));
        if (m.coef.size() != m.support_vectors.rows()) throw ValidationError("coef/support vector count mismatch");
        m.bias = in.at("bias").get<double>();
        m.gamma = in.at("gamma").get<double>();
        m.epsilon = in.at("epsilon").get<double>();
        m.C = in.at("C").get<double>();
        m.final_violation = in.at("final_violation").get<double>();
        m.iterations = in.at("iterations").get<std::int64_t>();
        model.internals = std::move(m);
        break;
      }
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
  io::write_new_file(path, model_to_json(model).dump(1) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(json::parse(io::read_file(path)));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

}  // namespace polprog
