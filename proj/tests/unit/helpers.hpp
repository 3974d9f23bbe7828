#pragma once

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "polprog/corpus.hpp"
#include "polprog/features.hpp"

namespace testutil {

inline polprog::PolicyRecord record(std::string id, polprog::StageLabel stage,
                                    std::string body = "climate policy text") {
  polprog::PolicyRecord r;
  r.id = std::move(id);
  r.title = "Title";
  r.body = std::move(body);
  r.stage = stage;
  r.month = 3;
  r.year = 2021;
  return r;
}

/// Named matrix with columns x0..x{p-1} in the given group.
inline polprog::FeatureMatrix matrix(const Eigen::MatrixXd& values,
                                     polprog::FeatureGroup group = polprog::FeatureGroup::Metadata,
                                     const std::string& prefix = "x") {
  polprog::FeatureMatrix m;
  for (Eigen::Index i = 0; i < values.rows(); ++i) m.row_ids.push_back("r" + std::to_string(i));
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    m.columns.push_back({prefix + std::to_string(j), group});
  }
  m.values = values;
  return m;
}

inline Eigen::MatrixXd uniform_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols,
                                      double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(gen);
  }
  return m;
}

inline std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

/// Explicit-loop TF-IDF written from the formula, sharing no code with the
/// library: vocabulary by df >= min_df, smoothed idf, raw counts, L2 rows.
struct BruteTfidf {
  std::vector<std::string> vocab;
  std::vector<std::vector<double>> rows;
};

inline BruteTfidf brute_tfidf(const std::vector<std::vector<std::string>>& train,
                              const std::vector<std::vector<std::string>>& docs, int min_df) {
  std::map<std::string, int> df;
  for (const auto& d : train) {
    std::set<std::string> seen(d.begin(), d.end());
    for (const auto& t : seen) df[t] += 1;
  }
  BruteTfidf out;
  for (const auto& [t, c] : df) {
    if (c >= min_df) out.vocab.push_back(t);
  }
  const double n = static_cast<double>(train.size());
  for (const auto& d : docs) {
    std::vector<double> row;
    double norm = 0.0;
    for (const auto& t : out.vocab) {
      int count = 0;
      for (const auto& u : d) count += (u == t) ? 1 : 0;
      const double v = count * (std::log((1.0 + n) / (1.0 + df[t])) + 1.0);
      row.push_back(v);
      norm += v * v;
    }
    if (norm > 0) {
      for (auto& v : row) v /= std::sqrt(norm);
    }
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace testutil
