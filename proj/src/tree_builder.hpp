#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "polprog/models.hpp"
#include "polprog/rng.hpp"

namespace polprog::detail {

struct TreeParams {
  int max_depth = 0;                 // 0: unlimited
  double min_samples_leaf = 1.0;     // in units of row weight
  std::size_t max_features = 0;      // 0: every feature at every node
};

/// Least-squares regression trees grown level by level.
///
/// Each feature is sorted once; every level then scans each feature's
/// sorted order a single time and updates the running left-side sums of
/// whichever open node the row belongs to. Row weights let bootstrap
/// resampling reuse the same presorted order.
class TreeBuilder {
 public:
  explicit TreeBuilder(const Eigen::MatrixXd& x);

  /// Grows one tree on `target` with per-row `weight` (0 excludes a row).
  /// `rng` is only used when params.max_features subsamples features.
  RegressionTree build(std::span<const double> target, std::span<const double> weight,
                       const TreeParams& params, Rng* rng) const;

 private:
  const Eigen::MatrixXd& x_;
  std::vector<std::vector<int>> order_;
};

}  // namespace polprog::detail
