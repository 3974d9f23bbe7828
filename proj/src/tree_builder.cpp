#include "tree_builder.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace polprog::detail {

namespace {

struct OpenNode {
  int node = 0;
  int depth = 0;
  double w = 0.0;
  double wt = 0.0;
  double wtt = 0.0;
  double best_gain = 0.0;
  int best_feature = -1;
  double best_threshold = 0.0;
};

double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

}  // namespace

TreeBuilder::TreeBuilder(const Eigen::MatrixXd& x) : x_(x) {
  const auto n = static_cast<int>(x.rows());
  order_.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    auto& ord = order_[static_cast<std::size_t>(f)];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return x(a, f) < x(b, f); });
  }
}

RegressionTree TreeBuilder::build(std::span<const double> target, std::span<const double> weight,
                                  const TreeParams& params, Rng* rng) const {
  const std::size_t n = static_cast<std::size_t>(x_.rows());
  const std::size_t p = static_cast<std::size_t>(x_.cols());

  RegressionTree tree;
  tree.nodes.emplace_back();

  std::vector<int> node_of(n, -1);
  OpenNode root;
  for (std::size_t r = 0; r < n; ++r) {
    if (weight[r] <= 0.0) continue;
    node_of[r] = 0;
    root.w += weight[r];
    root.wt += weight[r] * target[r];
    root.wtt += weight[r] * target[r] * target[r];
  }
  std::vector<OpenNode> open{root};

  const bool subsample = params.max_features > 0 && params.max_features < p;
  std::vector<int> feature_ids(p);
  std::iota(feature_ids.begin(), feature_ids.end(), 0);

  std::vector<double> left_w, left_wt, last_value;
  std::vector<char> has_last;
  std::vector<int> stamp;
  std::vector<std::vector<int>> nodes_for_feature(p);

  while (!open.empty()) {
    const std::size_t m = open.size();
    left_w.assign(m, 0.0);
    left_wt.assign(m, 0.0);
    last_value.assign(m, 0.0);
    has_last.assign(m, 0);
    stamp.assign(m, -1);
    for (auto& list : nodes_for_feature) list.clear();

    for (std::size_t k = 0; k < m; ++k) {
      const OpenNode& node = open[k];
      const bool depth_ok = params.max_depth <= 0 || node.depth < params.max_depth;
      const double sse = node.wtt - node.wt * node.wt / node.w;
      if (!depth_ok || node.w < 2.0 * params.min_samples_leaf || !(sse > 0.0)) continue;
      if (subsample) {
        // Partial Fisher-Yates draw of max_features distinct columns.
        for (std::size_t i = 0; i < params.max_features; ++i) {
          std::swap(feature_ids[i], feature_ids[i + rng->index(p - i)]);
          nodes_for_feature[static_cast<std::size_t>(feature_ids[i])].push_back(static_cast<int>(k));
        }
      } else {
        for (std::size_t f = 0; f < p; ++f) nodes_for_feature[f].push_back(static_cast<int>(k));
      }
    }

    for (std::size_t f = 0; f < p; ++f) {
      const auto& nodes = nodes_for_feature[f];
      if (nodes.empty()) continue;
      for (int k : nodes) {
        stamp[static_cast<std::size_t>(k)] = static_cast<int>(f);
        left_w[static_cast<std::size_t>(k)] = 0.0;
        left_wt[static_cast<std::size_t>(k)] = 0.0;
        has_last[static_cast<std::size_t>(k)] = 0;
      }
      const auto fi = static_cast<Eigen::Index>(f);
      for (int r : order_[f]) {
        const int k = node_of[static_cast<std::size_t>(r)];
        if (k < 0) continue;
        const auto ku = static_cast<std::size_t>(k);
        if (stamp[ku] != static_cast<int>(f)) continue;
        const double v = x_(r, fi);
        OpenNode& node = open[ku];
        if (has_last[ku] && v > last_value[ku]) {
          const double lw = left_w[ku];
          const double rw = node.w - lw;
          if (lw >= params.min_samples_leaf && rw >= params.min_samples_leaf) {
            const double lwt = left_wt[ku];
            const double rwt = node.wt - lwt;
            const double gain = lwt * lwt / lw + rwt * rwt / rw - node.wt * node.wt / node.w;
            if (gain > node.best_gain) {
              node.best_gain = gain;
              node.best_feature = static_cast<int>(f);
              node.best_threshold = split_threshold(last_value[ku], v);
            }
          }
        }
        const double w = weight[static_cast<std::size_t>(r)];
        left_w[ku] += w;
        left_wt[ku] += w * target[static_cast<std::size_t>(r)];
        last_value[ku] = v;
        has_last[ku] = 1;
      }
    }

    // Finalize this level: split or turn into leaves.
    std::vector<OpenNode> next;
    std::vector<int> left_child(m, -1), right_child(m, -1);
    for (std::size_t k = 0; k < m; ++k) {
      OpenNode& node = open[k];
      const double min_gain = 1e-12 * node.wtt;
      if (node.best_feature >= 0 && node.best_gain > min_gain) {
        const int l = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(node.node)];
        parent.feature = node.best_feature;
        parent.threshold = node.best_threshold;
        parent.left = l;
        parent.right = l + 1;
        parent.value = node.wt / node.w;
        left_child[k] = static_cast<int>(next.size());
        next.push_back(OpenNode{l, node.depth + 1});
        right_child[k] = static_cast<int>(next.size());
        next.push_back(OpenNode{l + 1, node.depth + 1});
      } else {
        TreeNode& leaf = tree.nodes[static_cast<std::size_t>(node.node)];
        leaf.feature = -1;
        leaf.value = node.wt / node.w;
      }
    }

    for (std::size_t r = 0; r < n; ++r) {
      const int k = node_of[r];
      if (k < 0) continue;
      const auto ku = static_cast<std::size_t>(k);
      if (left_child[ku] < 0) {
        node_of[r] = -1;
        continue;
      }
      const TreeNode& tn = tree.nodes[static_cast<std::size_t>(open[ku].node)];
      const bool go_left = x_(static_cast<Eigen::Index>(r), tn.feature) <= tn.threshold;
      const int child = go_left ? left_child[ku] : right_child[ku];
      node_of[r] = child;
      OpenNode& c = next[static_cast<std::size_t>(child)];
      c.w += weight[r];
      c.wt += weight[r] * target[r];
      c.wtt += weight[r] * target[r] * target[r];
    }
    open = std::move(next);
  }
  return tree;
}

}  // namespace polprog::detail
