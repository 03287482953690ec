// Copyright 2026 The Slowdown Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slowdown/forest.h"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <limits>
#include <optional>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>
#include <utility>

#include "slowdown/error.h"

namespace slowdown {

using nlohmann::json;

std::size_t RegressionTree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const TreeNode& n = nodes[i];
    i = static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right);
  }
  return i;
}

std::size_t RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t max_depth = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    max_depth = std::max(max_depth, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return max_depth;
}

void Hyperparams::validate(std::size_t num_features) const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "invalid hyperparameter: " + what);
  };
  if (num_trees < 1) fail("num_trees must be >= 1");
  if (max_depth && *max_depth < 0) fail("max_depth must be >= 0");
  if (min_samples_leaf < 1) fail("min_samples_leaf must be >= 1");
  if (features_per_split &&
      (*features_per_split < 1 ||
       static_cast<std::size_t>(*features_per_split) > num_features)) {
    fail("features_per_split must lie in [1, K]");
  }
}

int Hyperparams::resolved_features_per_split(std::size_t num_features) const {
  if (features_per_split) return *features_per_split;
  return std::max(1, static_cast<int>(num_features / 3));
}

namespace {

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

// The grower appends both children before descending, so its layout differs
// from plain preorder; renumber to preorder for a canonical form.
RegressionTree canonical(const RegressionTree& tree) {
  RegressionTree out;
  out.index = tree.index;
  out.nodes.reserve(tree.nodes.size());
  auto visit = [&](auto&& self, std::size_t i) -> std::size_t {
    const std::size_t at = out.nodes.size();
    out.nodes.push_back(tree.nodes[i]);
    if (!tree.nodes[i].is_leaf()) {
      const auto l = self(self, static_cast<std::size_t>(tree.nodes[i].left));
      const auto r = self(self, static_cast<std::size_t>(tree.nodes[i].right));
      out.nodes[at].left = static_cast<std::int32_t>(l);
      out.nodes[at].right = static_cast<std::int32_t>(r);
    }
    return at;
  };
  if (!tree.nodes.empty()) visit(visit, 0);
  return out;
}

class TreeGrower {
 public:
  TreeGrower(const Matrix& X, std::span<const double> y, const Hyperparams& hp,
             std::span<const std::size_t> allowed, int features_per_split,
             std::uint64_t tree_index)
      : X_(X), y_(y), hp_(hp), allowed_(allowed.begin(), allowed.end()),
        features_per_split_(features_per_split) {
    std::seed_seq seq{static_cast<std::uint32_t>(hp.seed),
                      static_cast<std::uint32_t>(hp.seed >> 32),
                      static_cast<std::uint32_t>(tree_index)};
    rng_.seed(seq);
  }

  RegressionTree grow(std::size_t tree_index) {
    const std::size_t n = y_.size();
    samples_.resize(n);
    if (hp_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& s : samples_) s = pick(rng_);
    } else {
      std::iota(samples_.begin(), samples_.end(), std::size_t{0});
    }

    RegressionTree tree;
    tree.index = tree_index;
    tree.nodes.emplace_back();
    struct Pending {
      std::size_t node, begin, end;
      int depth;
    };
    std::vector<Pending> stack{{0, 0, n, 0}};
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      auto split = fill_and_find_split(tree.nodes[p.node], p.begin, p.end, p.depth);
      if (!split) continue;

      auto first = samples_.begin() + static_cast<std::ptrdiff_t>(p.begin);
      auto last = samples_.begin() + static_cast<std::ptrdiff_t>(p.end);
      auto mid = std::stable_partition(first, last, [&](std::size_t s) {
        return X_(s, split->feature) <= split->threshold;
      });
      const std::size_t mid_pos = static_cast<std::size_t>(mid - samples_.begin());

      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      const auto right = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[p.node];
      node.feature = split->feature;
      node.threshold = split->threshold;
      node.left = left;
      node.right = right;
      stack.push_back({static_cast<std::size_t>(right), mid_pos, p.end, p.depth + 1});
      stack.push_back({static_cast<std::size_t>(left), p.begin, mid_pos, p.depth + 1});
    }
    return tree;
  }

 private:
  // Sets the node's mean and count; returns the best split if the node should
  // be split further.
  std::optional<SplitCandidate> fill_and_find_split(TreeNode& node,
                                                    std::size_t begin,
                                                    std::size_t end, int depth) {
    const std::size_t n = end - begin;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      const double v = y_[samples_[i]];
      sum += v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    node.mean = sum / static_cast<double>(n);
    node.count = static_cast<std::int64_t>(n);

    const auto min_leaf = static_cast<std::size_t>(hp_.min_samples_leaf);
    if (hp_.max_depth && depth >= *hp_.max_depth) return std::nullopt;
    if (n < 2 * min_leaf || lo == hi) return std::nullopt;

    double node_ss = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double d = y_[samples_[i]] - node.mean;
      node_ss += d * d;
    }

    std::vector<std::size_t> order = allowed_;
    std::shuffle(order.begin(), order.end(), rng_);

    SplitCandidate best;
    int examined = 0;
    for (std::size_t feature : order) {
      if (examined >= features_per_split_) break;
      pairs_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t s = samples_[i];
        pairs_.emplace_back(X_(s, feature), y_[s]);
      }
      std::sort(pairs_.begin(), pairs_.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      if (pairs_.front().first == pairs_.back().first) continue;  // constant here
      ++examined;

      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += pairs_[i].second;
        if (pairs_[i].first == pairs_[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / static_cast<double>(n_left) +
                             right_sum * right_sum / static_cast<double>(n_right);
        double threshold = 0.5 * (pairs_[i].first + pairs_[i + 1].first);
        if (!(threshold < pairs_[i + 1].first)) threshold = pairs_[i].first;
        const int f = static_cast<int>(feature);
        if (score > best.score ||
            (score == best.score &&
             (f < best.feature || (f == best.feature && threshold < best.threshold)))) {
          best = {f, threshold, score};
        }
      }
    }
    if (best.feature < 0) return std::nullopt;
    const double gain = best.score - sum * sum / static_cast<double>(n);
    if (!(gain > 1e-12 * node_ss)) return std::nullopt;
    return best;
  }

  const Matrix& X_;
  std::span<const double> y_;
  const Hyperparams& hp_;
  std::vector<std::size_t> allowed_;
  int features_per_split_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> samples_;
  std::vector<std::pair<double, double>> pairs_;
};

void check_finite(const Matrix& X, std::span<const double> y) {
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (double v : X.row(r)) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::kNonFiniteInput,
                    "non-finite feature value in row " + std::to_string(r));
      }
    }
  }
  for (double v : y) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteInput, "non-finite target value");
    }
  }
}

void check_width(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.num_features) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(model.num_features) +
                    " features, got " + std::to_string(x.size()));
  }
}

}  // namespace

ForestModel train_forest(const Matrix& X, std::span<const double> y,
                         const Hyperparams& hp, const TrainOptions& options) {
  if (X.rows() == 0 || y.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "no training rows");
  }
  if (X.rows() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "X and y row counts differ");
  }
  check_finite(X, y);

  std::vector<std::size_t> allowed = options.allowed_features;
  if (allowed.empty()) {
    allowed.resize(X.cols());
    std::iota(allowed.begin(), allowed.end(), std::size_t{0});
  }
  std::sort(allowed.begin(), allowed.end());
  allowed.erase(std::unique(allowed.begin(), allowed.end()), allowed.end());
  if (allowed.empty() || allowed.back() >= X.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "allowed feature index out of range");
  }
  hp.validate(allowed.size());

  ForestModel model;
  model.hyperparams = hp;
  model.hyperparams.features_per_split = hp.resolved_features_per_split(allowed.size());
  model.num_features = X.cols();
  model.split_features = allowed;
  model.schema_fingerprint = options.schema_fingerprint;
  model.training_row_count = X.rows();
  model.trained_at = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();

  const auto num_trees = static_cast<std::size_t>(hp.num_trees);
  model.trees.resize(num_trees);
  const int mtry = *model.hyperparams.features_per_split;
  auto grow_one = [&](std::size_t j) {
    TreeGrower grower(X, y, model.hyperparams, allowed, mtry, j);
    model.trees[j] = canonical(grower.grow(j));
  };

  unsigned threads = options.threads ? options.threads
                                     : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, num_trees));
  if (threads <= 1) {
    for (std::size_t j = 0; j < num_trees; ++j) grow_one(j);
    return model;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        try {
          for (std::size_t j = next++; j < num_trees; j = next++) grow_one(j);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return model;
}

double predict(const ForestModel& model, std::span<const double> x) {
  check_width(model, x);
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.predict(x);
  return sum / static_cast<double>(model.trees.size());
}

std::vector<double> predict_per_tree(const ForestModel& model,
                                     std::span<const double> x) {
  check_width(model, x);
  std::vector<double> out;
  out.reserve(model.trees.size());
  for (const auto& tree : model.trees) out.push_back(tree.predict(x));
  return out;
}

double LinearModel::predict(std::span<const double> x) const {
  if (x.size() != coefficients.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "linear model width mismatch");
  }
  double y = intercept;
  for (std::size_t k = 0; k < x.size(); ++k) y += coefficients[k] * x[k];
  return y;
}

LinearModel train_linear(const Matrix& X, std::span<const double> y) {
  if (X.rows() == 0 || X.rows() != y.size()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "linear fit needs matching rows");
  }
  check_finite(X, y);
  const auto n = static_cast<Eigen::Index>(X.rows());
  const auto p = static_cast<Eigen::Index>(X.cols());

  Eigen::MatrixXd Z(n, p);
  Eigen::VectorXd means = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd scales = Eigen::VectorXd::Ones(p);
  for (Eigen::Index c = 0; c < p; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) Z(r, c) = X(r, c);
    means(c) = Z.col(c).mean();
    Z.col(c).array() -= means(c);
    const double norm = Z.col(c).norm();
    scales(c) = norm > 0.0 ? norm : 1.0;
    Z.col(c) /= scales(c);
  }
  Eigen::VectorXd target(n);
  for (Eigen::Index r = 0; r < n; ++r) target(r) = y[r];
  const double y_mean = target.mean();
  target.array() -= y_mean;

  Eigen::MatrixXd gram = Z.transpose() * Z;
  const Eigen::VectorXd rhs = Z.transpose() * target;
  Eigen::VectorXd b;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  bool singular = llt.info() != Eigen::Success;
  if (!singular) {
    // Reject numerically rank-deficient systems LLT still accepts.
    const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
    singular = p > 0 && d.minCoeff() < 1e-7 * std::max(1.0, d.maxCoeff());
  }
  if (singular) {
    gram.diagonal().array() += 1e-8;
    b = gram.ldlt().solve(rhs);
  } else {
    b = llt.solve(rhs);
  }

  LinearModel model;
  model.coefficients.resize(static_cast<std::size_t>(p));
  model.intercept = y_mean;
  for (Eigen::Index c = 0; c < p; ++c) {
    const double beta = b(c) / scales(c);
    model.coefficients[static_cast<std::size_t>(c)] = beta;
    model.intercept -= beta * means(c);
  }
  return model;
}

json to_json(const Hyperparams& hp) {
  json doc = {{"num_trees", hp.num_trees},
              {"max_depth", hp.max_depth ? json(*hp.max_depth) : json(nullptr)},
              {"min_samples_leaf", hp.min_samples_leaf},
              {"features_per_split", hp.features_per_split
                                         ? json(*hp.features_per_split)
                                         : json(nullptr)},
              {"bootstrap", hp.bootstrap},
              {"seed", hp.seed}};
  return doc;
}

Hyperparams hyperparams_from_json(const json& doc) {
  Hyperparams hp;
  hp.num_trees = doc.value("num_trees", hp.num_trees);
  if (doc.contains("max_depth") && !doc["max_depth"].is_null()) {
    hp.max_depth = doc["max_depth"].get<int>();
  }
  hp.min_samples_leaf = doc.value("min_samples_leaf", hp.min_samples_leaf);
  if (doc.contains("features_per_split") && !doc["features_per_split"].is_null()) {
    hp.features_per_split = doc["features_per_split"].get<int>();
  }
  hp.bootstrap = doc.value("bootstrap", hp.bootstrap);
  hp.seed = doc.value("seed", hp.seed);
  return hp;
}

namespace {

json node_to_json(const RegressionTree& tree, std::size_t i) {
  const TreeNode& n = tree.nodes[i];
  json out = {{"mean", n.mean}, {"count", n.count}};
  if (!n.is_leaf()) {
    out["split"] = {{"k", n.feature}, {"t", n.threshold}};
    out["left"] = node_to_json(tree, static_cast<std::size_t>(n.left));
    out["right"] = node_to_json(tree, static_cast<std::size_t>(n.right));
  }
  return out;
}

// Rebuilds nodes in the same preorder the grower produces.
std::size_t node_from_json(const json& doc, RegressionTree& tree) {
  const std::size_t i = tree.nodes.size();
  tree.nodes.emplace_back();
  tree.nodes[i].mean = doc.at("mean").get<double>();
  tree.nodes[i].count = doc.at("count").get<std::int64_t>();
  if (doc.contains("split")) {
    const auto& split = doc["split"];
    tree.nodes[i].feature = split.at("k").get<int>();
    tree.nodes[i].threshold = split.at("t").get<double>();
    const auto left = node_from_json(doc.at("left"), tree);
    const auto right = node_from_json(doc.at("right"), tree);
    tree.nodes[i].left = static_cast<std::int32_t>(left);
    tree.nodes[i].right = static_cast<std::int32_t>(right);
  }
  return i;
}

}  // namespace

json to_json(const ForestModel& model) {
  json trees = json::array();
  for (const auto& tree : model.trees) {
    trees.push_back({{"index", tree.index}, {"root", node_to_json(tree, 0)}});
  }
  return {{"format", "slowdown-forest/1"},
          {"num_features", model.num_features},
          {"split_features", model.split_features},
          {"hyperparams", to_json(model.hyperparams)},
          {"schema_fingerprint", model.schema_fingerprint},
          {"trained_at", model.trained_at},
          {"training_row_count", model.training_row_count},
          {"trees", std::move(trees)}};
}

ForestModel forest_from_json(const json& doc) {
  try {
    ForestModel model;
    model.num_features = doc.at("num_features").get<std::size_t>();
    model.split_features = doc.value("split_features", std::vector<std::size_t>{});
    model.hyperparams = hyperparams_from_json(doc.at("hyperparams"));
    model.schema_fingerprint = doc.value("schema_fingerprint", std::string());
    model.trained_at = doc.value("trained_at", std::int64_t{0});
    model.training_row_count = doc.value("training_row_count", std::size_t{0});
    for (const auto& t : doc.at("trees")) {
      RegressionTree tree;
      tree.index = t.value("index", model.trees.size());
      node_from_json(t.at("root"), tree);
      for (const auto& n : tree.nodes) {
        if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= model.num_features) {
          throw Error(ErrorCode::kCorruptArtifact, "split feature out of range");
        }
      }
      model.trees.push_back(std::move(tree));
    }
    if (model.trees.empty()) {
      throw Error(ErrorCode::kCorruptArtifact, "model has no trees");
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorruptArtifact,
                std::string("invalid model document: ") + e.what());
  }
}

}  // namespace slowdown
