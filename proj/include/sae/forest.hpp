#ifndef SAE_FOREST_HPP
#define SAE_FOREST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sae/areal.hpp"
#include "sae/rng.hpp"

namespace sae {

struct ForestHyper {
  int n_trees = 1000;
  int mtry = 0;      // 0: max(1, p/3)
  int nodesize = 5;  // maximum responses per terminal node
  std::uint64_t seed = 0;
  // When set, this covariate is always among the candidates at every split
  // (it takes one of the mtry slots).
  std::optional<std::size_t> forced_index;

  int resolved_mtry(std::size_t p) const {
    if (mtry > 0) return std::min<int>(mtry, static_cast<int>(p));
    return std::max(1, static_cast<int>(p) / 3);
  }
};

namespace forest_detail {

struct Node {
  int cov = -1;  // -1: leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double leaf_mean = 0.0;
  std::uint32_t leaf_size = 0;  // bootstrap responses in the leaf
  std::vector<std::pair<std::uint32_t, std::uint32_t>> leaf_rows;  // (row, count)
};

struct Tree {
  std::vector<Node> nodes;
  std::vector<std::uint32_t> bootstrap_counts;  // per training row
};

}  // namespace forest_detail

// Bagged regression forest over areal rows.  Training rows are canonicalised
// by area_id before any random draw, so the fit does not depend on input
// order.  Predictions are convex combinations of the training responses with
// per-row weights proportional to bootstrap multiplicity inside the matched
// leaf, normalised within the leaf and averaged over trees.
class Forest {
 public:
  struct Prediction {
    double point = 0.0;
    std::vector<double> weights;  // one per training row, original input order
  };

  std::size_t n_rows() const { return y_.size(); }
  std::size_t n_covariates() const { return p_; }
  std::size_t n_trees() const { return trees_.size(); }
  const ForestHyper& hyper() const { return hyper_; }

  double predict_point(std::span<const double> x) const {
    check_dim(x.size());
    double sum = 0.0;
    for (const auto& tree : trees_) sum += leaf_of(tree, x).leaf_mean;
    return sum / static_cast<double>(trees_.size());
  }

  Prediction predict(std::span<const double> x) const {
    check_dim(x.size());
    Prediction out;
    out.weights.assign(y_.size(), 0.0);
    for (const auto& tree : trees_) {
      const auto& leaf = leaf_of(tree, x);
      const double denom = static_cast<double>(leaf.leaf_size);
      for (const auto& [row, count] : leaf.leaf_rows)
        out.weights[input_index_[row]] += static_cast<double>(count) / denom;
    }
    const double inv_b = 1.0 / static_cast<double>(trees_.size());
    for (auto& w : out.weights) w *= inv_b;
    for (std::size_t i = 0; i < y_.size(); ++i)
      out.point += out.weights[input_index_[i]] * y_[i];
    return out;
  }

  // Out-of-bag prediction per training row (original input order); absent for
  // rows that appear in every tree's bootstrap.  A tree only contributes to
  // rows with zero multiplicity in its bootstrap.
  std::vector<std::optional<double>> oob_predictions() const {
    std::vector<double> sums(y_.size(), 0.0);
    std::vector<int> counts(y_.size(), 0);
    std::vector<double> x(p_);
    for (const auto& tree : trees_) {
      for (std::size_t i = 0; i < y_.size(); ++i) {
        if (tree.bootstrap_counts[i] != 0) continue;
        for (std::size_t j = 0; j < p_; ++j) x[j] = x_col(j)[i];
        sums[i] += leaf_of(tree, x).leaf_mean;
        counts[i] += 1;
      }
    }
    std::vector<std::optional<double>> out(y_.size());
    for (std::size_t i = 0; i < y_.size(); ++i)
      if (counts[i] > 0) out[input_index_[i]] = sums[i] / counts[i];
    return out;
  }

  void save(const std::string& path) const;
  static Forest load(const std::string& path);

  friend Forest fit_forest(const std::vector<ArealRow>& train,
                           const ForestHyper& hyper);
  friend std::vector<double> permutation_importance(const Forest& forest,
                                                    std::uint64_t seed);

 private:
  void check_dim(std::size_t n) const {
    if (n != p_)
      throw std::invalid_argument("forest: covariate dimension mismatch");
  }

  std::span<const double> x_col(std::size_t j) const {
    return {x_.data() + j * y_.size(), y_.size()};
  }

  const forest_detail::Node& leaf_of(const forest_detail::Tree& tree,
                                     std::span<const double> x) const {
    int id = 0;
    for (;;) {
      const auto& node = tree.nodes[id];
      if (node.cov < 0) return node;
      id = (x[node.cov] <= node.threshold) ? node.left : node.right;
    }
  }

  // Leaf lookup for an internal row with one coordinate overridden; used by
  // the permutation importance pass.
  const forest_detail::Node& leaf_of_row(const forest_detail::Tree& tree,
                                         std::size_t row, int override_cov,
                                         double override_value) const {
    int id = 0;
    for (;;) {
      const auto& node = tree.nodes[id];
      if (node.cov < 0) return node;
      const double v = (node.cov == override_cov) ? override_value
                                                  : x_col(node.cov)[row];
      id = (v <= node.threshold) ? node.left : node.right;
    }
  }

  ForestHyper hyper_;
  std::size_t p_ = 0;
  std::vector<double> x_;  // column-major, canonical row order
  std::vector<double> y_;  // canonical row order
  std::vector<std::uint32_t> input_index_;  // canonical row -> input position
  std::vector<forest_detail::Tree> trees_;
};

namespace forest_detail {

struct SplitChoice {
  int cov = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Exact best split over the candidate covariates: thresholds are midpoints
// between consecutive distinct sorted values, the score is the two-child sum
// of squared deviations, and ties are broken by (lowest covariate index,
// lowest threshold).  Candidates must be sorted ascending for the tie rule.
inline SplitChoice best_split(std::span<const double> xcol,
                              std::span<const double> y,
                              std::span<const std::uint32_t> entries,
                              std::vector<std::pair<double, double>>& scratch,
                              int cov, const SplitChoice& incumbent) {
  scratch.clear();
  for (std::uint32_t row : entries) scratch.emplace_back(xcol[row], y[row]);
  std::sort(scratch.begin(), scratch.end());
  const std::size_t k = scratch.size();

  double total = 0.0, total_sq = 0.0;
  for (const auto& [xv, yv] : scratch) {
    total += yv;
    total_sq += yv * yv;
  }
  const double sse_node = total_sq - total * total / static_cast<double>(k);

  SplitChoice best = incumbent;
  double left_sum = 0.0, left_sq = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    left_sum += scratch[i].second;
    left_sq += scratch[i].second * scratch[i].second;
    if (scratch[i].first == scratch[i + 1].first) continue;
    const double nl = static_cast<double>(i + 1);
    const double nr = static_cast<double>(k - i - 1);
    const double right_sum = total - left_sum;
    const double right_sq = total_sq - left_sq;
    const double sse = (left_sq - left_sum * left_sum / nl) +
                       (right_sq - right_sum * right_sum / nr);
    // Candidates are visited in ascending (covariate, threshold) order, so
    // keeping the incumbent on ties implements the deterministic tie-break.
    const double gain = sse_node - sse;
    if (gain > best.gain) {
      best.cov = cov;
      best.threshold = 0.5 * (scratch[i].first + scratch[i + 1].first);
      best.gain = gain;
    }
  }
  return best;
}

}  // namespace forest_detail

inline Forest fit_forest(const std::vector<ArealRow>& train,
                         const ForestHyper& hyper) {
  if (train.empty()) throw std::invalid_argument("forest: empty training set");
  if (hyper.n_trees < 1) throw std::invalid_argument("forest: need >= 1 tree");
  if (hyper.nodesize < 1) throw std::invalid_argument("forest: nodesize >= 1");
  const std::size_t m = train.size();
  const std::size_t p = train.front().xbar_s.size();
  if (hyper.forced_index && *hyper.forced_index >= p)
    throw std::invalid_argument("forest: forced index out of range");

  Forest forest;
  forest.hyper_ = hyper;
  forest.p_ = p;

  // Canonical order by area_id, so the bootstrap streams are independent of
  // the caller's row order.
  std::vector<std::uint32_t> order(m);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return train[a].area_id < train[b].area_id;
  });
  forest.input_index_ = order;
  forest.y_.resize(m);
  forest.x_.resize(m * p);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = train[order[i]];
    if (!row.ybar_s)
      throw std::invalid_argument("forest: training row without sampled mean");
    if (row.xbar_s.size() != p)
      throw std::invalid_argument("forest: inconsistent covariate dimensions");
    forest.y_[i] = *row.ybar_s;
    for (std::size_t j = 0; j < p; ++j) forest.x_[j * m + i] = row.xbar_s[j];
  }

  const int mtry = hyper.resolved_mtry(p);
  forest.trees_.resize(static_cast<std::size_t>(hyper.n_trees));

  std::vector<std::uint32_t> entries, left_buf, right_buf;
  std::vector<std::pair<double, double>> scratch;
  for (std::size_t b = 0; b < forest.trees_.size(); ++b) {
    auto& tree = forest.trees_[b];
    Rng rng(hyper.seed, {stream::tree, static_cast<std::uint64_t>(b)});

    tree.bootstrap_counts.assign(m, 0);
    entries.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto row = static_cast<std::uint32_t>(rng.uniform_int(m));
      entries[i] = row;
      tree.bootstrap_counts[row] += 1;
    }
    std::sort(entries.begin(), entries.end());

    // Iterative growth over [begin, end) segments of the entry buffer.
    struct Work { std::size_t begin, end; int node; };
    tree.nodes.clear();
    tree.nodes.emplace_back();
    std::vector<Work> stack{{0, entries.size(), 0}};
    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      const std::size_t count = w.end - w.begin;
      auto segment = std::span<const std::uint32_t>(entries).subspan(w.begin, count);

      forest_detail::SplitChoice choice;
      if (count > static_cast<std::size_t>(hyper.nodesize)) {
        std::vector<std::size_t> candidates;
        if (hyper.forced_index) {
          candidates.push_back(*hyper.forced_index);
          if (mtry > 1) {
            auto extra = sample_without_replacement(p - 1,
                                                    static_cast<std::size_t>(mtry) - 1,
                                                    rng);
            for (auto idx : extra)
              candidates.push_back(idx >= *hyper.forced_index ? idx + 1 : idx);
          }
        } else {
          candidates = sample_without_replacement(p, static_cast<std::size_t>(mtry), rng);
        }
        std::sort(candidates.begin(), candidates.end());
        for (std::size_t j : candidates)
          choice = forest_detail::best_split(forest.x_col(j), forest.y_,
                                             segment, scratch,
                                             static_cast<int>(j), choice);
      }

      if (choice.cov < 0 || choice.gain <= 0.0) {
        auto& node = tree.nodes[w.node];
        node.cov = -1;
        node.leaf_size = static_cast<std::uint32_t>(count);
        double sum = 0.0;
        node.leaf_rows.clear();
        for (std::size_t i = 0; i < count; ++i) {
          const std::uint32_t row = segment[i];
          sum += forest.y_[row];
          if (!node.leaf_rows.empty() && node.leaf_rows.back().first == row)
            node.leaf_rows.back().second += 1;
          else
            node.leaf_rows.emplace_back(row, 1u);
        }
        node.leaf_mean = sum / static_cast<double>(count);
        continue;
      }

      left_buf.clear();
      right_buf.clear();
      const auto xcol = forest.x_col(static_cast<std::size_t>(choice.cov));
      for (std::uint32_t row : segment)
        (xcol[row] <= choice.threshold ? left_buf : right_buf).push_back(row);
      std::copy(left_buf.begin(), left_buf.end(), entries.begin() + w.begin);
      std::copy(right_buf.begin(), right_buf.end(),
                entries.begin() + w.begin + left_buf.size());

      const int left_id = static_cast<int>(tree.nodes.size());
      const int right_id = left_id + 1;
      {
        auto& node = tree.nodes[w.node];
        node.cov = choice.cov;
        node.threshold = choice.threshold;
        node.left = left_id;
        node.right = right_id;
      }
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      stack.push_back({w.begin + left_buf.size(), w.end, right_id});
      stack.push_back({w.begin, w.begin + left_buf.size(), left_id});
    }
  }
  return forest;
}

// Mean increase of a tree's out-of-bag squared error when one covariate's
// values are permuted among that tree's OOB rows, averaged over trees.
inline std::vector<double> permutation_importance(const Forest& forest,
                                                  std::uint64_t seed) {
  const std::size_t m = forest.n_rows();
  const std::size_t p = forest.n_covariates();
  std::vector<double> importance(p, 0.0);
  std::size_t trees_used = 0;
  std::vector<std::size_t> oob;
  std::vector<double> permuted;
  for (std::size_t b = 0; b < forest.trees_.size(); ++b) {
    const auto& tree = forest.trees_[b];
    oob.clear();
    for (std::size_t i = 0; i < m; ++i)
      if (tree.bootstrap_counts[i] == 0) oob.push_back(i);
    if (oob.size() < 2) continue;
    ++trees_used;

    double base_err = 0.0;
    for (std::size_t i : oob) {
      const double r = forest.y_[i] - forest.leaf_of_row(tree, i, -1, 0.0).leaf_mean;
      base_err += r * r;
    }
    base_err /= static_cast<double>(oob.size());

    for (std::size_t j = 0; j < p; ++j) {
      Rng rng(seed, {stream::permutation, static_cast<std::uint64_t>(b),
                     static_cast<std::uint64_t>(j)});
      permuted.resize(oob.size());
      for (std::size_t i = 0; i < oob.size(); ++i)
        permuted[i] = forest.x_col(j)[oob[i]];
      shuffle(permuted, rng);
      double err = 0.0;
      for (std::size_t i = 0; i < oob.size(); ++i) {
        const auto& leaf = forest.leaf_of_row(tree, oob[i], static_cast<int>(j),
                                              permuted[i]);
        const double r = forest.y_[oob[i]] - leaf.leaf_mean;
        err += r * r;
      }
      err /= static_cast<double>(oob.size());
      importance[j] += err - base_err;
    }
  }
  if (trees_used == 0)
    throw std::runtime_error("forest: no tree has out-of-bag rows");
  for (auto& v : importance) v /= static_cast<double>(trees_used);
  return importance;
}

// Permutation-importance p-values: the observed importances are compared
// against n_perm forests refit with the outcome vector permuted, giving
// p_j = (1 + #{null >= observed}) / (n_perm + 1).
inline std::vector<double> importance_pvalues(const std::vector<ArealRow>& train,
                                              const ForestHyper& hyper,
                                              int n_perm) {
  if (n_perm < 1) throw std::invalid_argument("importance_pvalues: n_perm >= 1");
  const Forest forest = fit_forest(train, hyper);
  const auto observed = permutation_importance(forest, hyper.seed);
  const std::size_t p = observed.size();

  std::vector<int> exceed(p, 0);
  std::vector<ArealRow> shuffled = train;
  for (int k = 1; k <= n_perm; ++k) {
    Rng rng(hyper.seed, {stream::null_refit, static_cast<std::uint64_t>(k)});
    std::vector<double> ys;
    ys.reserve(train.size());
    for (const auto& row : train) ys.push_back(*row.ybar_s);
    shuffle(ys, rng);
    for (std::size_t i = 0; i < shuffled.size(); ++i) shuffled[i].ybar_s = ys[i];
    ForestHyper null_hyper = hyper;
    null_hyper.seed = derive_seed(hyper.seed,
                                  {stream::null_refit, static_cast<std::uint64_t>(k), 0x5eedull});
    const Forest null_forest = fit_forest(shuffled, null_hyper);
    const auto null_imp = permutation_importance(null_forest, null_hyper.seed);
    for (std::size_t j = 0; j < p; ++j)
      if (null_imp[j] >= observed[j]) exceed[j] += 1;
  }

  std::vector<double> pvals(p);
  for (std::size_t j = 0; j < p; ++j)
    pvals[j] = (1.0 + exceed[j]) / (n_perm + 1.0);
  return pvals;
}

inline void Forest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("forest: cannot write " + path);
  out.precision(17);
  out << "sae-forest v1\n";
  out << y_.size() << ' ' << p_ << ' ' << trees_.size() << '\n';
  for (double v : y_) out << v << ' ';
  out << '\n';
  for (auto idx : input_index_) out << idx << ' ';
  out << '\n';
  for (const auto& tree : trees_) {
    out << tree.nodes.size() << '\n';
    for (const auto& node : tree.nodes) {
      out << node.cov << ' ' << node.threshold << ' ' << node.left << ' '
          << node.right << ' ' << node.leaf_mean << ' ' << node.leaf_size << ' '
          << node.leaf_rows.size();
      for (const auto& [row, count] : node.leaf_rows) out << ' ' << row << ' ' << count;
      out << '\n';
    }
    for (auto c : tree.bootstrap_counts) out << c << ' ';
    out << '\n';
  }
}

inline Forest Forest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("forest: cannot open " + path);
  std::string tag, version;
  in >> tag >> version;
  if (tag != "sae-forest" || version != "v1")
    throw std::runtime_error("forest: unrecognised serialisation header");
  Forest forest;
  std::size_t m = 0, n_trees = 0;
  in >> m >> forest.p_ >> n_trees;
  forest.y_.resize(m);
  for (auto& v : forest.y_) in >> v;
  forest.input_index_.resize(m);
  for (auto& idx : forest.input_index_) in >> idx;
  forest.trees_.resize(n_trees);
  for (auto& tree : forest.trees_) {
    std::size_t n_nodes = 0;
    in >> n_nodes;
    tree.nodes.resize(n_nodes);
    for (auto& node : tree.nodes) {
      std::size_t n_leaf_rows = 0;
      in >> node.cov >> node.threshold >> node.left >> node.right >>
          node.leaf_mean >> node.leaf_size >> n_leaf_rows;
      node.leaf_rows.resize(n_leaf_rows);
      for (auto& [row, count] : node.leaf_rows) in >> row >> count;
    }
    tree.bootstrap_counts.resize(m);
    for (auto& c : tree.bootstrap_counts) in >> c;
  }
  if (!in) throw std::runtime_error("forest: truncated serialisation in " + path);
  return forest;
}

}  // namespace sae

#endif  // SAE_FOREST_HPP
