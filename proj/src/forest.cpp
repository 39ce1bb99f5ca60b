#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "gestauth/classifiers.hpp"
#include "gestauth/error.hpp"

namespace gestauth::classifiers {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini, smaller is better
};

double gini(double pos, double n) {
  if (n <= 0.0) return 0.0;
  const double p = pos / n;
  return 2.0 * p * (1.0 - p);
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& x, const std::vector<int>& y, std::size_t mtry,
              std::size_t min_leaf, std::uint64_t seed)
      : x_(x), y_(y), mtry_(mtry), min_leaf_(min_leaf), rng_(seed) {}

  Tree build(std::vector<std::size_t> samples) {
    Tree t;
    grow(t, std::move(samples));
    return t;
  }

 private:
  int grow(Tree& t, std::vector<std::size_t> samples) {
    const int id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    std::size_t pos = 0;
    for (auto i : samples) pos += static_cast<std::size_t>(y_[i]);
    t.nodes[id].positive = 2 * pos > samples.size();
    if (pos == 0 || pos == samples.size() || samples.size() < 2 * min_leaf_) return id;

    const auto split = best_split(samples, pos);
    if (split.feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (auto i : samples) (x_[i][split.feature] <= split.threshold ? left : right).push_back(i);
    samples.clear();
    samples.shrink_to_fit();
    t.nodes[id].feature = split.feature;
    t.nodes[id].threshold = split.threshold;
    const int l = grow(t, std::move(left));
    const int r = grow(t, std::move(right));
    t.nodes[id].left = l;
    t.nodes[id].right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& samples, std::size_t pos) {
    const std::size_t nf = x_[0].size();
    std::vector<std::size_t> features(nf);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng_);
    // Draw mtry candidates; if none of them separates the node, keep
    // drawing from the remaining features.
    Split best;
    for (std::size_t start = 0; start < nf && best.feature < 0; start += mtry_) {
      const auto end = std::min(nf, start + mtry_);
      std::vector<std::size_t> cand(features.begin() + static_cast<std::ptrdiff_t>(start),
                                    features.begin() + static_cast<std::ptrdiff_t>(end));
      std::sort(cand.begin(), cand.end());
      for (auto f : cand) consider(f, samples, pos, best);
    }
    return best;
  }

  void consider(std::size_t f, const std::vector<std::size_t>& samples, std::size_t pos, Split& best) {
    std::vector<std::pair<double, int>> v;
    v.reserve(samples.size());
    for (auto i : samples) v.emplace_back(x_[i][f], y_[i]);
    std::sort(v.begin(), v.end());
    const auto n = static_cast<double>(v.size());
    double left_pos = 0.0;
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      left_pos += v[k].second;
      if (v[k].first == v[k + 1].first) continue;
      const std::size_t nl = k + 1, nr = v.size() - nl;
      if (nl < min_leaf_ || nr < min_leaf_) continue;
      const double right_pos = static_cast<double>(pos) - left_pos;
      const double imp = (static_cast<double>(nl) * gini(left_pos, static_cast<double>(nl)) +
                          static_cast<double>(nr) * gini(right_pos, static_cast<double>(nr))) /
                         n;
      if (best.feature < 0 || imp < best.impurity - 1e-15) {
        best.feature = static_cast<int>(f);
        best.impurity = imp;
        best.threshold = 0.5 * (v[k].first + v[k + 1].first);
        // A midpoint can round onto the upper value; keep the split strict.
        if (!(best.threshold < v[k + 1].first)) best.threshold = v[k].first;
      }
    }
  }

  const std::vector<std::vector<double>>& x_;
  const std::vector<int>& y_;
  std::size_t mtry_;
  std::size_t min_leaf_;
  std::mt19937_64 rng_;
};

std::uint64_t tree_seed(std::uint64_t root, std::size_t tree) {
  // splitmix64 of (root, tree) so trees are independent of growth order.
  std::uint64_t z = root + 0x9E3779B97F4A7C15ULL * (tree + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

bool Tree::vote(const std::vector<double>& x) const {
  int id = 0;
  while (nodes[id].feature >= 0) {
    id = x[static_cast<std::size_t>(nodes[id].feature)] <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
  }
  return nodes[id].positive;
}

Forest train_random_forest(const ForestSpec& spec, const std::vector<std::vector<double>>& features,
                           const std::vector<int>& labels) {
  if (spec.n_trees < 1) throw InputError("forest needs at least one tree");
  if (spec.min_samples_leaf < 1) throw InputError("min_samples_leaf must be >= 1");
  if (features.empty() || features.size() != labels.size()) throw InputError("forest: empty or inconsistent input");
  const std::size_t nf = features[0].size();
  for (const auto& row : features)
    if (row.size() != nf || nf == 0) throw InputError("forest: ragged feature rows");
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw InputError("forest: training data must contain both classes");
  }

  Forest forest;
  forest.spec = spec;
  forest.n_features = nf;
  const auto mtry = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(nf)))));
  const std::size_t n = features.size();
  for (std::size_t t = 0; t < spec.n_trees; ++t) {
    const auto seed = tree_seed(spec.seed, t);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = pick(rng);
    TreeBuilder builder(features, labels, mtry, spec.min_samples_leaf, seed ^ 0x5bd1e995ULL);
    forest.trees.push_back(builder.build(std::move(sample)));
  }
  return forest;
}

double rf_score(const Forest& forest, const std::vector<double>& x) {
  if (x.size() != forest.n_features) throw InputError("forest: feature count mismatch");
  std::size_t votes = 0;
  for (const auto& t : forest.trees) votes += t.vote(x) ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(forest.trees.size());
}

std::vector<double> rf_predict(const Forest& forest, const std::vector<std::vector<double>>& features) {
  std::vector<double> out;
  out.reserve(features.size());
  for (const auto& x : features) out.push_back(rf_score(forest, x));
  return out;
}

std::string forest_to_json(const Forest& forest) {
  using nlohmann::json;
  json j;
  j["n_trees"] = forest.spec.n_trees;
  j["min_samples_leaf"] = forest.spec.min_samples_leaf;
  j["seed"] = forest.spec.seed;
  j["n_features"] = forest.n_features;
  j["trees"] = json::array();
  for (const auto& t : forest.trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      if (nd.feature < 0) {
        nodes.push_back({{"leaf", nd.positive ? 1 : 0}});
      } else {
        nodes.push_back({{"f", nd.feature}, {"t", nd.threshold}, {"l", nd.left}, {"r", nd.right}});
      }
    }
    j["trees"].push_back(std::move(nodes));
  }
  return j.dump();
}

Forest forest_from_json(const std::string& text) {
  using nlohmann::json;
  try {
    const auto j = json::parse(text);
    Forest f;
    f.spec.n_trees = j.at("n_trees");
    f.spec.min_samples_leaf = j.at("min_samples_leaf");
    f.spec.seed = j.at("seed");
    f.n_features = j.at("n_features");
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt) {
        TreeNode nd;
        if (jn.contains("leaf")) {
          nd.positive = jn["leaf"].get<int>() != 0;
        } else {
          nd.feature = jn.at("f");
          nd.threshold = jn.at("t");
          nd.left = jn.at("l");
          nd.right = jn.at("r");
        }
        t.nodes.push_back(nd);
      }
      f.trees.push_back(std::move(t));
    }
    if (f.trees.size() != f.spec.n_trees) throw InputError("forest JSON: tree count mismatch");
    return f;
  } catch (const json::exception& e) {
    throw InputError("bad forest JSON: " + std::string(e.what()));
  }
}

}  // namespace gestauth::classifiers
