#include "dni/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dni/rng.hpp"

namespace dni {

using nlohmann::json;

void ForestConfig::validate() const {
  if (trees == 0) throw std::invalid_argument("forest: tree count must be >= 1");
  if (!(bootstrap_fraction > 0.0 && bootstrap_fraction <= 1.0))
    throw std::invalid_argument("forest: bootstrap fraction must be in (0, 1]");
  if (min_samples_split < 2) throw std::invalid_argument("forest: min_samples_split must be >= 2");
}

void to_json(json& j, const ForestConfig& c) {
  j = json{{"trees", c.trees},
           {"max_depth", c.max_depth},
           {"max_features", c.max_features},
           {"bootstrap_fraction", c.bootstrap_fraction},
           {"min_samples_split", c.min_samples_split},
           {"seed", c.seed}};
}

void from_json(const json& j, ForestConfig& c) {
  c.trees = j.value("trees", c.trees);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.max_features = j.value("max_features", c.max_features);
  c.bootstrap_fraction = j.value("bootstrap_fraction", c.bootstrap_fraction);
  c.min_samples_split = j.value("min_samples_split", c.min_samples_split);
  c.seed = j.value("seed", c.seed);
}

namespace {

struct Builder {
  const std::vector<std::vector<double>>& x;
  std::span<const std::uint8_t> y;
  const ForestConfig& cfg;
  std::size_t mtry;
  std::mt19937_64& rng;
  Tree tree;

  std::int32_t build(std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(tree.size());
    tree.emplace_back();
    std::size_t pos = 0;
    for (auto r : rows) pos += y[r];
    const double n = static_cast<double>(rows.size());
    tree[id].positive = static_cast<double>(pos) / n;
    const bool pure = pos == 0 || pos == rows.size();
    if (pure || rows.size() < cfg.min_samples_split || (cfg.max_depth > 0 && depth >= cfg.max_depth)) return id;

    const std::size_t nf = x.front().size();
    std::vector<std::size_t> feats(nf);
    std::iota(feats.begin(), feats.end(), std::size_t{0});

    const double parent = 1.0 - std::pow(pos / n, 2) - std::pow(1.0 - pos / n, 2);
    double best_gain = 1e-12;
    std::int32_t best_feat = -1;
    double best_thr = 0.0;
    std::vector<std::pair<double, std::uint8_t>> col(rows.size());
    // Draw features without replacement until mtry non-constant ones have
    // been searched; constant features do not count against the budget.
    std::size_t searched = 0;
    for (std::size_t i = 0; i < nf && searched < mtry; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, nf - 1);
      std::swap(feats[i], feats[pick(rng)]);
      const std::size_t f = feats[i];
      for (std::size_t r = 0; r < rows.size(); ++r) col[r] = {x[rows[r]][f], y[rows[r]]};
      std::sort(col.begin(), col.end());
      if (col.front().first == col.back().first) continue;
      ++searched;
      std::size_t left_pos = 0;
      for (std::size_t r = 0; r + 1 < col.size(); ++r) {
        left_pos += col[r].second;
        if (col[r].first == col[r + 1].first) continue;
        const double nl = static_cast<double>(r + 1), nr = n - nl;
        const double pl = left_pos / nl, pr = (pos - left_pos) / nr;
        const double gini = (nl * (1.0 - pl * pl - (1 - pl) * (1 - pl)) + nr * (1.0 - pr * pr - (1 - pr) * (1 - pr))) / n;
        const double gain = parent - gini;
        if (gain > best_gain) {
          best_gain = gain;
          best_feat = static_cast<std::int32_t>(f);
          best_thr = 0.5 * (col[r].first + col[r + 1].first);
        }
      }
    }
    if (best_feat < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) (x[r][static_cast<std::size_t>(best_feat)] <= best_thr ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    tree[id].feature = best_feat;
    tree[id].threshold = best_thr;
    const auto l = build(left, depth + 1);
    tree[id].left = l;
    const auto r = build(right, depth + 1);
    tree[id].right = r;
    return id;
  }
};

double tree_proba(const Tree& t, std::span<const double> x) {
  std::int32_t i = 0;
  while (t[i].feature >= 0) i = x[static_cast<std::size_t>(t[i].feature)] <= t[i].threshold ? t[i].left : t[i].right;
  return t[i].positive;
}

}  // namespace

void RandomForest::fit(const std::vector<std::vector<double>>& features, std::span<const std::uint8_t> labels,
                       const ForestConfig& cfg) {
  cfg.validate();
  if (features.size() != labels.size() || features.empty())
    throw std::invalid_argument("forest: need one label per non-empty feature row");
  const std::size_t nf = features.front().size();
  if (nf == 0) throw std::invalid_argument("forest: empty feature vectors");
  for (const auto& row : features)
    if (row.size() != nf) throw std::invalid_argument("forest: ragged feature rows");
  const auto positives = std::count(labels.begin(), labels.end(), std::uint8_t{1});
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size()))
    throw std::invalid_argument("forest: training labels contain a single class");

  const std::size_t mtry =
      std::clamp<std::size_t>(cfg.max_features ? cfg.max_features
                                               : static_cast<std::size_t>(std::sqrt(static_cast<double>(nf))),
                              1, nf);
  const std::size_t n = features.size();
  const auto draws = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.bootstrap_fraction * n)));

  trees_.clear();
  std::vector<double> oob_sum(n, 0.0);
  std::vector<std::size_t> oob_count(n, 0);
  for (std::size_t t = 0; t < cfg.trees; ++t) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {t}));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> rows(draws);
    std::vector<std::uint8_t> in_bag(n, 0);
    for (auto& r : rows) {
      r = pick(rng);
      in_bag[r] = 1;
    }
    Builder b{features, labels, cfg, mtry, rng, {}};
    b.build(rows, 0);
    for (std::size_t i = 0; i < n; ++i)
      if (!in_bag[i]) {
        oob_sum[i] += tree_proba(b.tree, features[i]);
        ++oob_count[i];
      }
    trees_.push_back(std::move(b.tree));
  }
  std::size_t hits = 0, scored = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!oob_count[i]) continue;
    ++scored;
    hits += ((oob_sum[i] / static_cast<double>(oob_count[i]) > 0.5 ? 1 : 0) == labels[i]);
  }
  oob_accuracy_ = scored ? static_cast<double>(hits) / static_cast<double>(scored) : 0.0;
}

double RandomForest::predict_proba(std::span<const double> x) const {
  if (trees_.empty()) throw std::logic_error("forest: predict before fit");
  double s = 0.0;
  for (const auto& t : trees_) s += tree_proba(t, x);
  return s / static_cast<double>(trees_.size());
}

double RandomForest::accuracy(const std::vector<std::vector<double>>& features,
                              std::span<const std::uint8_t> labels) const {
  if (features.size() != labels.size() || features.empty()) throw std::invalid_argument("forest: bad evaluation set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < features.size(); ++i) hits += predict(features[i]) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(features.size());
}

}  // namespace dni
