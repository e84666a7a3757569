#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

namespace dni {

struct ForestConfig {
  std::size_t trees = 100;
  std::size_t max_depth = 0;     // 0 = unbounded
  std::size_t max_features = 0;  // 0 = floor(sqrt(feature count))
  double bootstrap_fraction = 1.0;
  std::size_t min_samples_split = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const ForestConfig& c);
void from_json(const nlohmann::json& j, ForestConfig& c);

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // go left when x[feature] <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  double positive = 0.0;      // leaf: fraction of class-1 samples

  bool operator==(const TreeNode&) const = default;
};

using Tree = std::vector<TreeNode>;

// Binary CART forest (Gini impurity, bootstrap rows, per-split feature
// subsampling). Rows of `features` are samples.
class RandomForest {
 public:
  void fit(const std::vector<std::vector<double>>& features, std::span<const std::uint8_t> labels,
           const ForestConfig& cfg);

  double predict_proba(std::span<const double> x) const;
  std::uint8_t predict(std::span<const double> x) const { return predict_proba(x) > 0.5 ? 1 : 0; }
  double accuracy(const std::vector<std::vector<double>>& features, std::span<const std::uint8_t> labels) const;
  // Out-of-bag accuracy over samples left out by at least one tree.
  double oob_accuracy() const { return oob_accuracy_; }

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
  double oob_accuracy_ = 0.0;
};

}  // namespace dni
