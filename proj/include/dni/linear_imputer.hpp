#pragma once

#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/masking.hpp"
#include "dni/ragged_store.hpp"

namespace dni {

// Per-target neighbor ids, nearest first (ties: lower id first).
using NeighborTable = std::vector<std::vector<ElectrodeId>>;

NeighborTable neighbor_table(std::span<const Position> geometry, std::size_t k = 3);

struct Neighbor {
  ElectrodeId id = 0;
  double weight = 0.0;
};

struct NeighborWeights {
  ParticipantId participant = 0;
  std::vector<std::vector<Neighbor>> targets;  // same order as the neighbor table
  std::vector<std::uint8_t> unimputable;       // every neighbor was dropped
};

void to_json(nlohmann::json& j, const NeighborWeights& w);
void from_json(const nlohmann::json& j, NeighborWeights& w);

// Weight = arithmetic mean of per-instance Pearson(target, neighbor) over the
// training instances where both are observed.
NeighborWeights fit_weights(std::span<const Instance> train, const NeighborTable& table,
                            ParticipantId participant = 0);

struct LinearImputation {
  Tensor<float> output;                 // K x T
  std::vector<std::uint8_t> unimputable;  // no neighbor observed in this input
};

// output(target) = sum of w_n * x_n over neighbors whose role is observed.
LinearImputation impute_linear(const MaskedInstance& input, const NeighborWeights& weights);

}  // namespace dni
