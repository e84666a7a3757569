#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/ragged_store.hpp"

namespace dni {

// Artificially-missing electrodes for one (participant, day, regime, set).
struct MaskPlan {
  ParticipantId participant = 0;
  DayId day = 0;
  double p = 0.0;
  std::uint64_t seed = 0;
  std::size_t set_index = 0;
  std::vector<ElectrodeId> masked;  // ascending
};

void to_json(nlohmann::json& j, const MaskPlan& m);
void from_json(const nlohmann::json& j, MaskPlan& m);

// round-half-up(p * observed), at least 1 when p > 0.
std::size_t mask_count(double p, std::size_t observed);

// n_sets plans sampled uniformly without replacement from the observed set.
std::vector<MaskPlan> make_mask_plan(const AvailabilitySets& avail, ParticipantId participant, DayId day, double p,
                                     std::size_t n_sets, std::uint64_t seed);

struct MaskedInstance {
  Tensor<float> signal;  // masked and naturally-missing rows are zero
  std::vector<ElectrodeRole> roles;
};

MaskedInstance apply_mask(const Instance& instance, std::span<const ElectrodeId> masked);
MaskedInstance apply_mask(const Instance& instance, const MaskPlan& plan);
std::vector<MaskedInstance> apply_mask(std::span<const Instance> instances, const MaskPlan& plan);

}  // namespace dni
