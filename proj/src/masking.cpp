#include "dni/masking.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "dni/rng.hpp"

namespace dni {

using nlohmann::json;

void to_json(json& j, const MaskPlan& m) {
  j = json{{"participant", m.participant}, {"day", m.day},   {"p", m.p},
           {"seed", m.seed},               {"set_index", m.set_index}, {"masked", m.masked}};
}

void from_json(const json& j, MaskPlan& m) {
  m.participant = j.at("participant").get<ParticipantId>();
  m.day = j.at("day").get<DayId>();
  m.p = j.at("p").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.set_index = j.at("set_index").get<std::size_t>();
  m.masked = j.at("masked").get<std::vector<ElectrodeId>>();
}

std::size_t mask_count(double p, std::size_t observed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mask fraction must lie in [0, 1]");
  if (p == 0.0) return 0;
  // The epsilon keeps exact halves (e.g. 0.15 * 10) from rounding down.
  const auto n = static_cast<std::size_t>(std::floor(p * static_cast<double>(observed) + 0.5 + 1e-9));
  return std::clamp<std::size_t>(n, 1, observed);
}

std::vector<MaskPlan> make_mask_plan(const AvailabilitySets& avail, ParticipantId participant, DayId day, double p,
                                     std::size_t n_sets, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mask fraction must lie in [0, 1]");
  if (p > 0.0 && avail.observed.empty())
    throw std::invalid_argument("cannot mask a fraction of an empty observed set");
  const std::size_t count = mask_count(p, avail.observed.size());
  std::vector<MaskPlan> plans;
  for (std::size_t s = 0; s < n_sets; ++s) {
    std::mt19937_64 rng(derive_seed(seed, {participant, day, s}));
    auto pool = avail.observed;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    plans.push_back(MaskPlan{participant, day, p, seed, s, std::move(pool)});
  }
  return plans;
}

MaskedInstance apply_mask(const Instance& instance, std::span<const ElectrodeId> masked) {
  const std::size_t k = instance.electrodes();
  MaskedInstance out{instance.signal, std::vector<ElectrodeRole>(k, ElectrodeRole::observed)};
  for (ElectrodeId e = 0; e < k; ++e)
    if (instance.missing[e]) out.roles[e] = ElectrodeRole::naturally_missing;
  for (auto e : masked) {
    if (e >= k || instance.missing[e])
      throw std::invalid_argument("mask plan references electrode " + std::to_string(e) +
                                  " outside the observed set");
    out.roles[e] = ElectrodeRole::masked;
  }
  for (ElectrodeId e = 0; e < k; ++e)
    if (out.roles[e] != ElectrodeRole::observed) std::ranges::fill(out.signal.row(e), 0.0f);
  return out;
}

MaskedInstance apply_mask(const Instance& instance, const MaskPlan& plan) { return apply_mask(instance, plan.masked); }

std::vector<MaskedInstance> apply_mask(std::span<const Instance> instances, const MaskPlan& plan) {
  std::vector<MaskedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(apply_mask(inst, plan));
  return out;
}

}  // namespace dni
