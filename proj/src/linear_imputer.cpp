#include "dni/linear_imputer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "dni/stats.hpp"

namespace dni {

using nlohmann::json;

NeighborTable neighbor_table(std::span<const Position> geometry, std::size_t k) {
  const std::size_t n = geometry.size();
  if (n < k + 1) {
    spdlog::warn("neighbor_table: {} electrodes cannot supply {} neighbors each; using {}", n, k,
                 n == 0 ? 0 : n - 1);
    k = n == 0 ? 0 : n - 1;
  }
  NeighborTable table(n);
  for (ElectrodeId t = 0; t < n; ++t) {
    std::vector<ElectrodeId> others;
    for (ElectrodeId e = 0; e < n; ++e)
      if (e != t) others.push_back(e);
    std::stable_sort(others.begin(), others.end(), [&](ElectrodeId a, ElectrodeId b) {
      return distance(geometry[t], geometry[a]) < distance(geometry[t], geometry[b]);
    });
    others.resize(k);
    table[t] = std::move(others);
  }
  return table;
}

void to_json(json& j, const NeighborWeights& w) {
  j = json{{"participant", w.participant}, {"targets", json::array()}};
  for (std::size_t t = 0; t < w.targets.size(); ++t) {
    json jt{{"target", t}, {"unimputable", w.unimputable[t] != 0}, {"neighbors", json::array()}};
    for (const auto& n : w.targets[t]) jt["neighbors"].push_back({{"id", n.id}, {"weight", n.weight}});
    j["targets"].push_back(jt);
  }
}

void from_json(const json& j, NeighborWeights& w) {
  w.participant = j.at("participant").get<ParticipantId>();
  w.targets.clear();
  w.unimputable.clear();
  for (const auto& jt : j.at("targets")) {
    std::vector<Neighbor> ns;
    for (const auto& jn : jt.at("neighbors")) ns.push_back({jn.at("id").get<ElectrodeId>(), jn.at("weight").get<double>()});
    w.targets.push_back(std::move(ns));
    w.unimputable.push_back(jt.at("unimputable").get<bool>() ? 1 : 0);
  }
}

NeighborWeights fit_weights(std::span<const Instance> train, const NeighborTable& table, ParticipantId participant) {
  NeighborWeights out;
  out.participant = participant;
  out.targets.resize(table.size());
  out.unimputable.assign(table.size(), 0);
  for (ElectrodeId t = 0; t < table.size(); ++t) {
    for (ElectrodeId nb : table[t]) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& inst : train) {
        if (inst.electrodes() != table.size())
          throw std::invalid_argument("fit_weights: instance electrode count differs from the neighbor table");
        if (inst.missing[t] || inst.missing[nb]) continue;
        sum += pearson(inst.signal.row(t), inst.signal.row(nb)).value;
        ++count;
      }
      if (count == 0) continue;  // never observed together
      out.targets[t].push_back({nb, sum / static_cast<double>(count)});
    }
    if (out.targets[t].empty()) out.unimputable[t] = 1;
  }
  return out;
}

LinearImputation impute_linear(const MaskedInstance& input, const NeighborWeights& weights) {
  const std::size_t k = input.signal.dim(0), len = input.signal.dim(1);
  if (weights.targets.size() != k)
    throw std::invalid_argument("impute_linear: weights cover " + std::to_string(weights.targets.size()) +
                                " electrodes, input has " + std::to_string(k));
  LinearImputation out{Tensor<float>({k, len}), std::vector<std::uint8_t>(k, 1)};
  std::vector<double> acc(len);
  for (ElectrodeId t = 0; t < k; ++t) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (const auto& n : weights.targets[t]) {
      if (input.roles[n.id] != ElectrodeRole::observed) continue;
      out.unimputable[t] = 0;
      const auto x = input.signal.row(n.id);
      for (std::size_t i = 0; i < len; ++i) acc[i] += n.weight * x[i];
    }
    auto row = out.output.row(t);
    for (std::size_t i = 0; i < len; ++i) row[i] = static_cast<float>(acc[i]);
  }
  return out;
}

}  // namespace dni
