#include "dni/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "dni/rng.hpp"

namespace dni {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSplitTag = 0x73706c6974ULL;
constexpr std::uint64_t kDecodeMaskTag = 0x646d61736bULL;

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

void to_json(json& j, const FeatureConfig& c) {
  j = json{{"bands", c.bands}, {"rate_hz", c.rate_hz}, {"spectrum", c.spectrum}, {"log_floor", c.log_floor}};
}

void from_json(const json& j, FeatureConfig& c) {
  c.bands = j.value("bands", c.bands);
  c.rate_hz = j.value("rate_hz", c.rate_hz);
  c.spectrum = j.contains("spectrum") ? j.at("spectrum").get<SpectrumConfig>() : SpectrumConfig::for_rate(c.rate_hz);
  c.log_floor = j.value("log_floor", c.log_floor);
}

void to_json(json& j, const DecodeConfig& c) {
  j = json{{"pcts", c.pcts},     {"seeds", c.seeds},       {"train_fraction", c.train_fraction},
           {"forest", c.forest}, {"features", c.features}, {"seed", c.seed}};
}

void from_json(const json& j, DecodeConfig& c) {
  c.pcts = j.value("pcts", c.pcts);
  c.seeds = j.value("seeds", c.seeds);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  if (j.contains("forest")) c.forest = j.at("forest").get<ForestConfig>();
  if (j.contains("features")) c.features = j.at("features").get<FeatureConfig>();
  c.seed = j.value("seed", c.seed);
}

std::vector<double> featurize(const Tensor<float>& event, const FeatureConfig& cfg) {
  const std::size_t k = event.dim(0);
  std::vector<double> out;
  out.reserve(k * cfg.bands.size());
  for (std::size_t e = 0; e < k; ++e) {
    const auto psd = power_spectrum(event.row(e), cfg.spectrum);
    for (const auto& [lo, hi] : cfg.bands) {
      double power = 0.0;
      for (std::size_t b = 0; b < psd.size(); ++b) {
        const double f = bin_frequency(b, cfg.spectrum, cfg.rate_hz);
        if (f >= lo && f < hi) power += psd[b];
      }
      out.push_back(std::log(std::max(power, cfg.log_floor)));
    }
  }
  return out;
}

Tensor<float> fill_masked(const MaskedInstance& input, const Tensor<float>& estimate) {
  if (!input.signal.same_shape(estimate)) throw std::invalid_argument("fill_masked: shape mismatch");
  Tensor<float> out = input.signal;
  for (ElectrodeId e = 0; e < input.roles.size(); ++e)
    if (input.roles[e] != ElectrodeRole::observed) {
      const auto src = estimate.row(e);
      std::copy(src.begin(), src.end(), out.row(e).begin());
    }
  return out;
}

double DecodingTable::imputer_win_fraction() const {
  if (cells.empty()) return 0.0;
  std::size_t wins = 0;
  for (const auto& c : cells) wins += c.imputer_mean >= c.zero_mean;
  return static_cast<double>(wins) / static_cast<double>(cells.size());
}

void DecodingTable::append(const DecodingTable& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  cells.insert(cells.end(), other.cells.begin(), other.cells.end());
}

DecodingTable run_missingness_experiment(ParticipantId participant, const std::vector<LabeledEvent>& events,
                                         Imputer& imputer, const DecodeConfig& cfg) {
  if (events.size() < 4) throw std::invalid_argument("decode: need at least 4 labeled events");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw std::invalid_argument("decode: train fraction must be in (0, 1)");
  if (cfg.seeds == 0) throw std::invalid_argument("decode: need at least one seed");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < events.size(); ++i) (events[i].label ? pos : neg).push_back(i);
  if (pos.size() < 2 || neg.size() < 2) throw std::invalid_argument("decode: each class needs at least 2 events");

  std::vector<Instance> instances;
  std::vector<std::uint8_t> labels;
  for (const auto& ev : events) {
    instances.push_back(ev.instance);
    labels.push_back(ev.label);
  }
  const auto avail = availability_from_flags(instances.front().missing);

  auto accuracy_on = [&](const std::vector<std::vector<double>>& feats, const std::vector<std::size_t>& train,
                         const std::vector<std::size_t>& test, std::uint64_t forest_seed) {
    std::vector<std::vector<double>> xtr, xte;
    std::vector<std::uint8_t> ytr, yte;
    for (auto i : train) {
      xtr.push_back(feats[i]);
      ytr.push_back(labels[i]);
    }
    for (auto i : test) {
      xte.push_back(feats[i]);
      yte.push_back(labels[i]);
    }
    auto fc = cfg.forest;
    fc.seed = forest_seed;
    RandomForest forest;
    forest.fit(xtr, ytr, fc);
    return forest.accuracy(xte, yte);
  };
  auto features_of = [&](const std::vector<Tensor<float>>& signals) {
    std::vector<std::vector<double>> feats;
    feats.reserve(signals.size());
    for (const auto& s : signals) feats.push_back(featurize(s, cfg.features));
    return feats;
  };

  std::vector<std::vector<double>> full_feats;
  {
    std::vector<Tensor<float>> raw;
    for (const auto& inst : instances) raw.push_back(inst.signal);
    full_feats = features_of(raw);
  }

  // Stratified split per seed, shared by every fill strategy and pct.
  std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> splits;
  std::vector<double> full_acc;
  DecodingTable table;
  for (std::size_t s = 0; s < cfg.seeds; ++s) {
    std::mt19937_64 rng(derive_seed(cfg.seed, {kSplitTag, participant, s}));
    std::vector<std::size_t> train, test;
    for (auto* cls : {&pos, &neg}) {
      auto idx = *cls;
      std::shuffle(idx.begin(), idx.end(), rng);
      const auto ntr = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(idx.size()))), 1,
          idx.size() - 1);
      train.insert(train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(ntr));
      test.insert(test.end(), idx.begin() + static_cast<std::ptrdiff_t>(ntr), idx.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    splits.emplace_back(train, test);
    const auto forest_seed = derive_seed(cfg.forest.seed, {participant, s});
    full_acc.push_back(accuracy_on(full_feats, train, test, forest_seed));
    table.rows.push_back({participant, 0.0, s, "full", full_acc.back()});
  }

  for (std::size_t pi = 0; pi < cfg.pcts.size(); ++pi) {
    const double pct = cfg.pcts[pi];
    const auto plans = make_mask_plan(avail, participant, 0, pct, cfg.seeds, derive_seed(cfg.seed, {kDecodeMaskTag, pi}));
    std::vector<double> zero_acc, imp_acc, rel;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      const auto masked = apply_mask(instances, plans[s]);
      std::vector<Tensor<float>> zero_filled;
      for (const auto& m : masked) zero_filled.push_back(m.signal);
      const auto estimates = imputer.impute(participant, masked);
      std::vector<Tensor<float>> imp_filled;
      for (std::size_t i = 0; i < masked.size(); ++i) imp_filled.push_back(fill_masked(masked[i], estimates[i]));

      const auto forest_seed = derive_seed(cfg.forest.seed, {participant, s});
      const auto& [train, test] = splits[s];
      zero_acc.push_back(accuracy_on(features_of(zero_filled), train, test, forest_seed));
      imp_acc.push_back(accuracy_on(features_of(imp_filled), train, test, forest_seed));
      rel.push_back(imp_acc.back() - zero_acc.back());
      table.rows.push_back({participant, pct, s, "zero", zero_acc.back()});
      table.rows.push_back({participant, pct, s, imputer.name(), imp_acc.back()});
    }
    table.cells.push_back(DecodingCell{participant, pct, imputer.name(), mean(full_acc), mean(zero_acc),
                                       stddev(zero_acc), mean(imp_acc), stddev(imp_acc), mean(rel), stddev(rel),
                                       cfg.seeds});
  }
  return table;
}

void write_decoding_csv(const DecodingTable& table, const fs::path& rows_csv, const fs::path& cells_csv) {
  {
    std::ofstream out(rows_csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + rows_csv.string());
    out << "participant,pct,seed,fill_strategy,accuracy\n";
    for (const auto& r : table.rows)
      out << r.participant << ',' << fmt4(r.pct) << ',' << r.seed << ',' << r.strategy << ',' << fmt4(r.accuracy)
          << '\n';
  }
  std::ofstream out(cells_csv, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + cells_csv.string());
  out << "participant,pct,imputer,full_mean,zero_mean,zero_std,imputer_mean,imputer_std,relative_mean,relative_std,"
         "seeds\n";
  for (const auto& c : table.cells)
    out << c.participant << ',' << fmt4(c.pct) << ',' << c.imputer << ',' << fmt4(c.full_mean) << ','
        << fmt4(c.zero_mean) << ',' << fmt4(c.zero_std) << ',' << fmt4(c.imputer_mean) << ',' << fmt4(c.imputer_std)
        << ',' << fmt4(c.relative_mean) << ',' << fmt4(c.relative_std) << ',' << c.seeds << '\n';
}

}  // namespace dni
