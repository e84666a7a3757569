#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/eval.hpp"
#include "dni/forest.hpp"

namespace dni {

struct LabeledEvent {
  Instance instance;  // K x T, Procedure B shape
  std::uint8_t label = 0;  // 1 = move, 0 = rest
};

struct FeatureConfig {
  std::vector<std::pair<double, double>> bands{{1.0, 4.0}, {4.0, 8.0}, {8.0, 30.0}, {30.0, 100.0}};
  double rate_hz = 250.0;
  SpectrumConfig spectrum = SpectrumConfig::for_rate(250.0);
  double log_floor = 1e-12;
};

void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);

// Per electrode, log of summed spectral power in each band [lo, hi); layout
// electrode-major (K x bands).
std::vector<double> featurize(const Tensor<float>& event, const FeatureConfig& cfg = {});

struct DecodeConfig {
  std::vector<double> pcts{0.50, 0.70, 0.90};
  std::size_t seeds = 5;
  double train_fraction = 0.6;
  ForestConfig forest;
  FeatureConfig features;
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const DecodeConfig& c);
void from_json(const nlohmann::json& j, DecodeConfig& c);

struct DecodingRow {
  ParticipantId participant = 0;
  double pct = 0.0;
  std::size_t seed = 0;
  std::string strategy;  // "full", "zero" or the imputer name
  double accuracy = 0.0;
};

struct DecodingCell {
  ParticipantId participant = 0;
  double pct = 0.0;
  std::string imputer;
  double full_mean = 0.0;
  double zero_mean = 0.0;
  double zero_std = 0.0;
  double imputer_mean = 0.0;
  double imputer_std = 0.0;
  double relative_mean = 0.0;  // imputer - zero, per seed
  double relative_std = 0.0;
  std::size_t seeds = 0;
};

struct DecodingTable {
  std::vector<DecodingRow> rows;
  std::vector<DecodingCell> cells;

  // Fraction of cells whose imputer mean accuracy >= zero-filled mean.
  double imputer_win_fraction() const;
  void append(const DecodingTable& other);
};

// Keeps observed rows of `input`, takes every other row from `estimate`.
Tensor<float> fill_masked(const MaskedInstance& input, const Tensor<float>& estimate);

// For each (pct, seed): one random electrode mask for the participant,
// decoders retrained on full, zero-filled and imputer-filled events over a
// fixed stratified train/test split.
DecodingTable run_missingness_experiment(ParticipantId participant, const std::vector<LabeledEvent>& events,
                                         Imputer& imputer, const DecodeConfig& cfg);

void write_decoding_csv(const DecodingTable& table, const std::filesystem::path& rows_csv,
                        const std::filesystem::path& cells_csv);

}  // namespace dni
