#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/ragged_store.hpp"

namespace dni {

struct GeneratorConfig {
  std::size_t participants = 4;
  std::size_t electrodes = 32;
  std::vector<std::size_t> electrodes_per_participant;  // overrides `electrodes` when non-empty
  std::size_t days = 3;
  std::size_t day_length = 500000;  // samples
  double rate_hz = 500.0;
  std::size_t latents = 6;
  // (a1, a2) per latent for x_t = a1 x_{t-1} + a2 x_{t-2} + e_t; when empty a
  // default bank of slow resonances is used.
  std::vector<std::array<double, 2>> ar_coefficients;
  double length_scale_mm = 12.0;
  double grid_spacing_mm = 10.0;
  double noise_std = 0.3;
  double gain_drift_std = 0.2;
  std::size_t missing_per_day = 0;  // naturally-missing electrodes drawn per day
  std::uint64_t seed = 1;

  std::size_t electrode_count(std::size_t participant) const;
  std::array<double, 2> ar(std::size_t latent) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

// Coefficients of an AR(2) process with a spectral peak at freq_hz and pole
// radius r.
std::array<double, 2> ar2_from_resonance(double freq_hz, double radius, double rate_hz);
bool ar2_is_stable(const std::array<double, 2>& a);

struct ParticipantTruth {
  std::size_t electrodes = 0;
  std::size_t latents = 0;
  std::vector<double> mixing;                          // electrodes x latents, row-major
  std::vector<Position> sources;                       // latent source locations
  std::vector<std::vector<double>> gains;              // [day][electrode]
  std::vector<std::vector<std::uint64_t>> noise_seeds;  // [day][electrode]
  std::vector<std::vector<std::vector<float>>> latent_paths;  // [day][latent][t], unit variance

  double mix(ElectrodeId e, std::size_t l) const { return mixing[e * latents + l]; }
};

// Generator-side description of the data. Never consumed by imputers.
struct SynthGroundTruth {
  GeneratorConfig config;
  std::vector<ParticipantTruth> participants;

  // Re-creates gain * (sum_l A[e,l] latent_l + noise_e) from the stored
  // latents and noise seeds.
  std::vector<float> regenerate(ParticipantId p, DayId d, ElectrodeId e) const;
  // sum_l A[e,l] latent_l, no gain, no noise.
  std::vector<float> clean_signal(ParticipantId p, DayId d, ElectrodeId e) const;
};

struct SynthDataset {
  Dataset data;
  SynthGroundTruth truth;
};

struct SynthParticipant {
  std::vector<DayRecording> days;
  std::vector<Position> geometry;
  ParticipantTruth truth;
};

// One participant; identical to the matching slice of generate_dataset.
SynthParticipant generate_participant(const GeneratorConfig& cfg, ParticipantId p);
SynthDataset generate_dataset(const GeneratorConfig& cfg);

// Pearson correlation between the target and its least-squares fit (with
// intercept) on the named neighbors, on regenerated series after `transform`.
using SeriesTransform = std::function<std::vector<float>(std::span<const float>)>;
double oracle_linear_bound(const SynthGroundTruth& truth, ParticipantId p, DayId d, ElectrodeId target,
                           std::span<const ElectrodeId> neighbors, const SeriesTransform& transform = {});

struct EventWindow {
  std::size_t start = 0;   // sample index in the raw day
  std::size_t length = 0;  // samples
  bool move = false;
};

struct ClassSignalConfig {
  double amplitude = 1.0;
  double band_low_hz = 12.0;
  double band_high_hz = 30.0;
  ElectrodeId center = 0;      // burst source sits at this electrode
  double footprint_mm = 15.0;  // spatial kernel length-scale of the burst
  double min_weight = 0.05;    // electrodes below this weight are not in the subset
  std::uint64_t seed = 7;
};

void to_json(nlohmann::json& j, const ClassSignalConfig& c);
void from_json(const nlohmann::json& j, ClassSignalConfig& c);

// Balanced move/rest labels over consecutive windows of `window` samples.
std::vector<EventWindow> balanced_schedule(std::size_t day_samples, std::size_t window, std::uint64_t seed);

// Adds a tapered band-limited burst to "move" windows on the electrodes near
// cfg.center; "rest" windows are untouched. Returns the schedule's labels.
std::vector<std::uint8_t> inject_class_signal(Dataset& dataset, ParticipantId p, DayId d,
                                              std::span<const EventWindow> schedule, const ClassSignalConfig& cfg);
std::vector<std::uint8_t> inject_class_signal(DayRecording& day, std::span<const Position> geometry,
                                              std::span<const EventWindow> schedule, const ClassSignalConfig& cfg);

// Sidecar: <dir>/truth.json + <dir>/latents_p{i}_d{j}.f32.
void save_ground_truth(const SynthGroundTruth& truth, const std::filesystem::path& dir);
SynthGroundTruth load_ground_truth(const std::filesystem::path& dir);

}  // namespace dni
