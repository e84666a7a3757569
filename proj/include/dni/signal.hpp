#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/ragged_store.hpp"

namespace dni {

enum class Procedure { A, B };

struct PipelineConfig {
  Procedure procedure = Procedure::A;
  double source_rate_hz = 500.0;

  // Procedure A: 100 s segments, stats from the first 20 s, mean-pool the rest.
  double segment_seconds = 100.0;
  double stats_seconds = 20.0;
  std::size_t downsample_factor = 100;

  // Procedure B: band-pass, decimate, cut into fixed-length instances.
  double band_low_hz = 0.5;
  double band_high_hz = 115.0;
  std::size_t decimation = 2;
  std::size_t trim_length = 1000;
  std::size_t fir_taps = 101;

  std::size_t segment_length() const;
  std::size_t stats_length() const;
  double output_rate_hz() const;
  void validate() const;

  static PipelineConfig procedure_a(double source_rate_hz = 500.0);
  static PipelineConfig procedure_b(double source_rate_hz = 500.0);
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

class ZeroVarianceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kStdFloor = 1e-8;

// (body - mu) / sigma where mu, sigma come from the first stats_seconds of an
// exactly segment-long input; returns only the body.
std::vector<float> standardize_segment(std::span<const float> raw, double source_rate_hz = 500.0,
                                       double segment_seconds = 100.0, double stats_seconds = 20.0);

// Non-overlapping mean pooling; output length floor(len / factor).
std::vector<float> downsample(std::span<const float> series, std::size_t factor);

// Hamming-windowed-sinc band-pass FIR (difference of two unit-DC low-passes),
// symmetric edge padding, zero phase; output length equals input length.
std::vector<float> bandpass_filter(std::span<const float> series, double low_hz, double high_hz, double rate_hz,
                                   std::size_t taps = 101);
std::vector<double> bandpass_kernel(double low_hz, double high_hz, double rate_hz, std::size_t taps = 101);

// d[0] = 0, d[t] = x[t] - x[t-1].
std::vector<float> time_derivative(std::span<const float> series);

using InstanceMap = std::map<std::pair<ParticipantId, DayId>, std::vector<Instance>>;

// Procedure A applied to one whole electrode series: every complete segment
// standardized and pooled, concatenated in time order.
std::vector<float> procedure_a_series(std::span<const float> raw, const PipelineConfig& cfg);

std::vector<Instance> process_day(const RaggedRecording& rec, ParticipantId p, DayId d, const PipelineConfig& cfg);
InstanceMap run_pipeline(const RaggedRecording& rec, const PipelineConfig& cfg);

// Directory layout: instances.json + p{i}_d{j}.f32 (count x K x T float32 LE).
void save_instances(const InstanceMap& instances, const std::filesystem::path& dir);
InstanceMap load_instances(const std::filesystem::path& dir);

}  // namespace dni
