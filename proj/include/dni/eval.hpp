#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/linear_imputer.hpp"
#include "dni/masking.hpp"
#include "dni/models.hpp"
#include "dni/stats.hpp"

namespace dni {

enum class SpectrumAveraging { mean, median };

struct SpectrumConfig {
  std::size_t window = 64;
  double overlap = 0.5;
  SpectrumAveraging averaging = SpectrumAveraging::mean;

  // 64 samples for 5 Hz data, 256 for 250 Hz data.
  static SpectrumConfig for_rate(double rate_hz);
  void validate() const;
};

void to_json(nlohmann::json& j, const SpectrumConfig& c);
void from_json(const nlohmann::json& j, SpectrumConfig& c);

// One-sided Hann-windowed Welch estimate, window/2 + 1 bins. Scaled so the
// bins sum to the mean square of the series.
std::vector<double> power_spectrum(std::span<const float> series, const SpectrumConfig& cfg);
double bin_frequency(std::size_t bin, const SpectrumConfig& cfg, double rate_hz);

inline constexpr double kLogPowerFloor = 1e-20;

// Pearson correlation of log power across bins.
Correlation frequency_correlation(std::span<const float> original, std::span<const float> estimate,
                                  const SpectrumConfig& cfg);

// Common interface over the fill strategies. Each call returns a K x T
// estimate for every row of each masked input.
class Imputer {
 public:
  virtual ~Imputer() = default;
  virtual std::string name() const = 0;
  virtual std::vector<Tensor<float>> impute(ParticipantId participant, std::span<const MaskedInstance> inputs) = 0;
};

class ZeroImputer final : public Imputer {
 public:
  std::string name() const override { return "zero"; }
  std::vector<Tensor<float>> impute(ParticipantId participant, std::span<const MaskedInstance> inputs) override;
};

class LinearImputer final : public Imputer {
 public:
  void set_weights(NeighborWeights weights);
  const NeighborWeights& weights(ParticipantId participant) const;
  std::string name() const override { return "baseline"; }
  std::vector<Tensor<float>> impute(ParticipantId participant, std::span<const MaskedInstance> inputs) override;

 private:
  std::map<ParticipantId, NeighborWeights> weights_;
};

class CnnaeImputer final : public Imputer {
 public:
  void set_model(ParticipantId participant, std::shared_ptr<const Cnnae<float>> model);
  std::string name() const override { return "cnnae"; }
  std::vector<Tensor<float>> impute(ParticipantId participant, std::span<const MaskedInstance> inputs) override;

 private:
  std::map<ParticipantId, std::shared_ptr<const Cnnae<float>>> models_;
};

class McnnaeImputer final : public Imputer {
 public:
  explicit McnnaeImputer(std::shared_ptr<const Mcnnae<float>> model) : model_(std::move(model)) {}
  std::string name() const override { return "mcnnae"; }
  std::vector<Tensor<float>> impute(ParticipantId participant, std::span<const MaskedInstance> inputs) override;

 private:
  std::shared_ptr<const Mcnnae<float>> model_;
};

struct ScoreRow {
  ParticipantId participant = 0;
  std::string method;
  double regime = 0.0;
  OutputLabel role = OutputLabel::reconstruction;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};

// Per-electrode averages over instances and mask sets, for one role.
struct ElectrodeScore {
  ParticipantId participant = 0;
  std::string method;
  double regime = 0.0;
  ElectrodeId electrode = 0;
  OutputLabel role = OutputLabel::reconstruction;
  double time_corr = 0.0;
  double freq_corr = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  std::vector<ScoreRow> rows;
  std::vector<ElectrodeScore> electrodes;
  nlohmann::json metadata = nlohmann::json::object();

  const ScoreRow* find(ParticipantId participant, const std::string& method, double regime, OutputLabel role) const;
  void append(const EvalReport& other);
};

void to_json(nlohmann::json& j, const ScoreRow& r);
void from_json(const nlohmann::json& j, ScoreRow& r);
void to_json(nlohmann::json& j, const ElectrodeScore& e);
void from_json(const nlohmann::json& j, ElectrodeScore& e);
void to_json(nlohmann::json& j, const EvalReport& r);
void from_json(const nlohmann::json& j, EvalReport& r);

struct EvalOptions {
  SpectrumConfig spectrum;
  bool frequency = true;  // also compute per-electrode frequency correlations
  std::size_t batch = 16;
};

// Scores one participant's test instances under each mask plan. All plans
// must share the same regime p.
EvalReport evaluate_model(Imputer& imputer, ParticipantId participant, std::span<const Instance> test_instances,
                          std::span<const MaskPlan> plans, const EvalOptions& options = {});

}  // namespace dni
