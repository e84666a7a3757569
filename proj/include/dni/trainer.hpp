#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/models.hpp"
#include "dni/ragged_store.hpp"

namespace dni {

struct TrainConfig {
  double mask_min = 0.05;
  double mask_max = 0.10;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;       // CNNAE
  std::size_t per_participant = 2;   // M-CNNAE instances per participant per step
  double learning_rate = 1e-4;
  double lambda_slow = 0.0;
  double lambda_margin = 0.0;
  double margin = 1.0;
  std::size_t checkpoint_every = 10;
  std::uint64_t seed = 0;

  static TrainConfig cnnae();
  static TrainConfig mcnnae();  // 45 epochs
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct MaskedBatch {
  Tensor<float> input;         // B x 2K x T, masked rows zero
  Tensor<float> target;        // B x K x T, unmasked ground truth
  Tensor<float> deriv_target;  // B x K x T
  std::vector<std::uint8_t> include;  // B*K rows in the loss (observed before masking)
  std::vector<std::vector<ElectrodeRole>> roles;
  double fraction = 0.0;
};

// Draws one fraction uniformly from [mask_min, mask_max] for the batch and
// zero-fills round-half-up(fraction * |observed|) random observed electrodes
// in every instance.
MaskedBatch masked_batch(std::span<const Instance* const> instances, const TrainConfig& cfg, std::mt19937_64& rng);

// Signal NLL + derivative NLL over included rows, plus the enabled latent
// regularizers.
Var training_loss(Tape<float>& tape, const HeadVars<float>& heads, const MaskedBatch& batch, const TrainConfig& cfg);

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  std::vector<double> loss_curve;  // mean step loss per epoch
  std::size_t steps = 0;
  std::vector<std::filesystem::path> checkpoints;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;  // epoch_NNNN and final stems
  std::size_t start_epoch = 0;                          // resume point; model already loaded
  std::function<void(std::size_t epoch, double loss)> on_epoch;
  std::function<void(ParticipantId participant, std::size_t instances)> on_batch;
};

TrainResult train_cnnae(Cnnae<float>& model, std::span<const Instance> train, const TrainConfig& cfg,
                        const TrainOptions& options = {});

// One step draws cfg.per_participant instances from every participant.
TrainResult train_mcnnae(Mcnnae<float>& model, const std::map<ParticipantId, std::vector<Instance>>& train,
                         const TrainConfig& cfg, const TrainOptions& options = {});

void write_loss_csv(const std::filesystem::path& path, std::span<const double> curve, std::size_t first_epoch = 1);

}  // namespace dni
