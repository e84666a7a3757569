#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dni/autodiff.hpp"
#include "dni/ids.hpp"

namespace dni {

struct CnnaeConfig {
  std::size_t z_dim = 64;
  std::size_t units = 256;
  std::vector<std::size_t> encoder_kernels{4, 4, 4};
  std::vector<std::size_t> encoder_strides{2, 2, 2};
  std::size_t decoder_layers = 2;  // per block, dilations 1, 2, 4, ...
  std::size_t decoder_blocks = 2;
  std::size_t upsample = 8;
  std::size_t batch_size = 16;
  double learning_rate = 1e-4;
  std::size_t shared_width = 128;  // M-CNNAE participant-independent width

  void validate() const;
  std::size_t temporal_reduction() const;
};

void to_json(nlohmann::json& j, const CnnaeConfig& c);
void from_json(const nlohmann::json& j, CnnaeConfig& c);

template <typename T>
class ConvLayer {
 public:
  ConvLayer() = default;
  ConvLayer(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
            std::size_t kernel, ConvSpec spec, std::uint64_t seed);

  Var operator()(Tape<T>& tape, Var x) const;

  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  ConvSpec spec;
};

// Strided-convolution encoder, repeat upsampler and gated dilated-causal
// decoder shared by both model variants. Input is B x C_in x T with T a
// multiple of the temporal reduction; output features are B x units x T.
template <typename T>
class Backbone {
 public:
  struct Output {
    Var features;
    Var latent;  // B x z_dim x T/8
  };

  Backbone(ParameterSet<T>& params, const std::string& prefix, std::size_t in_channels, const CnnaeConfig& cfg,
           std::uint64_t seed);

  Output forward(Tape<T>& tape, Var x) const;
  std::size_t in_channels() const { return in_channels_; }

 private:
  struct Residual {
    ConvLayer<T> dilated;
    ConvLayer<T> residual;
    ConvLayer<T> skip;
  };

  CnnaeConfig cfg_;
  std::size_t in_channels_;
  std::vector<ConvLayer<T>> encoder_;
  ConvLayer<T> to_latent_;
  ConvLayer<T> input_proj_;
  ConvLayer<T> merge_;
  std::vector<Residual> blocks_;
  ConvLayer<T> post_;
};

template <typename T>
struct HeadVars {
  Var mean;
  Var raw_var;
  Var deriv_mean;
  Var deriv_raw_var;
  Var latent;
  Var shared;  // M-CNNAE: output of the participant input head; CNNAE: the input
};

template <typename T>
struct HeadTensors {
  Tensor<T> mean;
  Tensor<T> raw_var;
  Tensor<T> deriv_mean;
  Tensor<T> deriv_raw_var;
  Tensor<T> latent;
};

template <typename T>
HeadTensors<T> collect_heads(const Tape<T>& tape, const HeadVars<T>& vars);

// Four 1x1 heads: signal mean / raw variance, derivative mean / raw variance.
template <typename T>
class OutputHeads {
 public:
  OutputHeads(ParameterSet<T>& params, const std::string& prefix, std::size_t units, std::size_t electrodes,
              std::uint64_t seed);
  void apply(Tape<T>& tape, Var features, HeadVars<T>& out) const;
  std::size_t electrodes() const { return electrodes_; }

 private:
  std::size_t electrodes_;
  ConvLayer<T> mean_, raw_var_, deriv_mean_, deriv_raw_var_;
};

// Participant-specific model. Input rows 0..K-1 are the signal, rows
// K..2K-1 its time derivative; masked rows are zero.
template <typename T>
class Cnnae {
 public:
  Cnnae(std::size_t electrodes, CnnaeConfig cfg, std::uint64_t seed);
  Cnnae(const Cnnae&) = delete;
  Cnnae& operator=(const Cnnae&) = delete;

  HeadVars<T> forward(Tape<T>& tape, Var input) const;
  HeadTensors<T> predict(const Tensor<T>& input) const;

  std::size_t electrodes() const { return electrodes_; }
  const CnnaeConfig& config() const { return cfg_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  nlohmann::json architecture() const;

 private:
  std::size_t electrodes_;
  CnnaeConfig cfg_;
  ParameterSet<T> params_;
  std::unique_ptr<Backbone<T>> backbone_;
  std::unique_ptr<OutputHeads<T>> heads_;
};

// Joint multi-participant model: per-participant 1x1 input head
// (2K_i -> shared_width) and output heads (units -> K_i) around one backbone.
template <typename T>
class Mcnnae {
 public:
  Mcnnae(CnnaeConfig cfg, std::uint64_t seed);
  Mcnnae(const Mcnnae&) = delete;
  Mcnnae& operator=(const Mcnnae&) = delete;

  void register_participant(ParticipantId participant, std::size_t electrodes);
  bool has_participant(ParticipantId participant) const { return heads_.count(participant) > 0; }
  std::size_t electrodes(ParticipantId participant) const;
  std::vector<ParticipantId> participants() const;

  HeadVars<T> forward(Tape<T>& tape, ParticipantId participant, Var input) const;
  HeadTensors<T> predict(ParticipantId participant, const Tensor<T>& input) const;

  const CnnaeConfig& config() const { return cfg_; }
  ParameterSet<T>& parameters() { return params_; }
  const ParameterSet<T>& parameters() const { return params_; }
  // Parameters touched by one participant's path (shared backbone + its heads).
  std::vector<Parameter<T>*> participant_parameters(ParticipantId participant);
  nlohmann::json architecture() const;

 private:
  struct Heads {
    std::size_t electrodes;
    ConvLayer<T> input;
    std::unique_ptr<OutputHeads<T>> output;
  };

  const Heads& heads(ParticipantId participant) const;

  CnnaeConfig cfg_;
  std::uint64_t seed_;
  ParameterSet<T> params_;
  std::unique_ptr<Backbone<T>> backbone_;
  std::map<ParticipantId, Heads> heads_;
};

// Builds the 2K x T model input (signal rows then derivative rows) from a
// K x T masked signal; derivative rows of zeroed electrodes stay zero.
template <typename T>
Tensor<T> model_input(const Tensor<T>& masked_signal);

// Stacks equally-shaped 2K x T inputs into a B x 2K x T batch.
template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> inputs);

OutputLabel output_label(ElectrodeRole role);

struct ExtractedSeries {
  OutputLabel label = OutputLabel::reconstruction;
  std::vector<float> series;  // signal-mean head row
};

// One entry per electrode of batch item `item` of a B x K x T mean head.
std::vector<ExtractedSeries> extract_imputations(const Tensor<float>& mean_head, std::size_t item,
                                                 std::span<const ElectrodeRole> roles);

void save_cnnae(const Cnnae<float>& model, const std::filesystem::path& stem);
std::unique_ptr<Cnnae<float>> load_cnnae(const std::filesystem::path& stem);
void save_mcnnae(const Mcnnae<float>& model, const std::filesystem::path& stem);
std::unique_ptr<Mcnnae<float>> load_mcnnae(const std::filesystem::path& stem);

}  // namespace dni
