#include "dni/models.hpp"

#include <stdexcept>

#include "dni/checkpoint.hpp"
#include "dni/rng.hpp"

namespace dni {

using nlohmann::json;

void CnnaeConfig::validate() const {
  if (encoder_kernels.empty() || encoder_kernels.size() != encoder_strides.size())
    throw std::invalid_argument("encoder kernels and strides must be non-empty and equally long");
  if (z_dim == 0 || units == 0 || decoder_layers == 0 || decoder_blocks == 0 || batch_size == 0 ||
      shared_width == 0)
    throw std::invalid_argument("model widths, depths and batch size must be positive");
  for (auto s : encoder_strides)
    if (s == 0) throw std::invalid_argument("encoder strides must be positive");
  if (temporal_reduction() != upsample)
    throw std::invalid_argument("product of encoder strides (" + std::to_string(temporal_reduction()) +
                                ") must equal the upsample factor (" + std::to_string(upsample) + ")");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

std::size_t CnnaeConfig::temporal_reduction() const {
  std::size_t r = 1;
  for (auto s : encoder_strides) r *= s;
  return r;
}

void to_json(json& j, const CnnaeConfig& c) {
  j = json{{"z_dim", c.z_dim},
           {"units", c.units},
           {"encoder_kernels", c.encoder_kernels},
           {"encoder_strides", c.encoder_strides},
           {"decoder_layers", c.decoder_layers},
           {"decoder_blocks", c.decoder_blocks},
           {"upsample", c.upsample},
           {"batch_size", c.batch_size},
           {"learning_rate", c.learning_rate},
           {"shared_width", c.shared_width}};
}

void from_json(const json& j, CnnaeConfig& c) {
  CnnaeConfig d;
  c.z_dim = j.value("z_dim", d.z_dim);
  c.units = j.value("units", d.units);
  c.encoder_kernels = j.value("encoder_kernels", d.encoder_kernels);
  c.encoder_strides = j.value("encoder_strides", d.encoder_strides);
  c.decoder_layers = j.value("decoder_layers", d.decoder_layers);
  c.decoder_blocks = j.value("decoder_blocks", d.decoder_blocks);
  c.upsample = j.value("upsample", d.upsample);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.shared_width = j.value("shared_width", d.shared_width);
}

// ---------------------------------------------------------------- layers

template <typename T>
ConvLayer<T>::ConvLayer(ParameterSet<T>& params, const std::string& name, std::size_t in, std::size_t out,
                        std::size_t kernel, ConvSpec s, std::uint64_t seed)
    : spec(s) {
  weight = &params.add(name + ".w", {out, in, kernel});
  bias = &params.add(name + ".b", {out});
  std::mt19937_64 rng(derive_seed(seed, name));
  init_uniform(*weight, in * kernel, rng);
  init_uniform(*bias, in * kernel, rng);
}

template <typename T>
Var ConvLayer<T>::operator()(Tape<T>& tape, Var x) const {
  return tape.conv1d(x, tape.param(*weight), tape.param(*bias), spec);
}

template <typename T>
Backbone<T>::Backbone(ParameterSet<T>& params, const std::string& prefix, std::size_t in_channels,
                      const CnnaeConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), in_channels_(in_channels) {
  cfg_.validate();
  const std::size_t u = cfg.units;
  for (std::size_t i = 0; i < cfg.encoder_kernels.size(); ++i) {
    const std::size_t k = cfg.encoder_kernels[i];
    encoder_.emplace_back(params, prefix + "enc" + std::to_string(i), i == 0 ? in_channels : u, u, k,
                          ConvSpec::strided_same(k, cfg.encoder_strides[i]), seed);
  }
  to_latent_ = ConvLayer<T>(params, prefix + "latent", u, cfg.z_dim, 1, ConvSpec{}, seed);
  input_proj_ = ConvLayer<T>(params, prefix + "input_proj", in_channels, u, 1, ConvSpec{}, seed);
  merge_ = ConvLayer<T>(params, prefix + "merge", cfg.z_dim + u, u, 1, ConvSpec{}, seed);
  for (std::size_t b = 0; b < cfg.decoder_blocks; ++b)
    for (std::size_t l = 0; l < cfg.decoder_layers; ++l) {
      const std::string name = prefix + "dec" + std::to_string(b) + "_" + std::to_string(l);
      const std::size_t dilation = std::size_t{1} << l;
      blocks_.push_back(Residual{
          ConvLayer<T>(params, name + ".dilated", u, 2 * u, 2, ConvSpec::causal(2, dilation), seed),
          ConvLayer<T>(params, name + ".residual", u, u, 1, ConvSpec{}, seed),
          ConvLayer<T>(params, name + ".skip", u, u, 1, ConvSpec{}, seed)});
    }
  post_ = ConvLayer<T>(params, prefix + "post", u, u, 1, ConvSpec{}, seed);
}

template <typename T>
typename Backbone<T>::Output Backbone<T>::forward(Tape<T>& tape, Var x) const {
  const auto& xin = tape.value(x);
  if (xin.rank() != 3 || xin.dim(1) != in_channels_)
    throw std::invalid_argument("backbone: expected B x " + std::to_string(in_channels_) + " x T input, got " +
                                shape_string(xin.shape()));
  if (xin.dim(2) == 0 || xin.dim(2) % cfg_.temporal_reduction() != 0)
    throw std::invalid_argument("backbone: sequence length " + std::to_string(xin.dim(2)) +
                                " is not a multiple of " + std::to_string(cfg_.temporal_reduction()));

  Var h = x;
  for (const auto& layer : encoder_) h = tape.relu(layer(tape, h));
  const Var z = to_latent_(tape, h);

  const Var up = tape.upsample_repeat(z, cfg_.upsample);
  Var state = merge_(tape, tape.concat_channels(up, input_proj_(tape, x)));

  const std::size_t u = cfg_.units;
  Var skip_sum;
  for (const auto& block : blocks_) {
    const Var pre = block.dilated(tape, state);
    const Var gated = tape.mul(tape.tanh(tape.slice_channels(pre, 0, u)), tape.sigmoid(tape.slice_channels(pre, u, u)));
    state = tape.add(state, block.residual(tape, gated));
    const Var s = block.skip(tape, gated);
    skip_sum = skip_sum.valid() ? tape.add(skip_sum, s) : s;
  }
  const Var features = tape.relu(post_(tape, tape.relu(skip_sum)));
  return {features, z};
}

template <typename T>
OutputHeads<T>::OutputHeads(ParameterSet<T>& params, const std::string& prefix, std::size_t units,
                            std::size_t electrodes, std::uint64_t seed)
    : electrodes_(electrodes),
      mean_(params, prefix + "head_mean", units, electrodes, 1, ConvSpec{}, seed),
      raw_var_(params, prefix + "head_var", units, electrodes, 1, ConvSpec{}, seed),
      deriv_mean_(params, prefix + "head_dmean", units, electrodes, 1, ConvSpec{}, seed),
      deriv_raw_var_(params, prefix + "head_dvar", units, electrodes, 1, ConvSpec{}, seed) {}

template <typename T>
void OutputHeads<T>::apply(Tape<T>& tape, Var features, HeadVars<T>& out) const {
  out.mean = mean_(tape, features);
  out.raw_var = raw_var_(tape, features);
  out.deriv_mean = deriv_mean_(tape, features);
  out.deriv_raw_var = deriv_raw_var_(tape, features);
}

template <typename T>
HeadTensors<T> collect_heads(const Tape<T>& tape, const HeadVars<T>& v) {
  return {tape.value(v.mean), tape.value(v.raw_var), tape.value(v.deriv_mean), tape.value(v.deriv_raw_var),
          tape.value(v.latent)};
}

// ---------------------------------------------------------------- CNNAE

template <typename T>
Cnnae<T>::Cnnae(std::size_t electrodes, CnnaeConfig cfg, std::uint64_t seed)
    : electrodes_(electrodes), cfg_(std::move(cfg)) {
  if (electrodes == 0) throw std::invalid_argument("CNNAE needs at least one electrode");
  cfg_.validate();
  backbone_ = std::make_unique<Backbone<T>>(params_, "backbone.", 2 * electrodes, cfg_, seed);
  heads_ = std::make_unique<OutputHeads<T>>(params_, "", cfg_.units, electrodes, seed);
}

template <typename T>
HeadVars<T> Cnnae<T>::forward(Tape<T>& tape, Var input) const {
  HeadVars<T> out;
  const auto bb = backbone_->forward(tape, input);
  out.latent = bb.latent;
  out.shared = input;
  heads_->apply(tape, bb.features, out);
  return out;
}

template <typename T>
HeadTensors<T> Cnnae<T>::predict(const Tensor<T>& input) const {
  Tape<T> tape(false);
  const Tensor<T> batched = input.rank() == 2 ? input.reshaped({1, input.dim(0), input.dim(1)}) : input;
  return collect_heads(tape, forward(tape, tape.constant(batched)));
}

template <typename T>
json Cnnae<T>::architecture() const {
  return {{"model", "cnnae"}, {"electrodes", electrodes_}, {"config", cfg_}};
}

// ---------------------------------------------------------------- M-CNNAE

template <typename T>
Mcnnae<T>::Mcnnae(CnnaeConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
  cfg_.validate();
  backbone_ = std::make_unique<Backbone<T>>(params_, "backbone.", cfg_.shared_width, cfg_, seed);
}

template <typename T>
void Mcnnae<T>::register_participant(ParticipantId participant, std::size_t electrodes) {
  if (has_participant(participant))
    throw std::invalid_argument("participant " + std::to_string(participant) + " already registered");
  if (electrodes == 0) throw std::invalid_argument("participant needs at least one electrode");
  const std::string prefix = "p" + std::to_string(participant) + ".";
  Heads h{electrodes,
          ConvLayer<T>(params_, prefix + "input", 2 * electrodes, cfg_.shared_width, 1, ConvSpec{}, seed_),
          std::make_unique<OutputHeads<T>>(params_, prefix, cfg_.units, electrodes, seed_)};
  heads_.emplace(participant, std::move(h));
}

template <typename T>
const typename Mcnnae<T>::Heads& Mcnnae<T>::heads(ParticipantId participant) const {
  auto it = heads_.find(participant);
  if (it == heads_.end())
    throw std::invalid_argument("participant " + std::to_string(participant) + " is not registered");
  return it->second;
}

template <typename T>
std::size_t Mcnnae<T>::electrodes(ParticipantId participant) const {
  return heads(participant).electrodes;
}

template <typename T>
std::vector<ParticipantId> Mcnnae<T>::participants() const {
  std::vector<ParticipantId> out;
  for (const auto& [id, h] : heads_) out.push_back(id);
  return out;
}

template <typename T>
HeadVars<T> Mcnnae<T>::forward(Tape<T>& tape, ParticipantId participant, Var input) const {
  const auto& h = heads(participant);
  const auto& x = tape.value(input);
  if (x.rank() != 3 || x.dim(1) != 2 * h.electrodes)
    throw std::invalid_argument("M-CNNAE: participant " + std::to_string(participant) + " expects " +
                                std::to_string(2 * h.electrodes) + " input channels, got " + shape_string(x.shape()));
  HeadVars<T> out;
  out.shared = h.input(tape, input);
  const auto bb = backbone_->forward(tape, out.shared);
  out.latent = bb.latent;
  h.output->apply(tape, bb.features, out);
  return out;
}

template <typename T>
HeadTensors<T> Mcnnae<T>::predict(ParticipantId participant, const Tensor<T>& input) const {
  Tape<T> tape(false);
  const Tensor<T> batched = input.rank() == 2 ? input.reshaped({1, input.dim(0), input.dim(1)}) : input;
  return collect_heads(tape, forward(tape, participant, tape.constant(batched)));
}

template <typename T>
std::vector<Parameter<T>*> Mcnnae<T>::participant_parameters(ParticipantId participant) {
  heads(participant);
  const std::string prefix = "p" + std::to_string(participant) + ".";
  std::vector<Parameter<T>*> out;
  for (auto* p : params_.all())
    if (p->name.starts_with("backbone.") || p->name.starts_with(prefix)) out.push_back(p);
  return out;
}

template <typename T>
json Mcnnae<T>::architecture() const {
  json registry = json::array();
  for (const auto& [id, h] : heads_) registry.push_back({{"participant", id}, {"electrodes", h.electrodes}});
  return {{"model", "mcnnae"}, {"config", cfg_}, {"participants", registry}};
}

// ---------------------------------------------------------------- helpers

template <typename T>
Tensor<T> model_input(const Tensor<T>& masked) {
  if (masked.rank() != 2) throw std::invalid_argument("model_input: expected K x T signal");
  const std::size_t k = masked.dim(0), t = masked.dim(1);
  Tensor<T> out({2 * k, t});
  for (std::size_t e = 0; e < k; ++e) {
    auto src = masked.row(e);
    auto sig = out.row(e);
    auto der = out.row(k + e);
    std::copy(src.begin(), src.end(), sig.begin());
    for (std::size_t i = 1; i < t; ++i) der[i] = src[i] - src[i - 1];
  }
  return out;
}

template <typename T>
Tensor<T> stack_batch(std::span<const Tensor<T>> inputs) {
  if (inputs.empty()) throw std::invalid_argument("stack_batch: empty batch");
  const auto& first = inputs.front();
  if (first.rank() != 2) throw std::invalid_argument("stack_batch: expected rank-2 items");
  Tensor<T> out({inputs.size(), first.dim(0), first.dim(1)});
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    if (!inputs[b].same_shape(first)) throw std::invalid_argument("stack_batch: ragged batch");
    std::copy(inputs[b].data().begin(), inputs[b].data().end(), out.ptr() + b * first.size());
  }
  return out;
}

OutputLabel output_label(ElectrodeRole role) {
  switch (role) {
    case ElectrodeRole::observed: return OutputLabel::reconstruction;
    case ElectrodeRole::masked: return OutputLabel::imputation;
    case ElectrodeRole::naturally_missing: break;
  }
  return OutputLabel::no_ground_truth;
}

std::vector<ExtractedSeries> extract_imputations(const Tensor<float>& mean_head, std::size_t item,
                                                 std::span<const ElectrodeRole> roles) {
  if (mean_head.rank() != 3 || item >= mean_head.dim(0) || roles.size() != mean_head.dim(1))
    throw std::invalid_argument("extract_imputations: roles do not match head shape " +
                                shape_string(mean_head.shape()));
  std::vector<ExtractedSeries> out(roles.size());
  for (std::size_t e = 0; e < roles.size(); ++e) {
    const auto row = mean_head.row(item * roles.size() + e);
    out[e] = {output_label(roles[e]), std::vector<float>(row.begin(), row.end())};
  }
  return out;
}

void save_cnnae(const Cnnae<float>& model, const std::filesystem::path& stem) {
  save_checkpoint(stem, model.parameters(), model.architecture());
}

std::unique_ptr<Cnnae<float>> load_cnnae(const std::filesystem::path& stem) {
  const json arch = read_checkpoint_manifest(stem);
  if (arch.at("model") != "cnnae") throw std::runtime_error("checkpoint does not hold a CNNAE");
  auto model = std::make_unique<Cnnae<float>>(arch.at("electrodes").get<std::size_t>(),
                                              arch.at("config").get<CnnaeConfig>(), 0);
  load_checkpoint(stem, model->parameters());
  return model;
}

void save_mcnnae(const Mcnnae<float>& model, const std::filesystem::path& stem) {
  save_checkpoint(stem, model.parameters(), model.architecture());
}

std::unique_ptr<Mcnnae<float>> load_mcnnae(const std::filesystem::path& stem) {
  const json arch = read_checkpoint_manifest(stem);
  if (arch.at("model") != "mcnnae") throw std::runtime_error("checkpoint does not hold an M-CNNAE");
  auto model = std::make_unique<Mcnnae<float>>(arch.at("config").get<CnnaeConfig>(), 0);
  for (const auto& p : arch.at("participants"))
    model->register_participant(p.at("participant").get<ParticipantId>(), p.at("electrodes").get<std::size_t>());
  load_checkpoint(stem, model->parameters());
  return model;
}

template class ConvLayer<float>;
template class ConvLayer<double>;
template class Backbone<float>;
template class Backbone<double>;
template class OutputHeads<float>;
template class OutputHeads<double>;
template class Cnnae<float>;
template class Cnnae<double>;
template class Mcnnae<float>;
template class Mcnnae<double>;
template HeadTensors<float> collect_heads(const Tape<float>&, const HeadVars<float>&);
template HeadTensors<double> collect_heads(const Tape<double>&, const HeadVars<double>&);
template Tensor<float> model_input(const Tensor<float>&);
template Tensor<double> model_input(const Tensor<double>&);
template Tensor<float> stack_batch(std::span<const Tensor<float>>);
template Tensor<double> stack_batch(std::span<const Tensor<double>>);

}  // namespace dni
