#include "dni/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "dni/checkpoint.hpp"
#include "dni/masking.hpp"
#include "dni/rng.hpp"

namespace dni {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kShuffleTag = 0x73687566ULL;
constexpr std::uint64_t kMaskTag = 0x6d61736bULL;

template <typename Params>
std::vector<Tensor<float>> snapshot(const Params& params) {
  std::vector<Tensor<float>> out;
  for (const auto* p : params.all()) out.push_back(p->value);
  return out;
}

template <typename Params>
void restore(Params& params, const std::vector<Tensor<float>>& snap) {
  const auto all = params.all();
  for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = snap[i];
}

std::string stem_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
  return buf;
}

}  // namespace

TrainConfig TrainConfig::cnnae() { return TrainConfig{}; }

TrainConfig TrainConfig::mcnnae() {
  TrainConfig c;
  c.epochs = 45;
  return c;
}

void TrainConfig::validate() const {
  if (!(mask_min > 0.0 && mask_min <= mask_max && mask_max < 1.0))
    throw std::invalid_argument("train: mask range must satisfy 0 < min <= max < 1");
  if (epochs == 0) throw std::invalid_argument("train: epochs must be positive");
  if (batch_size == 0 || per_participant == 0) throw std::invalid_argument("train: batch sizes must be positive");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (lambda_slow < 0.0 || lambda_margin < 0.0) throw std::invalid_argument("train: negative regularizer weight");
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"mask_min", c.mask_min},
           {"mask_max", c.mask_max},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"per_participant", c.per_participant},
           {"learning_rate", c.learning_rate},
           {"lambda_slow", c.lambda_slow},
           {"lambda_margin", c.lambda_margin},
           {"margin", c.margin},
           {"checkpoint_every", c.checkpoint_every},
           {"seed", c.seed}};
}

void from_json(const json& j, TrainConfig& c) {
  c.mask_min = j.value("mask_min", c.mask_min);
  c.mask_max = j.value("mask_max", c.mask_max);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.per_participant = j.value("per_participant", c.per_participant);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.lambda_slow = j.value("lambda_slow", c.lambda_slow);
  c.lambda_margin = j.value("lambda_margin", c.lambda_margin);
  c.margin = j.value("margin", c.margin);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.seed = j.value("seed", c.seed);
}

MaskedBatch masked_batch(std::span<const Instance* const> instances, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (instances.empty()) throw std::invalid_argument("masked_batch: empty batch");
  const std::size_t k = instances.front()->electrodes(), len = instances.front()->length();
  const std::size_t b = instances.size();
  MaskedBatch out;
  out.input = Tensor<float>({b, 2 * k, len});
  out.target = Tensor<float>({b, k, len});
  out.deriv_target = Tensor<float>({b, k, len});
  out.include.assign(b * k, 0);
  out.fraction = std::uniform_real_distribution<double>(cfg.mask_min, cfg.mask_max)(rng);

  for (std::size_t i = 0; i < b; ++i) {
    const auto& inst = *instances[i];
    if (inst.electrodes() != k || inst.length() != len)
      throw std::invalid_argument("masked_batch: instances differ in shape");
    auto observed = availability_from_flags(inst.missing).observed;
    const std::size_t count = observed.empty() ? 0 : mask_count(out.fraction, observed.size());
    std::shuffle(observed.begin(), observed.end(), rng);
    observed.resize(count);
    std::sort(observed.begin(), observed.end());
    auto masked = apply_mask(inst, observed);

    const auto input = model_input(masked.signal);
    std::copy_n(input.ptr(), 2 * k * len, out.input.ptr() + i * 2 * k * len);
    for (ElectrodeId e = 0; e < k; ++e) {
      if (inst.missing[e]) continue;
      out.include[i * k + e] = 1;
      const auto src = inst.signal.row(e);
      auto dst = out.target.row(i * k + e);
      auto ddst = out.deriv_target.row(i * k + e);
      std::copy(src.begin(), src.end(), dst.begin());
      for (std::size_t t = 1; t < len; ++t) ddst[t] = src[t] - src[t - 1];
    }
    out.roles.push_back(std::move(masked.roles));
  }
  return out;
}

Var training_loss(Tape<float>& tape, const HeadVars<float>& heads, const MaskedBatch& batch, const TrainConfig& cfg) {
  Var loss = tape.add(tape.gaussian_nll(batch.target, heads.mean, heads.raw_var, batch.include),
                      tape.gaussian_nll(batch.deriv_target, heads.deriv_mean, heads.deriv_raw_var, batch.include));
  if (cfg.lambda_slow > 0.0)
    loss = tape.add(loss, tape.scale(tape.slowness(heads.latent), static_cast<float>(cfg.lambda_slow)));
  if (cfg.lambda_margin > 0.0)
    loss = tape.add(loss, tape.scale(tape.margin_penalty(heads.latent, static_cast<float>(cfg.margin)),
                                     static_cast<float>(cfg.lambda_margin)));
  return loss;
}

void write_loss_csv(const fs::path& path, std::span<const double> curve, std::size_t first_epoch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", first_epoch + i, curve[i]);
    out << buf;
  }
}

namespace {

// Shared epoch loop; `step` runs one optimizer step and returns its loss.
template <typename Model>
TrainResult run_epochs(Model& model, const TrainConfig& cfg, const TrainOptions& options, std::size_t steps_per_epoch,
                       const std::function<double(std::size_t epoch, std::size_t step)>& step) {
  TrainResult result;
  if (options.checkpoint_dir) fs::create_directories(*options.checkpoint_dir);
  auto good = snapshot(model.parameters());
  for (std::size_t epoch = options.start_epoch; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      double loss;
      try {
        loss = step(epoch, s);
      } catch (const std::domain_error& e) {
        restore(model.parameters(), good);
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                               std::to_string(s) + " (" + e.what() + "); parameters restored to epoch " +
                               std::to_string(epoch));
      }
      if (!std::isfinite(loss)) {
        restore(model.parameters(), good);
        throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                               std::to_string(s) + "; parameters restored to epoch " + std::to_string(epoch));
      }
      total += loss;
      ++result.steps;
    }
    const double mean_loss = total / static_cast<double>(steps_per_epoch);
    result.loss_curve.push_back(mean_loss);
    good = snapshot(model.parameters());
    spdlog::debug("epoch {} loss {:.6f}", epoch + 1, mean_loss);
    if (options.on_epoch) options.on_epoch(epoch + 1, mean_loss);
    if (options.checkpoint_dir && cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      const auto stem = *options.checkpoint_dir / stem_name(epoch + 1);
      save_checkpoint(stem, model.parameters(), model.architecture());
      result.checkpoints.push_back(stem);
    }
  }
  if (options.checkpoint_dir) {
    const auto stem = *options.checkpoint_dir / "final";
    save_checkpoint(stem, model.parameters(), model.architecture());
    result.checkpoints.push_back(stem);
  }
  return result;
}

}  // namespace

TrainResult train_cnnae(Cnnae<float>& model, std::span<const Instance> train, const TrainConfig& cfg,
                        const TrainOptions& options) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_cnnae: no training instances");
  Adam<float> adam(model.parameters().all(), AdamConfig<float>{static_cast<float>(cfg.learning_rate)});
  const std::size_t steps = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(train.size());
  std::size_t order_epoch = static_cast<std::size_t>(-1);

  return run_epochs(model, cfg, options, steps, [&](std::size_t epoch, std::size_t s) {
    if (order_epoch != epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, {kShuffleTag, epoch}));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      order_epoch = epoch;
    }
    std::vector<const Instance*> members;
    for (std::size_t i = s * cfg.batch_size; i < std::min(train.size(), (s + 1) * cfg.batch_size); ++i)
      members.push_back(&train[order[i]]);
    std::mt19937_64 mask_rng(derive_seed(cfg.seed, {kMaskTag, epoch, s}));
    const auto batch = masked_batch(members, cfg, mask_rng);
    if (options.on_batch) options.on_batch(0, members.size());

    adam.zero_grad();
    Tape<float> tape;
    const auto heads = model.forward(tape, tape.constant(batch.input));
    const Var loss = training_loss(tape, heads, batch, cfg);
    const double value = tape.value(loss)[0];
    tape.backward(loss);
    adam.step();
    return value;
  });
}

TrainResult train_mcnnae(Mcnnae<float>& model, const std::map<ParticipantId, std::vector<Instance>>& train,
                         const TrainConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  if (train.empty()) throw std::invalid_argument("train_mcnnae: no participants");
  std::size_t total = 0;
  for (const auto& [pid, insts] : train) {
    if (insts.empty()) throw std::invalid_argument("train_mcnnae: participant " + std::to_string(pid) + " has no data");
    if (!model.has_participant(pid)) model.register_participant(pid, insts.front().electrodes());
    total += insts.size();
  }
  Adam<float> adam(model.parameters().all(), AdamConfig<float>{static_cast<float>(cfg.learning_rate)});
  const std::size_t per_step = cfg.per_participant * train.size();
  const std::size_t steps = (total + per_step - 1) / per_step;

  // Each participant cycles through its own reshuffled order.
  struct Cursor {
    std::vector<std::size_t> order;
    std::size_t pos = 0;
    std::size_t pass = 0;
  };
  std::map<ParticipantId, Cursor> cursors;
  auto reshuffle = [&](ParticipantId pid, Cursor& c) {
    c.order.resize(train.at(pid).size());
    std::iota(c.order.begin(), c.order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, {kShuffleTag, pid, c.pass}));
    std::shuffle(c.order.begin(), c.order.end(), rng);
    c.pos = 0;
  };
  for (const auto& [pid, insts] : train) reshuffle(pid, cursors[pid]);

  return run_epochs(model, cfg, options, steps, [&](std::size_t epoch, std::size_t s) {
    adam.zero_grad();
    Tape<float> tape;
    Var loss{};
    bool first = true;
    for (const auto& [pid, insts] : train) {
      auto& c = cursors[pid];
      std::vector<const Instance*> members;
      for (std::size_t i = 0; i < cfg.per_participant; ++i) {
        if (c.pos == c.order.size()) {
          ++c.pass;
          reshuffle(pid, c);
        }
        members.push_back(&insts[c.order[c.pos++]]);
      }
      std::mt19937_64 mask_rng(derive_seed(cfg.seed, {kMaskTag, epoch, s, pid}));
      const auto batch = masked_batch(members, cfg, mask_rng);
      if (options.on_batch) options.on_batch(pid, members.size());
      const auto heads = model.forward(tape, pid, tape.constant(batch.input));
      const Var l = training_loss(tape, heads, batch, cfg);
      loss = first ? l : tape.add(loss, l);
      first = false;
    }
    loss = tape.scale(loss, 1.0f / static_cast<float>(train.size()));
    const double value = tape.value(loss)[0];
    tape.backward(loss);
    adam.step();
    return value;
  });
}

}  // namespace dni
