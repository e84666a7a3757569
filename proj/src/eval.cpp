#include "dni/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fftw3.h>

namespace dni {

using nlohmann::json;

SpectrumConfig SpectrumConfig::for_rate(double rate_hz) {
  SpectrumConfig c;
  c.window = rate_hz >= 100.0 ? 256 : 64;
  return c;
}

void SpectrumConfig::validate() const {
  if (window < 2) throw std::invalid_argument("spectrum: window must be at least 2");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("spectrum: overlap must be in [0, 1)");
}

void to_json(json& j, const SpectrumConfig& c) {
  j = json{{"window", c.window},
           {"overlap", c.overlap},
           {"averaging", c.averaging == SpectrumAveraging::mean ? "mean" : "median"}};
}

void from_json(const json& j, SpectrumConfig& c) {
  c.window = j.value("window", c.window);
  c.overlap = j.value("overlap", c.overlap);
  const auto mode = j.value("averaging", std::string("mean"));
  if (mode != "mean" && mode != "median") throw std::invalid_argument("spectrum averaging must be mean or median");
  c.averaging = mode == "mean" ? SpectrumAveraging::mean : SpectrumAveraging::median;
}

double bin_frequency(std::size_t bin, const SpectrumConfig& cfg, double rate_hz) {
  return static_cast<double>(bin) * rate_hz / static_cast<double>(cfg.window);
}

std::vector<double> power_spectrum(std::span<const float> series, const SpectrumConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.window;
  if (series.size() < n)
    throw std::invalid_argument("power_spectrum: window " + std::to_string(n) + " exceeds series length " +
                                std::to_string(series.size()));
  const std::size_t step = std::max<std::size_t>(1, n - static_cast<std::size_t>(std::llround(cfg.overlap * n)));
  const std::size_t segments = (series.size() - n) / step + 1;
  const std::size_t bins = n / 2 + 1;

  std::vector<double> window(n);
  double wss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // Periodic Hann.
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    wss += window[i] * window[i];
  }

  double* in = fftw_alloc_real(n);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);

  std::vector<std::vector<double>> per_segment(segments, std::vector<double>(bins));
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t i = 0; i < n; ++i) in[i] = window[i] * series[s * step + i];
    fftw_execute(plan);
    for (std::size_t b = 0; b < bins; ++b) {
      const double mag2 = out[b][0] * out[b][0] + out[b][1] * out[b][1];
      const bool interior = b != 0 && !(n % 2 == 0 && b == n / 2);
      per_segment[s][b] = (interior ? 2.0 : 1.0) * mag2 / (static_cast<double>(n) * wss);
    }
  }
  fftw_destroy_plan(plan);
  fftw_free(out);
  fftw_free(in);

  std::vector<double> psd(bins, 0.0);
  if (cfg.averaging == SpectrumAveraging::mean) {
    for (const auto& seg : per_segment)
      for (std::size_t b = 0; b < bins; ++b) psd[b] += seg[b];
    for (auto& v : psd) v /= static_cast<double>(segments);
  } else {
    std::vector<double> column(segments);
    for (std::size_t b = 0; b < bins; ++b) {
      for (std::size_t s = 0; s < segments; ++s) column[s] = per_segment[s][b];
      std::sort(column.begin(), column.end());
      psd[b] = segments % 2 ? column[segments / 2] : 0.5 * (column[segments / 2 - 1] + column[segments / 2]);
    }
  }
  return psd;
}

Correlation frequency_correlation(std::span<const float> original, std::span<const float> estimate,
                                  const SpectrumConfig& cfg) {
  if (original.size() != estimate.size()) throw std::invalid_argument("frequency_correlation: length mismatch");
  auto log_power = [&](std::span<const float> s) {
    auto p = power_spectrum(s, cfg);
    for (auto& v : p) v = std::log(std::max(v, kLogPowerFloor));
    return p;
  };
  const auto a = log_power(original), b = log_power(estimate);
  return pearson(std::span<const double>(a), std::span<const double>(b));
}

// ---------------------------------------------------------------- imputers

std::vector<Tensor<float>> ZeroImputer::impute(ParticipantId, std::span<const MaskedInstance> inputs) {
  std::vector<Tensor<float>> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.emplace_back(in.signal.shape(), 0.0f);
  return out;
}

void LinearImputer::set_weights(NeighborWeights weights) {
  const auto p = weights.participant;
  weights_[p] = std::move(weights);
}

const NeighborWeights& LinearImputer::weights(ParticipantId participant) const {
  const auto it = weights_.find(participant);
  if (it == weights_.end())
    throw std::invalid_argument("baseline: no weights fitted for participant " + std::to_string(participant));
  return it->second;
}

std::vector<Tensor<float>> LinearImputer::impute(ParticipantId participant, std::span<const MaskedInstance> inputs) {
  const auto& w = weights(participant);
  std::vector<Tensor<float>> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(impute_linear(in, w).output);
  return out;
}

namespace {

template <typename Predict>
std::vector<Tensor<float>> batched_predict(std::span<const MaskedInstance> inputs, std::size_t batch,
                                           Predict&& predict) {
  std::vector<Tensor<float>> out;
  out.reserve(inputs.size());
  for (std::size_t start = 0; start < inputs.size(); start += batch) {
    const std::size_t end = std::min(inputs.size(), start + batch);
    std::vector<Tensor<float>> xs;
    for (std::size_t i = start; i < end; ++i) xs.push_back(model_input(inputs[i].signal));
    const auto heads = predict(stack_batch(std::span<const Tensor<float>>(xs)));
    const std::size_t k = heads.mean.dim(1), len = heads.mean.dim(2);
    for (std::size_t b = 0; b < end - start; ++b) {
      Tensor<float> est({k, len});
      std::copy_n(heads.mean.ptr() + b * k * len, k * len, est.ptr());
      out.push_back(std::move(est));
    }
  }
  return out;
}

constexpr std::size_t kPredictBatch = 16;

}  // namespace

void CnnaeImputer::set_model(ParticipantId participant, std::shared_ptr<const Cnnae<float>> model) {
  models_[participant] = std::move(model);
}

std::vector<Tensor<float>> CnnaeImputer::impute(ParticipantId participant, std::span<const MaskedInstance> inputs) {
  const auto it = models_.find(participant);
  if (it == models_.end())
    throw std::invalid_argument("cnnae: no model for participant " + std::to_string(participant));
  const auto& model = *it->second;
  return batched_predict(inputs, kPredictBatch, [&](const Tensor<float>& x) { return model.predict(x); });
}

std::vector<Tensor<float>> McnnaeImputer::impute(ParticipantId participant, std::span<const MaskedInstance> inputs) {
  return batched_predict(inputs, kPredictBatch,
                         [&](const Tensor<float>& x) { return model_->predict(participant, x); });
}

// ---------------------------------------------------------------- scoring

const ScoreRow* EvalReport::find(ParticipantId participant, const std::string& method, double regime,
                                 OutputLabel role) const {
  for (const auto& r : rows)
    if (r.participant == participant && r.method == method && std::abs(r.regime - regime) < 1e-12 && r.role == role)
      return &r;
  return nullptr;
}

void EvalReport::append(const EvalReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  electrodes.insert(electrodes.end(), other.electrodes.begin(), other.electrodes.end());
  if (!other.metadata.empty()) {
    if (!metadata.contains("runs")) metadata["runs"] = json::array();
    metadata["runs"].push_back(other.metadata);
  }
}

EvalReport evaluate_model(Imputer& imputer, ParticipantId participant, std::span<const Instance> test_instances,
                          std::span<const MaskPlan> plans, const EvalOptions& options) {
  if (plans.empty()) throw std::invalid_argument("evaluate_model: no mask plans");
  const double regime = plans.front().p;
  for (const auto& plan : plans)
    if (std::abs(plan.p - regime) > 1e-12) throw std::invalid_argument("evaluate_model: plans mix regimes");

  const std::size_t k = test_instances.empty() ? 0 : test_instances.front().electrodes();
  std::vector<double> recon, imput;
  struct Acc {
    double time = 0.0, freq = 0.0;
    std::size_t n = 0;
  };
  std::vector<Acc> acc_recon(k), acc_imput(k);

  for (const auto& plan : plans) {
    if (plan.participant != participant) throw std::invalid_argument("evaluate_model: plan for another participant");
    const auto masked = apply_mask(test_instances, plan);
    for (std::size_t start = 0; start < masked.size(); start += options.batch) {
      const std::size_t end = std::min(masked.size(), start + options.batch);
      const auto outputs = imputer.impute(participant, std::span<const MaskedInstance>(masked).subspan(start, end - start));
      for (std::size_t i = start; i < end; ++i) {
        const auto& truth = test_instances[i].signal;
        const auto& est = outputs[i - start];
        if (!est.same_shape(truth)) throw std::logic_error("imputer returned " + shape_string(est.shape()));
        for (ElectrodeId e = 0; e < k; ++e) {
          const auto role = masked[i].roles[e];
          if (role == ElectrodeRole::naturally_missing) continue;
          const double tc = pearson(est.row(e), truth.row(e)).value;
          const double fc = options.frequency ? frequency_correlation(truth.row(e), est.row(e), options.spectrum).value
                                              : 0.0;
          const bool reconstruction = output_label(role) == OutputLabel::reconstruction;
          auto& acc = reconstruction ? acc_recon[e] : acc_imput[e];
          (reconstruction ? recon : imput).push_back(tc);
          acc.time += tc;
          acc.freq += fc;
          ++acc.n;
        }
      }
    }
  }
  if (recon.empty() && imput.empty()) throw std::invalid_argument("evaluate_model: no scorable electrodes");

  EvalReport report;
  const std::string method = imputer.name();
  auto add_row = [&](OutputLabel role, const std::vector<double>& v, const std::vector<Acc>& accs) {
    if (v.empty()) return;
    report.rows.push_back(ScoreRow{participant, method, regime, role, mean(v), stddev(v), v.size()});
    for (ElectrodeId e = 0; e < k; ++e) {
      if (accs[e].n == 0) continue;
      const double n = static_cast<double>(accs[e].n);
      report.electrodes.push_back(
          ElectrodeScore{participant, method, regime, e, role, accs[e].time / n, accs[e].freq / n, accs[e].n});
    }
  };
  add_row(OutputLabel::reconstruction, recon, acc_recon);
  add_row(OutputLabel::imputation, imput, acc_imput);

  json seeds = json::array();
  for (const auto& plan : plans) seeds.push_back(plan.seed);
  report.metadata = {{"participant", participant}, {"method", method},          {"regime", regime},
                     {"mask_sets", plans.size()},  {"mask_seeds", seeds},       {"instances", test_instances.size()},
                     {"spectrum", options.spectrum}};
  return report;
}

void to_json(json& j, const ScoreRow& r) {
  j = json{{"participant", r.participant}, {"method", r.method}, {"regime", r.regime},
           {"role", to_string(r.role)},   {"mean", r.mean},     {"std", r.std},
           {"n", r.n}};
}

void from_json(const json& j, ScoreRow& r) {
  r.participant = j.at("participant").get<ParticipantId>();
  r.method = j.at("method").get<std::string>();
  r.regime = j.at("regime").get<double>();
  r.role = output_label_from_string(j.at("role").get<std::string>());
  r.mean = j.at("mean").get<double>();
  r.std = j.at("std").get<double>();
  r.n = j.at("n").get<std::size_t>();
}

void to_json(json& j, const ElectrodeScore& e) {
  j = json{{"participant", e.participant}, {"method", e.method},       {"regime", e.regime},
           {"electrode", e.electrode},     {"role", to_string(e.role)}, {"time_corr", e.time_corr},
           {"freq_corr", e.freq_corr},     {"n", e.n}};
}

void from_json(const json& j, ElectrodeScore& e) {
  e.participant = j.at("participant").get<ParticipantId>();
  e.method = j.at("method").get<std::string>();
  e.regime = j.at("regime").get<double>();
  e.electrode = j.at("electrode").get<ElectrodeId>();
  e.role = output_label_from_string(j.at("role").get<std::string>());
  e.time_corr = j.at("time_corr").get<double>();
  e.freq_corr = j.at("freq_corr").get<double>();
  e.n = j.at("n").get<std::size_t>();
}

void to_json(json& j, const EvalReport& r) {
  j = json{{"rows", r.rows}, {"electrodes", r.electrodes}, {"metadata", r.metadata}};
}

void from_json(const json& j, EvalReport& r) {
  r.rows = j.at("rows").get<std::vector<ScoreRow>>();
  r.electrodes = j.at("electrodes").get<std::vector<ElectrodeScore>>();
  r.metadata = j.value("metadata", json::object());
}

}  // namespace dni
