#include "dni/signal.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include <spdlog/spdlog.h>

namespace dni {

using nlohmann::json;

std::size_t PipelineConfig::segment_length() const {
  return static_cast<std::size_t>(std::llround(source_rate_hz * segment_seconds));
}

std::size_t PipelineConfig::stats_length() const {
  return static_cast<std::size_t>(std::llround(source_rate_hz * stats_seconds));
}

double PipelineConfig::output_rate_hz() const {
  return procedure == Procedure::A ? source_rate_hz / static_cast<double>(downsample_factor)
                                   : source_rate_hz / static_cast<double>(decimation);
}

void PipelineConfig::validate() const {
  if (!(source_rate_hz > 0.0)) throw std::invalid_argument("pipeline: source rate must be positive");
  if (procedure == Procedure::A) {
    if (downsample_factor == 0) throw std::invalid_argument("pipeline: downsample factor must be positive");
    if (!(stats_seconds > 0.0) || !(segment_seconds > stats_seconds))
      throw std::invalid_argument("pipeline: need 0 < stats_seconds < segment_seconds");
  } else {
    if (decimation == 0 || trim_length == 0 || fir_taps == 0)
      throw std::invalid_argument("pipeline: decimation, trim length and taps must be positive");
    if (!(band_low_hz > 0.0 && band_low_hz < band_high_hz && band_high_hz < source_rate_hz / 2.0))
      throw std::invalid_argument("pipeline: band edges must satisfy 0 < low < high < Nyquist");
  }
}

PipelineConfig PipelineConfig::procedure_a(double source_rate_hz) {
  PipelineConfig c;
  c.procedure = Procedure::A;
  c.source_rate_hz = source_rate_hz;
  c.downsample_factor = static_cast<std::size_t>(std::llround(source_rate_hz / 5.0));
  return c;
}

PipelineConfig PipelineConfig::procedure_b(double source_rate_hz) {
  PipelineConfig c;
  c.procedure = Procedure::B;
  c.source_rate_hz = source_rate_hz;
  c.decimation = static_cast<std::size_t>(std::llround(source_rate_hz / 250.0));
  return c;
}

void to_json(json& j, const PipelineConfig& c) {
  j = json{{"procedure", c.procedure == Procedure::A ? "A" : "B"},
           {"source_rate_hz", c.source_rate_hz},
           {"segment_seconds", c.segment_seconds},
           {"stats_seconds", c.stats_seconds},
           {"downsample_factor", c.downsample_factor},
           {"band_low_hz", c.band_low_hz},
           {"band_high_hz", c.band_high_hz},
           {"decimation", c.decimation},
           {"trim_length", c.trim_length},
           {"fir_taps", c.fir_taps}};
}

void from_json(const json& j, PipelineConfig& c) {
  const std::string proc = j.value("procedure", std::string("A"));
  if (proc != "A" && proc != "B") throw std::invalid_argument("pipeline procedure must be A or B");
  const double rate = j.value("source_rate_hz", 500.0);
  c = proc == "A" ? PipelineConfig::procedure_a(rate) : PipelineConfig::procedure_b(rate);
  c.segment_seconds = j.value("segment_seconds", c.segment_seconds);
  c.stats_seconds = j.value("stats_seconds", c.stats_seconds);
  c.downsample_factor = j.value("downsample_factor", c.downsample_factor);
  c.band_low_hz = j.value("band_low_hz", c.band_low_hz);
  c.band_high_hz = j.value("band_high_hz", c.band_high_hz);
  c.decimation = j.value("decimation", c.decimation);
  c.trim_length = j.value("trim_length", c.trim_length);
  c.fir_taps = j.value("fir_taps", c.fir_taps);
}

std::vector<float> standardize_segment(std::span<const float> raw, double source_rate_hz, double segment_seconds,
                                       double stats_seconds) {
  const auto seg = static_cast<std::size_t>(std::llround(source_rate_hz * segment_seconds));
  const auto stats = static_cast<std::size_t>(std::llround(source_rate_hz * stats_seconds));
  if (raw.size() != seg)
    throw std::invalid_argument("standardize_segment: expected " + std::to_string(seg) + " samples, got " +
                                std::to_string(raw.size()));
  double mean = 0.0;
  for (std::size_t i = 0; i < stats; ++i) mean += raw[i];
  mean /= static_cast<double>(stats);
  double var = 0.0;
  for (std::size_t i = 0; i < stats; ++i) var += (raw[i] - mean) * (raw[i] - mean);
  const double sd = std::sqrt(var / static_cast<double>(stats));
  if (sd < kStdFloor) throw ZeroVarianceError("standardize_segment: prefix standard deviation below 1e-8");
  std::vector<float> body(seg - stats);
  for (std::size_t i = stats; i < seg; ++i) body[i - stats] = static_cast<float>((raw[i] - mean) / sd);
  return body;
}

std::vector<float> downsample(std::span<const float> series, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("downsample: factor must be >= 1");
  if (factor > series.size()) {
    spdlog::warn("downsample: factor {} exceeds series length {}", factor, series.size());
    return {};
  }
  const std::size_t n = series.size() / factor;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < factor; ++j) acc += series[i * factor + j];
    out[i] = static_cast<float>(acc / static_cast<double>(factor));
  }
  return out;
}

std::vector<double> bandpass_kernel(double low_hz, double high_hz, double rate_hz, std::size_t taps) {
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < rate_hz / 2.0))
    throw std::invalid_argument("bandpass_filter: band edges must satisfy 0 < low < high < rate/2");
  if (taps == 0 || taps % 2 == 0) throw std::invalid_argument("bandpass_filter: taps must be odd");
  const double mid = static_cast<double>(taps - 1) / 2.0;
  auto lowpass = [&](double fc) {
    std::vector<double> h(taps);
    double dc = 0.0;
    const double f = 2.0 * fc / rate_hz;
    for (std::size_t n = 0; n < taps; ++n) {
      const double m = static_cast<double>(n) - mid;
      const double sinc = m == 0.0 ? 1.0 : std::sin(std::numbers::pi * f * m) / (std::numbers::pi * f * m);
      const double window =
          taps == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / (taps - 1));
      h[n] = f * sinc * window;
      dc += h[n];
    }
    for (auto& v : h) v /= dc;
    return h;
  };
  auto hi = lowpass(high_hz);
  const auto lo = lowpass(low_hz);
  for (std::size_t n = 0; n < taps; ++n) hi[n] -= lo[n];
  return hi;
}

std::vector<float> bandpass_filter(std::span<const float> series, double low_hz, double high_hz, double rate_hz,
                                   std::size_t taps) {
  const auto h = bandpass_kernel(low_hz, high_hz, rate_hz, taps);
  const std::size_t n = series.size();
  if (n == 0) return {};
  const std::size_t half = (taps - 1) / 2;
  // Symmetric (edge-including mirror) padding.
  auto at = [&](std::ptrdiff_t i) -> float {
    const auto len = static_cast<std::ptrdiff_t>(n);
    while (i < 0 || i >= len) {
      if (i < 0) i = -i - 1;
      if (i >= len) i = 2 * len - i - 1;
    }
    return series[static_cast<std::size_t>(i)];
  };
  std::vector<float> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    const auto base = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(half);
    if (t >= half && t + half < n) {
      const float* x = series.data() + (t - half);
      for (std::size_t j = 0; j < taps; ++j) acc += h[j] * x[j];
    } else {
      for (std::size_t j = 0; j < taps; ++j) acc += h[j] * at(base + static_cast<std::ptrdiff_t>(j));
    }
    out[t] = static_cast<float>(acc);
  }
  return out;
}

std::vector<float> time_derivative(std::span<const float> series) {
  std::vector<float> out(series.size(), 0.0f);
  for (std::size_t t = 1; t < series.size(); ++t) out[t] = series[t] - series[t - 1];
  return out;
}

std::vector<float> procedure_a_series(std::span<const float> raw, const PipelineConfig& cfg) {
  if (cfg.procedure != Procedure::A) throw std::invalid_argument("procedure_a_series: pipeline is not Procedure A");
  cfg.validate();
  const std::size_t seg = cfg.segment_length();
  std::vector<float> out;
  for (std::size_t s = 0; s + seg <= raw.size(); s += seg) {
    const auto body = downsample(
        standardize_segment(raw.subspan(s, seg), cfg.source_rate_hz, cfg.segment_seconds, cfg.stats_seconds),
        cfg.downsample_factor);
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

std::vector<Instance> process_day(const RaggedRecording& rec, ParticipantId p, DayId d, const PipelineConfig& cfg) {
  cfg.validate();
  const auto& day = rec.day(p, d);
  const std::size_t k = rec.electrode_count(p);
  if (std::abs(day.rate_hz - cfg.source_rate_hz) > 1e-9)
    throw std::invalid_argument("pipeline configured for " + std::to_string(cfg.source_rate_hz) +
                                " Hz but day is recorded at " + std::to_string(day.rate_hz) + " Hz");
  std::vector<Instance> out;

  if (cfg.procedure == Procedure::A) {
    const std::size_t seg = cfg.segment_length();
    const std::size_t n_seg = day.samples / seg;
    for (std::size_t s = 0; s < n_seg; ++s) {
      std::vector<std::vector<float>> rows(k);
      bool skipped = false;
      for (ElectrodeId e = 0; e < k && !skipped; ++e) {
        if (day.missing[e]) continue;
        const auto segment = std::span<const float>(day.electrodes[e]).subspan(s * seg, seg);
        try {
          rows[e] = downsample(standardize_segment(segment, cfg.source_rate_hz, cfg.segment_seconds, cfg.stats_seconds),
                               cfg.downsample_factor);
        } catch (const ZeroVarianceError&) {
          spdlog::warn("participant {} day {} segment {}: electrode {} has zero variance, segment skipped", p, d, s, e);
          skipped = true;
        }
      }
      if (skipped) continue;
      const std::size_t len = (seg - cfg.stats_length()) / cfg.downsample_factor;
      Instance inst{Tensor<float>({k, len}), day.missing, cfg.output_rate_hz()};
      for (ElectrodeId e = 0; e < k; ++e)
        if (!day.missing[e]) std::copy(rows[e].begin(), rows[e].end(), inst.signal.row(e).begin());
      out.push_back(std::move(inst));
    }
    return out;
  }

  const std::size_t decimated = (day.samples + cfg.decimation - 1) / cfg.decimation;
  const std::size_t count = decimated / cfg.trim_length;
  if (count == 0) return out;
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(Instance{Tensor<float>({k, cfg.trim_length}), day.missing, cfg.output_rate_hz()});
  for (ElectrodeId e = 0; e < k; ++e) {
    if (day.missing[e]) continue;
    const auto filtered =
        bandpass_filter(day.electrodes[e], cfg.band_low_hz, cfg.band_high_hz, cfg.source_rate_hz, cfg.fir_taps);
    for (std::size_t i = 0; i < count; ++i) {
      auto row = out[i].signal.row(e);
      for (std::size_t t = 0; t < cfg.trim_length; ++t) row[t] = filtered[(i * cfg.trim_length + t) * cfg.decimation];
    }
  }
  return out;
}

InstanceMap run_pipeline(const RaggedRecording& rec, const PipelineConfig& cfg) {
  InstanceMap out;
  for (ParticipantId p = 0; p < rec.participant_count(); ++p)
    for (DayId d = 0; d < rec.day_count(p); ++d) out[{p, d}] = process_day(rec, p, d, cfg);
  return out;
}

namespace {

std::string instance_file(ParticipantId p, DayId d) {
  return "p" + std::to_string(p) + "_d" + std::to_string(d) + ".f32";
}

}  // namespace

void save_instances(const InstanceMap& instances, const std::filesystem::path& dir) {
  static_assert(std::endian::native == std::endian::little, "instance files are little-endian");
  std::filesystem::create_directories(dir);
  json manifest = json::array();
  for (const auto& [key, list] : instances) {
    const auto [p, d] = key;
    json entry{{"participant", p}, {"day", d}, {"count", list.size()}, {"file", instance_file(p, d)}};
    json missing = json::array();
    std::ofstream out(dir / instance_file(p, d), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / instance_file(p, d)).string());
    for (const auto& inst : list) {
      if (entry.contains("electrodes") &&
          (entry["electrodes"] != inst.electrodes() || entry["length"] != inst.length()))
        throw std::invalid_argument("save_instances: instances of one day differ in shape");
      entry["electrodes"] = inst.electrodes();
      entry["length"] = inst.length();
      entry["rate_hz"] = inst.rate_hz;
      missing.push_back(inst.missing);
      out.write(reinterpret_cast<const char*>(inst.signal.ptr()),
                static_cast<std::streamsize>(inst.signal.size() * sizeof(float)));
    }
    entry["missing"] = std::move(missing);
    manifest.push_back(std::move(entry));
  }
  std::ofstream(dir / "instances.json") << manifest.dump(1) << "\n";
}

InstanceMap load_instances(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "instances.json");
  if (!mf) throw std::runtime_error("missing " + (dir / "instances.json").string());
  const json manifest = json::parse(mf);
  InstanceMap out;
  for (const auto& entry : manifest) {
    const auto p = entry.at("participant").get<ParticipantId>();
    const auto d = entry.at("day").get<DayId>();
    const auto count = entry.at("count").get<std::size_t>();
    auto& list = out[{p, d}];
    if (count == 0) continue;
    const auto k = entry.at("electrodes").get<std::size_t>();
    const auto len = entry.at("length").get<std::size_t>();
    const auto rate = entry.at("rate_hz").get<double>();
    const auto path = dir / entry.at("file").get<std::string>();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing " + path.string());
    for (std::size_t i = 0; i < count; ++i) {
      Instance inst{Tensor<float>({k, len}), entry.at("missing").at(i).get<std::vector<std::uint8_t>>(), rate};
      in.read(reinterpret_cast<char*>(inst.signal.ptr()), static_cast<std::streamsize>(k * len * sizeof(float)));
      if (!in) throw std::runtime_error(path.string() + " is truncated at instance " + std::to_string(i));
      list.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace dni
