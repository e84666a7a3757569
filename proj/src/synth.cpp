#include "dni/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "dni/rng.hpp"
#include "dni/signal.hpp"

namespace dni {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;
constexpr std::uint64_t kLatentTag = 0x6c6174656e74ULL;
constexpr std::uint64_t kGainTag = 0x6761696eULL;
constexpr std::uint64_t kMissingTag = 0x6d697373ULL;
constexpr std::uint64_t kGeometryTag = 0x67656f6dULL;
constexpr std::uint64_t kBurstTag = 0x6275727374ULL;

// Stationary AR(2) path of unit variance.
std::vector<float> ar2_path(const std::array<double, 2>& a, std::size_t n, std::uint64_t seed) {
  const double a1 = a[0], a2 = a[1];
  const double gamma0 = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2) * (1.0 - a2) - a1 * a1));
  const double sigma = 1.0 / std::sqrt(gamma0);
  const double rho = a1 / (1.0 - a2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<float> out(n);
  // Start from the stationary joint law of (x_{-2}, x_{-1}).
  double x2 = normal(rng);
  double x1 = rho * x2 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * normal(rng);
  for (std::size_t t = 0; t < n; ++t) {
    const double x = a1 * x1 + a2 * x2 + sigma * normal(rng);
    out[t] = static_cast<float>(x);
    x2 = x1;
    x1 = x;
  }
  return out;
}

std::vector<Position> grid_geometry(std::size_t k, double spacing, std::uint64_t seed) {
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(2.0 * static_cast<double>(k))));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.1 * spacing, 0.1 * spacing);
  std::vector<Position> out(k);
  for (std::size_t e = 0; e < k; ++e) {
    const double c = static_cast<double>(e % cols), r = static_cast<double>(e / cols);
    out[e].x = c * spacing + jitter(rng);
    out[e].y = r * spacing + jitter(rng);
  }
  return out;
}

void write_f32(const fs::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_f32(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4) throw std::runtime_error("truncated float payload " + path.string());
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

}  // namespace

std::array<double, 2> ar2_from_resonance(double freq_hz, double radius, double rate_hz) {
  if (!(radius > 0.0 && radius < 1.0)) throw std::invalid_argument("ar2_from_resonance: radius must be in (0, 1)");
  if (!(freq_hz >= 0.0 && freq_hz < rate_hz / 2.0)) throw std::invalid_argument("ar2_from_resonance: bad frequency");
  return {2.0 * radius * std::cos(2.0 * std::numbers::pi * freq_hz / rate_hz), -radius * radius};
}

bool ar2_is_stable(const std::array<double, 2>& a) {
  // Stationarity triangle: |a2| < 1, a2 + a1 < 1, a2 - a1 < 1.
  return std::isfinite(a[0]) && std::isfinite(a[1]) && std::abs(a[1]) < 1.0 && a[1] + a[0] < 1.0 &&
         a[1] - a[0] < 1.0;
}

std::size_t GeneratorConfig::electrode_count(std::size_t participant) const {
  return electrodes_per_participant.empty() ? electrodes : electrodes_per_participant.at(participant);
}

std::array<double, 2> GeneratorConfig::ar(std::size_t latent) const {
  if (!ar_coefficients.empty()) return ar_coefficients.at(latent);
  // Slow oscillations that survive 100x mean pooling, plus faster rhythms
  // that give the band-passed data spectral content.
  static constexpr std::array<std::pair<double, double>, 8> bank{{{0.15, 0.9995},
                                                                   {0.4, 0.999},
                                                                   {0.8, 0.999},
                                                                   {1.5, 0.998},
                                                                   {6.0, 0.995},
                                                                   {18.0, 0.99},
                                                                   {0.3, 0.999},
                                                                   {40.0, 0.98}}};
  const auto& [f, r] = bank[latent % bank.size()];
  return ar2_from_resonance(f, r, rate_hz);
}

void GeneratorConfig::validate() const {
  if (participants == 0 || days == 0 || day_length == 0 || latents == 0)
    throw std::invalid_argument("generator: participants, days, day_length and latents must be positive");
  if (!electrodes_per_participant.empty() && electrodes_per_participant.size() != participants)
    throw std::invalid_argument("generator: electrodes_per_participant must list every participant");
  for (std::size_t p = 0; p < participants; ++p)
    if (electrode_count(p) == 0) throw std::invalid_argument("generator: participant without electrodes");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("generator: rate must be positive");
  if (!(length_scale_mm > 0.0)) throw std::invalid_argument("generator: length scale must be positive");
  if (!(noise_std >= 0.0) || !(gain_drift_std >= 0.0)) throw std::invalid_argument("generator: negative std");
  if (!ar_coefficients.empty() && ar_coefficients.size() != latents)
    throw std::invalid_argument("generator: need one AR(2) pair per latent");
  for (std::size_t l = 0; l < latents; ++l)
    if (!ar2_is_stable(ar(l)))
      throw std::invalid_argument("generator: AR(2) coefficients of latent " + std::to_string(l) + " are unstable");
  for (std::size_t p = 0; p < participants; ++p)
    if (missing_per_day >= electrode_count(p))
      throw std::invalid_argument("generator: missing_per_day must leave an electrode observed");
}

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"participants", c.participants},
           {"electrodes", c.electrodes},
           {"electrodes_per_participant", c.electrodes_per_participant},
           {"days", c.days},
           {"day_length", c.day_length},
           {"rate_hz", c.rate_hz},
           {"latents", c.latents},
           {"ar_coefficients", c.ar_coefficients},
           {"length_scale_mm", c.length_scale_mm},
           {"grid_spacing_mm", c.grid_spacing_mm},
           {"noise_std", c.noise_std},
           {"gain_drift_std", c.gain_drift_std},
           {"missing_per_day", c.missing_per_day},
           {"seed", c.seed}};
}

void from_json(const json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.participants = j.value("participants", d.participants);
  c.electrodes = j.value("electrodes", d.electrodes);
  c.electrodes_per_participant = j.value("electrodes_per_participant", d.electrodes_per_participant);
  c.days = j.value("days", d.days);
  c.day_length = j.value("day_length", d.day_length);
  c.rate_hz = j.value("rate_hz", d.rate_hz);
  c.latents = j.value("latents", d.latents);
  c.ar_coefficients = j.value("ar_coefficients", d.ar_coefficients);
  c.length_scale_mm = j.value("length_scale_mm", d.length_scale_mm);
  c.grid_spacing_mm = j.value("grid_spacing_mm", d.grid_spacing_mm);
  c.noise_std = j.value("noise_std", d.noise_std);
  c.gain_drift_std = j.value("gain_drift_std", d.gain_drift_std);
  c.missing_per_day = j.value("missing_per_day", d.missing_per_day);
  c.seed = j.value("seed", d.seed);
}

void to_json(json& j, const ClassSignalConfig& c) {
  j = json{{"amplitude", c.amplitude},       {"band_low_hz", c.band_low_hz}, {"band_high_hz", c.band_high_hz},
           {"center", c.center},             {"footprint_mm", c.footprint_mm}, {"min_weight", c.min_weight},
           {"seed", c.seed}};
}

void from_json(const json& j, ClassSignalConfig& c) {
  ClassSignalConfig d;
  c.amplitude = j.value("amplitude", d.amplitude);
  c.band_low_hz = j.value("band_low_hz", d.band_low_hz);
  c.band_high_hz = j.value("band_high_hz", d.band_high_hz);
  c.center = j.value("center", d.center);
  c.footprint_mm = j.value("footprint_mm", d.footprint_mm);
  c.min_weight = j.value("min_weight", d.min_weight);
  c.seed = j.value("seed", d.seed);
}

std::vector<float> SynthGroundTruth::clean_signal(ParticipantId p, DayId d, ElectrodeId e) const {
  const auto& pt = participants.at(p);
  const auto& paths = pt.latent_paths.at(d);
  if (e >= pt.electrodes) throw std::out_of_range("clean_signal: unknown electrode");
  const std::size_t n = paths.empty() ? 0 : paths[0].size();
  std::vector<double> acc(n, 0.0);
  for (std::size_t l = 0; l < pt.latents; ++l) {
    const double a = pt.mix(e, l);
    for (std::size_t t = 0; t < n; ++t) acc[t] += a * paths[l][t];
  }
  return std::vector<float>(acc.begin(), acc.end());
}

std::vector<float> SynthGroundTruth::regenerate(ParticipantId p, DayId d, ElectrodeId e) const {
  const auto& pt = participants.at(p);
  auto out = clean_signal(p, d, e);
  const double gain = pt.gains.at(d).at(e);
  std::mt19937_64 rng(pt.noise_seeds.at(d).at(e));
  std::normal_distribution<double> normal;
  for (auto& v : out) {
    const double noise = config.noise_std * normal(rng);
    v = static_cast<float>(gain * (static_cast<double>(v) + noise));
  }
  return out;
}

SynthParticipant generate_participant(const GeneratorConfig& cfg, ParticipantId p) {
  cfg.validate();
  if (p >= cfg.participants) throw std::out_of_range("generate_participant: unknown participant");
  const std::size_t k = cfg.electrode_count(p);
  const std::size_t L = cfg.latents;

  SynthParticipant out;
  out.geometry = grid_geometry(k, cfg.grid_spacing_mm, derive_seed(cfg.seed, {kGeometryTag, p}));

  auto& truth = out.truth;
  truth.electrodes = k;
  truth.latents = L;
  {
    // Sources spread over the array footprint.
    double xmax = 0.0, ymax = 0.0;
    for (const auto& pos : out.geometry) {
      xmax = std::max(xmax, pos.x);
      ymax = std::max(ymax, pos.y);
    }
    std::mt19937_64 rng(derive_seed(cfg.seed, {kGeometryTag, p, 1}));
    std::uniform_real_distribution<double> ux(0.0, xmax), uy(0.0, ymax);
    truth.sources.resize(L);
    for (auto& s : truth.sources) {
      s.x = ux(rng);
      s.y = uy(rng);
    }
  }
  truth.mixing.resize(k * L);
  for (ElectrodeId e = 0; e < k; ++e)
    for (std::size_t l = 0; l < L; ++l) {
      const double dist = distance(out.geometry[e], truth.sources[l]);
      truth.mixing[e * L + l] = std::exp(-dist * dist / (cfg.length_scale_mm * cfg.length_scale_mm));
    }

  SynthGroundTruth view;
  view.config = cfg;
  for (DayId d = 0; d < cfg.days; ++d) {
    std::vector<std::vector<float>> paths(L);
    for (std::size_t l = 0; l < L; ++l)
      paths[l] = ar2_path(cfg.ar(l), cfg.day_length, derive_seed(cfg.seed, {kLatentTag, p, d, l}));
    truth.latent_paths.push_back(std::move(paths));

    std::mt19937_64 grng(derive_seed(cfg.seed, {kGainTag, p, d}));
    std::normal_distribution<double> normal;
    std::vector<double> gains(k);
    for (auto& g : gains) g = std::exp(cfg.gain_drift_std * normal(grng));
    truth.gains.push_back(std::move(gains));

    std::vector<std::uint64_t> seeds(k);
    for (ElectrodeId e = 0; e < k; ++e) seeds[e] = derive_seed(cfg.seed, {kNoiseTag, p, d, e});
    truth.noise_seeds.push_back(std::move(seeds));
  }

  // Reuse the regeneration path so recording and oracle agree bit for bit.
  view.participants.assign(p, ParticipantTruth{});
  view.participants.push_back(std::move(truth));
  for (DayId d = 0; d < cfg.days; ++d) {
    DayRecording day;
    day.rate_hz = cfg.rate_hz;
    day.samples = cfg.day_length;
    day.missing.assign(k, 0);
    day.electrodes.resize(k);
    if (cfg.missing_per_day > 0) {
      std::vector<ElectrodeId> ids(k);
      std::iota(ids.begin(), ids.end(), ElectrodeId{0});
      std::mt19937_64 mrng(derive_seed(cfg.seed, {kMissingTag, p, d}));
      std::shuffle(ids.begin(), ids.end(), mrng);
      for (std::size_t i = 0; i < cfg.missing_per_day; ++i) day.missing[ids[i]] = 1;
    }
    for (ElectrodeId e = 0; e < k; ++e)
      if (!day.missing[e]) day.electrodes[e] = view.regenerate(p, d, e);
    out.days.push_back(std::move(day));
  }
  out.truth = std::move(view.participants.back());
  return out;
}

SynthDataset generate_dataset(const GeneratorConfig& cfg) {
  cfg.validate();
  SynthDataset out;
  out.truth.config = cfg;
  for (ParticipantId p = 0; p < cfg.participants; ++p) {
    auto part = generate_participant(cfg, p);
    const auto pid = out.data.recording.add_participant(cfg.electrode_count(p));
    for (auto& day : part.days) out.data.recording.add_day(pid, std::move(day));
    out.data.geometry.positions.push_back(std::move(part.geometry));
    out.truth.participants.push_back(std::move(part.truth));
  }
  return out;
}

double oracle_linear_bound(const SynthGroundTruth& truth, ParticipantId p, DayId d, ElectrodeId target,
                           std::span<const ElectrodeId> neighbors, const SeriesTransform& transform) {
  if (neighbors.empty()) return 0.0;
  auto series = [&](ElectrodeId e) {
    auto s = truth.regenerate(p, d, e);
    return transform ? transform(s) : s;
  };
  const auto y = series(target);
  const std::size_t n = y.size();
  const auto m = static_cast<Eigen::Index>(neighbors.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), m + 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto x = series(neighbors[static_cast<std::size_t>(j)]);
    if (x.size() != n) throw std::logic_error("oracle_linear_bound: transform changed series lengths unequally");
    for (std::size_t t = 0; t < n; ++t) X(static_cast<Eigen::Index>(t), j) = x[t];
  }
  X.col(m).setOnes();
  Eigen::VectorXd Y(static_cast<Eigen::Index>(n));
  for (std::size_t t = 0; t < n; ++t) Y(static_cast<Eigen::Index>(t)) = y[t];
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
  const Eigen::VectorXd fit = X * beta;
  const Eigen::ArrayXd fc = fit.array() - fit.mean();
  const Eigen::ArrayXd yc = Y.array() - Y.mean();
  const double denom = std::sqrt((fc * fc).sum() * (yc * yc).sum());
  if (!(denom > 0.0)) return 0.0;
  return std::clamp((fc * yc).sum() / denom, 0.0, 1.0);
}

std::vector<EventWindow> balanced_schedule(std::size_t day_samples, std::size_t window, std::uint64_t seed) {
  if (window == 0) throw std::invalid_argument("balanced_schedule: window must be positive");
  const std::size_t n = day_samples / window;
  std::vector<EventWindow> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = EventWindow{i * window, window, i < n / 2};
  std::vector<bool> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = out[i].move;
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (std::size_t i = 0; i < n; ++i) out[i].move = labels[i];
  return out;
}

std::vector<std::uint8_t> inject_class_signal(DayRecording& day, std::span<const Position> geometry,
                                              std::span<const EventWindow> schedule, const ClassSignalConfig& cfg) {
  if (!(cfg.band_low_hz > 0.0 && cfg.band_low_hz < cfg.band_high_hz && cfg.band_high_hz < day.rate_hz / 2.0))
    throw std::invalid_argument("inject_class_signal: band must lie strictly inside (0, Nyquist)");
  if (geometry.size() != day.electrodes.size()) throw std::invalid_argument("inject_class_signal: geometry size");
  if (cfg.center >= geometry.size()) throw std::invalid_argument("inject_class_signal: unknown center electrode");

  std::vector<std::size_t> order(schedule.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return schedule[a].start < schedule[b].start; });
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& w = schedule[order[i]];
    if (w.length == 0 || w.start + w.length > day.samples)
      throw std::invalid_argument("inject_class_signal: window outside the day");
    if (i + 1 < order.size() && w.start + w.length > schedule[order[i + 1]].start)
      throw std::invalid_argument("inject_class_signal: schedule windows overlap");
  }

  std::vector<double> weight(geometry.size(), 0.0);
  for (ElectrodeId e = 0; e < geometry.size(); ++e) {
    const double dist = distance(geometry[e], geometry[cfg.center]);
    const double w = std::exp(-dist * dist / (cfg.footprint_mm * cfg.footprint_mm));
    if (w >= cfg.min_weight) weight[e] = w;
  }

  std::vector<std::uint8_t> labels(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& w = schedule[i];
    labels[i] = w.move ? 1 : 0;
    if (!w.move || cfg.amplitude == 0.0) continue;
    std::mt19937_64 rng(derive_seed(cfg.seed, {kBurstTag, w.start}));
    std::normal_distribution<double> normal;
    std::vector<float> white(w.length);
    for (auto& v : white) v = static_cast<float>(normal(rng));
    auto burst = bandpass_filter(white, cfg.band_low_hz, cfg.band_high_hz, day.rate_hz);
    double ss = 0.0;
    for (std::size_t t = 0; t < w.length; ++t) {
      const double taper =
          w.length == 1 ? 1.0
                        : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / (w.length - 1));
      burst[t] = static_cast<float>(burst[t] * taper);
      ss += static_cast<double>(burst[t]) * burst[t];
    }
    const double scale = ss > 0.0 ? cfg.amplitude / std::sqrt(ss / static_cast<double>(w.length)) : 0.0;
    for (ElectrodeId e = 0; e < geometry.size(); ++e) {
      if (weight[e] == 0.0 || day.missing[e]) continue;
      auto& s = day.electrodes[e];
      for (std::size_t t = 0; t < w.length; ++t) s[w.start + t] += static_cast<float>(scale * weight[e] * burst[t]);
    }
  }
  return labels;
}

std::vector<std::uint8_t> inject_class_signal(Dataset& dataset, ParticipantId p, DayId d,
                                              std::span<const EventWindow> schedule, const ClassSignalConfig& cfg) {
  return inject_class_signal(dataset.recording.day(p, d), dataset.geometry.participant(p), schedule, cfg);
}

void save_ground_truth(const SynthGroundTruth& truth, const fs::path& dir) {
  fs::create_directories(dir);
  json j;
  j["config"] = truth.config;
  j["participants"] = json::array();
  for (ParticipantId p = 0; p < truth.participants.size(); ++p) {
    const auto& pt = truth.participants[p];
    json jp{{"electrodes", pt.electrodes},
            {"latents", pt.latents},
            {"mixing", pt.mixing},
            {"gains", pt.gains},
            {"noise_seeds", pt.noise_seeds},
            {"sources", json::array()}};
    for (const auto& s : pt.sources) jp["sources"].push_back({s.x, s.y, s.z});
    jp["days"] = pt.latent_paths.size();
    j["participants"].push_back(jp);
    for (DayId d = 0; d < pt.latent_paths.size(); ++d) {
      std::vector<float> flat;
      for (const auto& path : pt.latent_paths[d]) flat.insert(flat.end(), path.begin(), path.end());
      write_f32(dir / ("latents_p" + std::to_string(p) + "_d" + std::to_string(d) + ".f32"), flat);
    }
  }
  std::ofstream out(dir / "truth.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "truth.json").string());
  out << j.dump(2) << '\n';
}

SynthGroundTruth load_ground_truth(const fs::path& dir) {
  std::ifstream in(dir / "truth.json");
  if (!in) throw std::runtime_error("no truth.json in " + dir.string());
  const json j = json::parse(in);
  SynthGroundTruth truth;
  truth.config = j.at("config").get<GeneratorConfig>();
  const auto& parts = j.at("participants");
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& jp = parts[p];
    ParticipantTruth pt;
    pt.electrodes = jp.at("electrodes").get<std::size_t>();
    pt.latents = jp.at("latents").get<std::size_t>();
    pt.mixing = jp.at("mixing").get<std::vector<double>>();
    pt.gains = jp.at("gains").get<std::vector<std::vector<double>>>();
    pt.noise_seeds = jp.at("noise_seeds").get<std::vector<std::vector<std::uint64_t>>>();
    for (const auto& s : jp.at("sources")) pt.sources.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()});
    const auto days = jp.at("days").get<std::size_t>();
    for (std::size_t d = 0; d < days; ++d) {
      const auto flat = read_f32(dir / ("latents_p" + std::to_string(p) + "_d" + std::to_string(d) + ".f32"));
      if (pt.latents == 0 || flat.size() % pt.latents) throw std::runtime_error("latent payload size mismatch");
      const std::size_t n = flat.size() / pt.latents;
      std::vector<std::vector<float>> paths(pt.latents);
      for (std::size_t l = 0; l < pt.latents; ++l)
        paths[l].assign(flat.begin() + static_cast<std::ptrdiff_t>(l * n),
                        flat.begin() + static_cast<std::ptrdiff_t>((l + 1) * n));
      pt.latent_paths.push_back(std::move(paths));
    }
    truth.participants.push_back(std::move(pt));
  }
  return truth;
}

}  // namespace dni
