#include "dni/ragged_store.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

namespace dni {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string where(ParticipantId p, DayId d, ElectrodeId e) {
  return "(participant " + std::to_string(p) + ", day " + std::to_string(d) + ", electrode " + std::to_string(e) +
         ")";
}

std::string payload_name(ParticipantId p, DayId d, ElectrodeId e) {
  return "p" + std::to_string(p) + "_d" + std::to_string(d) + "_e" + std::to_string(e) + ".f32";
}

}  // namespace

double distance(const Position& a, const Position& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

ParticipantId RaggedRecording::add_participant(std::size_t electrode_count) {
  participants_.push_back(ParticipantRecording{electrode_count, {}});
  return static_cast<ParticipantId>(participants_.size() - 1);
}

DayId RaggedRecording::add_day(ParticipantId p, DayRecording day) {
  auto& part = participant(p);
  if (day.missing.empty()) day.missing.assign(part.electrode_count, 0);
  if (day.electrodes.empty()) day.electrodes.resize(part.electrode_count);
  part.days.push_back(std::move(day));
  return static_cast<DayId>(part.days.size() - 1);
}

const ParticipantRecording& RaggedRecording::participant(ParticipantId p) const {
  if (p >= participants_.size()) throw DatasetError("unknown participant " + std::to_string(p));
  return participants_[p];
}

ParticipantRecording& RaggedRecording::participant(ParticipantId p) {
  if (p >= participants_.size()) throw DatasetError("unknown participant " + std::to_string(p));
  return participants_[p];
}

DayId RaggedRecording::test_day(ParticipantId p) const {
  const auto n = day_count(p);
  if (n == 0) throw DatasetError("participant " + std::to_string(p) + " has no days");
  return static_cast<DayId>(n - 1);
}

const DayRecording& RaggedRecording::day(ParticipantId p, DayId d) const {
  const auto& part = participant(p);
  if (d >= part.days.size())
    throw DatasetError("unknown day " + std::to_string(d) + " for participant " + std::to_string(p));
  return part.days[d];
}

DayRecording& RaggedRecording::day(ParticipantId p, DayId d) {
  auto& part = participant(p);
  if (d >= part.days.size())
    throw DatasetError("unknown day " + std::to_string(d) + " for participant " + std::to_string(p));
  return part.days[d];
}

std::span<const float> RaggedRecording::samples(ParticipantId p, DayId d, ElectrodeId e) const {
  const auto& dr = day(p, d);
  if (e >= dr.electrodes.size()) throw DatasetError("unknown electrode " + where(p, d, e));
  return dr.electrodes[e];
}

void RaggedRecording::validate() const {
  for (ParticipantId p = 0; p < participants_.size(); ++p) {
    const auto& part = participants_[p];
    for (DayId d = 0; d < part.days.size(); ++d) {
      const auto& dr = part.days[d];
      if (!(dr.rate_hz > 0.0)) throw DatasetError("non-positive sampling rate " + where(p, d, 0));
      if (dr.electrodes.size() != part.electrode_count || dr.missing.size() != part.electrode_count)
        throw DatasetError("electrode set differs from participant electrode count on day " + std::to_string(d) +
                           " of participant " + std::to_string(p));
      for (ElectrodeId e = 0; e < part.electrode_count; ++e) {
        const auto& s = dr.electrodes[e];
        if (dr.missing[e]) {
          if (!s.empty()) throw DatasetError("missing electrode carries samples " + where(p, d, e));
          continue;
        }
        if (s.size() != dr.samples)
          throw DatasetError("length mismatch " + where(p, d, e) + ": expected " + std::to_string(dr.samples) +
                             " samples, found " + std::to_string(s.size()));
        for (std::size_t i = 0; i < s.size(); ++i)
          if (!std::isfinite(s[i]))
            throw DatasetError("non-finite sample at index " + std::to_string(i) + " " + where(p, d, e));
      }
    }
  }
}

AvailabilitySets availability_from_flags(std::span<const std::uint8_t> missing) {
  AvailabilitySets out;
  for (ElectrodeId e = 0; e < missing.size(); ++e) (missing[e] ? out.missing : out.observed).push_back(e);
  out.degenerate = out.observed.empty();
  return out;
}

AvailabilitySets availability(const RaggedRecording& rec, ParticipantId p, DayId d) {
  auto out = availability_from_flags(rec.day(p, d).missing);
  if (out.degenerate) spdlog::warn("participant {} day {}: every electrode is missing", p, d);
  return out;
}

std::vector<Instance> slice_instances(const RaggedRecording& rec, ParticipantId p, DayId d, std::size_t window,
                                      std::size_t stride) {
  if (window == 0 || stride == 0) throw std::invalid_argument("slice_instances: window and stride must be positive");
  const auto& dr = rec.day(p, d);
  std::vector<Instance> out;
  if (window > dr.samples) {
    spdlog::warn("participant {} day {}: window {} exceeds day length {}", p, d, window, dr.samples);
    return out;
  }
  const std::size_t k = rec.electrode_count(p);
  const std::size_t count = (dr.samples - window) / stride + 1;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Instance inst{Tensor<float>({k, window}), dr.missing, dr.rate_hz};
    for (ElectrodeId e = 0; e < k; ++e) {
      if (dr.missing[e]) continue;
      const auto& s = dr.electrodes[e];
      std::copy_n(s.begin() + static_cast<std::ptrdiff_t>(i * stride), window, inst.signal.row(e).begin());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

// ---------------------------------------------------------------- persistence

void save_dataset(const Dataset& dataset, const fs::path& root) {
  const auto& rec = dataset.recording;
  rec.validate();
  if (dataset.geometry.positions.size() != rec.participant_count())
    throw DatasetError("geometry does not cover every participant");
  fs::create_directories(root / "data");

  json manifest;
  manifest["format"] = "ragged-f32le";
  manifest["participants"] = json::array();
  for (ParticipantId p = 0; p < rec.participant_count(); ++p) {
    const auto& geom = dataset.geometry.positions[p];
    if (geom.size() != rec.electrode_count(p))
      throw DatasetError("geometry size mismatch for participant " + std::to_string(p));
    json jp;
    jp["id"] = p;
    jp["electrodes"] = rec.electrode_count(p);
    jp["geometry"] = json::array();
    for (const auto& pos : geom) jp["geometry"].push_back({pos.x, pos.y, pos.z});
    jp["days"] = json::array();
    for (DayId d = 0; d < rec.day_count(p); ++d) {
      const auto& dr = rec.day(p, d);
      json jd{{"day", d}, {"samples", dr.samples}, {"rate_hz", dr.rate_hz}, {"missing", json::array()}};
      for (ElectrodeId e = 0; e < dr.missing.size(); ++e) {
        if (dr.missing[e]) {
          jd["missing"].push_back(e);
          continue;
        }
        std::ofstream out(root / "data" / payload_name(p, d, e), std::ios::binary);
        if (!out) throw DatasetError("cannot write payload " + where(p, d, e));
        std::vector<unsigned char> bytes(dr.samples * 4);
        for (std::size_t i = 0; i < dr.samples; ++i) {
          const auto bits = std::bit_cast<std::uint32_t>(dr.electrodes[e][i]);
          for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      }
      jp["days"].push_back(jd);
    }
    manifest["participants"].push_back(jp);
  }
  std::ofstream mf(root / "manifest.json");
  if (!mf) throw DatasetError("cannot write manifest in " + root.string());
  mf << manifest.dump(2) << '\n';
}

Dataset load_dataset(const fs::path& root) {
  std::ifstream mf(root / "manifest.json");
  if (!mf) throw DatasetError("no manifest.json in " + root.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw DatasetError(std::string("malformed manifest: ") + e.what());
  }

  Dataset ds;
  const auto& parts = manifest.at("participants");
  for (std::size_t idx = 0; idx < parts.size(); ++idx) {
    const auto& jp = parts[idx];
    if (jp.at("id").get<std::size_t>() != idx) throw DatasetError("participant ids must be 0..N-1 in order");
    const std::size_t k = jp.at("electrodes").get<std::size_t>();
    const auto p = ds.recording.add_participant(k);
    std::vector<Position> geom;
    for (const auto& g : jp.at("geometry")) {
      Position pos{g.at(0).get<double>(), g.at(1).get<double>(), g.at(2).get<double>()};
      if (!std::isfinite(pos.x) || !std::isfinite(pos.y) || !std::isfinite(pos.z))
        throw DatasetError("non-finite electrode position for participant " + std::to_string(p));
      geom.push_back(pos);
    }
    if (geom.size() != k) throw DatasetError("geometry lists " + std::to_string(geom.size()) + " positions for " +
                                             std::to_string(k) + " electrodes (participant " + std::to_string(p) + ")");
    ds.geometry.positions.push_back(std::move(geom));

    const auto& days = jp.at("days");
    for (std::size_t di = 0; di < days.size(); ++di) {
      const auto& jd = days[di];
      const auto d = static_cast<DayId>(di);
      if (jd.at("day").get<std::size_t>() != di) throw DatasetError("day ids must be ordinal");
      DayRecording dr;
      dr.rate_hz = jd.at("rate_hz").get<double>();
      dr.samples = jd.at("samples").get<std::size_t>();
      dr.missing.assign(k, 0);
      dr.electrodes.resize(k);
      for (const auto& m : jd.at("missing")) {
        const auto e = m.get<ElectrodeId>();
        if (e >= k) throw DatasetError("missing list names unknown electrode " + where(p, d, e));
        dr.missing[e] = 1;
      }
      for (ElectrodeId e = 0; e < k; ++e) {
        const auto path = root / "data" / payload_name(p, d, e);
        if (dr.missing[e]) {
          if (fs::exists(path)) throw DatasetError("payload present for electrode declared missing " + where(p, d, e));
          continue;
        }
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DatasetError("manifest/payload mismatch: no payload for " + where(p, d, e));
        std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (bytes.size() % 4 != 0 || bytes.size() / 4 != dr.samples)
          throw DatasetError("length mismatch " + where(p, d, e) + ": expected " + std::to_string(dr.samples) +
                             " samples, payload holds " + std::to_string(bytes.size() / 4) +
                             (bytes.size() % 4 ? " (plus a partial sample)" : ""));
        auto& s = dr.electrodes[e];
        s.resize(dr.samples);
        for (std::size_t i = 0; i < dr.samples; ++i) {
          const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                                     (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                                     (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                                     (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
          s[i] = std::bit_cast<float>(bits);
        }
      }
      ds.recording.add_day(p, std::move(dr));
    }
  }
  ds.recording.validate();
  for (ParticipantId p = 0; p < ds.recording.participant_count(); ++p)
    for (DayId d = 0; d < ds.recording.day_count(p); ++d)
      if (availability_from_flags(ds.recording.day(p, d).missing).degenerate)
        spdlog::warn("participant {} day {}: every electrode is missing", p, d);
  return ds;
}

}  // namespace dni
