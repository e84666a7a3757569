#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dni/ids.hpp"
#include "dni/tensor.hpp"

namespace dni {

// One day of one participant. Missing electrodes keep an empty payload and a
// flag; every present electrode has exactly `samples` values.
struct DayRecording {
  double rate_hz = 500.0;
  std::size_t samples = 0;
  std::vector<std::vector<float>> electrodes;
  std::vector<std::uint8_t> missing;

  bool is_missing(ElectrodeId e) const { return missing.at(e) != 0; }
};

struct ParticipantRecording {
  std::size_t electrode_count = 0;
  std::vector<DayRecording> days;  // the last day is the test day
};

class RaggedRecording {
 public:
  ParticipantId add_participant(std::size_t electrode_count);
  DayId add_day(ParticipantId participant, DayRecording day);

  std::size_t participant_count() const { return participants_.size(); }
  std::size_t electrode_count(ParticipantId p) const { return participant(p).electrode_count; }
  std::size_t day_count(ParticipantId p) const { return participant(p).days.size(); }
  DayId test_day(ParticipantId p) const;
  const DayRecording& day(ParticipantId p, DayId d) const;
  DayRecording& day(ParticipantId p, DayId d);
  std::span<const float> samples(ParticipantId p, DayId d, ElectrodeId e) const;

  // Throws DatasetError on any invariant violation.
  void validate() const;

 private:
  const ParticipantRecording& participant(ParticipantId p) const;
  ParticipantRecording& participant(ParticipantId p);

  std::vector<ParticipantRecording> participants_;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

double distance(const Position& a, const Position& b);

struct ElectrodeGeometry {
  std::vector<std::vector<Position>> positions;  // [participant][electrode], millimeters

  std::span<const Position> participant(ParticipantId p) const { return positions.at(p); }
};

struct Dataset {
  RaggedRecording recording;
  ElectrodeGeometry geometry;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AvailabilitySets {
  std::vector<ElectrodeId> observed;
  std::vector<ElectrodeId> missing;
  bool degenerate = false;  // nothing observed
};

AvailabilitySets availability(const RaggedRecording& rec, ParticipantId p, DayId d);
// Availability from per-row missing flags.
AvailabilitySets availability_from_flags(std::span<const std::uint8_t> missing);

// Electrodes x time window; missing electrodes are zero rows with a flag.
struct Instance {
  Tensor<float> signal;
  std::vector<std::uint8_t> missing;
  double rate_hz = 0.0;

  std::size_t electrodes() const { return signal.dim(0); }
  std::size_t length() const { return signal.dim(1); }
};

// floor((L - window)/stride) + 1 windows; trailing samples are dropped.
std::vector<Instance> slice_instances(const RaggedRecording& rec, ParticipantId p, DayId d, std::size_t window,
                                      std::size_t stride);

// Directory layout: manifest.json + data/p{i}_d{j}_e{k}.f32 (float32 LE).
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

}  // namespace dni
