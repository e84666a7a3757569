#pragma once

#include <cstdint>
#include <string_view>

namespace dni {

using ParticipantId = std::uint32_t;
using DayId = std::uint32_t;
using ElectrodeId = std::uint32_t;

// Role of an electrode row in one masked model input.
enum class ElectrodeRole : std::uint8_t {
  observed,           // present in the input
  masked,             // had data, zero-filled by a mask
  naturally_missing,  // no recording exists
};

// Role of an electrode row in a model output.
enum class OutputLabel : std::uint8_t {
  reconstruction,
  imputation,
  no_ground_truth,
};

std::string_view to_string(ElectrodeRole role);
std::string_view to_string(OutputLabel label);
OutputLabel output_label_from_string(std::string_view name);

}  // namespace dni
