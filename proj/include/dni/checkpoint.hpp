#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "dni/autodiff.hpp"

namespace dni {

// Checkpoint = <stem>.bin (flat 32-bit little-endian floats, parameters in
// set order) + <stem>.json (shape manifest plus a caller-supplied
// architecture descriptor).
template <typename T>
void save_checkpoint(const std::filesystem::path& stem, const ParameterSet<T>& params,
                     const nlohmann::json& architecture);

// Reads the architecture descriptor only.
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& stem);

// Loads values into an existing set; names and shapes must match exactly.
template <typename T>
void load_checkpoint(const std::filesystem::path& stem, ParameterSet<T>& params);

std::filesystem::path checkpoint_bin(const std::filesystem::path& stem);
std::filesystem::path checkpoint_json(const std::filesystem::path& stem);

}  // namespace dni
