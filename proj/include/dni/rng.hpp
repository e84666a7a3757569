#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace dni {

// Seed derivation: every randomized stage gets its own stream from the global
// seed plus a stage name and/or integer coordinates.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords);

}  // namespace dni
