#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "dni/ragged_store.hpp"

namespace testing {

inline std::vector<float> sine(std::size_t n, double freq_hz, double rate_hz, double amp = 1.0, double phase = 0.0) {
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / rate_hz + phase));
  return out;
}

inline std::vector<float> gaussian(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<float> out(n);
  for (auto& v : out) v = static_cast<float>(normal(rng));
  return out;
}

inline double amplitude(const std::vector<float>& s, std::size_t skip) {
  double m = 0.0;
  for (std::size_t i = skip; i + skip < s.size(); ++i) m = std::max(m, std::abs(static_cast<double>(s[i])));
  return m;
}

// Instance with the given rows; missing rows are zeros with a flag.
inline dni::Instance make_instance(const std::vector<std::vector<float>>& rows,
                                   const std::vector<std::uint8_t>& missing = {}) {
  const std::size_t k = rows.size(), len = rows.front().size();
  dni::Instance inst{dni::Tensor<float>({k, len}), missing.empty() ? std::vector<std::uint8_t>(k, 0) : missing, 5.0};
  for (std::size_t e = 0; e < k; ++e)
    if (!inst.missing[e]) std::copy(rows[e].begin(), rows[e].end(), inst.signal.row(e).begin());
  return inst;
}

}  // namespace testing
