#pragma once

#include <span>
#include <vector>

namespace dni {

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // a zero-variance input; value is 0
};

// Product-moment correlation; throws std::invalid_argument unless the inputs
// have equal length >= 2.
Correlation pearson(std::span<const float> a, std::span<const float> b);
Correlation pearson(std::span<const double> a, std::span<const double> b);

// Ranks starting at 1; ties get their average rank.
std::vector<double> average_ranks(std::span<const double> values);
Correlation spearman(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> values);
// Population standard deviation.
double stddev(std::span<const double> values);

}  // namespace dni
