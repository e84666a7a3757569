#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dni/eval.hpp"

namespace dni {

inline constexpr const char* kScoresHeader = "participant,method,regime,role,mean,std,n";

std::string format_score_row(const ScoreRow& row);

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

struct ScatterFrame {
  double lo = -1.0;
  double hi = 1.0;
  double size = 420.0;
  double margin = 50.0;

  double px(double x) const;
  double py(double y) const;  // SVG y grows downwards
};

// Square scatter with shared axis range; `diagonal` draws y = x.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel, bool diagonal, ScatterFrame* frame_out = nullptr);

// scores.csv, electrodes.csv, one method-vs-baseline scatter per
// non-baseline method, one frequency-vs-time scatter per method. Returns the
// written paths in a stable order.
std::vector<std::filesystem::path> emit_report(const EvalReport& report, const std::filesystem::path& out_dir,
                                               const std::string& baseline = "baseline");

}  // namespace dni
