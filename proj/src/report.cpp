#include "dni/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

namespace dni {

namespace fs = std::filesystem;

namespace {

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

std::string format_score_row(const ScoreRow& r) {
  return std::to_string(r.participant) + "," + r.method + "," + fmt4(r.regime) + "," + std::string(to_string(r.role)) +
         "," + fmt4(r.mean) + "," + fmt4(r.std) + "," + std::to_string(r.n);
}

double ScatterFrame::px(double x) const { return margin + (x - lo) / (hi - lo) * size; }
double ScatterFrame::py(double y) const { return margin + size - (y - lo) / (hi - lo) * size; }

std::string scatter_svg(const std::vector<ScatterPoint>& points, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel, bool diagonal, ScatterFrame* frame_out) {
  ScatterFrame f;
  if (!points.empty()) {
    double lo = points.front().x, hi = points.front().x;
    for (const auto& p : points) {
      lo = std::min({lo, p.x, p.y});
      hi = std::max({hi, p.x, p.y});
    }
    const double pad = std::max(0.05, 0.05 * (hi - lo));
    f.lo = std::max(-1.0, lo - pad);
    f.hi = std::min(1.0, hi + pad);
    if (f.hi <= f.lo) f.hi = f.lo + 0.1;
  }
  if (frame_out) *frame_out = f;
  const double total = f.size + 2 * f.margin;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt4(total) + "\" height=\"" + fmt4(total) + "\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + fmt4(total) + "\" height=\"" + fmt4(total) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + fmt4(total / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) +
       "</text>\n";
  s += "<rect x=\"" + fmt4(f.margin) + "\" y=\"" + fmt4(f.margin) + "\" width=\"" + fmt4(f.size) + "\" height=\"" +
       fmt4(f.size) + "\" fill=\"none\" stroke=\"black\"/>\n";
  if (diagonal)
    s += "<line class=\"diagonal\" x1=\"" + fmt4(f.px(f.lo)) + "\" y1=\"" + fmt4(f.py(f.lo)) + "\" x2=\"" +
         fmt4(f.px(f.hi)) + "\" y2=\"" + fmt4(f.py(f.hi)) + "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  s += "<text x=\"" + fmt4(f.margin) + "\" y=\"" + fmt4(f.margin + f.size + 16) + "\" font-size=\"11\">" +
       fmt4(f.lo) + "</text>\n";
  s += "<text x=\"" + fmt4(f.margin + f.size) + "\" y=\"" + fmt4(f.margin + f.size + 16) +
       "\" text-anchor=\"end\" font-size=\"11\">" + fmt4(f.hi) + "</text>\n";
  s += "<text x=\"" + fmt4(total / 2) + "\" y=\"" + fmt4(total - 8) + "\" text-anchor=\"middle\" font-size=\"12\">" +
       escape(xlabel) + "</text>\n";
  s += "<text x=\"14\" y=\"" + fmt4(total / 2) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
       fmt4(total / 2) + ")\">" + escape(ylabel) + "</text>\n";
  for (const auto& p : points)
    s += "<circle cx=\"" + fmt4(f.px(p.x)) + "\" cy=\"" + fmt4(f.py(p.y)) + "\" r=\"4\" fill=\"steelblue\"><title>" +
         escape(p.label) + "</title></circle>\n";
  s += "</svg>\n";
  return s;
}

std::vector<fs::path> emit_report(const EvalReport& report, const fs::path& out_dir, const std::string& baseline) {
  if (report.rows.empty()) throw std::invalid_argument("emit_report: empty report");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;

  std::string csv = std::string(kScoresHeader) + "\n";
  for (const auto& r : report.rows) csv += format_score_row(r) + "\n";
  write_file(out_dir / "scores.csv", csv);
  written.push_back(out_dir / "scores.csv");

  std::string ecsv = "participant,method,regime,electrode,role,time_corr,freq_corr,n\n";
  for (const auto& e : report.electrodes)
    ecsv += std::to_string(e.participant) + "," + e.method + "," + fmt4(e.regime) + "," + std::to_string(e.electrode) +
            "," + std::string(to_string(e.role)) + "," + fmt4(e.time_corr) + "," + fmt4(e.freq_corr) + "," +
            std::to_string(e.n) + "\n";
  write_file(out_dir / "electrodes.csv", ecsv);
  written.push_back(out_dir / "electrodes.csv");

  std::vector<std::string> methods;
  for (const auto& r : report.rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);

  for (const auto& m : methods) {
    if (m == baseline) continue;
    std::vector<ScatterPoint> pts;
    for (const auto& r : report.rows) {
      if (r.method != m) continue;
      if (const auto* b = report.find(r.participant, baseline, r.regime, r.role))
        pts.push_back({b->mean, r.mean,
                       "participant " + std::to_string(r.participant) + ", p=" + fmt4(r.regime) + ", " +
                           std::string(to_string(r.role))});
    }
    if (pts.empty()) continue;
    const auto path = out_dir / ("scatter_" + m + "_vs_" + baseline + ".svg");
    write_file(path, scatter_svg(pts, m + " vs " + baseline, baseline + " correlation", m + " correlation", true));
    written.push_back(path);
  }

  for (const auto& m : methods) {
    std::vector<ScatterPoint> pts;
    for (const auto& e : report.electrodes)
      if (e.method == m)
        pts.push_back({e.time_corr, e.freq_corr,
                       "participant " + std::to_string(e.participant) + ", electrode " + std::to_string(e.electrode)});
    if (pts.empty()) continue;
    const auto path = out_dir / ("frequency_vs_time_" + m + ".svg");
    write_file(path, scatter_svg(pts, m + ": frequency vs time correlation", "time-series correlation",
                                 "frequency correlation", false));
    written.push_back(path);
  }
  return written;
}

}  // namespace dni
