#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dni/eval.hpp"
#include "dni/linear_imputer.hpp"
#include "dni/masking.hpp"
#include "dni/report.hpp"
#include "dni/signal.hpp"
#include "dni/synth.hpp"
#include "helpers.hpp"

using namespace dni;

namespace {

// Cheating imputer that returns the held-back ground truth.
class CopyImputer final : public Imputer {
 public:
  explicit CopyImputer(std::span<const Instance> truth) : truth_(truth) {}
  std::string name() const override { return "copy"; }
  std::vector<Tensor<float>> impute(ParticipantId, std::span<const MaskedInstance> inputs) override {
    std::vector<Tensor<float>> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) out.push_back(truth_[next_++ % truth_.size()].signal);
    return out;
  }

 private:
  std::span<const Instance> truth_;
  std::size_t next_ = 0;
};

std::vector<Instance> noise_instances(std::size_t n, std::size_t k, std::size_t len, std::uint64_t seed,
                                      std::vector<std::uint8_t> missing = {}) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<float>> rows;
    for (std::size_t e = 0; e < k; ++e) rows.push_back(testing::gaussian(len, seed * 1000 + i * 100 + e));
    out.push_back(testing::make_instance(rows, missing));
  }
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SynthFixture {
  std::vector<Instance> train, test;
  std::vector<Position> geometry;
  AvailabilitySets avail;

  SynthFixture() {
    GeneratorConfig g;
    g.participants = 1;
    g.day_length = 1'000'000;
    g.seed = 5;
    auto part = generate_participant(g, 0);
    RaggedRecording rec;
    const auto p = rec.add_participant(g.electrodes);
    for (auto& d : part.days) rec.add_day(p, d);
    const auto cfg = PipelineConfig::procedure_a();
    for (DayId d = 0; d < 2; ++d) {
      auto v = process_day(rec, 0, d, cfg);
      train.insert(train.end(), v.begin(), v.end());
    }
    test = process_day(rec, 0, 2, cfg);
    geometry = part.geometry;
    avail = availability(rec, 0, 2);
  }
};

}  // namespace

TEST_SUITE("eval-suite") {
  TEST_CASE("spectrum peak of a bin-centred sine") {
    const SpectrumConfig cfg;  // 64-sample window
    for (std::size_t k : {3u, 10u, 21u}) {
      const auto s = testing::sine(400, static_cast<double>(k), 64.0);
      const auto p = power_spectrum(s, cfg);
      REQUIRE(p.size() == 33);
      CHECK(static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin()) == k);
      CHECK(bin_frequency(k, cfg, 64.0) == doctest::Approx(static_cast<double>(k)));
    }
  }

  TEST_CASE("spectrum total power matches the mean square of white noise") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto s = testing::gaussian(20000, seed, 1.7);
      double ms = 0.0;
      for (float v : s) ms += static_cast<double>(v) * v;
      ms /= static_cast<double>(s.size());
      const auto p = power_spectrum(s, SpectrumConfig{});
      double total = 0.0;
      for (double v : p) total += v;
      CHECK(std::abs(total / ms - 1.0) < 0.05);
    }
  }

  TEST_CASE("spectrum of zeros is zero and windows longer than the series are rejected") {
    const std::vector<float> zeros(128, 0.0f);
    for (double v : power_spectrum(zeros, SpectrumConfig{})) CHECK(v == 0.0);
    CHECK_THROWS_AS(power_spectrum(std::span<const float>(zeros).first(32), SpectrumConfig{}), std::invalid_argument);
    CHECK(SpectrumConfig::for_rate(5.0).window == 64);
    CHECK(SpectrumConfig::for_rate(250.0).window == 256);
    SpectrumConfig bad;
    bad.overlap = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }

  TEST_CASE("median averaging is robust to one corrupted segment") {
    auto s = testing::sine(64 * 9, 8.0, 64.0);
    for (std::size_t i = 0; i < 64; ++i) s[i] += 50.0f * std::sin(2.0 * M_PI * 20.0 * i / 64.0);
    SpectrumConfig med;
    med.averaging = SpectrumAveraging::median;
    const auto pm = power_spectrum(s, med), pa = power_spectrum(s, SpectrumConfig{});
    CHECK(pm[20] < 1e-3 * pa[20]);
    CHECK(pm[8] == doctest::Approx(pa[8]).epsilon(0.3));
  }

  TEST_CASE("frequency correlation is invariant to scaling") {
    const auto s = testing::gaussian(400, 8);
    std::vector<float> twice(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) twice[i] = 2.0f * s[i];
    CHECK(frequency_correlation(s, s, SpectrumConfig{}).value == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(frequency_correlation(s, twice, SpectrumConfig{}).value == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("frequency correlation of a two-band pair against its estimate without the high band") {
    // Independent Welch evaluation of these float32 series. The analytic
    // value with exact zeros outside the bands is 0.6708294222809101; float
    // rounding leaves ~1e-18 leakage above the log floor, which moves it.
    std::vector<float> both(400), low(400);
    for (std::size_t n = 0; n < 400; ++n) {
      const double a = std::sin(2.0 * M_PI * 5.0 / 64.0 * n), b = std::sin(2.0 * M_PI * 20.0 / 64.0 * n);
      both[n] = static_cast<float>(a + b);
      low[n] = static_cast<float>(a);
    }
    CHECK(frequency_correlation(both, low, SpectrumConfig{}).value ==
          doctest::Approx(0.6853338128448614).epsilon(1e-6));
    const auto p = power_spectrum(both, SpectrumConfig{});
    CHECK(p[5] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(p[4] == doctest::Approx(1.0 / 12.0).epsilon(1e-6));
    CHECK(p[21] == doctest::Approx(1.0 / 12.0).epsilon(1e-6));
  }

  TEST_CASE("zero fill scores exactly zero on every masked electrode") {
    const auto test = noise_instances(5, 8, 64, 1);
    const auto plans = make_mask_plan(availability_from_flags(test[0].missing), 0, 0, 0.5, 3, 7);
    ZeroImputer zero;
    const auto report = evaluate_model(zero, 0, test, plans);
    const auto* row = report.find(0, "zero", 0.5, OutputLabel::imputation);
    REQUIRE(row);
    CHECK(row->mean == 0.0);
    CHECK(row->std == 0.0);
    CHECK(row->n == 5 * 4 * 3);
    for (const auto& e : report.electrodes)
      if (e.role == OutputLabel::imputation) CHECK(e.time_corr == 0.0);
  }

  TEST_CASE("a perfect copy scores one") {
    const auto test = noise_instances(4, 6, 64, 2);
    const auto plans = make_mask_plan(availability_from_flags(test[0].missing), 0, 0, 0.5, 1, 7);
    CopyImputer copy(test);
    const auto report = evaluate_model(copy, 0, test, plans);
    CHECK(report.find(0, "copy", 0.5, OutputLabel::imputation)->mean == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(report.find(0, "copy", 0.5, OutputLabel::reconstruction)->mean == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("p = 0 produces no imputation rows and naturally-missing rows are skipped") {
    std::vector<std::uint8_t> missing(6, 0);
    missing[4] = 1;
    const auto test = noise_instances(3, 6, 64, 3, missing);
    const auto plans = make_mask_plan(availability_from_flags(missing), 0, 0, 0.0, 2, 1);
    CopyImputer copy(test);
    const auto report = evaluate_model(copy, 0, test, plans);
    CHECK(report.find(0, "copy", 0.0, OutputLabel::imputation) == nullptr);
    const auto* recon = report.find(0, "copy", 0.0, OutputLabel::reconstruction);
    REQUIRE(recon);
    CHECK(recon->n == 3 * 5 * 2);
    for (const auto& e : report.electrodes) {
      CHECK(e.role == OutputLabel::reconstruction);
      CHECK(e.electrode != 4);
    }
  }

  TEST_CASE("evaluate_model rejects mixed regimes and empty inputs") {
    const auto test = noise_instances(2, 4, 64, 4);
    const auto avail = availability_from_flags(test[0].missing);
    auto plans = make_mask_plan(avail, 0, 0, 0.5, 1, 1);
    const auto other = make_mask_plan(avail, 0, 0, 0.25, 1, 1);
    plans.push_back(other.front());
    ZeroImputer zero;
    CHECK_THROWS_AS(evaluate_model(zero, 0, test, plans), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_model(zero, 0, test, std::vector<MaskPlan>{}), std::invalid_argument);
    CHECK_THROWS_AS(evaluate_model(zero, 0, std::vector<Instance>{}, other), std::invalid_argument);
  }

  TEST_CASE("aggregated means lie within their per-electrode constituents") {
    SynthFixture fx;
    LinearImputer baseline;
    baseline.set_weights(fit_weights(fx.train, neighbor_table(fx.geometry), 0));
    for (double p : {0.1, 0.5}) {
      const auto plans = make_mask_plan(fx.avail, 0, 2, p, 3, 11);
      const auto report = evaluate_model(baseline, 0, fx.test, plans);
      for (const auto& row : report.rows) {
        double lo = 1.0, hi = -1.0;
        for (const auto& e : report.electrodes)
          if (e.role == row.role) {
            lo = std::min(lo, e.time_corr);
            hi = std::max(hi, e.time_corr);
          }
        CHECK(row.mean >= lo - 1e-12);
        CHECK(row.mean <= hi + 1e-12);
        CHECK(row.std >= 0.0);
      }
    }
  }

  TEST_CASE("baseline degrades from 10% to 50% missing on synthetic data") {
    SynthFixture fx;
    LinearImputer baseline;
    baseline.set_weights(fit_weights(fx.train, neighbor_table(fx.geometry), 0));
    auto score = [&](double p) {
      const auto plans = make_mask_plan(fx.avail, 0, 2, p, 3, 21);
      return evaluate_model(baseline, 0, fx.test, plans).find(0, "baseline", p, OutputLabel::imputation)->mean;
    };
    const double s10 = score(0.1), s50 = score(0.5);
    CHECK(s50 < s10);
    CHECK(s10 > 0.5);
  }

  TEST_CASE("report CSV formatting and determinism") {
    ScoreRow r{3, "cnnae", 0.5, OutputLabel::imputation, 0.123456, 0.01, 42};
    CHECK(format_score_row(r) == "3,cnnae,0.5000,imputation,0.1235,0.0100,42");

    EvalReport report;
    report.rows.push_back({0, "baseline", 0.1, OutputLabel::imputation, 0.6, 0.1, 10});
    report.rows.push_back({0, "cnnae", 0.1, OutputLabel::imputation, 0.7, 0.1, 10});
    report.rows.push_back({1, "baseline", 0.1, OutputLabel::imputation, 0.5, 0.1, 10});
    report.rows.push_back({1, "cnnae", 0.1, OutputLabel::imputation, 0.4, 0.1, 10});
    report.electrodes.push_back({0, "cnnae", 0.1, 2, OutputLabel::imputation, 0.7, 0.6, 5});
    const auto root = std::filesystem::temp_directory_path() / "dni_test_report";
    std::filesystem::remove_all(root);
    const auto a = emit_report(report, root / "a"), b = emit_report(report, root / "b");
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(slurp(a[i]) == slurp(b[i]));
    CHECK(slurp(root / "a" / "scores.csv") ==
          "participant,method,regime,role,mean,std,n\n"
          "0,baseline,0.1000,imputation,0.6000,0.1000,10\n"
          "0,cnnae,0.1000,imputation,0.7000,0.1000,10\n"
          "1,baseline,0.1000,imputation,0.5000,0.1000,10\n"
          "1,cnnae,0.1000,imputation,0.4000,0.1000,10\n");
    CHECK(std::filesystem::exists(root / "a" / "scatter_cnnae_vs_baseline.svg"));
    CHECK(std::filesystem::exists(root / "a" / "frequency_vs_time_cnnae.svg"));
    CHECK(slurp(root / "a" / "scatter_cnnae_vs_baseline.svg").find("class=\"diagonal\"") != std::string::npos);
    CHECK_THROWS_AS(emit_report(EvalReport{}, root / "c"), std::invalid_argument);
    std::filesystem::remove_all(root);
  }

  TEST_CASE("scatter points sit above the diagonal exactly when the method wins") {
    const std::vector<ScatterPoint> pts{{0.2, 0.5, "a"}, {0.6, 0.3, "b"}, {0.4, 0.4, "c"}, {-0.1, 0.0, "d"}};
    ScatterFrame f;
    const auto svg = scatter_svg(pts, "t", "x", "y", true, &f);
    for (const auto& p : pts) {
      // On the diagonal the point would be at (px(x), py(x)); smaller SVG y is higher.
      const bool above = f.py(p.y) < f.py(p.x) - 1e-9;
      CHECK(above == (p.y > p.x));
      char cy[32];
      std::snprintf(cy, sizeof cy, "cy=\"%.4f\"", f.py(p.y));
      CHECK(svg.find(cy) != std::string::npos);
    }
  }
}
