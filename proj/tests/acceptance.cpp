// Acceptance runner: one PASS/FAIL line per criterion. With arguments, only
// the listed criterion numbers run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "dni/decode.hpp"
#include "dni/eval.hpp"
#include "dni/linear_imputer.hpp"
#include "dni/masking.hpp"
#include "dni/models.hpp"
#include "dni/rng.hpp"
#include "dni/signal.hpp"
#include "dni/stats.hpp"
#include "dni/synth.hpp"
#include "dni/trainer.hpp"

namespace fs = std::filesystem;
using namespace dni;

namespace {

constexpr std::uint64_t kSeed = 2024;
const std::vector<double> kRegimes{0.10, 0.20, 0.50};
constexpr std::size_t kMaskSets = 3;
constexpr std::size_t kEpochs = 20;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- criterion 1 ---------------------------------------------------------

Outcome pipeline_shapes() {
  GeneratorConfig g;
  g.participants = 1;
  g.electrodes = 6;
  g.days = 1;
  g.day_length = 150'000;
  g.seed = derive_seed(kSeed, "shapes");
  auto part = generate_participant(g, 0);
  RaggedRecording rec;
  rec.add_participant(g.electrodes);
  rec.add_day(0, std::move(part.days[0]));

  const auto a = process_day(rec, 0, 0, PipelineConfig::procedure_a());
  const auto b = process_day(rec, 0, 0, PipelineConfig::procedure_b());
  bool ok = a.size() == 3 && b.size() == 75;
  for (const auto& i : a) ok = ok && i.electrodes() == 6 && i.length() == 400 && i.rate_hz == 5.0;
  for (const auto& i : b) ok = ok && i.electrodes() == 6 && i.length() == 1000 && i.rate_hz == 250.0;
  return {ok, "A: " + std::to_string(a.size()) + " x " + std::to_string(a.empty() ? 0 : a[0].length()) +
                  " steps @ 5 Hz, B: " + std::to_string(b.size()) + " x " +
                  std::to_string(b.empty() ? 0 : b[0].length()) + " steps @ 250 Hz"};
}

// ---- criterion 2 ---------------------------------------------------------

using Builder = std::function<Var(Tape<double>&)>;

Tensor<double> random_tensor(const Shape& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor<double> t(shape);
  for (auto& v : t.storage()) v = normal(rng);
  return t;
}

double forward_value(const Builder& build) {
  Tape<double> tape(false);
  return tape.value(build(tape))[0];
}

// Largest relative error between central differences and backprop over
// random coordinates; coordinates where both are ~0 are skipped.
double gradcheck(ParameterSet<double>& params, const Builder& build, std::size_t probes, std::uint64_t seed) {
  constexpr double h = 1e-4;
  params.zero_grad();
  {
    Tape<double> tape;
    tape.backward(build(tape));
  }
  std::mt19937_64 rng(seed);
  auto all = params.all();
  double worst = 0.0;
  for (std::size_t n = 0; n < probes; ++n) {
    auto* p = all[rng() % all.size()];
    const std::size_t i = rng() % p->value.size();
    const double saved = p->value[i];
    p->value[i] = saved + h;
    const double up = forward_value(build);
    p->value[i] = saved - h;
    const double down = forward_value(build);
    p->value[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double diff = std::abs(numeric - p->grad[i]);
    if (diff < 1e-9) continue;
    worst = std::max(worst, diff / std::max(std::abs(numeric), std::abs(p->grad[i])));
  }
  return worst;
}

Outcome gradient_checks() {
  std::mt19937_64 rng(derive_seed(kSeed, "gradcheck"));
  ParameterSet<double> ps;
  auto& a = ps.add("a", {2, 3, 12});
  auto& b = ps.add("b", {2, 3, 12});
  auto& w = ps.add("w", {4, 3, 3});
  auto& bias = ps.add("bias", {4});
  for (auto* p : ps.all()) p->value = random_tensor(p->value.shape(), rng);
  const auto target = random_tensor({2, 3, 12}, rng);
  const auto weights = random_tensor({2, 4, 12}, rng);

  auto probe = [&](Tape<double>& t, Var y) {
    Tensor<double> wt(t.value(y).shape());
    for (std::size_t i = 0; i < wt.size(); ++i) wt[i] = weights[i % weights.size()];
    return t.sum(t.mul(y, t.constant(wt)));
  };
  std::vector<std::pair<std::string, Builder>> cases{
      {"conv valid", [&](Tape<double>& t) { return probe(t, t.conv1d(t.param(a), t.param(w), t.param(bias), ConvSpec::valid(2))); }},
      {"conv strided", [&](Tape<double>& t) { return probe(t, t.conv1d(t.param(a), t.param(w), t.param(bias), ConvSpec::strided_same(3, 2))); }},
      {"conv causal", [&](Tape<double>& t) { return probe(t, t.conv1d(t.param(a), t.param(w), Var{}, ConvSpec::causal(3, 4))); }},
      {"add", [&](Tape<double>& t) { return probe(t, t.add(t.param(a), t.param(b))); }},
      {"sub", [&](Tape<double>& t) { return probe(t, t.sub(t.param(a), t.param(b))); }},
      {"mul", [&](Tape<double>& t) { return probe(t, t.mul(t.param(a), t.param(b))); }},
      {"scale", [&](Tape<double>& t) { return probe(t, t.scale(t.param(a), 0.7)); }},
      {"relu", [&](Tape<double>& t) { return probe(t, t.relu(t.param(a))); }},
      {"tanh", [&](Tape<double>& t) { return probe(t, t.tanh(t.param(a))); }},
      {"sigmoid", [&](Tape<double>& t) { return probe(t, t.sigmoid(t.param(a))); }},
      {"upsample", [&](Tape<double>& t) { return probe(t, t.upsample_repeat(t.param(a), 3)); }},
      {"concat", [&](Tape<double>& t) { return probe(t, t.concat_channels(t.param(a), t.param(b))); }},
      {"slice", [&](Tape<double>& t) { return probe(t, t.slice_channels(t.param(a), 1, 2)); }},
      {"mean", [&](Tape<double>& t) { return t.mean(t.mul(t.param(a), t.param(b))); }},
      {"gaussian_nll", [&](Tape<double>& t) { return t.gaussian_nll(target, t.param(a), t.param(b), {1, 0, 1, 1, 1, 0}); }},
      {"slowness", [&](Tape<double>& t) { return t.slowness(t.param(a)); }},
      {"margin", [&](Tape<double>& t) { return t.margin_penalty(t.param(a), 1.0); }},
  };

  double worst = 0.0;
  std::string worst_name;
  std::uint64_t probe_seed = 1;
  auto note = [&](const std::string& name, double err) {
    if (err >= worst) {
      worst = err;
      worst_name = name;
    }
  };
  for (const auto& [name, build] : cases) note(name, gradcheck(ps, build, 100, probe_seed++));

  // Composed encoder/decoder stacks in double precision.
  CnnaeConfig cfg;
  cfg.units = 8;
  cfg.z_dim = 4;
  cfg.shared_width = 6;
  const std::size_t k = 3, len = 32;
  const auto x = random_tensor({2, 2 * k, len}, rng);
  const auto sig_target = random_tensor({2, k, len}, rng);
  const auto der_target = random_tensor({2, k, len}, rng, 0.5);
  const std::vector<std::uint8_t> include{1, 1, 0, 1, 0, 1};
  auto loss = [&](Tape<double>& t, const HeadVars<double>& h) {
    return t.add(t.gaussian_nll(sig_target, h.mean, h.raw_var, include),
                 t.gaussian_nll(der_target, h.deriv_mean, h.deriv_raw_var, include));
  };
  Cnnae<double> cnnae(k, cfg, 17);
  note("cnnae stack", gradcheck(cnnae.parameters(), [&](Tape<double>& t) { return loss(t, cnnae.forward(t, t.constant(x))); },
                                100, probe_seed++));
  Mcnnae<double> mc(cfg, 19);
  mc.register_participant(0, k);
  mc.register_participant(1, 5);
  note("mcnnae stack", gradcheck(mc.parameters(), [&](Tape<double>& t) { return loss(t, mc.forward(t, 0, t.constant(x))); },
                                 100, probe_seed++));

  return {worst < 1e-4, std::to_string(cases.size()) + " primitives + 2 model stacks, 100 probes each, max rel error " +
                            fmt("%.2e", worst) + " (" + worst_name + ")"};
}

// ---- shared synthetic benchmark (criteria 3-6, 8) --------------------------

struct BenchParticipant {
  std::vector<Instance> train, test;
  NeighborTable table;
  double oracle = 0.0;
  std::map<double, std::vector<MaskPlan>> plans;
};

struct Bench {
  std::vector<BenchParticipant> parts;
  std::map<std::string, EvalReport> reports;  // by method
  std::map<ParticipantId, std::shared_ptr<Cnnae<float>>> cnnae;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Bench& bench() {
  static std::optional<Bench> b;
  if (b) return *b;
  b.emplace();
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig g;  // 4 participants x 32 electrodes x 3 days
  g.day_length = 2'000'000;  // 40 Procedure A instances per day
  g.length_scale_mm = 15.0;  // mean oracle bound close to 0.9 for this seed
  g.seed = derive_seed(kSeed, "bench");
  const auto pipe = PipelineConfig::procedure_a();
  const auto transform = [&](std::span<const float> s) { return procedure_a_series(s, pipe); };

  for (ParticipantId p = 0; p < g.participants; ++p) {
    auto part = generate_participant(g, p);
    BenchParticipant bp;
    bp.table = neighbor_table(part.geometry);

    SynthGroundTruth truth;
    truth.config = g;
    truth.participants.resize(p + 1);
    truth.participants[p] = std::move(part.truth);
    const DayId test_day = static_cast<DayId>(g.days - 1);
    for (ElectrodeId e = 0; e < g.electrodes; ++e)
      bp.oracle += oracle_linear_bound(truth, p, test_day, e, bp.table[e], transform);
    bp.oracle /= static_cast<double>(g.electrodes);

    RaggedRecording rec;
    for (ParticipantId q = 0; q <= p; ++q) rec.add_participant(g.electrodes);
    for (auto& day : part.days) rec.add_day(p, std::move(day));
    for (DayId d = 0; d < g.days; ++d) {
      auto v = process_day(rec, p, d, pipe);
      auto& dst = d == test_day ? bp.test : bp.train;
      std::move(v.begin(), v.end(), std::back_inserter(dst));
    }
    const auto avail = availability(rec, p, test_day);
    for (double r : kRegimes)
      bp.plans[r] = make_mask_plan(avail, p, test_day, r, kMaskSets,
                                   derive_seed(derive_seed(kSeed, "masks"), {p, static_cast<std::uint64_t>(r * 100)}));
    spdlog::info("bench participant {}: {} train / {} test instances, oracle {:.4f} ({:.0f} s)", p, bp.train.size(),
                 bp.test.size(), bp.oracle, seconds_since(t0));
    b->parts.push_back(std::move(bp));
  }
  return *b;
}

EvalReport evaluate_all(Imputer& imputer) {
  auto& b = bench();
  EvalOptions eo;
  eo.spectrum = SpectrumConfig::for_rate(5.0);
  EvalReport out;
  for (ParticipantId p = 0; p < b.parts.size(); ++p)
    for (double r : kRegimes) out.append(evaluate_model(imputer, p, b.parts[p].test, b.parts[p].plans.at(r), eo));
  return out;
}

const EvalReport& report_for(const std::string& method) {
  auto& b = bench();
  if (auto it = b.reports.find(method); it != b.reports.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();

  if (method == "zero") {
    ZeroImputer zero;
    b.reports[method] = evaluate_all(zero);
  } else if (method == "baseline") {
    LinearImputer lin;
    for (ParticipantId p = 0; p < b.parts.size(); ++p) lin.set_weights(fit_weights(b.parts[p].train, b.parts[p].table, p));
    b.reports[method] = evaluate_all(lin);
  } else if (method == "cnnae") {
    CnnaeImputer imp;
    for (ParticipantId p = 0; p < b.parts.size(); ++p) {
      auto model = std::make_shared<Cnnae<float>>(32, CnnaeConfig{}, derive_seed(derive_seed(kSeed, "init.cnnae"), {p}));
      TrainConfig tc = TrainConfig::cnnae();
      tc.epochs = kEpochs;
      tc.seed = derive_seed(derive_seed(kSeed, "train.cnnae"), {p});
      const auto res = train_cnnae(*model, b.parts[p].train, tc);
      spdlog::info("cnnae participant {}: final loss {:.4f} ({:.0f} s)", p, res.loss_curve.back(), seconds_since(t0));
      imp.set_model(p, model);
    }
    b.reports[method] = evaluate_all(imp);
  } else if (method == "mcnnae") {
    auto model = std::make_shared<Mcnnae<float>>(CnnaeConfig{}, derive_seed(kSeed, "init.mcnnae"));
    std::map<ParticipantId, std::vector<Instance>> train;
    for (ParticipantId p = 0; p < b.parts.size(); ++p) train[p] = b.parts[p].train;
    TrainConfig tc = TrainConfig::mcnnae();
    tc.epochs = kEpochs;
    tc.seed = derive_seed(kSeed, "train.mcnnae");
    const auto res = train_mcnnae(*model, train, tc);
    spdlog::info("mcnnae: final loss {:.4f} ({:.0f} s)", res.loss_curve.back(), seconds_since(t0));
    McnnaeImputer imp(model);
    b.reports[method] = evaluate_all(imp);
  }
  return b.reports.at(method);
}

double imputation_mean(const EvalReport& r, const std::string& method, ParticipantId p, double regime) {
  const auto* row = r.find(p, method, regime, OutputLabel::imputation);
  if (!row) throw std::runtime_error("missing score row for " + method);
  return row->mean;
}

// ---- criteria 3-6, 8 -------------------------------------------------------

Outcome baseline_oracle_gap() {
  auto& b = bench();
  const auto& r = report_for("baseline");
  double oracle = 0.0, at10 = 0.0, at50 = 0.0;
  std::string per;
  for (ParticipantId p = 0; p < b.parts.size(); ++p) {
    oracle += b.parts[p].oracle;
    at10 += imputation_mean(r, "baseline", p, 0.10);
    at50 += imputation_mean(r, "baseline", p, 0.50);
    per += " p" + std::to_string(p) + "=" + fmt("%.3f", imputation_mean(r, "baseline", p, 0.10)) + "/" +
           fmt("%.3f", imputation_mean(r, "baseline", p, 0.50));
  }
  const double n = static_cast<double>(b.parts.size());
  oracle /= n;
  at10 /= n;
  at50 /= n;
  return {at10 >= oracle - 0.10 && at50 < at10, "oracle " + fmt("%.4f", oracle) + ", baseline p=0.10 " +
                                                    fmt("%.4f", at10) + ", p=0.50 " + fmt("%.4f", at50) + " (" +
                                                    per.substr(1) + ")"};
}

Outcome cnnae_vs_baseline() {
  auto& b = bench();
  const auto& base = report_for("baseline");
  const auto& cnn = report_for("cnnae");
  std::size_t wins = 0;
  std::string per;
  for (ParticipantId p = 0; p < b.parts.size(); ++p) {
    const double c = imputation_mean(cnn, "cnnae", p, 0.50), l = imputation_mean(base, "baseline", p, 0.50);
    wins += c >= l;
    per += " p" + std::to_string(p) + " " + fmt("%.3f", c) + " vs " + fmt("%.3f", l);
  }
  return {wins >= 3, "CNNAE >= baseline at p=0.50 on " + std::to_string(wins) + "/" + std::to_string(b.parts.size()) +
                         " participants:" + per};
}

Outcome mcnnae_parity() {
  auto& b = bench();
  const auto& cnn = report_for("cnnae");
  const auto& mc = report_for("mcnnae");
  double sc = 0.0, sm = 0.0;
  std::size_t n = 0;
  std::string per;
  for (double r : kRegimes) {
    double rc = 0.0, rm = 0.0;
    for (ParticipantId p = 0; p < b.parts.size(); ++p) {
      rc += imputation_mean(cnn, "cnnae", p, r);
      rm += imputation_mean(mc, "mcnnae", p, r);
    }
    sc += rc;
    sm += rm;
    n += b.parts.size();
    per += " p=" + fmt("%.2f", r) + " " + fmt("%.3f", rm / b.parts.size()) + " vs " + fmt("%.3f", rc / b.parts.size());
  }
  const double gap = std::abs(sm / n - sc / n);
  return {gap <= 0.05, "M-CNNAE " + fmt("%.4f", sm / n) + " vs CNNAE " + fmt("%.4f", sc / n) + ", gap " +
                           fmt("%.4f", gap) + ";" + per};
}

Outcome frequency_property() {
  const auto& cnn = report_for("cnnae");
  std::vector<double> time_corr, freq_corr;
  for (const auto& e : cnn.electrodes)
    if (e.role == OutputLabel::imputation) {
      time_corr.push_back(e.time_corr);
      freq_corr.push_back(e.freq_corr);
    }
  const auto rho = spearman(time_corr, freq_corr);
  return {!rho.degenerate && rho.value > 0.3, "Spearman(time, frequency) over " + std::to_string(time_corr.size()) +
                                                  " imputed electrode scores = " + fmt("%.4f", rho.value)};
}

Outcome zero_fill_reference() {
  const auto& z = report_for("zero");
  std::size_t n = 0, nonzero = 0;
  for (const auto& e : z.electrodes)
    if (e.role == OutputLabel::imputation) {
      ++n;
      nonzero += e.time_corr != 0.0;
    }
  for (const auto& r : z.rows)
    if (r.role == OutputLabel::imputation) nonzero += r.mean != 0.0 || r.std != 0.0;
  return {n > 0 && nonzero == 0, std::to_string(n) + " masked electrode scores, " + std::to_string(nonzero) + " nonzero"};
}

// ---- criterion 7 ---------------------------------------------------------

Outcome decoding_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  GeneratorConfig g;
  g.day_length = 120 * 2000;  // 120 events of 4 s per day
  g.seed = derive_seed(kSeed, "decode.generate");
  // A weak, spatially broad high-gamma burst: no single electrode carries it
  // reliably, pooled neighbors do.
  ClassSignalConfig cs;
  cs.amplitude = 0.06;
  cs.band_low_hz = 60.0;
  cs.band_high_hz = 90.0;
  cs.center = 11;
  cs.footprint_mm = 40.0;
  cs.seed = derive_seed(kSeed, "decode.class_signal");
  const auto pipe = PipelineConfig::procedure_b();

  DecodingTable table;
  double drop = 0.0;
  for (ParticipantId p = 0; p < g.participants; ++p) {
    auto part = generate_participant(g, p);
    std::vector<std::vector<std::uint8_t>> labels;
    for (DayId d = 0; d < g.days; ++d) {
      const auto sched = balanced_schedule(g.day_length, pipe.trim_length * pipe.decimation,
                                           derive_seed(derive_seed(kSeed, "decode.schedule"), {p, d}));
      labels.push_back(inject_class_signal(part.days[d], part.geometry, sched, cs));
    }
    RaggedRecording rec;
    rec.add_participant(g.electrodes);
    for (auto& day : part.days) rec.add_day(0, std::move(day));
    std::vector<Instance> train;
    std::vector<LabeledEvent> events;
    for (DayId d = 0; d < g.days; ++d) {
      auto v = process_day(rec, 0, d, pipe);
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (d + 1 < g.days)
          train.push_back(std::move(v[i]));
        else
          events.push_back({std::move(v[i]), labels[d].at(i)});
      }
    }

    CnnaeConfig mc;
    mc.units = 64;
    mc.z_dim = 16;
    auto model = std::make_shared<Cnnae<float>>(g.electrodes, mc, derive_seed(derive_seed(kSeed, "decode.init"), {p}));
    TrainConfig tc = TrainConfig::cnnae();
    tc.epochs = kEpochs;
    tc.seed = derive_seed(derive_seed(kSeed, "decode.train"), {p});
    train_cnnae(*model, train, tc);
    CnnaeImputer imp;
    imp.set_model(p, model);

    DecodeConfig dc;
    dc.seed = derive_seed(derive_seed(kSeed, "decode.split"), {p});
    const auto t = run_missingness_experiment(p, events, imp, dc);
    for (const auto& c : t.cells) {
      spdlog::info("decode participant {} pct {:.2f}: full {:.3f} zero {:.3f} cnnae {:.3f} ({:.0f} s)", p, c.pct,
                   c.full_mean, c.zero_mean, c.imputer_mean, seconds_since(t0));
      if (std::abs(c.pct - 0.9) < 1e-9) drop += c.full_mean - c.zero_mean;
    }
    table.append(t);
  }
  drop /= static_cast<double>(g.participants);
  const double wins = table.imputer_win_fraction();
  const auto won = static_cast<std::size_t>(std::lround(wins * static_cast<double>(table.cells.size())));
  return {drop >= 0.10 && wins >= 0.9, "(a) mean full - zero accuracy at 90% = " + fmt("%.3f", drop) +
                                           "; (b) CNNAE >= zero fill in " + std::to_string(won) + "/" +
                                           std::to_string(table.cells.size()) + " cells (" +
                                           fmt("%.1f", 100.0 * wins) + "%)"};
}

// ---- criterion 9 ---------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool run_cli(const std::vector<std::string>& args) {
  std::string cmd = std::string("\"") + DNI_CLI + "\"";
  for (const auto& a : args) cmd += " \"" + a + "\"";
  cmd += " > /dev/null 2>&1";
  return std::system(cmd.c_str()) == 0;
}

bool full_cli_run(const fs::path& dir, bool decode) {
  const std::string out = dir.string();
  const std::string config = std::string(DNI_CONFIG_DIR) + (decode ? "/decode_tiny.json" : "/tiny.json");
  std::vector<std::vector<std::string>> steps{{"generate", "--config", config, "--out", out},
                                              {"preprocess", "--out", out},
                                              {"train", "--model", "cnnae", "--epochs", "3", "--out", out}};
  if (decode) {
    steps.push_back({"decode", "--model", "cnnae", "--out", out});
  } else {
    steps.push_back({"train", "--model", "baseline", "--out", out});
    steps.push_back({"train", "--model", "mcnnae", "--epochs", "3", "--out", out});
    for (const char* m : {"zero", "baseline", "cnnae", "mcnnae"}) steps.push_back({"evaluate", "--model", m, "--out", out});
    steps.push_back({"impute", "--model", "mcnnae", "--regime", "0.25", "--out", out});
    steps.push_back({"report", "--out", out});
  }
  for (const auto& s : steps)
    if (!run_cli(s)) return false;
  return true;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "dni_acceptance_determinism";
  fs::remove_all(root);
  std::size_t compared = 0, csv = 0, ckpt = 0;
  std::vector<std::string> mismatched;
  for (bool decode : {false, true}) {
    const fs::path a = root / (decode ? "decode_a" : "eval_a"), b = root / (decode ? "decode_b" : "eval_b");
    if (!full_cli_run(a, decode) || !full_cli_run(b, decode)) return {false, "CLI run failed"};
    std::set<std::string> files_a, files_b;
    for (const auto& e : fs::recursive_directory_iterator(a))
      if (e.is_regular_file()) files_a.insert(fs::relative(e.path(), a).generic_string());
    for (const auto& e : fs::recursive_directory_iterator(b))
      if (e.is_regular_file()) files_b.insert(fs::relative(e.path(), b).generic_string());
    if (files_a != files_b) return {false, "runs wrote different file sets"};
    for (const auto& f : files_a) {
      ++compared;
      csv += f.ends_with(".csv");
      ckpt += f.find("models/") == 0 && f.ends_with(".bin");
      if (slurp(a / f) != slurp(b / f)) mismatched.push_back(f);
    }
  }
  fs::remove_all(root);
  std::string detail = std::to_string(compared) + " files compared (" + std::to_string(csv) + " CSV, " +
                       std::to_string(ckpt) + " checkpoints), " + std::to_string(mismatched.size()) + " differ";
  if (!mismatched.empty()) detail += ", first: " + mismatched.front();
  return {mismatched.empty() && csv > 0 && ckpt > 0, detail};
}

// ---- criterion 10 --------------------------------------------------------

Outcome pearson_suite() {
  std::mt19937_64 rng(derive_seed(kSeed, "pearson"));
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> len(2, 300);
  std::size_t checks = 0, failures = 0;
  auto check = [&](bool ok) {
    ++checks;
    failures += !ok;
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    std::vector<float> a(n), b(n), c(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<float>(normal(rng));
      b[i] = static_cast<float>(0.5 * a[i] + normal(rng));
    }
    const auto ab = pearson(a, b), ba = pearson(b, a);
    check(ab.value == ba.value);
    check(ab.value >= -1.0 && ab.value <= 1.0 && !ab.degenerate);

    double scale = 0.0;
    while (std::abs(scale) < 1e-2) scale = 10.0 * normal(rng);
    const double shift = 100.0 * normal(rng);
    for (std::size_t i = 0; i < n; ++i) c[i] = static_cast<float>(scale * a[i] + shift);
    // Float rounding of c limits agreement to about 1e-6 for large shifts.
    check(std::abs(pearson(a, c).value - (scale > 0 ? 1.0 : -1.0)) < 1e-4);

    const std::vector<float> flat(n, static_cast<float>(shift));
    const auto z = pearson(a, flat);
    check(z.degenerate && z.value == 0.0);
    check(pearson(flat, a).degenerate);
  }
  bool threw = false;
  try {
    const std::vector<float> x{1.0f, 2.0f}, y{1.0f};
    pearson(x, y);
  } catch (const std::invalid_argument&) {
    threw = true;
  }
  check(threw);
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) +
                             " property checks (symmetry, bounds, affine invariance, zero variance, length mismatch)"};
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_pattern("[%H:%M:%S] %v");
  const std::vector<std::pair<int, std::pair<std::string, std::function<Outcome()>>>> criteria{
      {1, {"pipeline shapes", pipeline_shapes}},
      {2, {"autodiff gradient checks", gradient_checks}},
      {3, {"baseline oracle gap", baseline_oracle_gap}},
      {4, {"CNNAE vs baseline at p=0.50", cnnae_vs_baseline}},
      {5, {"M-CNNAE parity", mcnnae_parity}},
      {6, {"frequency property", frequency_property}},
      {7, {"decoding recovery", decoding_recovery}},
      {8, {"zero-fill reference", zero_fill_reference}},
      {9, {"determinism", determinism}},
      {10, {"Pearson property suite", pearson_suite}},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto& [name, run] = entry;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d: %s  %s: %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
