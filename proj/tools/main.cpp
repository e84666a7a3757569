#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "dni/checkpoint.hpp"
#include "dni/decode.hpp"
#include "dni/eval.hpp"
#include "dni/linear_imputer.hpp"
#include "dni/masking.hpp"
#include "dni/models.hpp"
#include "dni/report.hpp"
#include "dni/rng.hpp"
#include "dni/signal.hpp"
#include "dni/synth.hpp"
#include "dni/trainer.hpp"
#include "run_store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dni;
using dni::cli::RunStore;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string model = "cnnae";
  std::optional<double> regime;
  std::optional<std::size_t> mask_sets;
  std::optional<std::size_t> epochs;
};

std::string regime_tag(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

// Fills every block with defaults and replaces block seeds with ones derived
// from the global seed, so the stored config is exactly what ran.
json resolve_config(const json& raw, std::uint64_t seed) {
  auto block = [&](const char* name) { return raw.contains(name) ? raw.at(name) : json::object(); };
  json out;

  GeneratorConfig gen;
  from_json(block("generator"), gen);
  gen.seed = derive_seed(seed, "generate");
  gen.validate();
  out["generator"] = gen;

  PipelineConfig pipe = PipelineConfig::procedure_a(gen.rate_hz);
  from_json(block("pipeline"), pipe);
  pipe.validate();
  out["pipeline"] = pipe;

  if (raw.contains("class_signal")) {
    ClassSignalConfig cs;
    from_json(raw.at("class_signal"), cs);
    cs.seed = derive_seed(seed, "class_signal");
    json j = cs;
    j["window_samples"] = raw.at("class_signal").value("window_samples", pipe.trim_length * pipe.decimation);
    out["class_signal"] = j;
  }

  CnnaeConfig model;
  from_json(block("model"), model);
  out["model"] = model;

  const json tr = block("trainer");
  json flat = tr;
  flat.erase("cnnae");
  flat.erase("mcnnae");
  for (const char* kind : {"cnnae", "mcnnae"}) {
    TrainConfig tc = std::string(kind) == "cnnae" ? TrainConfig::cnnae() : TrainConfig::mcnnae();
    from_json(flat, tc);
    if (tr.contains(kind)) from_json(tr.at(kind), tc);
    tc.seed = derive_seed(seed, std::string("train.") + kind);
    tc.validate();
    out["trainer"][kind] = tc;
  }

  const json ev = block("evaluation");
  out["evaluation"] = {
      {"regimes", ev.value("regimes", std::vector<double>{0.0, 0.10, 0.20, 0.50})},
      {"mask_sets", ev.value("mask_sets", std::size_t{3})},
      {"neighbors", ev.value("neighbors", std::size_t{3})},
      {"spectrum", ev.contains("spectrum") ? ev.at("spectrum").get<SpectrumConfig>()
                                           : SpectrumConfig::for_rate(pipe.output_rate_hz())},
  };

  DecodeConfig dec;
  from_json(block("decoding"), dec);
  dec.seed = derive_seed(seed, "decode");
  out["decoding"] = dec;
  return out;
}

struct Context {
  Options opt;
  std::uint64_t seed = 0;
  json config;
  RunStore store;

  fs::path path(const fs::path& rel) const { return store.dir() / rel; }
};

Context open_run(const Options& opt) {
  RunStore store(opt.out);
  json raw = json::object();
  std::uint64_t seed = 0;
  if (!opt.config_path.empty()) {
    raw = read_json(opt.config_path);
    seed = raw.value("seed", std::uint64_t{0});
  } else if (store.exists()) {
    // Later stages may omit --config and reuse the pinned one.
    return Context{opt, opt.seed.value_or(store.doc().at("seed").get<std::uint64_t>()), store.doc().at("config"),
                   std::move(store)};
  }
  if (opt.seed) seed = *opt.seed;
  Context ctx{opt, seed, resolve_config(raw, seed), std::move(store)};
  return ctx;
}

void finish(Context& ctx, const std::string& stage, const json& params, const json& seeds,
            const std::vector<fs::path>& artifacts) {
  ctx.store.bind(ctx.seed, ctx.config);
  ctx.store.record(stage, params, seeds, artifacts);
  ctx.store.save();
  spdlog::info("{}: {} artifact(s) recorded in {}", stage, artifacts.size(), (ctx.store.dir() / "run.json").string());
}

void append_files(std::vector<fs::path>& out, const fs::path& dir) {
  const auto files = cli::files_under(dir);
  out.insert(out.end(), files.begin(), files.end());
}

// ---- data access ---------------------------------------------------------

struct Split {
  std::map<ParticipantId, std::vector<Instance>> train;
  std::map<ParticipantId, std::vector<Instance>> test;
  std::map<ParticipantId, DayId> test_day;
};

Split load_split(const Context& ctx) {
  if (!fs::exists(ctx.path("instances/instances.json")))
    throw std::runtime_error("no instances in " + ctx.store.dir().string() + "; run preprocess first");
  InstanceMap all = load_instances(ctx.path("instances"));
  Split s;
  for (const auto& [key, _] : all) s.test_day[key.first] = std::max(s.test_day[key.first], key.second);
  for (auto& [key, insts] : all) {
    auto& dst = key.second == s.test_day[key.first] ? s.test[key.first] : s.train[key.first];
    for (auto& inst : insts) dst.push_back(std::move(inst));
  }
  return s;
}

std::unique_ptr<Imputer> load_imputer(const Context& ctx, const std::string& model, const Split& split) {
  if (model == "zero") return std::make_unique<ZeroImputer>();
  if (model == "baseline") {
    auto imp = std::make_unique<LinearImputer>();
    for (const auto& [p, _] : split.test) {
      const auto file = ctx.path("models/baseline/p" + std::to_string(p) + ".json");
      if (!fs::exists(file)) throw std::runtime_error("missing " + file.string() + "; run train --model baseline");
      imp->set_weights(read_json(file).get<NeighborWeights>());
    }
    return imp;
  }
  if (model == "cnnae") {
    auto imp = std::make_unique<CnnaeImputer>();
    for (const auto& [p, _] : split.test) {
      const auto stem = ctx.path("models/cnnae/p" + std::to_string(p) + "/final");
      if (!fs::exists(checkpoint_bin(stem)))
        throw std::runtime_error("missing " + stem.string() + "; run train --model cnnae");
      imp->set_model(p, load_cnnae(stem));
    }
    return imp;
  }
  if (model == "mcnnae") {
    const auto stem = ctx.path("models/mcnnae/final");
    if (!fs::exists(checkpoint_bin(stem))) throw std::runtime_error("missing " + stem.string() + "; run train --model mcnnae");
    return std::make_unique<McnnaeImputer>(load_mcnnae(stem));
  }
  throw std::invalid_argument("unknown model " + model);
}

std::vector<MaskPlan> plans_for(const Context& ctx, ParticipantId p, DayId day, const Instance& sample, double regime,
                                std::size_t sets) {
  const std::uint64_t base = derive_seed(ctx.seed, "masks");
  const auto regime_key = static_cast<std::uint64_t>(std::llround(regime * 1e6));
  return make_mask_plan(availability_from_flags(sample.missing), p, day, regime, sets,
                        derive_seed(base, {p, regime_key}));
}

std::vector<double> regimes_for(const Context& ctx) {
  if (ctx.opt.regime) return {*ctx.opt.regime};
  return ctx.config.at("evaluation").at("regimes").get<std::vector<double>>();
}

std::size_t mask_sets_for(const Context& ctx) {
  return ctx.opt.mask_sets.value_or(ctx.config.at("evaluation").at("mask_sets").get<std::size_t>());
}

// ---- subcommands ---------------------------------------------------------

void cmd_generate(Context& ctx) {
  const auto gen = ctx.config.at("generator").get<GeneratorConfig>();
  spdlog::info("generating {} participant(s) x {} day(s)", gen.participants, gen.days);
  SynthDataset ds = generate_dataset(gen);
  json seeds{{"generator", gen.seed}};

  std::vector<fs::path> artifacts;
  if (ctx.config.contains("class_signal")) {
    const json& j = ctx.config.at("class_signal");
    const auto cs = j.get<ClassSignalConfig>();
    const auto window = j.at("window_samples").get<std::size_t>();
    json labels = json::array();
    for (ParticipantId p = 0; p < ds.data.recording.participant_count(); ++p)
      for (DayId d = 0; d < ds.data.recording.day_count(p); ++d) {
        const auto schedule =
            balanced_schedule(ds.data.recording.day(p, d).samples, window, derive_seed(cs.seed, {p, d}));
        labels.push_back({{"participant", p}, {"day", d}, {"window", window},
                          {"labels", inject_class_signal(ds.data, p, d, schedule, cs)}});
      }
    write_text(ctx.path("labels.json"), labels.dump() + "\n");
    artifacts.push_back(ctx.path("labels.json"));
    seeds["class_signal"] = cs.seed;
  }

  fs::remove_all(ctx.path("dataset"));
  fs::remove_all(ctx.path("truth"));
  save_dataset(ds.data, ctx.path("dataset"));
  save_ground_truth(ds.truth, ctx.path("truth"));
  append_files(artifacts, ctx.path("dataset"));
  append_files(artifacts, ctx.path("truth"));
  finish(ctx, "generate", json::object(), seeds, artifacts);
}

void cmd_preprocess(Context& ctx) {
  const Dataset data = load_dataset(ctx.path("dataset"));
  const auto pipe = ctx.config.at("pipeline").get<PipelineConfig>();
  const InstanceMap instances = run_pipeline(data.recording, pipe);
  std::size_t n = 0;
  for (const auto& [_, v] : instances) n += v.size();
  spdlog::info("{} instance(s) of {} steps at {} Hz", n, instances.empty() ? 0 : instances.begin()->second.empty() ? 0 : instances.begin()->second.front().length(), pipe.output_rate_hz());
  fs::remove_all(ctx.path("instances"));
  save_instances(instances, ctx.path("instances"));
  std::vector<fs::path> artifacts;
  append_files(artifacts, ctx.path("instances"));
  finish(ctx, "preprocess", json::object(), json::object(), artifacts);
}

std::vector<double> read_loss_csv(const fs::path& path) {
  std::vector<double> curve;
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) break;
    curve.push_back(std::stod(line.substr(comma + 1)));
  }
  return curve;
}

// Epoch numbers of the epoch_NNNN checkpoints in `dir`.
std::vector<std::size_t> epoch_checkpoints(const fs::path& dir) {
  static const std::regex name(R"(epoch_(\d{4})\.bin)");
  std::vector<std::size_t> out;
  if (!fs::exists(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string file = entry.path().filename().string();
    if (std::regex_match(file, m, name)) out.push_back(std::stoul(m[1]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string epoch_stem(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
  return buf;
}

// Decides where training restarts in `dir`. Returns the epoch to start from
// and the stem to load (empty for a fresh start); removes checkpoints past the
// target so the directory matches the run.
std::pair<std::size_t, fs::path> resume_point(const fs::path& dir, std::size_t target, std::vector<double>& curve) {
  curve = read_loss_csv(dir / "loss.csv");
  const bool has_final = fs::exists(checkpoint_bin(dir / "final"));
  if (has_final && curve.size() == target) return {target, dir / "final"};

  std::size_t best = 0;
  for (auto e : epoch_checkpoints(dir)) {
    if (e > target) {
      fs::remove(checkpoint_bin(dir / epoch_stem(e)));
      fs::remove(checkpoint_json(dir / epoch_stem(e)));
    } else if (e <= curve.size()) {
      best = e;
    }
  }
  if (has_final && curve.size() < target && curve.size() > best) best = curve.size();
  if (best == 0) {
    curve.clear();
    return {0, {}};
  }
  curve.resize(best);
  const fs::path stem = dir / epoch_stem(best);
  return {best, fs::exists(checkpoint_bin(stem)) ? stem : dir / "final"};
}

TrainOptions epoch_logger(const fs::path& dir, std::size_t start, std::vector<double>& curve) {
  TrainOptions opts;
  opts.checkpoint_dir = dir;
  opts.start_epoch = start;
  opts.on_epoch = [&curve, dir](std::size_t epoch, double loss) {
    curve.resize(epoch - 1);
    curve.push_back(loss);
    write_loss_csv(dir / "loss.csv", curve);
    spdlog::info("epoch {} loss {:.6f}", epoch, loss);
  };
  return opts;
}

void cmd_train(Context& ctx) {
  const std::string& model = ctx.opt.model;
  const Split split = load_split(ctx);
  std::vector<fs::path> artifacts;
  json seeds = json::object();
  json params{{"model", model}};

  if (model == "zero") {
    spdlog::info("zero fill has no parameters; nothing to train");
  } else if (model == "baseline") {
    const Dataset data = load_dataset(ctx.path("dataset"));
    const auto k = ctx.config.at("evaluation").at("neighbors").get<std::size_t>();
    fs::remove_all(ctx.path("models/baseline"));
    for (const auto& [p, train] : split.train) {
      const auto table = neighbor_table(data.geometry.participant(p), k);
      const auto weights = fit_weights(train, table, p);
      const auto file = ctx.path("models/baseline/p" + std::to_string(p) + ".json");
      write_text(file, json(weights).dump(2) + "\n");
      artifacts.push_back(file);
    }
  } else if (model == "cnnae" || model == "mcnnae") {
    auto tc = ctx.config.at("trainer").at(model).get<TrainConfig>();
    if (ctx.opt.epochs) tc.epochs = *ctx.opt.epochs;
    params["epochs"] = tc.epochs;
    const auto mc = ctx.config.at("model").get<CnnaeConfig>();
    const std::uint64_t init_base = derive_seed(ctx.seed, "init." + model);

    if (model == "cnnae") {
      for (const auto& [p, train] : split.train) {
        const fs::path dir = ctx.path("models/cnnae/p" + std::to_string(p));
        fs::create_directories(dir);
        std::vector<double> curve;
        auto [start, stem] = resume_point(dir, tc.epochs, curve);
        const std::uint64_t init = derive_seed(init_base, {p});
        auto net = stem.empty() ? std::make_unique<Cnnae<float>>(train.front().electrodes(), mc, init) : load_cnnae(stem);
        TrainConfig pc = tc;
        pc.seed = derive_seed(tc.seed, {p});
        seeds["p" + std::to_string(p)] = {{"init", init}, {"train", pc.seed}};
        if (start < tc.epochs) {
          spdlog::info("participant {}: training epochs {}..{}", p, start + 1, tc.epochs);
          train_cnnae(*net, train, pc, epoch_logger(dir, start, curve));
        } else {
          spdlog::info("participant {}: already trained for {} epochs", p, tc.epochs);
        }
        append_files(artifacts, dir);
      }
    } else {
      const fs::path dir = ctx.path("models/mcnnae");
      fs::create_directories(dir);
      std::vector<double> curve;
      auto [start, stem] = resume_point(dir, tc.epochs, curve);
      std::unique_ptr<Mcnnae<float>> net;
      if (stem.empty()) {
        net = std::make_unique<Mcnnae<float>>(mc, init_base);
        for (const auto& [p, train] : split.train) net->register_participant(p, train.front().electrodes());
      } else {
        net = load_mcnnae(stem);
      }
      seeds = {{"init", init_base}, {"train", tc.seed}};
      if (start < tc.epochs) {
        spdlog::info("training epochs {}..{}", start + 1, tc.epochs);
        train_mcnnae(*net, split.train, tc, epoch_logger(dir, start, curve));
      }
      append_files(artifacts, dir);
    }
  } else {
    throw std::invalid_argument("unknown model " + model);
  }
  finish(ctx, "train/" + model, params, seeds, artifacts);
}

void write_f32(const fs::path& path, const std::vector<Tensor<float>>& tensors) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  for (const auto& t : tensors)
    out.write(reinterpret_cast<const char*>(t.storage().data()),
              static_cast<std::streamsize>(t.storage().size() * sizeof(float)));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void cmd_impute(Context& ctx) {
  const Split split = load_split(ctx);
  auto imputer = load_imputer(ctx, ctx.opt.model, split);
  const std::size_t sets = mask_sets_for(ctx);
  for (double regime : regimes_for(ctx)) {
    const std::string tag = ctx.opt.model + "_r" + regime_tag(regime);
    const fs::path dir = ctx.path("imputations/" + tag);
    fs::remove_all(dir);
    json index = json::array();
    for (const auto& [p, test] : split.test) {
      const auto plans = plans_for(ctx, p, split.test_day.at(p), test.front(), regime, sets);
      for (const auto& plan : plans) {
        const auto masked = apply_mask(test, plan);
        std::vector<Tensor<float>> filled;
        for (std::size_t i = 0; i < masked.size(); i += 16) {
          const std::span<const MaskedInstance> chunk(masked.data() + i, std::min<std::size_t>(16, masked.size() - i));
          const auto est = imputer->impute(p, chunk);
          for (std::size_t j = 0; j < chunk.size(); ++j) filled.push_back(fill_masked(chunk[j], est[j]));
        }
        const std::string file = "p" + std::to_string(p) + "_s" + std::to_string(plan.set_index) + ".f32";
        write_f32(dir / file, filled);
        index.push_back({{"file", file}, {"plan", plan}, {"count", filled.size()},
                         {"electrodes", test.front().electrodes()}, {"length", test.front().length()}});
      }
    }
    write_text(dir / "index.json", index.dump(2) + "\n");
    std::vector<fs::path> artifacts;
    append_files(artifacts, dir);
    finish(ctx, "impute/" + ctx.opt.model + "/" + regime_tag(regime), {{"model", ctx.opt.model}, {"regime", regime}, {"mask_sets", sets}},
           {{"masks", derive_seed(ctx.seed, "masks")}}, artifacts);
  }
}

void cmd_evaluate(Context& ctx) {
  const Split split = load_split(ctx);
  auto imputer = load_imputer(ctx, ctx.opt.model, split);
  const std::size_t sets = mask_sets_for(ctx);
  EvalOptions eo;
  eo.spectrum = ctx.config.at("evaluation").at("spectrum").get<SpectrumConfig>();
  for (double regime : regimes_for(ctx)) {
    EvalReport report;
    json plans_json = json::array();
    for (const auto& [p, test] : split.test) {
      const auto plans = plans_for(ctx, p, split.test_day.at(p), test.front(), regime, sets);
      for (const auto& plan : plans) plans_json.push_back(plan);
      report.append(evaluate_model(*imputer, p, test, plans, eo));
    }
    report.metadata = {{"model", ctx.opt.model}, {"regime", regime}, {"mask_sets", sets}, {"seed", ctx.seed}};

    const std::string stem = "eval/" + ctx.opt.model + "_r" + regime_tag(regime);
    std::string csv = std::string(kScoresHeader) + "\n";
    for (const auto& r : report.rows) csv += format_score_row(r) + "\n";
    write_text(ctx.path(stem + ".json"), json(report).dump(2) + "\n");
    write_text(ctx.path(stem + "_scores.csv"), csv);
    write_text(ctx.path(stem + "_masks.json"), plans_json.dump(2) + "\n");
    for (const auto& r : report.rows)
      spdlog::info("participant {} p={} {}: {:.4f} +- {:.4f} (n={})", r.participant, regime_tag(regime),
                   to_string(r.role), r.mean, r.std, r.n);
    finish(ctx, "evaluate/" + ctx.opt.model + "/" + regime_tag(regime),
           {{"model", ctx.opt.model}, {"regime", regime}, {"mask_sets", sets}},
           {{"masks", derive_seed(ctx.seed, "masks")}},
           {ctx.path(stem + ".json"), ctx.path(stem + "_scores.csv"), ctx.path(stem + "_masks.json")});
  }
}

void cmd_decode(Context& ctx) {
  if (!fs::exists(ctx.path("labels.json")))
    throw std::runtime_error("no labels.json; generate with a class_signal block");
  const Split split = load_split(ctx);
  auto imputer = load_imputer(ctx, ctx.opt.model, split);
  auto cfg = ctx.config.at("decoding").get<DecodeConfig>();

  std::map<std::pair<ParticipantId, DayId>, std::vector<std::uint8_t>> labels;
  for (const auto& e : read_json(ctx.path("labels.json")))
    labels[{e.at("participant").get<ParticipantId>(), e.at("day").get<DayId>()}] =
        e.at("labels").get<std::vector<std::uint8_t>>();

  DecodingTable table;
  for (const auto& [p, test] : split.test) {
    const auto& lab = labels.at({p, split.test_day.at(p)});
    // Instances and label windows tile the day from its start.
    const std::size_t n = std::min(lab.size(), test.size());
    std::vector<LabeledEvent> events;
    for (std::size_t i = 0; i < n; ++i) events.push_back({test[i], lab[i]});
    DecodeConfig pc = cfg;
    pc.seed = derive_seed(cfg.seed, {p});
    const auto t = run_missingness_experiment(p, events, *imputer, pc);
    for (const auto& c : t.cells)
      spdlog::info("participant {} pct {}: full {:.3f} zero {:.3f} {} {:.3f}", p, regime_tag(c.pct), c.full_mean,
                   c.zero_mean, c.imputer, c.imputer_mean);
    table.append(t);
  }
  const fs::path rows = ctx.path("decode/" + ctx.opt.model + "_rows.csv");
  const fs::path cells = ctx.path("decode/" + ctx.opt.model + "_cells.csv");
  fs::create_directories(rows.parent_path());
  write_decoding_csv(table, rows, cells);
  const fs::path summary = ctx.path("decode/" + ctx.opt.model + "_summary.json");
  write_text(summary, json{{"model", ctx.opt.model}, {"cells", table.cells.size()},
                           {"imputer_win_fraction", table.imputer_win_fraction()}}
                              .dump(2) + "\n");
  spdlog::info("{} >= zero fill in {:.1f}% of cells", ctx.opt.model, 100.0 * table.imputer_win_fraction());
  finish(ctx, "decode/" + ctx.opt.model, {{"model", ctx.opt.model}}, {{"decode", cfg.seed}}, {rows, cells, summary});
}

void cmd_report(Context& ctx) {
  EvalReport merged;
  std::vector<fs::path> inputs;
  for (const auto& f : cli::files_under(ctx.path("eval")))
    if (f.extension() == ".json" && f.stem().string().find("_masks") == std::string::npos) inputs.push_back(f);
  if (inputs.empty()) throw std::runtime_error("no evaluation results; run evaluate first");
  for (const auto& f : inputs) merged.append(read_json(f).get<EvalReport>());
  fs::remove_all(ctx.path("report"));
  auto artifacts = emit_report(merged, ctx.path("report"));
  json inputs_json = json::array();
  for (const auto& f : inputs) inputs_json.push_back(fs::relative(f, ctx.store.dir()).generic_string());
  finish(ctx, "report", {{"inputs", inputs_json}}, json::object(), artifacts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep neural imputation of missing electrode channels", "dni"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  double regime = 0.0;
  std::size_t mask_sets = 0, epochs = 0;
  app.add_option("--config", opt.config_path, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "global seed");
  app.add_option("--out", opt.out, "run directory")->capture_default_str();
  app.add_option("--model", opt.model, "imputer")
      ->check(CLI::IsMember({"baseline", "cnnae", "mcnnae", "zero"}))
      ->capture_default_str();
  auto* regime_opt = app.add_option("--regime", regime, "missing fraction p")->check(CLI::Range(0.0, 1.0));
  auto* sets_opt = app.add_option("--mask-sets", mask_sets, "mask sets per regime")->check(CLI::PositiveNumber);
  auto* epochs_opt = app.add_option("--epochs", epochs, "training epochs")->check(CLI::PositiveNumber);

  const std::map<std::string, void (*)(Context&)> commands{
      {"generate", cmd_generate}, {"preprocess", cmd_preprocess}, {"train", cmd_train}, {"impute", cmd_impute},
      {"evaluate", cmd_evaluate}, {"decode", cmd_decode},         {"report", cmd_report}};
  const std::map<std::string, std::string> help{
      {"generate", "synthesize a dataset, ground-truth sidecar and optional labels"},
      {"preprocess", "run the signal pipeline into instances"},
      {"train", "fit the chosen model, resuming from its latest checkpoint"},
      {"impute", "write filled test-day instances for each mask set"},
      {"evaluate", "score reconstructions and imputations"},
      {"decode", "decoding-recovery experiment on labeled events"},
      {"report", "merge evaluation results into CSV and SVG reports"}};
  for (const auto& [name, _] : commands) app.add_subcommand(name, help.at(name))->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.get_formatter()->make_help(&app, "", CLI::AppFormatMode::Normal);
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }
  if (*seed_opt) opt.seed = seed;
  if (*regime_opt) opt.regime = regime;
  if (*sets_opt) opt.mask_sets = mask_sets;
  if (*epochs_opt) opt.epochs = epochs;

  try {
    Context ctx = open_run(opt);
    commands.at(app.get_subcommands().front()->get_name())(ctx);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
