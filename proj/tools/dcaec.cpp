// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// dcaec command line: process, simulate, metrics, gradcheck, traintoy,
// bench, init-weights. Exit codes: 0 ok, 1 check failed, 2 bad input,
// 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <json.hpp>

#include "dcaec/engine.hpp"
#include "dcaec/gradcheck.hpp"
#include "dcaec/io.hpp"
#include "dcaec/scene.hpp"
#include "dcaec/streaming.hpp"
#include "dcaec/train.hpp"

namespace fs = std::filesystem;
using namespace dcaec;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kExitFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

void emit(const ojson& j) { std::cout << j.dump() << std::endl; }

ojson header(const char* command) {
  ojson j;
  j["tool"] = "dcaec";
  j["version"] = kToolVersion;
  j["command"] = command;
  return j;
}

ModelConfig config_for(bool small, std::uint64_t seed) {
  ModelConfig c = small ? ModelConfig::small() : ModelConfig::paper();
  c.seed = seed;
  return c;
}

// ---------------------------------------------------------------------------

struct ProcessArgs {
  std::string mic, farend, weights, out;
  bool streaming = false;
};

int cmd_process(const ProcessArgs& a) {
  const WeightStore w = load_weights(a.weights);
  const AecModel model(config_from_store(w), w);
  const AudioBuffer mic = read_wav(a.mic);
  const AudioBuffer far = read_wav(a.farend);
  const ProcessResult r = process_clip(model, mic, far, a.streaming);
  const WavWriteStats ws = write_wav(a.out, r.s_hat);

  ojson j = header("process");
  j["mic"] = a.mic;
  j["farend"] = a.farend;
  j["out"] = a.out;
  j["samples"] = mic.size();
  j["farend_samples"] = far.size();
  j["streaming"] = a.streaming;
  const double audio_s = static_cast<double>(mic.size()) / kSampleRate;
  j["wall_s"] = r.wall_s;
  j["rtf"] = audio_s > 0 ? ojson(r.wall_s / audio_s) : ojson(nullptr);
  j["latency_samples"] = StreamingSession(model).latency_samples();
  j["mask_clamped"] = r.clamped;
  j["clipped_samples"] = ws.clipped;
  j["config_hash"] = w.metadata.count("config_hash") ? w.metadata.at("config_hash") : "";
  j["config"] = model.config().serialize();
  emit(j);
  return 0;
}

struct SimulateArgs {
  std::size_t recipes = 10;
  std::uint64_t seed = 1;
  std::string outdir, ranges, corpus;
  std::size_t corpus_clips = 20;
};

int cmd_simulate(const SimulateArgs& a) {
  SceneRanges ranges;
  if (!a.ranges.empty()) {
    const auto bytes = read_file(a.ranges);
    ranges = SceneRanges::parse(std::string(bytes.begin(), bytes.end()));
  }
  ranges.validate();
  const Corpus corpus = a.corpus.empty()
                            ? Corpus::synthetic(a.corpus_clips, ranges.seconds + 1.0, a.seed)
                            : Corpus::load(a.corpus);
  std::error_code ec;
  fs::create_directories(a.outdir, ec);
  if (ec) throw InputError("simulate: cannot create " + a.outdir + ": " + ec.message());
  const fs::path dir(a.outdir);
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw InputError("simulate: cannot write " + (dir / "manifest.jsonl").string());

  std::size_t clipped = 0;
  for (std::size_t i = 0; i < a.recipes; ++i) {
    const SceneExample ex = synthesize(sample_recipe(a.seed, i, ranges, corpus.sizes()), corpus);
    char stem[32];
    std::snprintf(stem, sizeof stem, "ex%05zu", i);
    std::vector<std::string> files;
    auto put = [&](const char* tag, const AudioBuffer& b) {
      const std::string name = std::string(stem) + "_" + tag + ".wav";
      clipped += write_wav((dir / name).string(), b).clipped;
      files.push_back(name);
    };
    put("s", ex.s);
    put("x", ex.x);
    put("y", ex.y);
    put("d", ex.d);
    put("v", ex.v);
    manifest << manifest_line(ex, files) << '\n';
  }
  manifest.close();
  if (!manifest) throw InputError("simulate: manifest write failed");

  ojson j = header("simulate");
  j["recipes"] = a.recipes;
  j["seed"] = a.seed;
  j["outdir"] = a.outdir;
  j["corpus"] = a.corpus.empty() ? "synthetic" : a.corpus;
  j["clipped_samples"] = clipped;
  emit(j);
  return 0;
}

struct MetricsArgs {
  std::string est, ref, mic;
};

int cmd_metrics(const MetricsArgs& a) {
  const MetricsReport m = compute_metrics(read_wav(a.est), read_wav(a.ref), read_wav(a.mic));
  ojson j = header("metrics");
  j["est"] = a.est;
  j["metrics"] = ojson::parse(m.json());
  emit(j);
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& o) {
  bool ok = true;
  for (const auto& r : run_gradcheck(o)) {
    ojson j;
    j["case"] = r.name;
    j["max_rel_error"] = r.max_rel_error;
    j["checked"] = r.checked;
    j["skipped"] = r.skipped;
    j["passed"] = r.passed;
    emit(j);
    ok = ok && r.passed;
  }
  ojson j = header("gradcheck");
  j["seed"] = o.seed;
  j["tolerance"] = o.tolerance;
  j["passed"] = ok;
  emit(j);
  return ok ? 0 : kExitFailed;
}

struct TrainArgs {
  ToyTrainOptions opts;
  bool small = false;
  std::uint64_t init_seed = 1;
  std::string log, weights_out;
};

int cmd_traintoy(TrainArgs a) {
  a.opts.model = config_for(a.small, a.init_seed);
  std::optional<std::ofstream> log;
  if (!a.log.empty()) {
    log.emplace(a.log, std::ios::binary);
    if (!*log) throw InputError("traintoy: cannot write " + a.log);
  }
  const ToyTrainResult r = toy_train(a.opts, [&](const TrainRecord& rec) {
    std::cout << rec.json() << std::endl;
    if (log) *log << rec.json() << '\n' << std::flush;
  });
  if (!a.weights_out.empty()) save_weights(a.weights_out, r.weights);
  ojson j = header("traintoy");
  j["steps"] = a.opts.steps;
  j["examples"] = a.opts.examples;
  j["initial_seg_sisnr_db"] = r.initial_seg_sisnr;
  j["final_seg_sisnr_db"] = r.final_seg_sisnr;
  j["improvement_db"] = r.final_seg_sisnr - r.initial_seg_sisnr;
  j["lr_halvings"] = r.lr_halvings;
  emit(j);
  return 0;
}

struct BenchArgs {
  std::string weights;
  bool small = false;
  double seconds = 10;
  std::uint64_t seed = 1;
  int threads = 1;
  int repeats = 1;
  bool streaming = false;
};

int cmd_bench(const BenchArgs& a) {
  const WeightStore w = a.weights.empty() ? init_weights(config_for(a.small, a.seed)) : load_weights(a.weights);
  const AecModel model(config_from_store(w), w);
  const BenchResult b = bench_rtf(model, a.seconds, a.seed, a.streaming, a.threads, a.repeats);
  ojson j = header("bench");
  j["params"] = count_params(w);
  j["bench"] = ojson::parse(b.json());
  emit(j);
  return 0;
}

struct InitArgs {
  std::uint64_t seed = 1;
  bool small = false;
  std::string out;
};

int cmd_init_weights(const InitArgs& a) {
  const WeightStore w = init_weights(config_for(a.small, a.seed));
  if (!a.out.empty()) save_weights(a.out, w);
  ojson j = header("init-weights");
  j["seed"] = a.seed;
  j["params"] = count_params(w);
  j["out"] = a.out;
  ojson layers = ojson::object();
  for (const auto& [name, n] : param_breakdown(w)) layers[name] = n;
  j["breakdown"] = layers;
  emit(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcaec: deep complex acoustic echo canceller"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  ProcessArgs pa;
  auto* process = app.add_subcommand("process", "Cancel echo in a mic recording");
  process->add_option("--mic", pa.mic, "Microphone WAV (16 kHz mono PCM16)")->required();
  process->add_option("--farend", pa.farend, "Far-end reference WAV")->required();
  process->add_option("--weights", pa.weights, "Weight file")->required();
  process->add_option("--out", pa.out, "Output WAV")->required();
  process->add_flag("--streaming", pa.streaming, "Run the frame-by-frame engine");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic echo scenes");
  simulate->add_option("--recipes", sa.recipes, "Number of examples")->required();
  simulate->add_option("--seed", sa.seed, "Recipe seed")->required();
  simulate->add_option("--outdir", sa.outdir, "Output directory")->required();
  simulate->add_option("--ranges", sa.ranges, "key=value ranges file");
  simulate->add_option("--corpus", sa.corpus, "Directory with near/, far/, noise/ WAVs");
  simulate->add_option("--corpus-clips", sa.corpus_clips, "Clips per class of the synthetic corpus");

  MetricsArgs ma;
  auto* metrics = app.add_subcommand("metrics", "SI-SNR, Seg-SiSNR and ERLE of an estimate");
  metrics->add_option("--est", ma.est, "Estimated near-end WAV")->required();
  metrics->add_option("--ref", ma.ref, "Clean near-end WAV")->required();
  metrics->add_option("--mic", ma.mic, "Microphone WAV")->required();

  GradcheckOptions go;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  gradcheck->add_option("--seed", go.seed);
  gradcheck->add_option("--tolerance", go.tolerance);
  gradcheck->add_option("--step", go.step);
  gradcheck->add_option("--order", go.order)->check(CLI::IsMember({2, 4}));

  TrainArgs ta;
  auto* traintoy = app.add_subcommand("traintoy", "Desk-scale Adam training on synthetic scenes");
  traintoy->add_option("--steps", ta.opts.steps);
  traintoy->add_option("--lr", ta.opts.lr);
  traintoy->add_option("--examples", ta.opts.examples);
  traintoy->add_option("--validation", ta.opts.validation);
  traintoy->add_option("--eval-every", ta.opts.eval_every);
  traintoy->add_option("--chunk-seconds", ta.opts.chunk_seconds);
  traintoy->add_option("--seed", ta.opts.seed, "Scene seed");
  traintoy->add_option("--init-seed", ta.init_seed, "Weight init seed");
  traintoy->add_flag("--small", ta.small, "Reduced model for quick runs");
  traintoy->add_option("--log", ta.log, "Also write the log records here");
  traintoy->add_option("--weights-out", ta.weights_out, "Save the trained weights");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Real-time factor and latency");
  bench->add_option("--weights", ba.weights, "Weight file (default: seeded init)");
  bench->add_flag("--small", ba.small);
  bench->add_option("--seconds", ba.seconds);
  bench->add_option("--seed", ba.seed);
  bench->add_option("--threads", ba.threads);
  bench->add_option("--repeats", ba.repeats);
  bench->add_flag("--streaming", ba.streaming);

  InitArgs ia;
  auto* init = app.add_subcommand("init-weights", "Write seeded random weights");
  init->add_option("--seed", ia.seed)->required();
  init->add_option("--out", ia.out, "Weight file to write");
  init->add_flag("--small", ia.small);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*process) return cmd_process(pa);
    if (*simulate) return cmd_simulate(sa);
    if (*metrics) return cmd_metrics(ma);
    if (*gradcheck) return cmd_gradcheck(go);
    if (*traintoy) return cmd_traintoy(ta);
    if (*bench) return cmd_bench(ba);
    if (*init) return cmd_init_weights(ia);
  } catch (const InputError& e) {
    std::cerr << "dcaec: " << e.what() << "\n";
    return kExitInput;
  } catch (const ShapeError& e) {
    std::cerr << "dcaec: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "dcaec: numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "dcaec: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitInput;
}
