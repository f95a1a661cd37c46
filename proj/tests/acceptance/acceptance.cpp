// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// End-to-end acceptance run. One [PASS]/[FAIL] line per criterion, exit
// status 1 if any failed. Takes several minutes, most of it in the toy
// training run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "dcaec/engine.hpp"
#include "dcaec/gradcheck.hpp"
#include "dcaec/metrics.hpp"
#include "dcaec/model.hpp"
#include "dcaec/nn.hpp"
#include "dcaec/scene.hpp"
#include "dcaec/streaming.hpp"
#include "dcaec/train.hpp"
#include "reference/reference.hpp"
#include "support.hpp"

using namespace dcaec;
using namespace dcaec::nn;
using namespace dcaec::testing;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Collects failures for one criterion; `detail` ends up on the result line.
struct Verdict {
  bool ok = true;
  std::ostringstream detail;
  std::vector<std::string> failures;

  void expect(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (failures.size() < 5) failures.push_back(what);
    }
  }
};

std::string fmt(double v, int prec = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

ComplexSpec random_spec(Rng& rng, std::size_t frames, std::size_t bins, const StftConfig& cfg) {
  return {random_tensor(rng, {frames, bins}), random_tensor(rng, {frames, bins}), cfg};
}

AudioBuffer gaussian(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 0.3);
  AudioBuffer x = AudioBuffer::zeros(n);
  for (auto& v : x.samples) v = g(rng);
  return x;
}

AudioBuffer scaled(const AudioBuffer& a, double k) {
  AudioBuffer r = a;
  for (auto& v : r.samples) v *= k;
  return r;
}

double energy(const AudioBuffer& a) {
  double e = 0;
  for (double v : a.samples) e += v * v;
  return e;
}

double max_diff(const AudioBuffer& a, const AudioBuffer& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.samples[i] - b.samples[i]));
  return m;
}

// ---------------------------------------------------------------------------

void shapes(Verdict& v) {
  const ModelConfig cfg = ModelConfig::paper();
  AecModel model(cfg, init_weights(cfg));
  Rng rng(3);
  std::size_t rows = 0;
  for (std::size_t t : {3, 50, 99}) {
    ShapeTrace trace;
    model.mask(random_spec(rng, t, 161, cfg.stft), random_spec(rng, t, 161, cfg.stft), &trace);
    const std::vector<std::pair<std::string, Shape>> expected = {
        {"input", {4, t, 161}},        {"c-conv2d_1", {64, t, 79}},
        {"c-conv2d_2", {192, t, 79}},  {"reshape_1", {t, 79, 192}},
        {"F-LSTM", {t, 79, 96}},       {"reshape_2", {79, t, 96}},
        {"T-LSTM", {79, t, 96}},       {"c-deconv2d_2", {64, t, 79}},
        {"c-deconv2d_1", {2, t, 161}}, {"Deepfilter", {2, t, 161}},
        {"c-LSTM", {2, t, 161}}};
    v.expect(trace.rows.size() == expected.size(), "row count at T=" + std::to_string(t));
    for (std::size_t i = 0; i < std::min(expected.size(), trace.rows.size()); ++i) {
      const bool same = trace.rows[i].first == expected[i].first && trace.rows[i].second == expected[i].second;
      v.expect(same, expected[i].first + " at T=" + std::to_string(t));
      rows += same;
    }
  }
  v.detail << rows << "/33 rows match";
}

void param_budget(Verdict& v) {
  const WeightStore w = init_weights(ModelConfig::paper());
  const std::size_t n = count_params(w);
  v.expect(n >= 1300000 && n <= 1500000, "count outside [1.3e6, 1.5e6]");
  std::size_t sum = 0;
  v.detail << n << " params (";
  bool first = true;
  for (const auto& [name, k] : param_breakdown(w)) {
    v.detail << (first ? "" : ", ") << name << " " << k;
    first = false;
    sum += k;
  }
  v.detail << ")";
  v.expect(sum == n, "breakdown does not add up");
}

ConvSpec random_conv_spec(Rng& rng, bool transposed) {
  ConvSpec s;
  s.kernel_t = pick(rng, 1, 3);
  s.kernel_f = pick(rng, 1, 5);
  s.stride_t = pick(rng, 1, 2);
  s.stride_f = pick(rng, 1, 3);
  s.pad_t = pick(rng, 0, s.kernel_t - 1);
  s.pad_f = pick(rng, 0, s.kernel_f - 1);
  s.in_ch = pick(rng, 1, 4);
  s.out_ch = pick(rng, 1, 4);
  s.transposed = transposed;
  return s;
}

void kernel_oracles(Verdict& v) {
  constexpr double tol = 1e-5;
  Rng rng(101);
  double worst_conv = 0, worst_deconv = 0, worst_df = 0, worst_lstm = 0, worst_clstm = 0, worst_ft = 0;
  for (int trial = 0; trial < 100; ++trial) {
    for (bool transposed : {false, true}) {
      ConvSpec s = random_conv_spec(rng, transposed);
      Shape xs{s.in_ch, pick(rng, s.kernel_t, 8), pick(rng, s.kernel_f, 8)};
      ComplexConvParams<double> p{random_tensor(rng, s.kernel_shape()), random_tensor(rng, s.kernel_shape()),
                                  random_tensor(rng, {s.out_ch}), random_tensor(rng, {s.out_ch})};
      ComplexPair<double> x = random_pair(rng, xs);
      const double d = max_abs_diff(complex_conv2d(x, p, s), ref::complex_conv2d(x, p, s));
      (transposed ? worst_deconv : worst_conv) = std::max(transposed ? worst_deconv : worst_conv, d);
    }

    {
      const std::size_t T = pick(rng, 1, 8), F = pick(rng, 1, 8);
      ComplexPair<double> coef = random_pair(rng, {9, T, F});
      ComplexPair<double> target = random_pair(rng, {1, T, F});
      worst_df = std::max(worst_df, max_abs_diff(deep_filter_apply(coef, target), ref::deep_filter(coef, target)));
    }

    {
      const std::size_t D = pick(rng, 1, 8), H = pick(rng, 1, 8), S = pick(rng, 1, 8), B = pick(rng, 1, 4);
      LstmSpec<double> spec = random_lstm(rng, D, H, trial % 2 == 0);
      Tensor<double> x = random_tensor(rng, {S, B, D});
      Tensor<double> y = lstm_layer(x, SeqLayout{S, B, false}, spec);
      for (std::size_t b = 0; b < B; ++b) {
        ref::Mat seq(S, ref::Vec(D));
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t d = 0; d < D; ++d) seq[s][d] = x(s, b, d);
        ref::Mat want = ref::lstm_layer(seq, spec);
        for (std::size_t s = 0; s < S; ++s)
          for (std::size_t j = 0; j < spec.output_dim(); ++j)
            worst_lstm = std::max(worst_lstm, std::abs(y(s, b, j) - want[s][j]));
      }
    }

    {
      const std::size_t T = pick(rng, 1, 8), D = pick(rng, 1, 8), H = pick(rng, 1, 8), L = pick(rng, 1, 2);
      ComplexLstmParams<double> p = random_clstm(rng, D, H, L, D);
      p.has_proj = trial % 4 != 0;
      ComplexPair<double> x = random_pair(rng, {T, D});
      worst_clstm = std::max(worst_clstm, max_abs_diff(complex_lstm(x, p), ref::complex_lstm(x, p)));
    }

    {
      const std::size_t C = pick(rng, 1, 6), T = pick(rng, 1, 6), F = pick(rng, 1, 8), H = pick(rng, 1, 6);
      FtLstmParams<double> p = random_ft(rng, C, H);
      Tensor<double> h = random_tensor(rng, {C, T, F});
      worst_ft = std::max(worst_ft, max_abs_diff(ft_lstm_branch(h, p), ref::ft_lstm_branch(h, p)));
    }
  }
  v.expect(worst_conv < tol, "conv");
  v.expect(worst_deconv < tol, "deconv");
  v.expect(worst_df < tol, "deep filter");
  v.expect(worst_lstm < tol, "lstm");
  v.expect(worst_clstm < tol, "complex lstm");
  v.expect(worst_ft < tol, "F-T-LSTM");
  v.detail << "max |diff| conv " << fmt(worst_conv) << ", deconv " << fmt(worst_deconv) << ", df "
           << fmt(worst_df) << ", lstm " << fmt(worst_lstm) << ", clstm " << fmt(worst_clstm) << ", ft "
           << fmt(worst_ft);
}

void gradient_suite(Verdict& v) {
  const auto results = run_gradcheck(GradcheckOptions{});
  double worst = 0;
  std::string worst_name;
  for (const auto& r : results) {
    v.expect(r.passed && r.max_rel_error < 1e-4, r.name);
    v.expect(r.checked > 0, r.name + " checked nothing");
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      worst_name = r.name;
    }
  }
  v.expect(results.size() >= 11, "fewer cases than expected");
  v.detail << results.size() << " cases, worst " << fmt(worst) << " (" << worst_name << ")";
}

void stft_round_trip(Verdict& v) {
  const StftConfig cfg = StftConfig::paper();
  double worst = 0;
  for (std::size_t n : {16000ul, 32000ul, 16123ul, 160000ul}) {
    const AudioBuffer x = gaussian(n, n);
    const AudioBuffer y = istft(stft(x, cfg));
    if (y.size() < n) {
      v.expect(false, "short output");
      continue;
    }
    // the first and last frame are not fully overlapped
    double num = 0, den = 0;
    for (std::size_t i = cfg.win_len; i + cfg.win_len < n; ++i) {
      num += (x.samples[i] - y.samples[i]) * (x.samples[i] - y.samples[i]);
      den += x.samples[i] * x.samples[i];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  const double cola = cfg.cola_deviation();
  v.expect(worst < 1e-6, "round trip");
  v.expect(cola < 1e-10, "COLA");
  v.detail << "rel L2 " << fmt(worst) << ", COLA deviation " << fmt(cola);
}

void ideal_crm_check(Verdict& v) {
  Rng rng(8);
  const StftConfig cfg = StftConfig::paper();
  double worst = 0;
  std::size_t bins = 0;
  for (int trial = 0; trial < 5; ++trial) {
    ComplexSpec y = random_spec(rng, 50, 161, cfg), s = random_spec(rng, 50, 161, cfg);
    // every 7th bin rescaled to a magnitude log-uniform in [1e-7, 1e-1],
    // so the region just above |Y| = 1e-6 is well covered
    std::uniform_real_distribution<double> decade(-7.0, -1.0);
    for (std::size_t i = 0; i < y.re.size(); i += 7) {
      const double k = std::pow(10.0, decade(rng)) / std::max(std::hypot(y.re[i], y.im[i]), 1e-300);
      y.re[i] *= k;
      y.im[i] *= k;
    }
    const ComplexSpec r = apply_mask(y, ideal_crm(y, s));
    for (std::size_t i = 0; i < s.re.size(); ++i) {
      if (std::hypot(y.re[i], y.im[i]) <= 1e-6) continue;
      const double mag = std::max(std::hypot(s.re[i], s.im[i]), 1e-12);
      worst = std::max(worst, std::hypot(r.re[i] - s.re[i], r.im[i] - s.im[i]) / mag);
      ++bins;
    }
  }
  v.expect(worst <= 1e-6, "reconstruction");
  // Y = 0 exactly stays finite
  ComplexSpec zero = random_spec(rng, 2, 161, cfg);
  zero.re.fill(0.0);
  zero.im.fill(0.0);
  const MaskSpec mz = ideal_crm(zero, random_spec(rng, 2, 161, cfg));
  bool finite = true;
  for (std::size_t i = 0; i < mz.re.size(); ++i) finite = finite && std::isfinite(mz.re[i]) && std::isfinite(mz.im[i]);
  v.expect(finite, "non-finite mask at Y = 0");
  v.detail << bins << " bins, worst relative error " << fmt(worst);
}

void metric_identities(Verdict& v) {
  const AudioBuffer y = gaussian(17, 16000);
  const double e0 = erle(y, y), e20 = erle(y, scaled(y, 0.1));
  v.expect(e0 == 0.0, "ERLE(y, y)");
  v.expect(std::abs(e20 - 20.0) < 1e-9, "ERLE(y, y/10)");

  const AudioBuffer s = gaussian(2, 8000);
  AudioBuffer est = s;
  const AudioBuffer n = gaussian(3, 8000);
  for (std::size_t i = 0; i < est.size(); ++i) est.samples[i] += 0.5 * n.samples[i];
  const double base = si_snr(est, s);
  double scale_dev = 0;
  for (double a : {0.01, 0.1, 2.0, 37.0, 1000.0}) {
    scale_dev = std::max(scale_dev, std::abs(si_snr(scaled(est, a), s) - base));
    scale_dev = std::max(scale_dev, std::abs(si_snr(est, scaled(s, a)) - base));
  }
  v.expect(scale_dev < 1e-9, "scale invariance");

  const double seg1 = seg_sisnr(est, s, ChunkPlan::single());
  v.expect(seg1 == base, "Seg-SiSNR with one chunk");

  // noise orthogonal to s at exactly a tenth of its energy
  AudioBuffer o = gaussian(5, 8000);
  double dot = 0;
  for (std::size_t i = 0; i < s.size(); ++i) dot += o.samples[i] * s.samples[i];
  const double k = dot / energy(s);
  for (std::size_t i = 0; i < s.size(); ++i) o.samples[i] -= k * s.samples[i];
  o = scaled(o, std::sqrt(energy(s) / 10.0 / energy(o)));
  AudioBuffer ten = s;
  for (std::size_t i = 0; i < s.size(); ++i) ten.samples[i] += o.samples[i];
  const double db10 = si_snr(ten, s);
  v.expect(std::abs(db10 - 10.0) < 1e-6, "constructed 10 dB case");

  v.detail << "ERLE " << e0 << " / " << fmt(e20, 12) << " dB, scale dev " << fmt(scale_dev) << ", 10 dB case "
           << fmt(db10, 12);
}

RoomSpec room_at(double rt60, Vec3 source, Vec3 mic, Vec3 dims) {
  RoomSpec r;
  r.dims = dims;
  r.rt60 = rt60;
  r.source = source;
  r.mic = mic;
  return r;
}

void scene_calibration(Verdict& v) {
  SceneRanges ranges;
  ranges.seconds = 1.5;
  const Corpus corpus = Corpus::synthetic(8, 3.0, 11);
  std::size_t ser_n = 0, snr_n = 0;
  double ser_worst = 0, snr_worst = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const SceneRecipe r = sample_recipe(9, i, ranges, corpus.sizes());
    const SceneExample ex = synthesize(r, corpus);
    if (!r.farend_zeroed) {
      ser_worst = std::max(ser_worst, std::abs(ex.measured_ser_db - r.ser_db));
      ++ser_n;
    }
    if (!r.noise_zeroed) {
      snr_worst = std::max(snr_worst, std::abs(ex.measured_snr_db - r.snr_db));
      ++snr_n;
    }
  }
  v.expect(ser_worst < 0.1, "SER calibration");
  v.expect(snr_worst < 0.1, "SNR calibration");

  const std::size_t draws = 10000;
  std::size_t far0 = 0, noise0 = 0, reverb = 0, dip = 0;
  for (std::size_t i = 0; i < draws; ++i) {
    const SceneRecipe r = sample_recipe(42, i, SceneRanges{}, {5, 5, 5});
    far0 += r.farend_zeroed;
    noise0 += r.noise_zeroed;
    reverb += r.reverb_applied;
    dip += r.gain_dip.has_value();
  }
  double worst_sigma = 0;
  auto within = [&](std::size_t k, double p, const char* name) {
    const double sigma = std::sqrt(p * (1 - p) / draws);
    const double z = std::abs(double(k) / draws - p) / sigma;
    worst_sigma = std::max(worst_sigma, z);
    v.expect(z <= 3.0, name);
  };
  const SceneRanges def;
  within(far0, def.p_farend_zero, "far-end zero rate");
  within(noise0, def.p_noise_zero, "noise zero rate");
  within(reverb, def.p_reverb, "reverb rate");
  within(dip, def.p_gain_dip, "gain dip rate");

  // direct path: distances that land on and between sample instants
  std::size_t worst_delay = 0;
  for (double dist : {3.43, 1.0, 2.2, 4.1}) {
    RoomSpec r = room_at(0.4, {1.0, 2.0, 1.5}, {1.0 + dist, 2.0, 1.5}, {6, 4, 3});
    const double analytic = dist / r.c * kSampleRate;
    const std::size_t got = first_arrival(generate_rir(r));
    const double off = std::abs(double(got) - analytic);
    worst_delay = std::max(worst_delay, static_cast<std::size_t>(std::ceil(off)));
    v.expect(off <= 1.0, "direct path at " + fmt(dist) + " m");
  }

  double rt_lo = INFINITY, rt_hi = 0;
  for (auto dims : {Vec3{6, 4, 3}, Vec3{5, 3, 3}, Vec3{8, 5, 4}, Vec3{7, 3.5, 3.2}}) {
    RoomSpec r = room_at(0.4, {1.2, 1.1, 1.4}, {dims[0] - 1.5, dims[1] - 1.2, 1.6}, dims);
    const double t = schroeder_rt60(generate_rir(r));
    rt_lo = std::min(rt_lo, t);
    rt_hi = std::max(rt_hi, t);
  }
  v.expect(rt_lo >= 0.32 && rt_hi <= 0.48, "RT60");

  v.detail << "SER worst " << fmt(ser_worst) << " dB (" << ser_n << "), SNR worst " << fmt(snr_worst) << " dB ("
           << snr_n << "), rates within " << fmt(worst_sigma) << " sigma, direct path within " << worst_delay
           << " sample, RT60 " << fmt(rt_lo) << ".." << fmt(rt_hi) << " s";
}

void streaming(Verdict& v) {
  const ModelConfig cfg = ModelConfig::paper();
  AecModel model(cfg, init_weights(cfg));
  Rng rng(1);
  double worst = 0;
  for (std::size_t n : {16000ul, 12345ul, 480ul}) {
    const AudioBuffer y = random_audio(rng, n), x = random_audio(rng, n);
    worst = std::max(worst, max_diff(model.forward(y, x).s_hat, stream_process(model, y, x)));
  }
  v.expect(worst < 1e-5, "streaming vs offline");

  StreamingSession session(model);
  const std::size_t latency = session.latency_samples();
  v.expect(latency <= 640, "latency");

  // mask frames up to t are untouched by a change in input frame t + 2
  const auto p = from_store<double>(cfg, init_weights(cfg));
  const std::size_t frames = 8, bins = cfg.bins();
  const ComplexSpec ys = random_spec(rng, frames, bins, cfg.stft);
  const ComplexSpec xs = random_spec(rng, frames, bins, cfg.stft);
  auto run = [&](const ComplexSpec& yy, const ComplexSpec& xx) {
    ag::Tape<double> tape(false);
    ag::CVar yv{tape.constant(yy.re), tape.constant(yy.im)};
    ag::CVar xv{tape.constant(xx.re), tape.constant(xx.im)};
    auto g = build_graph(tape, p, cfg, yv, xv);
    return ComplexPair<double>(tape.value(g.mask.re), tape.value(g.mask.im));
  };
  const auto base = run(ys, xs);
  double leak = 0;
  for (std::size_t t = 0; t + 2 < frames; ++t) {
    for (int which = 0; which < 2; ++which) {
      ComplexSpec yy = ys, xx = xs;
      ComplexSpec& target = which ? xx : yy;
      for (std::size_t f = 0; f < bins; ++f) {
        target.re(t + 2, f) += 0.5;
        target.im(t + 2, f) -= 0.25;
      }
      const auto m = run(yy, xx);
      for (std::size_t tt = 0; tt <= t; ++tt)
        for (std::size_t f = 0; f < bins; ++f)
          leak = std::max(leak, std::abs(m.re(tt, f) - base.re(tt, f)) + std::abs(m.im(tt, f) - base.im(tt, f)));
    }
  }
  v.expect(leak <= 1e-12, "mask causality");

  // streamed samples already returned do not move when later input changes
  const std::size_t hop = cfg.stft.hop, n = 20 * hop;
  AudioBuffer yb = random_audio(rng, n), xb = random_audio(rng, n);
  auto stream = [&](const AudioBuffer& y) {
    std::vector<float> yf(y.samples.begin(), y.samples.end()), xf(xb.samples.begin(), xb.samples.end()), out;
    session.reset();
    for (std::size_t i = 0; i < n; i += hop) {
      auto b = session.push(yf.data() + i, xf.data() + i, hop);
      out.insert(out.end(), b.begin(), b.end());
    }
    return out;
  };
  const auto a = stream(yb);
  for (std::size_t i = 10 * hop; i < n; ++i) yb.samples[i] *= -3.0;
  const auto b = stream(yb);
  double sample_leak = 0;
  for (std::size_t i = 0; i < 10 * hop && i < a.size(); ++i) sample_leak = std::max(sample_leak, double(std::abs(a[i] - b[i])));
  v.expect(sample_leak <= 1e-12, "streamed sample causality");

  v.detail << "max |offline - streamed| " << fmt(worst) << ", latency " << latency << " samples ("
           << fmt(1000.0 * latency / kSampleRate) << " ms), causal leak " << fmt(leak) << " / "
           << fmt(sample_leak);
}

void toy_training(Verdict& v) {
  ToyTrainOptions opts;  // full-size model, 50 steps, lr 1e-3, 8 one-second examples
  const auto t0 = Clock::now();
  std::vector<double> losses;
  const ToyTrainResult r = toy_train(opts, [&](const TrainRecord& rec) { losses.push_back(rec.loss); });
  const double wall = since(t0);
  const double gain = r.final_seg_sisnr - r.initial_seg_sisnr;
  v.expect(losses.size() == 50, "step count");
  v.expect(gain >= 3.0, "improvement");
  v.expect(wall < 900, "wall time");

  // same seed again for the first steps: traces must be bit-identical
  ToyTrainOptions prefix = opts;
  prefix.steps = 5;
  std::vector<double> again;
  toy_train(prefix, [&](const TrainRecord& rec) { again.push_back(rec.loss); });
  bool same = again.size() == 5;
  for (std::size_t i = 0; same && i < again.size(); ++i) same = again[i] == losses[i];
  v.expect(same, "determinism");

  v.detail << "Seg-SiSNR " << fmt(r.initial_seg_sisnr, 4) << " -> " << fmt(r.final_seg_sisnr, 4) << " dB (+"
           << fmt(gain, 4) << "), " << r.lr_halvings << " lr halvings, " << fmt(wall) << " s, 5-step rerun "
           << (same ? "identical" : "differs");
}

void performance(Verdict& v) {
  const ModelConfig cfg = ModelConfig::paper();
  AecModel model(cfg, init_weights(cfg));
  const BenchResult b = bench_rtf(model, 10.0, 1, false, 1, 2);
  v.expect(b.rtf < 1.0, "RTF");
  v.detail << "RTF " << fmt(b.rtf) << " on " << fmt(b.audio_s) << " s, 1 thread";
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no time bound
  std::function<void(Verdict&)> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "shape conformance", 10, shapes},
      {2, "parameter budget", 0, param_budget},
      {3, "kernel oracles", 60, kernel_oracles},
      {4, "gradient suite", 300, gradient_suite},
      {5, "stft round trip", 0, stft_round_trip},
      {6, "ideal CRM", 0, ideal_crm_check},
      {7, "metric identities", 0, metric_identities},
      {8, "scene calibration", 0, scene_calibration},
      {9, "streaming", 0, streaming},
      {10, "toy training", 900, toy_training},
      {11, "performance", 0, performance},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.ok = false;
      v.failures.push_back(std::string("exception: ") + e.what());
    }
    const double wall = since(t0);
    if (c.budget_s > 0 && wall >= c.budget_s) v.expect(false, "over the " + fmt(c.budget_s) + " s budget");
    std::printf("[%s] %2d %s: %s [%.1f s]", v.ok ? "PASS" : "FAIL", c.id, c.name, v.detail.str().c_str(), wall);
    if (!v.ok) {
      std::printf(" failed:");
      for (const auto& f : v.failures) std::printf(" {%s}", f.c_str());
    }
    std::printf("\n");
    std::fflush(stdout);
    failed += !v.ok;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
