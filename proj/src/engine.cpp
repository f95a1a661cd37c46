// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/engine.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include <json.hpp>

#include "dcaec/metrics.hpp"
#include "dcaec/scene.hpp"
#include "dcaec/streaming.hpp"

namespace dcaec {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

ProcessResult process_clip(const AecModel& model, const AudioBuffer& mic,
                           const AudioBuffer& farend, bool streaming) {
  require_processing_rate(mic);
  require_processing_rate(farend);
  AudioBuffer x = AudioBuffer::zeros(mic.size());
  std::copy_n(farend.samples.begin(), std::min(mic.size(), farend.size()), x.samples.begin());

  ProcessResult r;
  const auto t0 = Clock::now();
  if (streaming) {
    r.s_hat = stream_process(model, mic, x, &r.clamped);
  } else {
    AecModel::Output o = model.forward(mic, x);
    r.s_hat = std::move(o.s_hat);
    r.clamped = o.clamped;
  }
  r.wall_s = seconds_since(t0);
  r.s_hat.samples.resize(mic.size(), 0.0);
  for (double v : r.s_hat.samples) {
    if (!std::isfinite(v)) throw NumericError("process: non-finite output sample");
  }
  return r;
}

std::string MetricsReport::json() const {
  nlohmann::ordered_json j;
  j["si_snr_db"] = finite_or_null(si_snr_db);
  nlohmann::ordered_json seg;
  for (std::size_t i = 0; i < chunk_counts.size(); ++i) {
    seg[std::to_string(chunk_counts[i])] = finite_or_null(seg_sisnr_db[i]);
  }
  j["seg_sisnr_db"] = seg;
  j["seg_sisnr_total_db"] = finite_or_null(seg_sisnr_total_db);
  j["erle_db"] = finite_or_null(erle_db);
  return j.dump();
}

MetricsReport compute_metrics(const AudioBuffer& est, const AudioBuffer& ref,
                              const AudioBuffer& mic) {
  if (est.size() != ref.size() || est.size() != mic.size()) {
    throw InputError("metrics: lengths differ (est " + std::to_string(est.size()) + ", ref " +
                     std::to_string(ref.size()) + ", mic " + std::to_string(mic.size()) + ")");
  }
  MetricsReport m;
  const ChunkPlan plan = ChunkPlan::paper();
  try {
    m.si_snr_db = si_snr(est, ref);
    SegSiSnrReport seg = seg_sisnr_report(est, ref, plan);
    m.chunk_counts = plan.chunk_counts;
    m.seg_sisnr_db = seg.per_count;
    m.seg_sisnr_total_db = seg.total_db;
  } catch (const MetricError& e) {
    throw InputError(std::string("metrics: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("metrics: ") + e.what());
  }
  m.erle_db = erle(mic, est);
  return m;
}

std::string BenchResult::json() const {
  nlohmann::ordered_json j;
  j["audio_s"] = audio_s;
  j["wall_s"] = wall_s;
  j["rtf"] = rtf;
  j["latency_samples"] = latency_samples;
  j["latency_ms"] = 1000.0 * static_cast<double>(latency_samples) / kSampleRate;
  j["threads"] = threads;
  j["streaming"] = streaming;
  return j.dump();
}

BenchResult bench_rtf(const AecModel& model, double seconds, std::uint64_t seed,
                      bool streaming, int threads, int repeats) {
  if (!(seconds > 0)) throw InputError("bench: seconds must be positive");
  if (threads < 1 || repeats < 1) throw InputError("bench: threads and repeats must be >= 1");
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  std::mt19937_64 rng(seed);
  AudioBuffer s = synthetic_speech(n, rng);
  AudioBuffer x = synthetic_speech(n, rng);
  AudioBuffer y = AudioBuffer::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    y.samples[i] = s.samples[i] + (i >= 64 ? 0.6 * x.samples[i - 64] : 0.0);
  }

  const int saved = omp_get_max_threads();
  omp_set_num_threads(threads);
  BenchResult b;
  b.audio_s = static_cast<double>(n) / kSampleRate;
  b.threads = threads;
  b.streaming = streaming;
  b.latency_samples = StreamingSession(model).latency_samples();
  b.wall_s = std::numeric_limits<double>::infinity();
  try {
    for (int r = 0; r < repeats; ++r) b.wall_s = std::min(b.wall_s, process_clip(model, y, x, streaming).wall_s);
  } catch (...) {
    omp_set_num_threads(saved);
    throw;
  }
  omp_set_num_threads(saved);
  b.rtf = b.wall_s / b.audio_s;
  return b;
}

}  // namespace dcaec
