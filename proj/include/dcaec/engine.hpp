// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Whole-clip processing, metric reports and the RTF benchmark shared by the
// command line tool and the acceptance run.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcaec/model.hpp"

namespace dcaec {

inline constexpr const char* kToolVersion = "0.1.0";

struct ProcessResult {
  AudioBuffer s_hat;  // same length as the mic signal
  std::size_t clamped = 0;
  double wall_s = 0;
};

/// Runs the model over a clip. The far end is cut or zero-padded to the mic
/// length. `streaming` feeds hop-sized blocks through a StreamingSession.
ProcessResult process_clip(const AecModel& model, const AudioBuffer& mic,
                           const AudioBuffer& farend, bool streaming);

struct MetricsReport {
  double si_snr_db = 0;
  std::vector<std::size_t> chunk_counts;
  std::vector<double> seg_sisnr_db;  // per chunk count
  double seg_sisnr_total_db = 0;
  double erle_db = 0;

  std::string json() const;
};

/// SI-SNR and Seg-SiSNR of est against ref, ERLE of est against mic. All
/// three must have the same length (InputError otherwise).
MetricsReport compute_metrics(const AudioBuffer& est, const AudioBuffer& ref,
                              const AudioBuffer& mic);

struct BenchResult {
  double audio_s = 0;
  double wall_s = 0;  // best of the repeats
  double rtf = 0;
  std::size_t latency_samples = 0;
  int threads = 1;
  bool streaming = false;

  std::string json() const;
};

/// RTF on a synthetic speech-plus-echo clip. The OpenMP thread count is
/// set to `threads` for the measurement and restored afterwards.
BenchResult bench_rtf(const AecModel& model, double seconds, std::uint64_t seed,
                      bool streaming = false, int threads = 1, int repeats = 1);

}  // namespace dcaec
