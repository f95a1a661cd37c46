// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dcaec/dsp.hpp"

namespace dcaec {

inline constexpr double kMetricEps = 1e-12;

/// kStandard: e = s_hat - s_target. kLiteral: e = s_hat - s.
enum class SiSnrMode { kStandard, kLiteral };

/// Raised when a metric is undefined (silent reference, every chunk silent).
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct ChunkPlan {
  std::vector<std::size_t> chunk_counts{1, 10, 20};
  /// Chunks whose mean square is below this level are skipped.
  double min_ref_energy_dbfs = -60.0;

  static ChunkPlan paper() { return {}; }
  static ChunkPlan single() { return {{1}, -60.0}; }
  void validate(std::size_t n_samples) const;
};

double si_snr(const AudioBuffer& s_hat, const AudioBuffer& s,
              SiSnrMode mode = SiSnrMode::kStandard);

struct SegSiSnrReport {
  double total_db = 0;             // sum over chunk counts
  std::vector<double> per_count;   // mean over included chunks, per count
  std::vector<std::size_t> included;
};

SegSiSnrReport seg_sisnr_report(const AudioBuffer& s_hat, const AudioBuffer& s,
                                const ChunkPlan& plan = ChunkPlan::paper(),
                                SiSnrMode mode = SiSnrMode::kStandard);
double seg_sisnr(const AudioBuffer& s_hat, const AudioBuffer& s,
                 const ChunkPlan& plan = ChunkPlan::paper(),
                 SiSnrMode mode = SiSnrMode::kStandard);

/// 10 log10(sum y^2 / sum s_hat^2); +inf when s_hat is silent.
double erle(const AudioBuffer& y, const AudioBuffer& s_hat);

/// 10 log10(sum a^2 / sum b^2); -inf when a is silent, throws when b is.
double measure_ratio(const AudioBuffer& a, const AudioBuffer& b);
double measure_ratio(const double* a, const double* b, std::size_t n);

// Raw-pointer forms used by the training objective. `grad`, when given,
// receives d(value)/d(s_hat).
template <typename T>
double si_snr_raw(const T* s_hat, const T* s, std::size_t n, SiSnrMode mode,
                  T* grad = nullptr);

/// Returns false (and leaves value/grad at zero) when every chunk is silent.
template <typename T>
bool seg_sisnr_raw(const T* s_hat, const T* s, std::size_t n,
                   const ChunkPlan& plan, SiSnrMode mode, double* value,
                   T* grad = nullptr);

}  // namespace dcaec
