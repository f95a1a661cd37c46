// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace dcaec {

namespace {

constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

void require_same_length(const AudioBuffer& a, const AudioBuffer& b,
                         const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": length mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  }
}

double energy(const double* x, std::size_t n) {
  double e = 0;
  for (std::size_t i = 0; i < n; ++i) e += x[i] * x[i];
  return e;
}

// Chunk [begin, end) for chunk i of c; the remainder goes to the last one.
std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t n, std::size_t c,
                                                 std::size_t i) {
  const std::size_t len = n / c;
  return {i * len, i + 1 == c ? n : (i + 1) * len};
}

}  // namespace

void ChunkPlan::validate(std::size_t n_samples) const {
  if (chunk_counts.empty()) throw std::invalid_argument("chunk plan: empty");
  for (std::size_t i = 0; i < chunk_counts.size(); ++i) {
    if (chunk_counts[i] == 0 || chunk_counts[i] > n_samples) {
      throw std::invalid_argument("chunk plan: count " +
                                  std::to_string(chunk_counts[i]) +
                                  " invalid for " + std::to_string(n_samples) +
                                  " samples");
    }
    if (i > 0 && chunk_counts[i] <= chunk_counts[i - 1]) {
      throw std::invalid_argument("chunk plan: counts must be sorted, distinct");
    }
  }
}

template <typename T>
double si_snr_raw(const T* s_hat, const T* s, std::size_t n, SiSnrMode mode,
                  T* grad) {
  double ss = 0, hs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ss += double(s[i]) * double(s[i]);
    hs += double(s_hat[i]) * double(s[i]);
  }
  if (ss <= 0) throw MetricError("si-snr: reference has zero energy");
  const double alpha = hs / ss;
  const double target_e = alpha * alpha * ss;
  double err_e = 0, es = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ref = mode == SiSnrMode::kStandard ? alpha * s[i] : double(s[i]);
    const double e = double(s_hat[i]) - ref;
    err_e += e * e;
    es += e * double(s[i]);
  }
  const double value = 10.0 * std::log10(target_e / (err_e + kMetricEps));
  if (grad) {
    const double a = 2.0 * alpha / target_e;
    const double b = 2.0 / (err_e + kMetricEps);
    const double proj = mode == SiSnrMode::kStandard ? es / ss : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ref = mode == SiSnrMode::kStandard ? alpha * s[i] : double(s[i]);
      const double e = double(s_hat[i]) - ref;
      grad[i] = static_cast<T>(kDbPerNeper *
                               (a * s[i] - b * (e - proj * double(s[i]))));
    }
  }
  return value;
}

template <typename T>
bool seg_sisnr_raw(const T* s_hat, const T* s, std::size_t n,
                   const ChunkPlan& plan, SiSnrMode mode, double* value,
                   T* grad) {
  plan.validate(n);
  const double floor_ms = std::pow(10.0, plan.min_ref_energy_dbfs / 10.0);
  *value = 0;
  if (grad) std::fill(grad, grad + n, T(0));
  std::vector<T> g;
  for (std::size_t c : plan.chunk_counts) {
    std::vector<std::pair<std::size_t, std::size_t>> kept;
    for (std::size_t i = 0; i < c; ++i) {
      auto [b, e] = chunk_bounds(n, c, i);
      double ref_e = 0;
      for (std::size_t k = b; k < e; ++k) ref_e += double(s[k]) * double(s[k]);
      if (ref_e >= floor_ms * static_cast<double>(e - b) && ref_e > 0) {
        kept.emplace_back(b, e);
      }
    }
    if (kept.empty()) {
      *value = 0;
      if (grad) std::fill(grad, grad + n, T(0));
      return false;
    }
    const double w = 1.0 / static_cast<double>(kept.size());
    for (auto [b, e] : kept) {
      g.assign(e - b, T(0));
      *value += w * si_snr_raw(s_hat + b, s + b, e - b, mode,
                               grad ? g.data() : nullptr);
      if (grad) {
        for (std::size_t k = b; k < e; ++k) grad[k] += static_cast<T>(w * g[k - b]);
      }
    }
  }
  return true;
}

double si_snr(const AudioBuffer& s_hat, const AudioBuffer& s, SiSnrMode mode) {
  require_same_length(s_hat, s, "si-snr");
  return si_snr_raw(s_hat.samples.data(), s.samples.data(), s.size(), mode);
}

SegSiSnrReport seg_sisnr_report(const AudioBuffer& s_hat, const AudioBuffer& s,
                                const ChunkPlan& plan, SiSnrMode mode) {
  require_same_length(s_hat, s, "seg-sisnr");
  SegSiSnrReport r;
  for (std::size_t c : plan.chunk_counts) {
    double v = 0;
    ChunkPlan one{{c}, plan.min_ref_energy_dbfs};
    if (!seg_sisnr_raw(s_hat.samples.data(), s.samples.data(), s.size(), one,
                       mode, &v)) {
      throw MetricError("seg-sisnr: every chunk of the reference is silent");
    }
    r.per_count.push_back(v);
    r.total_db += v;
    const double floor_ms = std::pow(10.0, plan.min_ref_energy_dbfs / 10.0);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < c; ++i) {
      auto [b, e] = chunk_bounds(s.size(), c, i);
      const double ref_e = energy(s.samples.data() + b, e - b);
      if (ref_e >= floor_ms * static_cast<double>(e - b) && ref_e > 0) ++kept;
    }
    r.included.push_back(kept);
  }
  return r;
}

double seg_sisnr(const AudioBuffer& s_hat, const AudioBuffer& s,
                 const ChunkPlan& plan, SiSnrMode mode) {
  return seg_sisnr_report(s_hat, s, plan, mode).total_db;
}

double erle(const AudioBuffer& y, const AudioBuffer& s_hat) {
  require_same_length(y, s_hat, "erle");
  const double out = energy(s_hat.samples.data(), s_hat.size());
  if (out == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(energy(y.samples.data(), y.size()) / out);
}

double measure_ratio(const double* a, const double* b, std::size_t n) {
  const double eb = energy(b, n);
  if (eb == 0) throw MetricError("ratio: denominator signal has zero energy");
  const double ea = energy(a, n);
  if (ea == 0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ea / eb);
}

double measure_ratio(const AudioBuffer& a, const AudioBuffer& b) {
  require_same_length(a, b, "ratio");
  return measure_ratio(a.samples.data(), b.samples.data(), a.size());
}

template double si_snr_raw(const float*, const float*, std::size_t, SiSnrMode,
                           float*);
template double si_snr_raw(const double*, const double*, std::size_t,
                           SiSnrMode, double*);
template bool seg_sisnr_raw(const float*, const float*, std::size_t,
                            const ChunkPlan&, SiSnrMode, double*, float*);
template bool seg_sisnr_raw(const double*, const double*, std::size_t,
                            const ChunkPlan&, SiSnrMode, double*, double*);

}  // namespace dcaec
