// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Adam, the plateau learning-rate schedule and the desk-scale training loop.

#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dcaec/model.hpp"
#include "dcaec/scene.hpp"

namespace dcaec {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig cfg;
  std::size_t step = 0;
  std::map<std::string, Tensor<T>> m, v;  // created on first use
};

template <typename T>
using ParamRefs = std::vector<std::pair<std::string, Tensor<T>*>>;

/// One bias-corrected Adam update. Every parameter needs a gradient of the
/// same shape (ShapeError otherwise).
template <typename T>
void adam_step(const ParamRefs<T>& params, const std::map<std::string, Tensor<T>>& grads,
               AdamState<T>& state);

/// Halves the learning rate after `patience` evaluations in a row without a
/// new best (higher is better).
class PlateauScheduler {
 public:
  explicit PlateauScheduler(std::size_t patience = 2, double factor = 0.5)
      : patience_(patience), factor_(factor) {}

  /// Returns true when lr was reduced.
  bool observe(double metric, double& lr);

  std::size_t stale() const noexcept { return stale_; }
  std::optional<double> best() const noexcept {
    return seen_ ? std::optional<double>(best_) : std::nullopt;
  }

 private:
  std::size_t patience_;
  double factor_;
  double best_ = 0;
  bool seen_ = false;
  std::size_t stale_ = 0;
};

/// Fixed-capacity blocking FIFO for a producer/consumer hand-off.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : cap_(capacity ? capacity : 1) {}

  /// Blocks while full. Returns false if the queue was closed.
  bool push(T item) {
    std::unique_lock lk(mu_);
    not_full_.wait(lk, [&] { return closed_ || q_.size() < cap_; });
    if (closed_) return false;
    q_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  /// Blocks while empty; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lk(mu_);
    not_empty_.wait(lk, [&] { return closed_ || !q_.empty(); });
    if (q_.empty()) return std::nullopt;
    T item = std::move(q_.front());
    q_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lk(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

  std::size_t capacity() const noexcept { return cap_; }

 private:
  std::size_t cap_;
  std::deque<T> q_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
};

// ---------------------------------------------------------------------------
// Training

struct TrainExample {
  std::vector<float> y, x, s;
};

struct ToyTrainOptions {
  ModelConfig model = ModelConfig::paper();  // model.seed seeds the init
  std::size_t steps = 50;
  double lr = 1e-3;
  std::size_t examples = 8;    // each step averages over all of them
  std::size_t validation = 2;  // held out, drive the plateau schedule
  std::size_t eval_every = 10;
  double chunk_seconds = 1.0;
  std::uint64_t seed = 1;  // scenes
  SceneRanges ranges;
  std::size_t queue_capacity = 2;
};

struct TrainRecord {
  std::size_t step = 0;   // 1-based
  double loss = 0;        // mean -Seg-SiSNR over the step's examples
  double lr = 0;          // used for this step
  double wall_s = 0;      // since the start of training
  std::optional<double> val_seg_sisnr;

  /// One JSON object, no newline.
  std::string json() const;
};

struct ToyTrainResult {
  std::vector<TrainRecord> log;
  /// Mean Seg-SiSNR (dB, summed over chunk counts) on the training
  /// examples before the first and after the last update.
  double initial_seg_sisnr = 0;
  double final_seg_sisnr = 0;
  std::size_t lr_halvings = 0;
  WeightStore weights;
};

/// Training and validation examples, made on a producer thread and handed
/// over through a BoundedQueue. Order and content depend only on opts.
std::vector<TrainExample> make_examples(const ToyTrainOptions& opts, std::size_t count);

/// Mean Seg-SiSNR of the parameters over the examples, no gradients.
double mean_seg_sisnr(const ModelConfig& cfg, const NetworkParams<float>& p,
                      const std::vector<TrainExample>& examples);

/// Adam on the negative Seg-SiSNR. A NaN anywhere raises NumericError
/// naming the step. `on_record` sees every log record as it is produced.
ToyTrainResult toy_train(const ToyTrainOptions& opts,
                         const std::function<void(const TrainRecord&)>& on_record = {});

}  // namespace dcaec
