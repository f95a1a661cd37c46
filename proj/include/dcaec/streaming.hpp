// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Frame-by-frame inference. Each push takes one hop of microphone and
// far-end samples and returns one hop of output. The output stream is the
// offline estimate delayed by win_len samples: the analysis window has to
// fill, then the deep filter waits one more frame.

#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include "dcaec/model.hpp"

namespace dcaec {

class StreamingSession {
 public:
  /// The model must outlive the session. Sessions share it read-only.
  explicit StreamingSession(const AecModel& model);

  /// Exactly hop samples of each signal. Returns hop output samples.
  std::vector<float> push(const float* y, const float* x, std::size_t n);
  std::vector<float> push(const std::vector<float>& y, const std::vector<float>& x) {
    if (y.size() != x.size()) throw InputError("streaming: mic and far-end block sizes differ");
    return push(y.data(), x.data(), y.size());
  }

  /// Processes the tail with zero lookahead and returns the remaining
  /// samples. After flush the session must be reset before reuse.
  std::vector<float> flush();

  void reset();

  /// Samples between the arrival of an input sample and the push that
  /// returns the corresponding output sample.
  std::size_t latency_samples() const noexcept { return stream_delay() + hop_; }
  /// Offset of the estimate inside the pushed output stream.
  std::size_t stream_delay() const noexcept { return win_; }

  std::size_t frames_processed() const noexcept { return frames_; }
  std::size_t clamped() const noexcept { return clamped_; }

 private:
  void run_frame(const float* yframe, const float* xframe);
  void finish_frame();
  std::vector<float> take(std::size_t n);

  const AecModel& model_;
  std::size_t hop_, win_, bins_;

  std::vector<float> ybuf_, xbuf_;  // input not yet consumed by a full frame
  std::size_t pushed_ = 0;          // input samples received
  std::size_t frames_ = 0;          // frames through the decoder
  std::size_t finished_ = 0;        // frames synthesized
  bool flushed_ = false;

  nn::LstmState<float> t_re_, t_im_;
  nn::ComplexLstmState<float> clstm_;

  // Three-frame windows for the deep filter, oldest first, each (F).
  std::deque<ComplexPair<float>> dec_, target_, spec_y_;

  std::vector<float> ola_;  // overlap-add accumulator from the next frame start
  std::deque<float> ready_;
  std::size_t emitted_ = 0;  // stream samples returned
  std::size_t clamped_ = 0;
};

/// Runs a whole clip through a session. The clip is zero-padded to a hop
/// multiple and the result is aligned and trimmed to the input length, so it
/// is directly comparable with AecModel::forward.
AudioBuffer stream_process(const AecModel& model, const AudioBuffer& y,
                           const AudioBuffer& x, std::size_t* clamped = nullptr);

}  // namespace dcaec
