// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/streaming.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dcaec {

namespace {

using CP = ComplexPair<float>;

void require_finite(const CP& v, const char* layer) {
  if (!all_finite(v.re) || !all_finite(v.im)) {
    throw NumericError(std::string("non-finite values in ") + layer + " (streaming)");
  }
}

CP layer(const CP& x, const ComplexLayerParams<float>& l, const nn::ConvSpec& spec,
         const char* name) {
  CP y = nn::complex_conv2d(x, l.conv, spec);
  if (!l.alpha_re.empty()) {
    y.re = nn::prelu(y.re, l.alpha_re);
    y.im = nn::prelu(y.im, l.alpha_im);
  }
  require_finite(y, name);
  return y;
}

// Stacks three (1, 1, F) frames into (1, 3, F).
CP stack3(const std::deque<CP>& w) {
  const std::size_t bins = w[0].re.size();
  CP out(Shape{1, 3, bins});
  for (std::size_t k = 0; k < 3; ++k) {
    std::copy_n(w[k].re.data(), bins, out.re.data() + k * bins);
    std::copy_n(w[k].im.data(), bins, out.im.data() + k * bins);
  }
  return out;
}

}  // namespace

StreamingSession::StreamingSession(const AecModel& model)
    : model_(model),
      hop_(model.config().stft.hop),
      win_(model.config().stft.win_len),
      bins_(model.config().bins()) {
  reset();
}

void StreamingSession::reset() {
  const ModelConfig& cfg = model_.config();
  const auto& p = model_.params();
  ybuf_.clear();
  xbuf_.clear();
  pushed_ = frames_ = finished_ = 0;
  flushed_ = false;
  const std::size_t fenc = cfg.encoded_bins();
  t_re_ = nn::LstmState<float>::zeros(fenc, p.ft_re.t_lstm.hidden_dim);
  t_im_ = nn::LstmState<float>::zeros(fenc, p.ft_im.t_lstm.hidden_dim);
  clstm_ = nn::ComplexLstmState<float>::zeros(p.clstm);
  const CP zero(Shape{1, 1, bins_});
  dec_.assign(1, zero);
  target_.assign(1, zero);
  spec_y_.assign(1, zero);
  ola_.assign(win_, 0.0f);
  ready_.clear();
  emitted_ = 0;
  clamped_ = 0;
}

void StreamingSession::run_frame(const float* yframe, const float* xframe) {
  const ModelConfig& cfg = model_.config();
  const auto& p = model_.params();
  const auto& k = model_.kernels();

  CP in(Shape{2, 1, bins_});
  k.analyze_frame(yframe, in.re.data(), in.im.data());
  k.analyze_frame(xframe, in.re.data() + bins_, in.im.data() + bins_);
  CP y(Shape{1, 1, bins_});
  std::copy_n(in.re.data(), bins_, y.re.data());
  std::copy_n(in.im.data(), bins_, y.im.data());

  CP e1 = layer(in, p.enc1, cfg.enc1(), "c-conv2d_1");
  CP e2 = layer(e1, p.enc2, cfg.enc2(), "c-conv2d_2");
  CP f(nn::ft_lstm_branch<float>(e2.re, p.ft_re, &t_re_),
       nn::ft_lstm_branch<float>(e2.im, p.ft_im, &t_im_));
  require_finite(f, "f-t-lstm");
  CP d2 = layer(f, p.dec2, cfg.dec2(), "c-deconv2d_2");
  CP d1 = layer(d2, p.dec1, cfg.dec1(), "c-deconv2d_1");

  dec_.push_back(d1);
  target_.push_back(cfg.df_target == DeepFilterTarget::kDecoder ? d1 : y);
  spec_y_.push_back(std::move(y));
  ++frames_;
  if (dec_.size() == 3) finish_frame();
}

// Completes the middle frame of the three-frame windows.
void StreamingSession::finish_frame() {
  const ModelConfig& cfg = model_.config();
  const auto& p = model_.params();

  CP coef = nn::complex_conv2d(stack3(dec_), p.df, cfg.deep_filter());
  CP filt3 = nn::deep_filter_apply(coef, stack3(target_));
  CP filt(Shape{1, bins_});
  std::copy_n(filt3.re.data() + bins_, bins_, filt.re.data());
  std::copy_n(filt3.im.data() + bins_, bins_, filt.im.data());
  require_finite(filt, "deepfilter");

  CP m = nn::complex_lstm(filt, p.clstm, &clstm_);
  require_finite(m, "c-lstm");

  const CP& y = spec_y_[1];
  std::vector<float> sr(bins_), si(bins_);
  const double limit = cfg.mask_limit;
  for (std::size_t b = 0; b < bins_; ++b) {
    double mr = m.re[b], mi = m.im[b];
    const double r = std::hypot(mr, mi);
    if (r > limit) {
      mr *= limit / r;
      mi *= limit / r;
      ++clamped_;
    }
    sr[b] = static_cast<float>(y.re[b] * mr - y.im[b] * mi);
    si[b] = static_cast<float>(y.re[b] * mi + y.im[b] * mr);
  }
  std::vector<float> frame(win_);
  model_.kernels().synthesize_frame(sr.data(), si.data(), frame.data());
  for (std::size_t i = 0; i < win_; ++i) ola_[i] += frame[i];

  // The next frame starts one hop later; everything before it is final.
  ready_.insert(ready_.end(), ola_.begin(), ola_.begin() + hop_);
  std::copy(ola_.begin() + hop_, ola_.end(), ola_.begin());
  std::fill(ola_.end() - hop_, ola_.end(), 0.0f);

  dec_.pop_front();
  target_.pop_front();
  spec_y_.pop_front();
  ++finished_;
}

std::vector<float> StreamingSession::take(std::size_t n) {
  std::vector<float> out;
  out.reserve(n);
  while (out.size() < n && emitted_ < win_) {
    out.push_back(0.0f);
    ++emitted_;
  }
  while (out.size() < n) {
    if (ready_.empty()) throw std::logic_error("streaming: output underrun");
    out.push_back(ready_.front());
    ready_.pop_front();
    ++emitted_;
  }
  return out;
}

std::vector<float> StreamingSession::push(const float* y, const float* x, std::size_t n) {
  if (flushed_) throw std::logic_error("streaming: push after flush without reset");
  if (n != hop_) {
    throw InputError("streaming: expected blocks of " + std::to_string(hop_) +
                     " samples, got " + std::to_string(n));
  }
  ybuf_.insert(ybuf_.end(), y, y + n);
  xbuf_.insert(xbuf_.end(), x, x + n);
  pushed_ += n;
  while (ybuf_.size() >= win_) {
    run_frame(ybuf_.data(), xbuf_.data());
    ybuf_.erase(ybuf_.begin(), ybuf_.begin() + hop_);
    xbuf_.erase(xbuf_.begin(), xbuf_.begin() + hop_);
  }
  return take(hop_);
}

std::vector<float> StreamingSession::flush() {
  if (flushed_) return {};
  flushed_ = true;
  if (pushed_ == 0) return {};
  const std::size_t total = model_.config().stft.frames_for(pushed_);
  std::vector<float> yf(win_), xf(win_);
  while (frames_ < total) {
    std::fill(yf.begin(), yf.end(), 0.0f);
    std::fill(xf.begin(), xf.end(), 0.0f);
    const std::size_t m = std::min(win_, ybuf_.size());
    std::copy_n(ybuf_.begin(), m, yf.begin());
    std::copy_n(xbuf_.begin(), m, xf.begin());
    run_frame(yf.data(), xf.data());
    const std::size_t drop = std::min(hop_, ybuf_.size());
    ybuf_.erase(ybuf_.begin(), ybuf_.begin() + drop);
    xbuf_.erase(xbuf_.begin(), xbuf_.begin() + drop);
  }
  // The last frame sees zeros one frame ahead.
  const CP zero(Shape{1, 1, bins_});
  dec_.push_back(zero);
  target_.push_back(zero);
  spec_y_.push_back(zero);
  finish_frame();
  ready_.insert(ready_.end(), ola_.begin(), ola_.end() - hop_);
  // Stream length is the input length plus the delay.
  return take(pushed_ + win_ - emitted_);
}

AudioBuffer stream_process(const AecModel& model, const AudioBuffer& y,
                           const AudioBuffer& x, std::size_t* clamped) {
  require_processing_rate(y);
  require_processing_rate(x);
  const std::size_t n = std::max(y.size(), x.size());
  AudioBuffer out = AudioBuffer::zeros(n, y.sample_rate);
  if (n == 0) return out;
  StreamingSession session(model);
  const std::size_t hop = model.config().stft.hop;
  const std::size_t padded = (n + hop - 1) / hop * hop;
  std::vector<float> yf(padded, 0.0f), xf(padded, 0.0f);
  std::copy(y.samples.begin(), y.samples.end(), yf.begin());
  std::copy(x.samples.begin(), x.samples.end(), xf.begin());
  std::vector<float> stream;
  stream.reserve(padded + session.stream_delay());
  for (std::size_t i = 0; i < padded; i += hop) {
    auto block = session.push(yf.data() + i, xf.data() + i, hop);
    stream.insert(stream.end(), block.begin(), block.end());
  }
  auto tail = session.flush();
  stream.insert(stream.end(), tail.begin(), tail.end());
  const std::size_t d = session.stream_delay();
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = stream[d + i];
  if (clamped) *clamped = session.clamped();
  return out;
}

}  // namespace dcaec
