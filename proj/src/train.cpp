// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/train.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include <json.hpp>

#include "dcaec/autograd.hpp"

namespace dcaec {

template <typename T>
void adam_step(const ParamRefs<T>& params, const std::map<std::string, Tensor<T>>& grads,
               AdamState<T>& st) {
  for (const auto& [name, p] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ShapeError("adam: no gradient for " + name);
    if (!it->second.same_shape(*p)) {
      throw ShapeError("adam: gradient for " + name + " is " + to_string(it->second.shape()) +
                       ", parameter is " + to_string(p->shape()));
    }
  }
  ++st.step;
  const AdamConfig& c = st.cfg;
  const double bc1 = 1 - std::pow(c.beta1, static_cast<double>(st.step));
  const double bc2 = 1 - std::pow(c.beta2, static_cast<double>(st.step));
  for (const auto& [name, p] : params) {
    const Tensor<T>& g = grads.at(name);
    auto [mi, fresh_m] = st.m.try_emplace(name, p->shape());
    auto [vi, fresh_v] = st.v.try_emplace(name, p->shape());
    Tensor<T>& m = mi->second;
    Tensor<T>& v = vi->second;
    if (!m.same_shape(*p) || !v.same_shape(*p)) throw ShapeError("adam: moment shape changed for " + name);
    for (std::size_t i = 0; i < p->size(); ++i) {
      const double gi = g[i];
      const double mn = c.beta1 * m[i] + (1 - c.beta1) * gi;
      const double vn = c.beta2 * v[i] + (1 - c.beta2) * gi * gi;
      m[i] = static_cast<T>(mn);
      v[i] = static_cast<T>(vn);
      (*p)[i] -= static_cast<T>(c.lr * (mn / bc1) / (std::sqrt(vn / bc2) + c.eps));
    }
  }
}

template void adam_step(const ParamRefs<float>&, const std::map<std::string, Tensor<float>>&,
                        AdamState<float>&);
template void adam_step(const ParamRefs<double>&, const std::map<std::string, Tensor<double>>&,
                        AdamState<double>&);

bool PlateauScheduler::observe(double metric, double& lr) {
  if (!seen_ || metric > best_) {
    best_ = metric;
    seen_ = true;
    stale_ = 0;
    return false;
  }
  if (++stale_ < patience_) return false;
  lr *= factor_;
  stale_ = 0;
  return true;
}

std::string TrainRecord::json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["loss"] = loss;
  j["lr"] = lr;
  j["wall_s"] = wall_s;
  if (val_seg_sisnr) j["val_seg_sisnr"] = *val_seg_sisnr;
  return j.dump();
}

// ---------------------------------------------------------------------------

std::vector<TrainExample> make_examples(const ToyTrainOptions& opts, std::size_t count) {
  if (!(opts.chunk_seconds > 0)) throw InputError("training: chunk_seconds must be positive");
  const std::size_t n = static_cast<std::size_t>(std::lround(opts.chunk_seconds * kSampleRate));
  SceneRanges ranges = opts.ranges;
  ranges.seconds = opts.chunk_seconds;
  ranges.validate();
  const Corpus corpus = Corpus::synthetic(6, opts.chunk_seconds + 0.5, opts.seed);

  BoundedQueue<TrainExample> queue(opts.queue_capacity);
  std::exception_ptr failure;
  std::thread producer([&] {
    try {
      for (std::size_t i = 0; i < count; ++i) {
        SceneExample ex = synthesize(sample_recipe(opts.seed, i, ranges, corpus.sizes()), corpus);
        TrainExample t;
        auto crop = [n](const AudioBuffer& a) {
          std::vector<float> out(n, 0.0f);
          for (std::size_t k = 0; k < std::min(n, a.size()); ++k) out[k] = static_cast<float>(a.samples[k]);
          return out;
        };
        t.y = crop(ex.y);
        t.x = crop(ex.x);
        t.s = crop(ex.s);
        if (!queue.push(std::move(t))) break;
      }
    } catch (...) {
      failure = std::current_exception();
    }
    queue.close();
  });
  std::vector<TrainExample> out;
  while (auto e = queue.pop()) out.push_back(std::move(*e));
  producer.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace {

// -Seg-SiSNR of one example; gradients go into the bound parameters.
double example_loss(ag::Tape<float>& tape, const ModelConfig& cfg, const NetworkParams<float>& p,
                    const SpectralKernels<float>& k, const TrainExample& ex) {
  const std::size_t n = ex.y.size();
  Tensor<float> re, im;
  k.analyze(ex.y.data(), n, re, im);
  ag::CVar yv{tape.constant(std::move(re), "y.re"), tape.constant(std::move(im), "y.im")};
  k.analyze(ex.x.data(), n, re, im);
  ag::CVar xv{tape.constant(std::move(re), "x.re"), tape.constant(std::move(im), "x.im")};
  GraphOutputs g = build_graph(tape, p, cfg, yv, xv);
  ag::Var sig = ag::istft(tape, g.estimate, k, n);
  ag::Var loss = ag::neg_seg_sisnr(tape, sig, ex.s, ChunkPlan::paper(), SiSnrMode::kStandard);
  if (tape.grad_enabled()) tape.backward(loss);
  return tape.value(loss)[0];
}

}  // namespace

double mean_seg_sisnr(const ModelConfig& cfg, const NetworkParams<float>& p,
                      const std::vector<TrainExample>& examples) {
  if (examples.empty()) throw InputError("mean_seg_sisnr: no examples");
  const SpectralKernels<float> k(cfg.stft);
  double sum = 0;
  for (const auto& ex : examples) {
    ag::Tape<float> tape(false);
    sum -= example_loss(tape, cfg, p, k, ex);
  }
  return sum / static_cast<double>(examples.size());
}

ToyTrainResult toy_train(const ToyTrainOptions& opts,
                         const std::function<void(const TrainRecord&)>& on_record) {
  if (opts.examples == 0) throw InputError("training: need at least one example");
  if (opts.lr < 0) throw InputError("training: negative learning rate");
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig& cfg = opts.model;

  std::vector<TrainExample> all = make_examples(opts, opts.examples + opts.validation);
  std::vector<TrainExample> train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(opts.examples));
  std::vector<TrainExample> val(all.begin() + static_cast<std::ptrdiff_t>(opts.examples), all.end());

  NetworkParams<float> p = from_store<float>(cfg, init_weights(cfg));
  ParamRefs<float> refs;
  p.visit([&](const std::string& name, Tensor<float>& t) { refs.emplace_back(name, &t); });
  const SpectralKernels<float> k(cfg.stft);

  AdamState<float> adam;
  adam.cfg.lr = opts.lr;
  PlateauScheduler sched;
  ToyTrainResult res;
  const float inv = 1.0f / static_cast<float>(train.size());

  for (std::size_t step = 1; step <= opts.steps; ++step) {
    std::map<std::string, Tensor<float>> grads;
    double loss = 0;
    try {
      for (const auto& ex : train) {
        ag::Tape<float> tape;
        for (auto& [name, t] : refs) tape.bind(name, *t);
        loss += example_loss(tape, cfg, p, k, ex);
        for (auto& [name, g] : tape.gradients()) {
          g *= inv;
          auto [it, fresh] = grads.try_emplace(name, std::move(g));
          if (!fresh) it->second += g;
        }
      }
    } catch (const NumericError& e) {
      throw NumericError("training diverged at step " + std::to_string(step) + ": " + e.what());
    }
    loss /= static_cast<double>(train.size());
    if (!std::isfinite(loss)) throw NumericError("training diverged at step " + std::to_string(step) + ": loss is not finite");
    for (const auto& [name, g] : grads) {
      for (float v : g.values()) {
        if (!std::isfinite(v)) throw NumericError("training diverged at step " + std::to_string(step) + ": gradient of " + name);
      }
    }
    if (step == 1) res.initial_seg_sisnr = -loss;

    TrainRecord rec;
    rec.step = step;
    rec.loss = loss;
    rec.lr = adam.cfg.lr;
    adam_step(refs, grads, adam);

    if (!val.empty() && opts.eval_every && step % opts.eval_every == 0) {
      rec.val_seg_sisnr = mean_seg_sisnr(cfg, p, val);
      res.lr_halvings += sched.observe(*rec.val_seg_sisnr, adam.cfg.lr);
    }
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.log.push_back(rec);
    if (on_record) on_record(rec);
  }
  res.final_seg_sisnr = mean_seg_sisnr(cfg, p, train);
  if (opts.steps == 0) res.initial_seg_sisnr = res.final_seg_sisnr;
  res.weights = to_store(cfg, p);
  return res;
}

}  // namespace dcaec
