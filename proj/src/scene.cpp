// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "dcaec/io.hpp"

namespace dcaec {

namespace {

double sq(double v) { return v * v; }

bool inside(const Vec3& p, const Vec3& dims, double margin) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > margin && p[i] < dims[i] - margin)) return false;
  }
  return true;
}

double dist(const Vec3& a, const Vec3& b) {
  return std::sqrt(sq(a[0] - b[0]) + sq(a[1] - b[1]) + sq(a[2] - b[2]));
}

std::string vec_str(const Vec3& v) {
  std::ostringstream os;
  os << "(" << v[0] << ", " << v[1] << ", " << v[2] << ")";
  return os.str();
}

double energy(const AudioBuffer& x, const Region& r) {
  double e = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (r[i]) e += x.samples[i] * x.samples[i];
  }
  return e;
}

AudioBuffer fit(const AudioBuffer& x, std::size_t n) {
  AudioBuffer out = AudioBuffer::zeros(n);
  std::copy_n(x.samples.begin(), std::min(n, x.size()), out.samples.begin());
  return out;
}

AudioBuffer convolve_fit(const AudioBuffer& x, const AudioBuffer& h, std::size_t n) {
  std::vector<double> y = fft_convolve(x.samples, h.samples);
  y.resize(n, 0.0);
  return AudioBuffer(std::move(y));
}

double peak(const AudioBuffer& x) {
  double m = 0;
  for (double v : x.samples) m = std::max(m, std::abs(v));
  return m;
}

void scale(AudioBuffer& x, double g) {
  for (auto& v : x.samples) v *= g;
}

Region shifted(const Region& r, std::size_t delay) {
  Region out(delay, 0);
  out.insert(out.end(), r.begin(), r.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Room

double RoomSpec::surface() const {
  return 2 * (dims[0] * dims[1] + dims[0] * dims[2] + dims[1] * dims[2]);
}

double RoomSpec::distance() const { return dist(source, mic); }

double RoomSpec::wall_absorption() const {
  if (absorption) return *absorption;
  return 0.161 * volume() / (surface() * rt60);
}

void RoomSpec::validate() const {
  for (double d : dims) {
    if (!(d > 0)) throw InputError("room: non-positive dimension");
  }
  if (!inside(source, dims, 0) || !inside(mic, dims, 0)) {
    throw InputError("room: source " + vec_str(source) + " or mic " + vec_str(mic) +
                     " is not strictly inside " + vec_str(dims));
  }
  if (!absorption && !(rt60 > 0)) throw InputError("room: rt60 must be positive");
  const double a = wall_absorption();
  if (!(a > 0 && a <= 1)) {
    throw InputError("room: wall absorption " + std::to_string(a) +
                     " outside (0, 1]; room size and RT60 are incompatible");
  }
  if (!(c > 0) || !(rir_seconds > 0)) throw InputError("room: bad speed of sound or RIR length");
}

AudioBuffer generate_rir(const RoomSpec& room) {
  room.validate();
  const double fs = kSampleRate;
  const std::size_t taps = static_cast<std::size_t>(std::lround(room.rir_seconds * fs));
  AudioBuffer h = AudioBuffer::zeros(taps);
  const double beta = std::sqrt(1.0 - room.wall_absorption());
  // Paths arriving at or after the last tap are dropped.
  const double max_d = (static_cast<double>(taps) - 0.5) * room.c / fs;

  std::array<int, 3> order;
  for (int i = 0; i < 3; ++i) order[i] = static_cast<int>(std::ceil(max_d / (2 * room.dims[i]))) + 1;
  std::vector<double> beta_pow(2 * (2 * (order[0] + order[1] + order[2]) + 3) + 1);
  for (std::size_t k = 0; k < beta_pow.size(); ++k) beta_pow[k] = std::pow(beta, static_cast<double>(k));

  // Per axis: every image offset (image - mic) with its reflection count.
  struct Axis {
    std::vector<double> off;
    std::vector<int> refl;
  };
  std::array<Axis, 3> ax;
  for (int i = 0; i < 3; ++i) {
    for (int m = -order[i]; m <= order[i]; ++m) {
      for (int p = 0; p <= 1; ++p) {
        const double img = (1 - 2 * p) * room.source[i] + 2 * m * room.dims[i];
        const double off = img - room.mic[i];
        if (std::abs(off) > max_d) continue;
        ax[i].off.push_back(off);
        ax[i].refl.push_back(std::abs(m - p) + std::abs(m));
      }
    }
  }
  const double max_d2 = max_d * max_d;
  for (std::size_t a = 0; a < ax[0].off.size(); ++a) {
    const double dx2 = sq(ax[0].off[a]);
    for (std::size_t b = 0; b < ax[1].off.size(); ++b) {
      const double dxy2 = dx2 + sq(ax[1].off[b]);
      if (dxy2 > max_d2) continue;
      for (std::size_t c = 0; c < ax[2].off.size(); ++c) {
        const double d2 = dxy2 + sq(ax[2].off[c]);
        if (d2 > max_d2) continue;
        const double d = std::sqrt(d2);
        const std::size_t tap = static_cast<std::size_t>(std::lround(d / room.c * fs));
        if (tap >= taps) continue;
        const int k = ax[0].refl[a] + ax[1].refl[b] + ax[2].refl[c];
        h.samples[tap] += beta_pow[k] / (4 * std::numbers::pi * std::max(d, 1e-3));
      }
    }
  }
  if (room.highpass) {
    // y = b1 y1 + b2 y2 + x + a1 x1 + a2 x2
    const double w = 2 * std::numbers::pi * 100.0 / fs, r = std::exp(-w);
    const double b1 = 2 * r * std::cos(w), b2 = -r * r, a1 = -(1 + r), a2 = r;
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (auto& v : h.samples) {
      const double y = b1 * y1 + b2 * y2 + v + a1 * x1 + a2 * x2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
  return h;
}

double schroeder_rt60(const AudioBuffer& rir) {
  const std::size_t n = rir.size();
  std::vector<double> edc(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;) edc[i] = edc[i + 1] + rir.samples[i] * rir.samples[i];
  if (!(edc[0] > 0)) throw InputError("schroeder_rt60: silent impulse response");
  // least squares fit of level (dB) against time over [-5, -25] dB
  double st = 0, sl = 0, stt = 0, stl = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double level = 10 * std::log10(edc[i] / edc[0]);
    if (level > -5) continue;
    if (level < -25) break;
    const double t = static_cast<double>(i) / rir.sample_rate;
    st += t;
    sl += level;
    stt += t * t;
    stl += t * level;
    ++m;
  }
  if (m < 2) throw InputError("schroeder_rt60: decay range too short to fit");
  const double slope = (m * stl - st * sl) / (m * stt - st * st);
  if (!(slope < 0)) throw InputError("schroeder_rt60: decay curve is not decaying");
  return -60.0 / slope;
}

std::size_t first_arrival(const AudioBuffer& rir) {
  for (std::size_t i = 0; i < rir.size(); ++i) {
    if (rir.samples[i] != 0.0) return i;
  }
  return rir.size();
}

// ---------------------------------------------------------------------------
// Regions

Region full_region(std::size_t n) { return Region(n, 1); }

Region activity(const AudioBuffer& x) {
  const std::size_t frame = static_cast<std::size_t>(x.sample_rate) / 50;  // 20 ms
  Region r(x.size(), 0);
  for (std::size_t b = 0; b < x.size(); b += frame) {
    const std::size_t e = std::min(x.size(), b + frame);
    double ms = 0;
    for (std::size_t i = b; i < e; ++i) ms += x.samples[i] * x.samples[i];
    ms /= static_cast<double>(e - b);
    if (ms > 1e-6) std::fill(r.begin() + b, r.begin() + e, 1);
  }
  return r;
}

Region intersect(const Region& a, const Region& b) {
  if (a.size() != b.size()) throw ShapeError("region sizes differ");
  Region r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] && b[i];
  return r;
}

std::size_t region_size(const Region& r) {
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), 1));
}

double region_ratio_db(const AudioBuffer& a, const AudioBuffer& b, const Region& r) {
  if (a.size() != b.size() || r.size() != a.size()) throw ShapeError("region_ratio_db: length mismatch");
  return 10 * std::log10(energy(a, r) / energy(b, r));
}

AudioBuffer mix_at_ratio(const AudioBuffer& target, const AudioBuffer& interferer,
                         double ratio_db, const Region& region) {
  if (target.size() != interferer.size() || region.size() != target.size()) {
    throw ShapeError("mix_at_ratio: length mismatch");
  }
  if (region_size(region) == 0) throw InputError("mix_at_ratio: empty region");
  const double et = energy(target, region), ei = energy(interferer, region);
  if (!(et > 0)) throw InputError("mix_at_ratio: target has no energy in the region");
  if (!(ei > 0)) throw InputError("mix_at_ratio: interferer has no energy in the region");
  const double g = std::sqrt(et / (ei * std::pow(10.0, ratio_db / 10)));
  AudioBuffer out = interferer;
  scale(out, g);
  return out;
}

AudioBuffer mix_at_ratio(const AudioBuffer& target, const AudioBuffer& interferer,
                         double ratio_db, std::size_t begin, std::size_t end) {
  if (begin >= end || end > target.size()) throw InputError("mix_at_ratio: bad region");
  Region r(target.size(), 0);
  std::fill(r.begin() + begin, r.begin() + end, 1);
  return mix_at_ratio(target, interferer, ratio_db, r);
}

// ---------------------------------------------------------------------------
// Ranges

void SceneRanges::validate() const {
  auto range = [](const Range& r, const char* name) {
    if (!(r.lo <= r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) {
      throw InputError(std::string("scene ranges: bad interval for ") + name);
    }
  };
  auto prob = [](double p, const char* name) {
    if (!(p >= 0 && p <= 1)) throw InputError(std::string("scene ranges: probability out of [0,1]: ") + name);
  };
  range(ser_db, "ser_db");
  range(snr_db, "snr_db");
  range(delay_samples, "delay_samples");
  range(dip_db, "dip_db");
  range(peak, "peak");
  range(room_a, "room_a");
  range(room_b, "room_b");
  range(room_h, "room_h");
  range(rt60, "rt60");
  range(distance, "distance");
  prob(p_farend_zero, "p_farend_zero");
  prob(p_noise_zero, "p_noise_zero");
  prob(p_reverb, "p_reverb");
  prob(p_gain_dip, "p_gain_dip");
  if (delay_samples.lo < 0) throw InputError("scene ranges: negative delay");
  if (!(peak.lo > 0 && peak.hi < 1)) throw InputError("scene ranges: peaks must lie in (0, 1)");
  if (!(seconds > 0) || !(dip_seconds > 0)) throw InputError("scene ranges: durations must be positive");
  if (!(rt60.lo > 0) || !(room_a.lo > 0) || !(room_b.lo > 0) || !(room_h.lo > 0)) {
    throw InputError("scene ranges: room extents and rt60 must be positive");
  }
  if (!(distance.lo > 0) || wall_margin < 0) throw InputError("scene ranges: bad distance or margin");
}

namespace {

template <typename F>
void visit_ranges(SceneRanges& r, F&& f) {
  auto range = [&](const std::string& n, Range& v) {
    f(n + "_min", v.lo);
    f(n + "_max", v.hi);
  };
  range("ser_db", r.ser_db);
  range("snr_db", r.snr_db);
  range("delay_samples", r.delay_samples);
  f("p_farend_zero", r.p_farend_zero);
  f("p_noise_zero", r.p_noise_zero);
  f("p_reverb", r.p_reverb);
  f("p_gain_dip", r.p_gain_dip);
  f("dip_seconds", r.dip_seconds);
  range("dip_db", r.dip_db);
  range("peak", r.peak);
  range("room_a", r.room_a);
  range("room_b", r.room_b);
  range("room_h", r.room_h);
  range("rt60", r.rt60);
  range("distance", r.distance);
  f("wall_margin", r.wall_margin);
  f("seconds", r.seconds);
}

}  // namespace

std::string SceneRanges::serialize() const {
  std::ostringstream os;
  os.precision(17);
  SceneRanges copy = *this;
  visit_ranges(copy, [&](const std::string& k, double& v) { os << k << "=" << v << "\n"; });
  return os.str();
}

SceneRanges SceneRanges::parse(const std::string& text) {
  SceneRanges r;
  std::map<std::string, double*> slots;
  visit_ranges(r, [&](const std::string& k, double& v) { slots[k] = &v; });
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("ranges line " + std::to_string(lineno) + ": expected key=value");
    std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    key.erase(key.find_last_not_of(" \t") + 1);
    val.erase(0, val.find_first_not_of(" \t"));
    auto it = slots.find(key);
    if (it == slots.end()) throw InputError("ranges line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != val.size()) {
      throw InputError("ranges line " + std::to_string(lineno) + ": bad number '" + val + "'");
    }
    *it->second = v;
  }
  r.validate();
  return r;
}

// ---------------------------------------------------------------------------
// Recipes

SceneRecipe sample_recipe(std::mt19937_64& rng, const SceneRanges& ranges,
                          const CorpusSizes& sizes) {
  ranges.validate();
  if (sizes.near == 0 || sizes.far == 0 || sizes.noise == 0) throw InputError("corpus is empty");
  auto uni = [&](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  auto flip = [&](double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; };
  auto index = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  SceneRecipe r;
  RoomSpec& room = r.room;
  room.dims = {uni(ranges.room_a), uni(ranges.room_b), uni(ranges.room_h)};
  room.rt60 = uni(ranges.rt60);
  const double m = ranges.wall_margin;
  auto point = [&]() {
    Vec3 p;
    for (int i = 0; i < 3; ++i) {
      if (room.dims[i] <= 2 * m) throw InputError("scene ranges: wall margin leaves no room");
      p[i] = std::uniform_real_distribution<double>(m, room.dims[i] - m)(rng);
    }
    return p;
  };
  auto at_distance = [&](const Vec3& from) {
    for (int tries = 0; tries < 10000; ++tries) {
      Vec3 p = point();
      const double d = dist(p, from);
      if (d >= ranges.distance.lo && d <= ranges.distance.hi) return p;
    }
    throw InputError("scene ranges: no position at the requested distance fits the room");
  };
  room.mic = point();
  room.source = at_distance(room.mic);
  r.loudspeaker = at_distance(room.mic);

  r.ser_db = uni(ranges.ser_db);
  r.snr_db = uni(ranges.snr_db);
  r.delay_samples = std::uniform_int_distribution<std::size_t>(
      static_cast<std::size_t>(std::ceil(ranges.delay_samples.lo)),
      static_cast<std::size_t>(std::floor(ranges.delay_samples.hi)))(rng);
  r.length = static_cast<std::size_t>(std::lround(ranges.seconds * kSampleRate));
  r.farend_zeroed = flip(ranges.p_farend_zero);
  r.noise_zeroed = flip(ranges.p_noise_zero);
  r.reverb_applied = flip(ranges.p_reverb);
  if (flip(ranges.p_gain_dip)) {
    GainDip g;
    g.length = std::min(r.length, static_cast<std::size_t>(std::lround(ranges.dip_seconds * kSampleRate)));
    g.start = std::uniform_int_distribution<std::size_t>(0, r.length - g.length)(rng);
    g.atten_db = uni(ranges.dip_db);
    g.target = flip(0.5) ? DipTarget::kEcho : DipTarget::kFarEnd;
    r.gain_dip = g;
  }
  r.norm_peaks = {uni(ranges.peak), uni(ranges.peak)};
  r.near_clip = index(sizes.near);
  r.far_clip = index(sizes.far);
  r.noise_clip = index(sizes.noise);
  return r;
}

SceneRecipe sample_recipe(std::uint64_t seed, std::size_t index, const SceneRanges& ranges,
                          const CorpusSizes& sizes) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  const std::uint64_t stream = rng();
  rng.seed(stream);
  SceneRecipe r = sample_recipe(rng, ranges, sizes);
  r.rng_seed = stream;
  return r;
}

// ---------------------------------------------------------------------------
// Corpus

AudioBuffer synthetic_speech(std::size_t n, std::mt19937_64& rng) {
  auto uni = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  AudioBuffer out = AudioBuffer::zeros(n);
  const double fs = kSampleRate;
  std::size_t pos = static_cast<std::size_t>(uni(0.0, 0.2) * fs);
  while (pos < n) {
    const std::size_t len = static_cast<std::size_t>(uni(0.12, 0.35) * fs);
    const double f0 = uni(90, 240), glide = uni(-0.2, 0.2);
    const double f1 = uni(300, 900), f2 = uni(900, 2500);
    const double amp = uni(0.3, 1.0);
    const int harmonics = static_cast<int>(3800 / f0);
    std::vector<double> gain(harmonics + 1), phase(harmonics + 1);
    for (int k = 1; k <= harmonics; ++k) {
      const double f = k * f0;
      gain[k] = (std::exp(-sq((f - f1) / 150)) + 0.6 * std::exp(-sq((f - f2) / 250)) + 0.05) /
                std::sqrt(static_cast<double>(k));
      phase[k] = uni(0, 2 * std::numbers::pi);
    }
    double ph = 0;
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double u = static_cast<double>(i) / len;
      const double f = f0 * (1 + glide * u);
      ph += 2 * std::numbers::pi * f / fs;
      double v = 0;
      for (int k = 1; k <= harmonics; ++k) v += gain[k] * std::sin(k * ph + phase[k]);
      const double env = sq(std::sin(std::numbers::pi * u));
      out.samples[pos + i] = amp * env * v;
    }
    pos += len + static_cast<std::size_t>(uni(0.05, 0.3) * fs);
  }
  const double p = peak(out);
  if (p > 0) scale(out, 0.5 / p);
  return out;
}

namespace {

AudioBuffer coloured_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0, 1);
  const double a = std::uniform_real_distribution<double>(0.0, 0.95)(rng);
  const double hum = std::uniform_real_distribution<double>(0.0, 0.3)(rng);
  const double hum_f = std::uniform_real_distribution<double>(50, 120)(rng);
  AudioBuffer out = AudioBuffer::zeros(n);
  double y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y = a * y + (1 - a) * g(rng);
    out.samples[i] = y + hum * std::sin(2 * std::numbers::pi * hum_f * i / kSampleRate);
  }
  const double p = peak(out);
  if (p > 0) scale(out, 0.3 / p);
  return out;
}

std::vector<AudioBuffer> load_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("corpus: missing directory " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("corpus: no .wav files in " + dir.string());
  std::vector<AudioBuffer> out;
  for (const auto& f : files) out.push_back(read_wav(f.string()));
  return out;
}

}  // namespace

Corpus Corpus::synthetic(std::size_t clips, double seconds, std::uint64_t seed) {
  if (clips == 0 || !(seconds > 0)) throw InputError("synthetic corpus: need clips > 0 and seconds > 0");
  Corpus c;
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * kSampleRate));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < clips; ++i) c.near.push_back(synthetic_speech(n, rng));
  for (std::size_t i = 0; i < clips; ++i) c.far.push_back(synthetic_speech(n, rng));
  for (std::size_t i = 0; i < clips; ++i) c.noise.push_back(coloured_noise(n, rng));
  return c;
}

Corpus Corpus::load(const std::string& dir) {
  const std::filesystem::path root(dir);
  if (!std::filesystem::is_directory(root)) throw InputError("corpus: missing directory " + dir);
  Corpus c;
  c.near = load_dir(root / "near");
  c.far = load_dir(root / "far");
  c.noise = load_dir(root / "noise");
  return c;
}

// ---------------------------------------------------------------------------
// Synthesis

SceneExample synthesize(const SceneRecipe& r, const Corpus& corpus) {
  if (r.near_clip >= corpus.near.size() || r.far_clip >= corpus.far.size() ||
      r.noise_clip >= corpus.noise.size()) {
    throw InputError("synthesize: recipe references a clip outside the corpus");
  }
  const std::size_t n = r.length;
  if (n == 0) throw InputError("synthesize: zero length");
  SceneExample ex;
  ex.recipe = r;

  // (1) near end, optionally reverberant
  AudioBuffer s = fit(corpus.near[r.near_clip], n);
  if (r.reverb_applied) s = convolve_fit(s, generate_rir(r.room), n);
  if (!(energy(s, full_region(n)) > 0)) throw InputError("synthesize: near-end signal has no energy");

  // (2) far end and echo through the loudspeaker path
  AudioBuffer x = AudioBuffer::zeros(n), d = AudioBuffer::zeros(n);
  if (!r.farend_zeroed) {
    x = fit(corpus.far[r.far_clip], n);
    RoomSpec echo = r.room;
    echo.source = r.loudspeaker;
    d = convolve_fit(x, generate_rir(echo), n);
  }

  // (3) gain dip on the echo or the reference
  if (r.gain_dip && !r.farend_zeroed) {
    const GainDip& g = *r.gain_dip;
    AudioBuffer& t = g.target == DipTarget::kEcho ? d : x;
    const double a = std::pow(10.0, -g.atten_db / 20);
    for (std::size_t i = g.start; i < std::min(n, g.start + g.length); ++i) t.samples[i] *= a;
  }

  // (4) ratios over double-talk; fall back to the whole clip when the
  // activity regions do not overlap
  const Region s_act = activity(s);
  Region ser_region, snr_region;
  if (!r.farend_zeroed) {
    ser_region = intersect(s_act, activity(d));
    if (region_size(ser_region) == 0) ser_region = full_region(n);
    d = mix_at_ratio(s, d, r.ser_db, ser_region);
  }
  AudioBuffer v = AudioBuffer::zeros(n);
  if (!r.noise_zeroed) {
    v = fit(corpus.noise[r.noise_clip], n);
    snr_region = intersect(s_act, activity(v));
    if (region_size(snr_region) == 0) snr_region = full_region(n);
    v = mix_at_ratio(s, v, r.snr_db, snr_region);
  }

  // (5) microphone
  AudioBuffer y = AudioBuffer::zeros(n);
  for (std::size_t i = 0; i < n; ++i) y.samples[i] = s.samples[i] + d.samples[i] + v.samples[i];

  // (6) delay the microphone side; the reference is padded to match
  const std::size_t D = r.delay_samples;
  ex.s = apply_delay(s, D);
  ex.d = apply_delay(d, D);
  ex.v = apply_delay(v, D);
  ex.y = apply_delay(y, D);
  ex.x = fit(x, n + D);
  if (!ser_region.empty()) ex.ser_region = shifted(ser_region, D);
  if (!snr_region.empty()) ex.snr_region = shifted(snr_region, D);

  // (7) peak normalization
  const double py = peak(ex.y), px = peak(ex.x);
  ex.mic_scale = py > 0 ? r.norm_peaks[0] / py : 1.0;
  ex.far_scale = px > 0 ? r.norm_peaks[1] / px : 1.0;
  for (AudioBuffer* b : {&ex.s, &ex.d, &ex.v, &ex.y}) scale(*b, ex.mic_scale);
  scale(ex.x, ex.far_scale);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  ex.measured_ser_db = r.farend_zeroed ? nan : region_ratio_db(ex.s, ex.d, ex.ser_region);
  ex.measured_snr_db = r.noise_zeroed ? nan : region_ratio_db(ex.s, ex.v, ex.snr_region);
  return ex;
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

using nlohmann::json;

json vec_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }
Vec3 json_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string manifest_line(const SceneExample& ex, const std::vector<std::string>& paths) {
  const SceneRecipe& r = ex.recipe;
  json j;
  j["near_clip"] = r.near_clip;
  j["far_clip"] = r.far_clip;
  j["noise_clip"] = r.noise_clip;
  json room;
  room["dims"] = vec_json(r.room.dims);
  room["rt60"] = r.room.rt60;
  room["absorption"] = r.room.wall_absorption();
  room["source"] = vec_json(r.room.source);
  room["mic"] = vec_json(r.room.mic);
  room["loudspeaker"] = vec_json(r.loudspeaker);
  j["room"] = room;
  j["ser_db"] = r.ser_db;
  j["snr_db"] = r.snr_db;
  j["delay_samples"] = r.delay_samples;
  j["length"] = r.length;
  j["farend_zeroed"] = r.farend_zeroed;
  j["noise_zeroed"] = r.noise_zeroed;
  j["reverb_applied"] = r.reverb_applied;
  if (r.gain_dip) {
    j["gain_dip"] = {{"start", r.gain_dip->start},
                     {"length", r.gain_dip->length},
                     {"atten_db", r.gain_dip->atten_db},
                     {"target", r.gain_dip->target == DipTarget::kEcho ? "d" : "x"}};
  } else {
    j["gain_dip"] = nullptr;
  }
  j["norm_peaks"] = {r.norm_peaks[0], r.norm_peaks[1]};
  j["rng_seed"] = r.rng_seed;
  j["measured_ser_db"] = number_or_null(ex.measured_ser_db);
  j["measured_snr_db"] = number_or_null(ex.measured_snr_db);
  j["mic_scale"] = ex.mic_scale;
  j["far_scale"] = ex.far_scale;
  j["files"] = paths;
  return j.dump();
}

SceneRecipe recipe_from_manifest(const std::string& line) {
  try {
    const json j = json::parse(line);
    SceneRecipe r;
    r.near_clip = j.at("near_clip").get<std::size_t>();
    r.far_clip = j.at("far_clip").get<std::size_t>();
    r.noise_clip = j.at("noise_clip").get<std::size_t>();
    const json& room = j.at("room");
    r.room.dims = json_vec(room.at("dims"));
    r.room.rt60 = room.at("rt60").get<double>();
    r.room.source = json_vec(room.at("source"));
    r.room.mic = json_vec(room.at("mic"));
    r.loudspeaker = json_vec(room.at("loudspeaker"));
    r.ser_db = j.at("ser_db").get<double>();
    r.snr_db = j.at("snr_db").get<double>();
    r.delay_samples = j.at("delay_samples").get<std::size_t>();
    r.length = j.at("length").get<std::size_t>();
    r.farend_zeroed = j.at("farend_zeroed").get<bool>();
    r.noise_zeroed = j.at("noise_zeroed").get<bool>();
    r.reverb_applied = j.at("reverb_applied").get<bool>();
    const json& g = j.at("gain_dip");
    if (!g.is_null()) {
      GainDip d;
      d.start = g.at("start").get<std::size_t>();
      d.length = g.at("length").get<std::size_t>();
      d.atten_db = g.at("atten_db").get<double>();
      const std::string t = g.at("target").get<std::string>();
      if (t != "d" && t != "x") throw InputError("manifest: gain_dip target must be d or x");
      d.target = t == "d" ? DipTarget::kEcho : DipTarget::kFarEnd;
      r.gain_dip = d;
    }
    r.norm_peaks = {j.at("norm_peaks").at(0).get<double>(), j.at("norm_peaks").at(1).get<double>()};
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
}

}  // namespace dcaec
