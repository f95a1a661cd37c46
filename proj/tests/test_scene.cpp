// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dcaec/metrics.hpp"
#include "dcaec/scene.hpp"
#include "support.hpp"

using namespace dcaec;
using namespace dcaec::testing;

namespace {

RoomSpec room_at(double rt60, Vec3 source, Vec3 mic, Vec3 dims = {6, 4, 3}) {
  RoomSpec r;
  r.dims = dims;
  r.rt60 = rt60;
  r.source = source;
  r.mic = mic;
  return r;
}

const Corpus& corpus() {
  static const Corpus c = Corpus::synthetic(6, 4.5, 11);
  return c;
}

SceneRecipe plain_recipe() {
  SceneRecipe r;
  r.room = room_at(0.3, {1, 1, 1.5}, {3, 2.5, 1.2});
  r.loudspeaker = {4, 1, 1};
  r.ser_db = 0;
  r.snr_db = 20;
  r.length = 32000;
  r.norm_peaks = {0.8, 0.5};
  return r;
}

}  // namespace

TEST_CASE("rir: anechoic limit is one direct-path spike") {
  RoomSpec r = room_at(0.4, {1, 1, 1}, {4, 3, 2});
  r.absorption = 1.0;
  r.highpass = false;
  AudioBuffer h = generate_rir(r);
  CHECK(h.size() == 8000);
  const double d = r.distance();
  const double amp = 1.0 / (4 * std::numbers::pi * d);
  const std::size_t tap = static_cast<std::size_t>(std::lround(d / 343.0 * 16000));
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < h.size(); ++i) nonzero += h.samples[i] != 0.0;
  CHECK(nonzero == 1);
  CHECK(h.samples[tap] == doctest::Approx(amp).epsilon(1e-12));

  // with the high-pass the spike keeps its tap and height; what follows is
  // the filter's own small negative tail
  r.highpass = true;
  AudioBuffer f = generate_rir(r);
  CHECK(first_arrival(f) == tap);
  CHECK(f.samples[tap] == doctest::Approx(amp).epsilon(1e-12));
  for (std::size_t i = tap + 1; i < f.size(); ++i) REQUIRE(std::abs(f.samples[i]) < 0.05 * amp);
}

TEST_CASE("rir: direct path delay from the geometry") {
  // 3.43 m at 343 m/s is exactly 160 samples
  RoomSpec r = room_at(0.4, {1.0, 2.0, 1.5}, {4.43, 2.0, 1.5});
  AudioBuffer h = generate_rir(r);
  const std::size_t first = first_arrival(h);
  CHECK(first >= 159);
  CHECK(first <= 161);
  // nothing before the direct path, and the direct path is present
  CHECK(h.samples[160] > 0);
  for (double v : h.samples) REQUIRE(std::isfinite(v));
}

TEST_CASE("rir: Schroeder RT60 tracks the requested value") {
  for (auto dims : {Vec3{6, 4, 3}, Vec3{5, 3, 3}, Vec3{8, 5, 4}, Vec3{7, 3.5, 3.2}}) {
    CAPTURE(dims[0]);
    RoomSpec r = room_at(0.4, {1.2, 1.1, 1.4}, {dims[0] - 1.5, dims[1] - 1.2, 1.6}, dims);
    const double t = schroeder_rt60(generate_rir(r));
    CAPTURE(t);
    CHECK(t > 0.4 * 0.8);
    CHECK(t < 0.4 * 1.2);
  }
  // decay gets longer with RT60
  RoomSpec a = room_at(0.25, {1, 1, 1}, {4, 3, 2}), b = room_at(0.6, {1, 1, 1}, {4, 3, 2});
  CHECK(schroeder_rt60(generate_rir(a)) < schroeder_rt60(generate_rir(b)));
}

TEST_CASE("rir: invalid rooms") {
  CHECK_THROWS_AS(generate_rir(room_at(0.4, {7, 1, 1}, {1, 1, 1})), InputError);
  CHECK_THROWS_AS(generate_rir(room_at(0.4, {0, 1, 1}, {1, 1, 1})), InputError);
  // Sabine absorption above 1
  CHECK_THROWS_AS(generate_rir(room_at(0.01, {1, 1, 1}, {2, 2, 2})), InputError);
  RoomSpec r = room_at(0.4, {1, 1, 1}, {2, 2, 2});
  r.absorption = 0.0;
  CHECK_THROWS_AS(generate_rir(r), InputError);
}

TEST_CASE("mix_at_ratio") {
  Rng rng(1);
  AudioBuffer s = random_audio(rng, 1000), i = random_audio(rng, 1000);
  // equal energy, 0 dB -> unit gain
  double es = 0, ei = 0;
  for (std::size_t k = 0; k < 1000; ++k) {
    es += s.samples[k] * s.samples[k];
    ei += i.samples[k] * i.samples[k];
  }
  AudioBuffer i_eq = i;
  for (auto& v : i_eq.samples) v *= std::sqrt(es / ei);
  AudioBuffer g1 = mix_at_ratio(s, i_eq, 0.0, full_region(1000));
  for (std::size_t k = 0; k < 1000; ++k) CHECK(g1.samples[k] == doctest::Approx(i_eq.samples[k]).epsilon(1e-12));

  for (double ratio : {10.0, -13.0, 10.0, 5.0, 0.0}) {
    AudioBuffer m = mix_at_ratio(s, i, ratio, full_region(1000));
    CHECK(std::abs(measure_ratio(s, m) - ratio) < 1e-9);
  }
  AudioBuffer m = mix_at_ratio(s, i, 7.0, 200, 600);
  Region r(1000, 0);
  std::fill(r.begin() + 200, r.begin() + 600, 1);
  CHECK(std::abs(region_ratio_db(s, m, r) - 7.0) < 1e-9);

  CHECK_THROWS_AS(mix_at_ratio(s, AudioBuffer::zeros(1000), 0, full_region(1000)), InputError);
  CHECK_THROWS_AS(mix_at_ratio(AudioBuffer::zeros(1000), i, 0, full_region(1000)), InputError);
  CHECK_THROWS_AS(mix_at_ratio(s, i, 0, Region(1000, 0)), InputError);
  CHECK_THROWS_AS(mix_at_ratio(s, i, 0, 10, 5), InputError);
}

TEST_CASE("activity and synthetic speech") {
  CHECK(region_size(activity(AudioBuffer::zeros(5000))) == 0);
  std::mt19937_64 rng(3);
  AudioBuffer sp = synthetic_speech(32000, rng);
  const std::size_t act = region_size(activity(sp));
  CHECK(act > 32000 / 3);
  CHECK(act < 32000);  // pauses exist
  CHECK(std::abs(*std::max_element(sp.samples.begin(), sp.samples.end())) <= 0.5 + 1e-12);
}

TEST_CASE("sample_recipe: probability factors over 10,000 draws") {
  SceneRanges ranges;
  const std::size_t n = 10000;
  std::size_t far0 = 0, noise0 = 0, reverb = 0, dip = 0;
  for (std::size_t i = 0; i < n; ++i) {
    SceneRecipe r = sample_recipe(42, i, ranges, {5, 5, 5});
    far0 += r.farend_zeroed;
    noise0 += r.noise_zeroed;
    reverb += r.reverb_applied;
    dip += r.gain_dip.has_value();
    REQUIRE(r.ser_db >= -13);
    REQUIRE(r.ser_db <= 10);
    REQUIRE(r.snr_db >= 5);
    REQUIRE(r.snr_db <= 20);
    REQUIRE(r.delay_samples <= 1600);
    REQUIRE(r.norm_peaks[0] >= 0.3);
    REQUIRE(r.norm_peaks[1] <= 0.9);
    REQUIRE(r.room.dims[0] >= 5);
    REQUIRE(r.room.dims[0] <= 8);
    REQUIRE(r.room.rt60 >= 0.2);
    REQUIRE(r.room.rt60 <= 0.7);
    REQUIRE(r.room.distance() >= 0.5);
    REQUIRE(r.room.distance() <= 5.0);
    if (r.gain_dip) {
      REQUIRE(r.gain_dip->length == 48000);
      REQUIRE(r.gain_dip->atten_db >= 20);
      REQUIRE(r.gain_dip->atten_db <= 30);
      REQUIRE(r.gain_dip->start + r.gain_dip->length <= r.length);
    }
  }
  auto rate = [&](std::size_t k) { return double(k) / n; };
  CHECK(std::abs(rate(far0) - 0.3) < 0.02);
  CHECK(std::abs(rate(noise0) - 0.5) < 0.02);
  CHECK(std::abs(rate(reverb) - 0.5) < 0.02);
  CHECK(std::abs(rate(dip) - 0.2) < 0.02);
}

TEST_CASE("sample_recipe: deterministic in seed and index") {
  SceneRanges ranges;
  for (std::size_t i = 0; i < 20; ++i) {
    auto a = sample_recipe(7, i, ranges, {3, 3, 3});
    auto b = sample_recipe(7, i, ranges, {3, 3, 3});
    CHECK(a.ser_db == b.ser_db);
    CHECK(a.room.mic == b.room.mic);
    CHECK(a.rng_seed == b.rng_seed);
    CHECK(sample_recipe(8, i, ranges, {3, 3, 3}).ser_db != a.ser_db);
  }
}

TEST_CASE("ranges: key=value round trip and validation") {
  SceneRanges r;
  r.ser_db = {-10, 13};
  r.p_reverb = 0.25;
  SceneRanges p = SceneRanges::parse(r.serialize());
  CHECK(p.serialize() == r.serialize());
  CHECK(SceneRanges::parse("# comment\nser_db_min = -10\n\nser_db_max=13\n").ser_db.hi == 13);
  CHECK_THROWS_AS(SceneRanges::parse("bogus=1"), InputError);
  CHECK_THROWS_AS(SceneRanges::parse("ser_db_min=abc"), InputError);
  CHECK_THROWS_AS(SceneRanges::parse("ser_db_min=20"), InputError);
  CHECK_THROWS_AS(SceneRanges::parse("p_reverb=1.5"), InputError);
}

TEST_CASE("synthesize: plain recipe hits the requested ratios") {
  SceneExample ex = synthesize(plain_recipe(), corpus());
  CHECK(std::abs(ex.measured_ser_db - 0.0) < 0.1);
  CHECK(std::abs(ex.measured_snr_db - 20.0) < 0.1);
  // independent re-measurement on the returned signals
  CHECK(std::abs(region_ratio_db(ex.s, ex.d, ex.ser_region) - 0.0) < 1e-9);
  CHECK(std::abs(region_ratio_db(ex.s, ex.v, ex.snr_region) - 20.0) < 1e-9);
  CHECK(region_size(ex.ser_region) > 0);
  double py = 0, px = 0;
  for (double v : ex.y.samples) py = std::max(py, std::abs(v));
  for (double v : ex.x.samples) px = std::max(px, std::abs(v));
  CHECK(py == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(px == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("synthesize: signal model, delay and normalization") {
  SceneRecipe r = plain_recipe();
  r.delay_samples = 1600;
  r.reverb_applied = true;
  SceneExample ex = synthesize(r, corpus());
  REQUIRE(ex.y.size() == 32000 + 1600);
  CHECK(ex.x.size() == ex.y.size());
  for (std::size_t i = 0; i < 1600; ++i) REQUIRE(ex.y.samples[i] == 0.0);
  double worst = 0;
  for (std::size_t i = 0; i < ex.y.size(); ++i) {
    worst = std::max(worst, std::abs(ex.y.samples[i] - (ex.s.samples[i] + ex.d.samples[i] + ex.v.samples[i])));
  }
  CHECK(worst < 1e-12);
  // undoing the recorded scale recovers the pre-normalization mixture
  SceneRecipe r0 = r;
  r0.delay_samples = 0;
  SceneExample e0 = synthesize(r0, corpus());
  for (std::size_t i = 0; i < 32000; i += 97) {
    CHECK(ex.y.samples[i + 1600] / ex.mic_scale ==
          doctest::Approx(e0.y.samples[i] / e0.mic_scale).epsilon(1e-9));
  }
  // far end is not delayed
  CHECK(ex.x.samples[5] / ex.far_scale == doctest::Approx(e0.x.samples[5] / e0.far_scale).epsilon(1e-12));
}

TEST_CASE("synthesize: near-end single talk") {
  SceneRecipe r = plain_recipe();
  r.farend_zeroed = true;
  SceneExample ex = synthesize(r, corpus());
  for (std::size_t i = 0; i < ex.y.size(); ++i) {
    REQUIRE(ex.x.samples[i] == 0.0);
    REQUIRE(ex.d.samples[i] == 0.0);
    REQUIRE(ex.y.samples[i] == doctest::Approx(ex.s.samples[i] + ex.v.samples[i]));
  }
  CHECK(std::isnan(ex.measured_ser_db));
  r.noise_zeroed = true;
  SceneExample q = synthesize(r, corpus());
  CHECK(q.y.samples == q.s.samples);
}

TEST_CASE("synthesize: gain dip attenuates the chosen signal only") {
  SceneRecipe r = plain_recipe();
  r.noise_zeroed = true;
  SceneExample base = synthesize(r, corpus());
  GainDip g;
  g.start = 8000;
  g.length = 16000;
  g.atten_db = 25;
  g.target = DipTarget::kFarEnd;
  r.gain_dip = g;
  SceneExample dipped = synthesize(r, corpus());
  const double a = std::pow(10.0, -25.0 / 20);
  for (std::size_t i = 0; i < 32000; i += 101) {
    const double ref = base.x.samples[i] / base.far_scale;
    const double got = dipped.x.samples[i] / dipped.far_scale;
    if (i >= 8000 && i < 24000) REQUIRE(got == doctest::Approx(ref * a).epsilon(1e-9));
    else REQUIRE(got == doctest::Approx(ref).epsilon(1e-9));
  }
  // echo untouched when the reference is dipped
  CHECK(dipped.d.samples == base.d.samples);
}

TEST_CASE("synthesize: deterministic and manifest round trip") {
  SceneRanges ranges;
  ranges.seconds = 2.0;
  for (std::size_t i = 0; i < 6; ++i) {
    SceneRecipe r = sample_recipe(5, i, ranges, corpus().sizes());
    SceneExample a = synthesize(r, corpus()), b = synthesize(r, corpus());
    CHECK(a.y.samples == b.y.samples);
    CHECK(a.x.samples == b.x.samples);
    const std::string line = manifest_line(a, {"y.wav", "x.wav"});
    CHECK(line == manifest_line(b, {"y.wav", "x.wav"}));
    SceneRecipe back = recipe_from_manifest(line);
    SceneExample c = synthesize(back, corpus());
    CHECK(c.y.samples == a.y.samples);
    CHECK(manifest_line(c, {"y.wav", "x.wav"}) == line);
  }
  CHECK_THROWS_AS(recipe_from_manifest("{\"near_clip\": 1}"), InputError);
  CHECK_THROWS_AS(recipe_from_manifest("not json"), InputError);
}

TEST_CASE("synthesize: calibration over random recipes") {
  SceneRanges ranges;
  ranges.seconds = 1.5;
  std::size_t ser_checked = 0, snr_checked = 0;
  for (std::size_t i = 0; i < 150; ++i) {
    SceneRecipe r = sample_recipe(9, i, ranges, corpus().sizes());
    SceneExample ex = synthesize(r, corpus());
    if (!r.farend_zeroed) {
      REQUIRE(std::abs(ex.measured_ser_db - r.ser_db) < 0.1);
      ++ser_checked;
    }
    if (!r.noise_zeroed) {
      REQUIRE(std::abs(ex.measured_snr_db - r.snr_db) < 0.1);
      ++snr_checked;
    }
  }
  CHECK(ser_checked > 80);
  CHECK(snr_checked > 50);
  CHECK_THROWS_AS(synthesize(sample_recipe(1, 0, ranges, {99, 1, 1}), corpus()), InputError);
}
