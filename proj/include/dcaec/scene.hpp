// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Synthetic echo scenes: image-method room impulse responses, ratio-
// controlled mixing and the randomized recipe that turns near-end speech,
// far-end speech and noise into (s, x, d, v, y).

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dcaec/dsp.hpp"

namespace dcaec {

using Vec3 = std::array<double, 3>;

struct RoomSpec {
  Vec3 dims{6.0, 4.0, 3.0};  // a x b x h, metres
  double rt60 = 0.4;         // seconds
  Vec3 source{1.0, 1.0, 1.5};
  Vec3 mic{3.0, 2.0, 1.5};
  double c = 343.0;
  double rir_seconds = 0.5;
  /// Wall energy absorption; derived from rt60 (Sabine) when unset.
  std::optional<double> absorption;
  /// 100 Hz high-pass after image placement. All images arrive with the
  /// same sign, so without it the late taps pile up a DC component and the
  /// decay reads longer than rt60.
  bool highpass = true;

  double volume() const { return dims[0] * dims[1] * dims[2]; }
  double surface() const;
  double distance() const;
  /// 0.161 V / (S RT60), or the explicit value.
  double wall_absorption() const;
  /// Throws InputError for positions outside the room or a bad absorption.
  void validate() const;
};

/// Image-source RIR at 16 kHz. Arrivals are placed on the nearest sample
/// with amplitude beta^k / (4 pi dist), beta = sqrt(1 - absorption), k the
/// number of wall reflections. The optional high-pass is causal with unit
/// gain on the current sample, so the direct tap is unchanged.
AudioBuffer generate_rir(const RoomSpec& room);

/// Reverberation time from Schroeder backward integration: a line fitted to
/// the decay curve between -5 and -25 dB, extrapolated to -60 dB.
double schroeder_rt60(const AudioBuffer& rir);

/// First tap index with non-zero value, or rir.size() if none.
std::size_t first_arrival(const AudioBuffer& rir);

// ---------------------------------------------------------------------------
// Regions and ratios

/// Per-sample inclusion flags.
using Region = std::vector<std::uint8_t>;

Region full_region(std::size_t n);
/// Samples of 20 ms frames whose mean-square exceeds -60 dBFS.
Region activity(const AudioBuffer& x);
Region intersect(const Region& a, const Region& b);
std::size_t region_size(const Region& r);

/// 10 log10(sum_r a^2 / sum_r b^2) over the region.
double region_ratio_db(const AudioBuffer& a, const AudioBuffer& b, const Region& r);

/// Interferer scaled so that region_ratio_db(target, result, region) equals
/// ratio_db. Throws InputError when either signal has no energy there.
AudioBuffer mix_at_ratio(const AudioBuffer& target, const AudioBuffer& interferer,
                         double ratio_db, const Region& region);
AudioBuffer mix_at_ratio(const AudioBuffer& target, const AudioBuffer& interferer,
                         double ratio_db, std::size_t begin, std::size_t end);

// ---------------------------------------------------------------------------
// Recipes

struct Range {
  double lo = 0, hi = 0;
};

/// Sampling ranges and probabilities. Text form is key=value lines.
struct SceneRanges {
  Range ser_db{-13, 10};
  Range snr_db{5, 20};
  Range delay_samples{0, 1600};
  double p_farend_zero = 0.3;
  double p_noise_zero = 0.5;
  double p_reverb = 0.5;
  double p_gain_dip = 0.2;
  double dip_seconds = 3.0;
  Range dip_db{20, 30};
  Range peak{0.3, 0.9};
  Range room_a{5, 8}, room_b{3, 5}, room_h{3, 4};
  Range rt60{0.2, 0.7};
  Range distance{0.5, 5.0};
  double wall_margin = 0.2;  // metres kept between any position and a wall
  double seconds = 4.0;      // example length before the delay

  void validate() const;
  std::string serialize() const;
  static SceneRanges parse(const std::string& text);
};

enum class DipTarget { kEcho, kFarEnd };

struct GainDip {
  std::size_t start = 0;
  std::size_t length = 0;
  double atten_db = 0;
  DipTarget target = DipTarget::kEcho;
};

struct SceneRecipe {
  std::size_t near_clip = 0, far_clip = 0, noise_clip = 0;
  RoomSpec room;       // mic, talker (source) and the geometry
  Vec3 loudspeaker{};  // echo path source in the same room
  double ser_db = 0;
  double snr_db = 0;
  std::size_t delay_samples = 0;
  std::size_t length = 0;  // samples before the delay
  bool farend_zeroed = false;
  bool noise_zeroed = false;
  bool reverb_applied = false;
  std::optional<GainDip> gain_dip;
  std::array<double, 2> norm_peaks{0.9, 0.9};  // (mic, far end)
  std::uint64_t rng_seed = 0;
};

struct CorpusSizes {
  std::size_t near = 1, far = 1, noise = 1;
};

SceneRecipe sample_recipe(std::mt19937_64& rng, const SceneRanges& ranges,
                          const CorpusSizes& sizes);
/// Recipe i of a seeded sequence; each recipe has its own stream.
SceneRecipe sample_recipe(std::uint64_t seed, std::size_t index, const SceneRanges& ranges,
                          const CorpusSizes& sizes);

// ---------------------------------------------------------------------------
// Corpus and synthesis

struct Corpus {
  std::vector<AudioBuffer> near, far, noise;

  CorpusSizes sizes() const { return {near.size(), far.size(), noise.size()}; }
  /// Procedural speech-like clips (voiced syllables with pauses) and
  /// coloured noise. Deterministic in seed.
  static Corpus synthetic(std::size_t clips, double seconds, std::uint64_t seed);
  /// near/, far/, noise/ subdirectories of 16 kHz mono PCM16 WAV files.
  static Corpus load(const std::string& dir);
};

/// Speech-like test signal: harmonic syllables with gliding pitch and gaps.
AudioBuffer synthetic_speech(std::size_t n, std::mt19937_64& rng);

struct SceneExample {
  AudioBuffer s, x, d, v, y;
  SceneRecipe recipe;
  double measured_ser_db = 0;  // NaN when the echo is zeroed
  double measured_snr_db = 0;  // NaN when the noise is zeroed
  double mic_scale = 1;        // common factor applied to s, d, v, y
  double far_scale = 1;
  Region ser_region, snr_region;  // in output coordinates
};

/// Pure function of (recipe, corpus).
SceneExample synthesize(const SceneRecipe& recipe, const Corpus& corpus);

/// One line of the manifest (compact JSON, no trailing newline).
std::string manifest_line(const SceneExample& ex, const std::vector<std::string>& paths);
/// Inverse of the recipe part of manifest_line.
SceneRecipe recipe_from_manifest(const std::string& line);

}  // namespace dcaec
