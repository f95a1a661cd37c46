// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// WAV codec (RIFF, PCM16, mono, 16 kHz) and the weight file format.
//
// Weight file, all integers little-endian:
//   "DCAEC\0"  u32 version (1)  u32 tensor count
//   per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims[rank],
//               f32 values (row-major)
//   u64 checksum: sum of every preceding byte, mod 2^64
// Metadata entries are stored as rank-1 tensors named "#key" whose values
// are the bytes of the string.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcaec/dsp.hpp"
#include "dcaec/model.hpp"

namespace dcaec {

inline constexpr std::uint32_t kWeightFormatVersion = 1;

// ---------------------------------------------------------------------------
// WAV

/// Decodes PCM16 mono at 16 kHz; anything else is an InputError.
AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes);
AudioBuffer read_wav(const std::string& path);

struct WavWriteStats {
  std::size_t clipped = 0;  // samples saturated to the PCM16 range
};

std::vector<std::uint8_t> encode_wav(const AudioBuffer& x, WavWriteStats* stats = nullptr);
WavWriteStats write_wav(const std::string& path, const AudioBuffer& x);

/// PCM16 code for an amplitude: round(x * 32768), saturated.
std::int16_t to_pcm16(double x, bool* clipped = nullptr);

// ---------------------------------------------------------------------------
// Weights

std::vector<std::uint8_t> encode_weights(const WeightStore& w);
WeightStore decode_weights(const std::vector<std::uint8_t>& bytes);

void save_weights(const std::string& path, const WeightStore& w);
WeightStore load_weights(const std::string& path);

/// Reads the model config recorded in the store's metadata.
ModelConfig config_from_store(const WeightStore& w);

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace dcaec
