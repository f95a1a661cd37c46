// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "dcaec/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dcaec {

namespace {

// Little-endian byte writer/reader.
struct Writer {
  std::vector<std::uint8_t> out;
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) { uint(v, 2); }
  void u32(std::uint32_t v) { uint(v, 4); }
  void u64(std::uint64_t v) { uint(v, 8); }
  void uint(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
};

struct Reader {
  const std::vector<std::uint8_t>& in;
  std::size_t pos = 0;
  const char* what;

  void need(std::size_t n) const {
    if (in.size() - pos < n) throw InputError(std::string(what) + ": truncated at byte " + std::to_string(pos));
  }
  std::uint64_t uint(int n) {
    need(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(in[pos + i]) << (8 * i);
    pos += n;
    return v;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in.data() + pos), n);
    pos += n;
    return s;
  }
};

constexpr char kMagic[6] = {'D', 'C', 'A', 'E', 'C', '\0'};

}  // namespace

// ---------------------------------------------------------------------------
// Files

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// WAV

std::int16_t to_pcm16(double x, bool* clipped) {
  const double v = std::nearbyint(x * 32768.0);
  bool clip = false;
  double c = v;
  if (!(v >= -32768.0)) {  // also catches NaN
    c = std::isnan(v) ? 0.0 : -32768.0;
    clip = true;
  } else if (v > 32767.0) {
    c = 32767.0;
    clip = true;
  }
  if (clipped) *clipped = clip;
  return static_cast<std::int16_t>(c);
}

AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes, 0, "wav"};
  if (r.str(4) != "RIFF") throw InputError("wav: missing RIFF header");
  r.u32();
  if (r.str(4) != "WAVE") throw InputError("wav: not a WAVE file");
  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (true) {
    if (r.pos >= bytes.size()) throw InputError("wav: no data chunk");
    const std::string id = r.str(4);
    const std::uint32_t size = r.u32();
    r.need(size);
    const std::size_t next = r.pos + size + (size & 1u);
    if (id == "fmt ") {
      if (size < 16) throw InputError("wav: short fmt chunk");
      format = r.u16();
      channels = r.u16();
      rate = r.u32();
      r.u32();
      r.u16();
      bits = r.u16();
      if (format == 0xFFFE && size >= 40) {  // WAVE_FORMAT_EXTENSIBLE
        r.u16();
        r.u16();
        r.u32();
        format = r.u16();
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw InputError("wav: data before fmt");
      if (format != 1 || bits != 16) {
        throw InputError("wav: only PCM 16-bit is supported (format " + std::to_string(format) +
                         ", " + std::to_string(bits) + " bits)");
      }
      if (channels != 1) throw InputError("wav: expected mono, got " + std::to_string(channels) + " channels");
      if (rate != kSampleRate) {
        throw InputError("wav: expected 16000 Hz, got " + std::to_string(rate) + " (no resampling)");
      }
      if (size % 2) throw InputError("wav: odd data size");
      AudioBuffer out = AudioBuffer::zeros(size / 2);
      for (auto& v : out.samples) v = static_cast<std::int16_t>(r.u16()) / 32768.0;
      return out;
    }
    r.pos = std::min(next, bytes.size());
  }
}

AudioBuffer read_wav(const std::string& path) {
  try {
    return decode_wav(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& x, WavWriteStats* stats) {
  require_processing_rate(x);
  const std::uint32_t data = static_cast<std::uint32_t>(2 * x.size());
  Writer w;
  w.bytes("RIFF", 4);
  w.u32(36 + data);
  w.bytes("WAVE", 4);
  w.bytes("fmt ", 4);
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(kSampleRate);
  w.u32(kSampleRate * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data", 4);
  w.u32(data);
  std::size_t clipped = 0;
  for (double v : x.samples) {
    bool c = false;
    w.u16(static_cast<std::uint16_t>(to_pcm16(v, &c)));
    clipped += c;
  }
  if (stats) stats->clipped = clipped;
  return std::move(w.out);
}

WavWriteStats write_wav(const std::string& path, const AudioBuffer& x) {
  WavWriteStats s;
  write_file(path, encode_wav(x, &s));
  return s;
}

// ---------------------------------------------------------------------------
// Weights

std::vector<std::uint8_t> encode_weights(const WeightStore& ws) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kWeightFormatVersion);
  w.u32(static_cast<std::uint32_t>(ws.tensors.size() + ws.metadata.size()));
  auto header = [&](const std::string& name, const Shape& shape) {
    if (name.empty() || name.size() > 0xFFFF) throw InputError("weights: bad tensor name '" + name + "'");
    if (shape.size() > 0xFF) throw InputError("weights: rank too large for " + name);
    w.u16(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(static_cast<std::uint8_t>(shape.size()));
    for (std::size_t d : shape) {
      if (d > 0xFFFFFFFFull) throw InputError("weights: extent too large for " + name);
      w.u32(static_cast<std::uint32_t>(d));
    }
  };
  for (const auto& [key, value] : ws.metadata) {
    header("#" + key, {value.size()});
    for (unsigned char c : value) w.f32(static_cast<float>(c));
  }
  for (const auto& [name, t] : ws.tensors) {
    if (name[0] == '#') throw InputError("weights: tensor names may not start with '#'");
    header(name, t.shape());
    for (float v : t.values()) w.f32(v);
  }
  std::uint64_t sum = 0;
  for (std::uint8_t b : w.out) sum += b;
  w.u64(sum);
  return std::move(w.out);
}

WeightStore decode_weights(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes, 0, "weights"};
  if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw InputError("weights: bad magic (not a dcaec weight file)");
  }
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < bytes.size() - 8; ++i) sum += bytes[i];
  {
    Reader tail{bytes, bytes.size() - 8, "weights"};
    if (tail.u64() != sum) throw InputError("weights: checksum mismatch (file corrupt)");
  }
  r.pos = sizeof kMagic;
  const std::uint32_t version = r.u32();
  if (version != kWeightFormatVersion) {
    throw InputError("weights: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  WeightStore ws;
  const std::size_t end = bytes.size() - 8;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str(r.u16());
    if (name.empty()) throw InputError("weights: empty tensor name");
    const std::uint8_t rank = r.u8();
    Shape shape(rank);
    const std::size_t room = (end - std::min(end, r.pos)) / 4;
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d != 0 && n > room / d + 1) n = room + 1;  // saturate, caught below
      else n *= d;
    }
    if (n > (end - std::min(end, r.pos)) / 4) throw InputError("weights: tensor " + name + " runs past end of file");
    if (name[0] == '#') {
      if (rank != 1) throw InputError("weights: metadata " + name + " must be rank 1");
      std::string value(n, '\0');
      for (auto& c : value) {
        const float f = r.f32();
        if (!(f >= 0 && f <= 255) || f != std::floor(f)) throw InputError("weights: bad metadata byte in " + name);
        c = static_cast<char>(static_cast<unsigned char>(f));
      }
      if (!ws.metadata.emplace(name.substr(1), std::move(value)).second) {
        throw InputError("weights: duplicate metadata " + name);
      }
      continue;
    }
    Tensor<float> t(shape);
    for (auto& v : t.values()) v = r.f32();
    if (!ws.tensors.emplace(name, std::move(t)).second) throw InputError("weights: duplicate tensor " + name);
  }
  if (r.pos != end) throw InputError("weights: " + std::to_string(end - r.pos) + " trailing bytes before checksum");
  return ws;
}

void save_weights(const std::string& path, const WeightStore& w) { write_file(path, encode_weights(w)); }

WeightStore load_weights(const std::string& path) {
  try {
    return decode_weights(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

ModelConfig config_from_store(const WeightStore& w) {
  auto it = w.metadata.find("config");
  if (it == w.metadata.end()) throw InputError("weights: no config metadata");
  return ModelConfig::parse(it->second);
}

}  // namespace dcaec
