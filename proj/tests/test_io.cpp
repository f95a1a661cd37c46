// Copyright 2026 The dcaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "dcaec/io.hpp"
#include "support.hpp"

using namespace dcaec;
using namespace dcaec::testing;

namespace {

void put(std::vector<std::uint8_t>& b, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put(std::vector<std::uint8_t>& b, const char* s) {
  while (*s) b.push_back(static_cast<std::uint8_t>(*s++));
}

// Hand-built RIFF file with optional extra chunk before data.
std::vector<std::uint8_t> wav_bytes(std::uint16_t format, std::uint16_t channels,
                                    std::uint32_t rate, std::uint16_t bits,
                                    const std::vector<std::int16_t>& samples,
                                    bool list_chunk = false) {
  std::vector<std::uint8_t> body;
  put(body, "WAVE");
  put(body, "fmt ");
  put(body, 16, 4);
  put(body, format, 2);
  put(body, channels, 2);
  put(body, rate, 4);
  put(body, rate * channels * bits / 8, 4);
  put(body, channels * bits / 8, 2);
  put(body, bits, 2);
  if (list_chunk) {
    put(body, "LIST");
    put(body, 3, 4);  // odd size, padded
    put(body, "abc");
    body.push_back(0);
  }
  put(body, "data");
  put(body, samples.size() * 2, 4);
  for (auto s : samples) put(body, static_cast<std::uint16_t>(s), 2);
  std::vector<std::uint8_t> out;
  put(out, "RIFF");
  put(out, body.size(), 4);
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("wav: every PCM16 code survives a round trip") {
  AudioBuffer x = AudioBuffer::zeros(65536);
  for (int c = -32768; c < 32768; ++c) x.samples[c + 32768] = c / 32768.0;
  WavWriteStats st;
  auto bytes = encode_wav(x, &st);
  CHECK(st.clipped == 0);
  CHECK(bytes.size() == 44 + 2 * 65536);
  AudioBuffer y = decode_wav(bytes);
  REQUIRE(y.size() == x.size());
  CHECK(y.samples == x.samples);
  CHECK(encode_wav(y) == bytes);
}

TEST_CASE("wav: decode of a hand-built file, extra chunks skipped") {
  auto b = wav_bytes(1, 1, 16000, 16, {0, 1, -1, 32767, -32768}, true);
  AudioBuffer x = decode_wav(b);
  REQUIRE(x.size() == 5);
  CHECK(x.sample_rate == 16000);
  CHECK(x.samples[1] == 1.0 / 32768);
  CHECK(x.samples[2] == -1.0 / 32768);
  CHECK(x.samples[3] == 32767.0 / 32768);
  CHECK(x.samples[4] == -1.0);
}

TEST_CASE("wav: rejects what it cannot read") {
  CHECK_THROWS_AS(decode_wav(wav_bytes(1, 2, 16000, 16, {0, 0})), InputError);
  CHECK_THROWS_AS(decode_wav(wav_bytes(1, 1, 44100, 16, {0})), InputError);
  CHECK_THROWS_AS(decode_wav(wav_bytes(1, 1, 16000, 8, {0})), InputError);
  CHECK_THROWS_AS(decode_wav(wav_bytes(3, 1, 16000, 32, {0, 0})), InputError);
  auto b = wav_bytes(1, 1, 16000, 16, {1, 2, 3});
  b.resize(b.size() - 3);
  CHECK_THROWS_AS(decode_wav(b), InputError);
  CHECK_THROWS_AS(decode_wav({}), InputError);
  std::vector<std::uint8_t> junk(64, 'x');
  CHECK_THROWS_AS(decode_wav(junk), InputError);
  CHECK_THROWS_AS(read_wav(temp_path("dcaec_missing_file.wav")), InputError);
}

TEST_CASE("wav: writing saturates and counts clipped samples") {
  AudioBuffer x(std::vector<double>{0.5, 1.0, -1.0, 2.0, -3.0,
                                    std::numeric_limits<double>::quiet_NaN()});
  WavWriteStats st;
  AudioBuffer y = decode_wav(encode_wav(x, &st));
  CHECK(st.clipped == 4);  // 1.0, 2.0, -3.0, NaN
  CHECK(y.samples[0] == 0.5);
  CHECK(y.samples[1] == 32767.0 / 32768);
  CHECK(y.samples[2] == -1.0);
  CHECK(y.samples[3] == 32767.0 / 32768);
  CHECK(y.samples[4] == -1.0);
  CHECK(y.samples[5] == 0.0);
  CHECK_THROWS_AS(encode_wav(AudioBuffer(std::vector<double>{0.0}, 8000)), InputError);
}

TEST_CASE("wav: file round trip and empty file") {
  const std::string p = temp_path("dcaec_test_io.wav");
  Rng rng(1);
  AudioBuffer x = random_audio(rng, 1234, 0.9);
  for (auto& v : x.samples) v = to_pcm16(v) / 32768.0;
  write_wav(p, x);
  CHECK(read_wav(p).samples == x.samples);
  write_wav(p, AudioBuffer());
  CHECK(read_wav(p).empty());
  std::remove(p.c_str());
}

TEST_CASE("weights: byte layout of a tiny store") {
  WeightStore w;
  w.tensors["a"] = Tensor<float>({2}, std::vector<float>{1.0f, -2.0f});
  w.metadata["k"] = "v";
  auto b = encode_weights(w);
  std::vector<std::uint8_t> e;
  put(e, "DCAEC");
  e.push_back(0);
  put(e, 1, 4);
  put(e, 2, 4);
  // metadata first: "#k", rank 1, dim 1, 'v' as a float
  put(e, 2, 2);
  put(e, "#k");
  put(e, 1, 1);
  put(e, 1, 4);
  put(e, std::bit_cast<std::uint32_t>(float('v')), 4);
  put(e, 1, 2);
  put(e, "a");
  put(e, 1, 1);
  put(e, 2, 4);
  put(e, std::bit_cast<std::uint32_t>(1.0f), 4);
  put(e, std::bit_cast<std::uint32_t>(-2.0f), 4);
  std::uint64_t sum = 0;
  for (auto v : e) sum += v;
  put(e, sum, 8);
  CHECK(b == e);
}

TEST_CASE("weights: round trip is bit exact and keeps metadata") {
  const ModelConfig cfg = ModelConfig::small();
  WeightStore w = init_weights(cfg);
  w.tensors["extra.odd"] = Tensor<float>({3}, std::vector<float>{
      -0.0f, std::numeric_limits<float>::denorm_min(), std::numeric_limits<float>::quiet_NaN()});
  WeightStore r = decode_weights(encode_weights(w));
  CHECK(r.metadata == w.metadata);
  REQUIRE(r.tensors.size() == w.tensors.size());
  for (const auto& [name, t] : w.tensors) {
    CAPTURE(name);
    const auto& u = r.at(name);
    REQUIRE(u.shape() == t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(std::bit_cast<std::uint32_t>(u[i]) == std::bit_cast<std::uint32_t>(t[i]));
    }
  }
  CHECK(count_params(r) == count_params(w));
  CHECK(config_from_store(r).serialize() == cfg.serialize());
  CHECK(r.metadata.at("format_version") == "1");
  CHECK(r.metadata.at("gate_order") == "i,f,g,o");
}

TEST_CASE("weights: full-size store through a file loads into the model") {
  const ModelConfig cfg = ModelConfig::paper();
  const std::string p = temp_path("dcaec_test_io.bin");
  save_weights(p, init_weights(cfg));
  WeightStore w = load_weights(p);
  std::remove(p.c_str());
  CHECK(count_params(w) == 1405624);
  ModelConfig c = config_from_store(w);
  CHECK(c.serialize() == cfg.serialize());
  CHECK_NOTHROW(from_store<float>(c, w));
}

TEST_CASE("weights: corruption is detected") {
  WeightStore w = init_weights(ModelConfig::small());
  const auto good = encode_weights(w);

  for (std::size_t at : {std::size_t(3), std::size_t(20), good.size() / 2, good.size() - 9}) {
    CAPTURE(at);
    auto b = good;
    b[at] ^= 0x10;
    CHECK_THROWS_AS(decode_weights(b), InputError);
  }
  auto trunc = good;
  trunc.resize(good.size() - 100);
  CHECK_THROWS_AS(decode_weights(trunc), InputError);
  CHECK_THROWS_AS(decode_weights({}), InputError);

  // a consistent checksum does not excuse a bad version or trailing bytes
  auto reseal = [](std::vector<std::uint8_t> b) {
    b.resize(b.size() - 8);
    std::uint64_t s = 0;
    for (auto v : b) s += v;
    put(b, s, 8);
    return b;
  };
  auto v2 = good;
  v2[6] = 2;
  CHECK_THROWS_AS(decode_weights(reseal(v2)), InputError);
  auto extra = good;
  extra.insert(extra.end() - 8, 0);
  CHECK_THROWS_AS(decode_weights(reseal(extra)), InputError);
  auto count = good;
  count[10] += 1;
  CHECK_THROWS_AS(decode_weights(reseal(count)), InputError);

  WeightStore bad;
  bad.tensors["#x"] = Tensor<float>({1});
  CHECK_THROWS_AS(encode_weights(bad), InputError);
  CHECK_THROWS_AS(config_from_store(WeightStore{}), InputError);
}
