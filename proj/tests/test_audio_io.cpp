#include <gtest/gtest.h>

#include <cstring>
#include <fstream>

#include "pesqlab/audio_io.hpp"
#include "pesqlab/errors.hpp"
#include "test_util.hpp"

using namespace pesqlab;
using pesqlab::testing::gaussian;
using pesqlab::testing::scratch_dir;

namespace {

void put16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back(v >> 8);
}
void put32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void tag(std::vector<unsigned char>& b, const char* t) { b.insert(b.end(), t, t + 4); }

// Hand-built PCM-16 file, independent of encode_wav.
std::vector<unsigned char> pcm16_file(const std::vector<std::int16_t>& s, int channels = 1,
                                      int rate = 16000) {
  std::vector<unsigned char> b;
  tag(b, "RIFF");
  put32(b, static_cast<std::uint32_t>(36 + 2 * s.size()));
  tag(b, "WAVE");
  tag(b, "fmt ");
  put32(b, 16);
  put16(b, 1);
  put16(b, static_cast<std::uint16_t>(channels));
  put32(b, static_cast<std::uint32_t>(rate));
  put32(b, static_cast<std::uint32_t>(rate * 2 * channels));
  put16(b, static_cast<std::uint16_t>(2 * channels));
  put16(b, 16);
  tag(b, "data");
  put32(b, static_cast<std::uint32_t>(2 * s.size()));
  for (auto v : s) put16(b, static_cast<std::uint16_t>(v));
  return b;
}

}  // namespace

TEST(Waveform, RejectsInvalidContent) {
  EXPECT_THROW(Waveform({}, 16000), ArgumentError);
  EXPECT_THROW(Waveform({0.0, std::nan("")}, 16000), ArgumentError);
  EXPECT_THROW(Waveform({0.0, INFINITY}, 16000), ArgumentError);
  EXPECT_THROW(Waveform({0.0}, 44100), ArgumentError);
  EXPECT_NO_THROW(Waveform({0.0}, 8000));
}

TEST(WavCodec, Pcm16HalfScaleDecodesToHalf) {
  auto w = decode_wav(pcm16_file({16384, -32768, 0}));
  EXPECT_EQ(w.sample_rate_hz(), 16000);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[0], 0.5);
  EXPECT_EQ(w[1], -1.0);
}

TEST(WavCodec, EmptyDataChunkIsParseError) { EXPECT_THROW(decode_wav(pcm16_file({})), ParseError); }

TEST(WavCodec, StereoIsRejected) {
  EXPECT_THROW(decode_wav(pcm16_file({1, 2, 3, 4}, 2)), FormatError);
}

TEST(WavCodec, TruncatedStreamIsParseError) {
  auto b = pcm16_file({1, 2, 3});
  b.resize(20);
  EXPECT_THROW(decode_wav(b), ParseError);
}

TEST(WavCodec, Pcm16ClampsAboveFullScale) {
  Waveform w({2.0, -0.25, -3.0}, 16000);
  auto back = decode_wav(encode_wav(w, SampleEncoding::pcm16));
  EXPECT_EQ(back[0], 32767.0 / 32768.0);
  EXPECT_EQ(back[1], -0.25);
  EXPECT_EQ(back[2], -1.0);
}

TEST(WavCodec, Float32RoundTripIsExactForFloatValues) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto x = gaussian(257 + seed, seed, 0.3);
    for (double& v : x) v = static_cast<float>(v);
    Waveform w(x, 16000);
    EXPECT_EQ(decode_wav(encode_wav(w, SampleEncoding::float32)), w) << "seed " << seed;
  }
}

TEST(WavCodec, Pcm16RoundTripWithinOneQuantum) {
  auto x = gaussian(4000, 7, 0.2);
  for (double& v : x) v = std::clamp(v, -1.0, 0.99);
  auto back = decode_wav(encode_wav(Waveform(x, 16000), SampleEncoding::pcm16));
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(back[i] - x[i]), 1.0 / 32768.0);
}

TEST(WavFile, SaveLoadThroughDisk) {
  auto dir = scratch_dir("wavfile");
  Waveform w({0.25, -0.5, 0.125}, 8000);
  save_waveform(w, dir / "a.wav", SampleEncoding::float32);
  EXPECT_EQ(load_waveform(dir / "a.wav"), w);
  EXPECT_THROW(load_waveform(dir / "missing.wav"), IoError);
}

TEST(Manifest, ParsesColumnsInAnyOrderWithComments) {
  auto m = parse_manifest("# corpus\ndegraded,id,reference\nd1.wav,a,r1.wav\n\"d 2.wav\",b,/abs/r2.wav\n",
                          "/data");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].id, "a");
  EXPECT_EQ(m.entries[0].reference_path, std::filesystem::path("/data/r1.wav"));
  EXPECT_EQ(m.entries[1].degraded_path, std::filesystem::path("/data/d 2.wav"));
  EXPECT_EQ(m.entries[1].reference_path, std::filesystem::path("/abs/r2.wav"));
}

TEST(Manifest, DuplicateIdIsNamed) {
  try {
    parse_manifest("id,reference,degraded\np232_001,a,b\np232_001,c,d\n", "/");
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("p232_001"), std::string::npos);
  }
}

TEST(Manifest, EmptyOrHeaderlessIsSchemaError) {
  EXPECT_THROW(parse_manifest("", "/"), SchemaError);
  EXPECT_THROW(parse_manifest("id,reference,degraded\n", "/"), SchemaError);
  EXPECT_THROW(parse_manifest("id,reference\nx,y\n", "/"), SchemaError);
}

TEST(MakePair, EqualLengthsGiveNoWarning) {
  Waveform a(gaussian(100, 1), 16000), b(gaussian(100, 2), 16000);
  auto p = make_pair(a, b, "x");
  EXPECT_TRUE(p.warnings.empty());
}

TEST(MakePair, SmallMismatchTruncatesWithWarning) {
  Waveform a(gaussian(48000, 1), 16000), b(gaussian(48100, 2), 16000);
  auto p = make_pair(a, b, "x");
  EXPECT_EQ(p.reference.size(), 48000u);
  EXPECT_EQ(p.degraded.size(), 48000u);
  EXPECT_EQ(p.warnings.size(), 1u);
  auto again = make_pair(p.reference, p.degraded, "x");
  EXPECT_EQ(again.reference, p.reference);
  EXPECT_EQ(again.degraded, p.degraded);
  EXPECT_TRUE(again.warnings.empty());
}

TEST(MakePair, RejectsRateAndLargeLengthMismatch) {
  EXPECT_THROW(make_pair(Waveform({0.1}, 8000), Waveform({0.1}, 16000), "x"), ValidationError);
  EXPECT_THROW(make_pair(Waveform(gaussian(1000, 1), 16000), Waveform(gaussian(1100, 1), 16000), "x"),
               ValidationError);
}
