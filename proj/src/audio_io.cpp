#include "pesqlab/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pesqlab/errors.hpp"

namespace pesqlab {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

static_assert(std::endian::native == std::endian::little,
              "WAV codec assumes a little-endian host");

// Bounds-checked little-endian cursor over a byte buffer.
class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void require(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw ParseError(std::string("truncated file while reading ") + what, pos_);
    }
  }

  std::uint16_t u16(const char* what) {
    require(2, what);
    std::uint16_t v;
    std::memcpy(&v, bytes_.data() + pos_, 2);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32(const char* what) {
    require(4, what);
    std::uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }

  std::string fourcc(const char* what) {
    require(4, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

  std::span<const unsigned char> take(std::size_t n, const char* what) {
    require(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  void skip(std::size_t n, const char* what) { take(n, what); }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

FmtChunk parse_fmt(std::span<const unsigned char> body, std::size_t body_offset) {
  if (body.size() < 16) throw ParseError("fmt chunk shorter than 16 bytes", body_offset);
  ByteReader r(body);
  FmtChunk f;
  f.format = r.u16("fmt.format");
  f.channels = r.u16("fmt.channels");
  f.sample_rate = r.u32("fmt.sample_rate");
  r.u32("fmt.byte_rate");
  r.u16("fmt.block_align");
  f.bits = r.u16("fmt.bits_per_sample");
  if (f.format == kFormatExtensible) {
    // cbSize, valid bits, channel mask, then the sub-format GUID whose first
    // two bytes carry the actual format tag.
    if (body.size() < 26) throw ParseError("extensible fmt chunk too short", body_offset);
    r.u16("fmt.cb_size");
    r.u16("fmt.valid_bits");
    r.u32("fmt.channel_mask");
    f.format = r.u16("fmt.sub_format");
  }
  return f;
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  unsigned char b[2];
  std::memcpy(b, &v, 2);
  out.insert(out.end(), b, b + 2);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  unsigned char b[4];
  std::memcpy(b, &v, 4);
  out.insert(out.end(), b, b + 4);
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

Waveform::Waveform(std::vector<double> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (samples_.empty()) throw ArgumentError("waveform must contain at least one sample");
  if (sample_rate_hz_ != 8000 && sample_rate_hz_ != 16000) {
    throw ArgumentError("sample rate must be 8000 or 16000 Hz, got " +
                        std::to_string(sample_rate_hz_));
  }
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (!std::isfinite(samples_[i])) {
      throw ArgumentError("non-finite sample at index " + std::to_string(i));
    }
  }
}

Waveform decode_wav(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (r.fourcc("RIFF tag") != "RIFF") throw FormatError("container", "missing RIFF tag");
  r.u32("RIFF size");
  if (r.fourcc("WAVE tag") != "WAVE") throw FormatError("container", "missing WAVE tag");

  bool have_fmt = false;
  FmtChunk fmt;
  while (true) {
    if (r.remaining() == 0) {
      throw ParseError(have_fmt ? "no data chunk" : "no fmt chunk", r.offset());
    }
    const std::string id = r.fourcc("chunk id");
    const std::uint32_t size = r.u32("chunk size");
    const std::size_t body_offset = r.offset();

    if (id == "fmt ") {
      fmt = parse_fmt(r.take(size, "fmt chunk"), body_offset);
      have_fmt = true;
      if (size % 2) r.skip(std::min<std::size_t>(1, r.remaining()), "pad byte");
      continue;
    }
    if (id != "data") {
      r.skip(size + (size % 2), "chunk body");
      continue;
    }
    if (!have_fmt) throw ParseError("data chunk before fmt chunk", body_offset);
    if (fmt.channels != 1) {
      throw FormatError("channels", std::to_string(fmt.channels) + " (only mono is supported)");
    }
    if (fmt.format == kFormatPcm && fmt.bits != 16) {
      throw FormatError("bits_per_sample", std::to_string(fmt.bits) + " for PCM (need 16)");
    }
    if (fmt.format == kFormatFloat && fmt.bits != 32) {
      throw FormatError("bits_per_sample", std::to_string(fmt.bits) + " for float (need 32)");
    }
    if (fmt.format != kFormatPcm && fmt.format != kFormatFloat) {
      throw FormatError("format_tag", std::to_string(fmt.format));
    }
    if (size == 0) throw ParseError("empty data chunk", body_offset);
    auto body = r.take(size, "data chunk");
    const std::size_t width = fmt.bits / 8;
    if (size % width) throw ParseError("data chunk not a whole number of samples", body_offset);

    std::vector<double> samples(size / width);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const unsigned char* p = body.data() + i * width;
      if (fmt.format == kFormatPcm) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        samples[i] = static_cast<double>(v) / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        if (!std::isfinite(v)) {
          throw ParseError("non-finite float sample", body_offset + i * width);
        }
        samples[i] = static_cast<double>(v);
      }
    }
    return Waveform(std::move(samples), static_cast<int>(fmt.sample_rate));
  }
}

std::vector<unsigned char> encode_wav(const Waveform& w, SampleEncoding encoding) {
  const bool pcm = encoding == SampleEncoding::pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t block = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * block);

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz()));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz()) * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);

  for (double x : w.samples()) {
    if (pcm) {
      const double clamped = std::clamp(x, -1.0, 32767.0 / 32768.0);
      const auto q = static_cast<std::int16_t>(std::lround(clamped * 32768.0));
      put_u16(out, static_cast<std::uint16_t>(q));
    } else {
      const float f = static_cast<float>(x);
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  }
  return out;
}

Waveform load_waveform(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte_offset());
  }
}

void save_waveform(const Waveform& w, const std::filesystem::path& path,
                   SampleEncoding encoding) {
  const auto bytes = encode_wav(w, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

UtterancePair make_pair(const Waveform& ref, const Waveform& deg, std::string id) {
  if (ref.sample_rate_hz() != deg.sample_rate_hz()) {
    throw ValidationError("sample-rate mismatch in pair '" + id + "': " +
                          std::to_string(ref.sample_rate_hz()) + " vs " +
                          std::to_string(deg.sample_rate_hz()) + " Hz");
  }
  const std::size_t n_ref = ref.size();
  const std::size_t n_deg = deg.size();
  if (n_ref == n_deg) return UtterancePair{ref, deg, std::move(id), {}};

  const std::size_t longer = std::max(n_ref, n_deg);
  const std::size_t shorter = std::min(n_ref, n_deg);
  const double mismatch = static_cast<double>(longer - shorter) / static_cast<double>(longer);
  if (mismatch > kPairLengthTolerance) {
    throw ValidationError("length mismatch in pair '" + id + "': " + std::to_string(n_ref) +
                          " vs " + std::to_string(n_deg) + " samples");
  }
  auto truncate = [shorter](const Waveform& w) {
    return w.with_samples(std::vector<double>(w.samples().begin(),
                                              w.samples().begin() + shorter));
  };
  std::string warning = "truncated to " + std::to_string(shorter) + " samples (lengths " +
                        std::to_string(n_ref) + " vs " + std::to_string(n_deg) + ")";
  return UtterancePair{truncate(ref), truncate(deg), std::move(id), {std::move(warning)}};
}

UtterancePair load_pair(const ManifestEntry& entry) {
  return make_pair(load_waveform(entry.reference_path), load_waveform(entry.degraded_path),
                   entry.id);
}

}  // namespace pesqlab
