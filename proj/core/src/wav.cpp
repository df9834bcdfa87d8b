#include "geco/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "geco/errors.hpp"
#include "geco/manifest.hpp"

namespace geco {

namespace {

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
  }

  std::string tag() {
    need(4, "chunk tag");
    std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return t;
  }

  std::uint32_t u32() {
    need(4, "u32");
    const auto* p = bytes_.data() + pos_;
    pos_ += 4;
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
  }

  std::uint16_t u16() {
    need(2, "u16");
    const auto* p = bytes_.data() + pos_;
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
  }

  void skip(std::size_t n) {
    need(n, "chunk body");
    pos_ += n;
  }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::int16_t quantize(double x) {
  const double q = std::nearbyint(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
}

}  // namespace

Waveform decode_wav(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (r.tag() != "RIFF") throw FormatError("missing RIFF signature", 0);
  r.u32();  // RIFF size; not trusted
  if (r.tag() != "WAVE") throw FormatError("missing WAVE signature", 8);

  bool have_fmt = false;
  int sample_rate = 0;
  while (r.remaining() >= 8) {
    const std::size_t chunk_at = r.offset();
    const std::string id = r.tag();
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) throw FormatError("fmt chunk too small", chunk_at);
      const std::size_t body = r.offset();
      const std::uint16_t format = r.u16();
      const std::uint16_t channels = r.u16();
      const std::uint32_t rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      const std::uint16_t bits = r.u16();
      if (format != 1) {
        throw FormatError("unsupported encoding (format tag " + std::to_string(format) +
                              "), only PCM is supported", body);
      }
      if (channels != 1) {
        throw FormatError("unsupported channel count " + std::to_string(channels) +
                              ", only mono is supported", body + 2);
      }
      if (bits != 16) {
        throw FormatError("unsupported bit depth " + std::to_string(bits) +
                              ", only 16-bit PCM is supported", body + 14);
      }
      if (rate == 0) throw FormatError("sample rate is zero", body + 4);
      sample_rate = static_cast<int>(rate);
      have_fmt = true;
      r.skip(size - 16 + (size & 1));
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", chunk_at);
      if (size % 2 != 0) throw FormatError("data chunk size is not a whole number of samples", chunk_at + 4);
      r.need(size, "data chunk");
      if (size == 0) throw FormatError("data chunk holds no samples", chunk_at + 4);
      Waveform w;
      w.sample_rate = sample_rate;
      w.samples.resize(size / 2);
      const unsigned char* p = bytes.data() + r.offset();
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto q = static_cast<std::int16_t>(p[2 * i] | p[2 * i + 1] << 8);
        w.samples[i] = q / 32768.0;
      }
      return w;
    } else {
      r.skip(size + (size & 1));
    }
  }
  throw FormatError(have_fmt ? "no data chunk" : "no fmt chunk", r.offset());
}

std::vector<unsigned char> encode_wav(const Waveform& w) {
  w.validate();
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double x : w.samples) put_u16(out, static_cast<std::uint16_t>(quantize(x)));
  return out;
}

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  atomic_write_bytes(path, encode_wav(w));
}

}  // namespace geco
