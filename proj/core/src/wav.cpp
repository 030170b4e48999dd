#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "diffgmm/audio_io.hpp"
#include "diffgmm/errors.hpp"

namespace diffgmm {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

bool tag_is(const unsigned char* p, const char* tag) { return std::memcmp(p, tag, 4) == 0; }

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

void validate_clip(const AudioClip& clip) {
  if (clip.sample_rate_hz <= 0) throw_contract("audio clip sample rate must be positive");
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw_contract("audio clip contains non-finite samples");
  }
}

void normalize_peak(AudioClip& clip, double target) {
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  if (peak > 1.0) {
    const double g = target / peak;
    for (double& s : clip.samples) s *= g;
  }
}

AudioClip decode_wav(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes.data(), "RIFF") || !tag_is(bytes.data() + 8, "WAVE")) {
    throw FormatError("not a RIFF/WAVE file");
  }
  std::optional<FmtChunk> fmt;
  std::span<const unsigned char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const std::uint32_t size = read_u32(hdr + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Some writers leave a bogus size on a trailing data chunk; clamp it.
      if (tag_is(hdr, "data")) {
        data = bytes.subspan(body);
        have_data = true;
        break;
      }
      throw FormatError("chunk extends past end of file");
    }
    if (tag_is(hdr, "fmt ")) {
      if (size < 16) throw FormatError("fmt chunk too short");
      FmtChunk f;
      f.format = read_u16(bytes.data() + body);
      f.channels = read_u16(bytes.data() + body + 2);
      f.sample_rate = read_u32(bytes.data() + body + 4);
      f.bits = read_u16(bytes.data() + body + 14);
      if (f.format == kFormatExtensible && size >= 26) {
        // The first two bytes of the subformat GUID carry the real format tag.
        f.format = read_u16(bytes.data() + body + 24);
      }
      fmt = f;
    } else if (tag_is(hdr, "data")) {
      data = bytes.subspan(body, size);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }

  if (!fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw UnsupportedError("only mono and stereo WAV files are supported");
  }
  if (fmt->sample_rate == 0) throw FormatError("sample rate is zero");

  const bool pcm16 = fmt->format == kFormatPcm && fmt->bits == 16;
  const bool f32 = fmt->format == kFormatFloat && fmt->bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedError("unsupported WAV encoding (format " + std::to_string(fmt->format) +
                           ", " + std::to_string(fmt->bits) + " bits)");
  }

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data.size() / frame_bytes;

  AudioClip clip;
  clip.sample_rate_hz = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c) {
      const unsigned char* p = data.data() + i * frame_bytes + c * bytes_per_sample;
      if (pcm16) {
        acc += static_cast<double>(static_cast<std::int16_t>(read_u16(p))) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(read_u32(p)));
      }
    }
    clip.samples[i] = acc / fmt->channels;
  }
  for (double s : clip.samples) {
    if (!std::isfinite(s)) throw FormatError("WAV data contains non-finite samples");
  }
  normalize_peak(clip);
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  }
}

std::vector<unsigned char> encode_wav(const AudioClip& clip, WavEncoding encoding) {
  validate_clip(clip);
  const bool pcm16 = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t bytes_per_sample = bits / 8;
  const auto data_bytes = static_cast<std::uint32_t>(clip.size() * bytes_per_sample);

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes + 12);
  put_tag(out, "RIFF");
  put_u32(out, 0);  // patched below
  put_tag(out, "WAVE");

  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm16 ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate_hz) * bytes_per_sample);
  put_u16(out, static_cast<std::uint16_t>(bytes_per_sample));
  put_u16(out, bits);

  if (!pcm16) {
    // Non-PCM formats carry a fact chunk with the frame count.
    put_tag(out, "fact");
    put_u32(out, 4);
    put_u32(out, static_cast<std::uint32_t>(clip.size()));
  }

  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : clip.samples) {
    if (pcm16) {
      const double q = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
      put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  const auto riff_size = static_cast<std::uint32_t>(out.size() - 8);
  for (int i = 0; i < 4; ++i) out[4 + i] = static_cast<unsigned char>((riff_size >> (8 * i)) & 0xFF);
  return out;
}

void write_wav(const AudioClip& clip, const std::filesystem::path& path, WavEncoding encoding) {
  const auto bytes = encode_wav(clip, encoding);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace diffgmm
