#include "nmslab/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace nmslab {

Raster::Raster(size_t height, size_t width, float fill)
    : height_(height), width_(width), data_(height * width * kChannels, fill) {
  if (height == 0 || width == 0 || height % kDimMultiple != 0 || width % kDimMultiple != 0) {
    throw std::invalid_argument("Raster: dimensions must be positive multiples of 32");
  }
  if (!(fill >= 0.0f && fill <= 1.0f)) {
    throw std::invalid_argument("Raster: fill value must lie in [0,1]");
  }
}

void Raster::clamp_to_unit() {
  for (float& v : data_) v = std::clamp(v, 0.0f, 1.0f);
}

Raster amplify(const Raster& img, size_t k, bool resize_back, double degradation) {
  if (k == 0) throw std::invalid_argument("amplify: k must be >= 1");
  if (!(degradation >= 0.0 && degradation <= 1.0)) {
    throw std::invalid_argument("amplify: degradation must lie in [0,1]");
  }
  if (k == 1) return img;

  const size_t h = img.height();
  const size_t w = img.width();
  Raster out(h * k, w * k);

  const size_t copies = k * k;
  for (size_t tj = 0; tj < k; ++tj) {
    for (size_t ti = 0; ti < k; ++ti) {
      double scale = 1.0;
      if (resize_back && copies > 1) {
        const double rank = static_cast<double>(tj * k + ti) / static_cast<double>(copies - 1);
        scale = std::pow(degradation, rank);
      }
      for (size_t y = 0; y < h; ++y) {
        for (size_t x = 0; x < w; ++x) {
          for (size_t c = 0; c < Raster::kChannels; ++c) {
            const float v = img.at(y, x, c);
            const float out_v =
                resize_back
                    ? kSceneBackground + static_cast<float>(scale) * (v - kSceneBackground)
                    : v;
            out.at(tj * h + y, ti * w + x, c) = out_v;
          }
        }
      }
    }
  }
  return out;
}

namespace {

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

uint32_t get_u32le(std::span<const uint8_t> b, size_t off) {
  return static_cast<uint32_t>(b[off]) | (static_cast<uint32_t>(b[off + 1]) << 8) |
         (static_cast<uint32_t>(b[off + 2]) << 16) |
         (static_cast<uint32_t>(b[off + 3]) << 24);
}

constexpr std::array<uint8_t, 4> kRftMagic = {'R', 'F', 'T', '0'};

}  // namespace

std::vector<uint8_t> encode_rft(const Raster& img) {
  std::vector<uint8_t> out(kRftMagic.begin(), kRftMagic.end());
  out.reserve(16 + img.value_count() * 4);
  put_u32le(out, static_cast<uint32_t>(img.height()));
  put_u32le(out, static_cast<uint32_t>(img.width()));
  put_u32le(out, static_cast<uint32_t>(Raster::kChannels));
  const size_t payload_off = out.size();
  out.resize(payload_off + img.value_count() * 4);
  static_assert(sizeof(float) == 4);
  std::memcpy(out.data() + payload_off, img.values().data(), img.value_count() * 4);
  return out;
}

Raster decode_rft(std::span<const uint8_t> bytes) {
  if (bytes.size() < 16 || !std::equal(kRftMagic.begin(), kRftMagic.end(), bytes.begin())) {
    throw std::invalid_argument("decode_rft: bad magic");
  }
  const uint32_t h = get_u32le(bytes, 4);
  const uint32_t w = get_u32le(bytes, 8);
  const uint32_t c = get_u32le(bytes, 12);
  if (c != Raster::kChannels) throw std::invalid_argument("decode_rft: expected 3 channels");
  const size_t expected = static_cast<size_t>(h) * w * c * 4;
  if (bytes.size() != 16 + expected) {
    throw std::invalid_argument("decode_rft: payload size does not match declared shape");
  }
  Raster img(h, w);  // validates the multiple-of-32 contract
  std::memcpy(img.values().data(), bytes.data() + 16, expected);
  for (float v : img.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw std::invalid_argument("decode_rft: pixel values must lie in [0,1]");
    }
  }
  return img;
}

namespace {

// CRC-32 (PNG polynomial), table built once.
uint32_t crc32(std::span<const uint8_t> data, uint32_t crc = 0) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t n = 0; n < 256; ++n) {
      uint32_t c = n;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[n] = c;
    }
    return t;
  }();
  crc ^= 0xffffffffu;
  for (uint8_t b : data) crc = table[(crc ^ b) & 0xffu] ^ (crc >> 8);
  return crc ^ 0xffffffffu;
}

uint32_t adler32(std::span<const uint8_t> data) {
  uint32_t a = 1, b = 0;
  for (uint8_t byte : data) {
    a = (a + byte) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<uint8_t>(v & 0xff));
}

uint32_t get_u32be(std::span<const uint8_t> b, size_t off) {
  return (static_cast<uint32_t>(b[off]) << 24) | (static_cast<uint32_t>(b[off + 1]) << 16) |
         (static_cast<uint32_t>(b[off + 2]) << 8) | static_cast<uint32_t>(b[off + 3]);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], std::span<const uint8_t> body) {
  put_u32be(out, static_cast<uint32_t>(body.size()));
  std::vector<uint8_t> typed;
  typed.reserve(4 + body.size());
  typed.insert(typed.end(), type, type + 4);
  typed.insert(typed.end(), body.begin(), body.end());
  out.insert(out.end(), typed.begin(), typed.end());
  put_u32be(out, crc32(typed));
}

constexpr std::array<uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace

std::vector<uint8_t> encode_png(const Raster& img) {
  const size_t h = img.height();
  const size_t w = img.width();

  // Filter byte 0 per scanline, 8-bit RGB samples.
  std::vector<uint8_t> raw;
  raw.reserve(h * (1 + w * 3));
  for (size_t y = 0; y < h; ++y) {
    raw.push_back(0);
    for (size_t x = 0; x < w; ++x) {
      for (size_t c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(y, x, c), 0.0f, 1.0f);
        raw.push_back(static_cast<uint8_t>(std::lround(v * 255.0f)));
      }
    }
  }

  // zlib stream with stored deflate blocks.
  std::vector<uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  size_t off = 0;
  while (off < raw.size()) {
    const size_t n = std::min<size_t>(65535, raw.size() - off);
    const bool last = off + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<uint8_t>(n & 0xff));
    z.push_back(static_cast<uint8_t>((n >> 8) & 0xff));
    z.push_back(static_cast<uint8_t>(~n & 0xff));
    z.push_back(static_cast<uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<ptrdiff_t>(off),
             raw.begin() + static_cast<ptrdiff_t>(off + n));
    off += n;
  }
  put_u32be(z, adler32(raw));

  std::vector<uint8_t> out(kPngSignature.begin(), kPngSignature.end());
  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, static_cast<uint32_t>(w));
  put_u32be(ihdr, static_cast<uint32_t>(h));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: truecolor
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter method
  ihdr.push_back(0);   // no interlace
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", z);
  put_chunk(out, "IEND", {});
  return out;
}

Raster decode_png(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
    throw std::invalid_argument("decode_png: not a PNG");
  }

  size_t pos = 8;
  uint32_t w = 0, h = 0;
  std::vector<uint8_t> idat;
  bool saw_ihdr = false;
  while (pos + 12 <= bytes.size()) {
    const uint32_t len = get_u32be(bytes, pos);
    if (pos + 12 + len > bytes.size()) throw std::invalid_argument("decode_png: truncated chunk");
    const std::string type(bytes.begin() + static_cast<ptrdiff_t>(pos + 4),
                           bytes.begin() + static_cast<ptrdiff_t>(pos + 8));
    const auto body = bytes.subspan(pos + 8, len);
    if (type == "IHDR") {
      if (len != 13) throw std::invalid_argument("decode_png: bad IHDR");
      w = get_u32be(body, 0);
      h = get_u32be(body, 4);
      if (body[8] != 8 || body[9] != 2 || body[10] != 0 || body[11] != 0 || body[12] != 0) {
        throw std::invalid_argument("decode_png: only 8-bit non-interlaced RGB is supported");
      }
      saw_ihdr = true;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), body.begin(), body.end());
    } else if (type == "IEND") {
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || idat.size() < 6) throw std::invalid_argument("decode_png: missing chunks");

  // Inflate, stored blocks only.
  std::vector<uint8_t> raw;
  size_t zpos = 2;  // skip zlib header
  for (;;) {
    if (zpos >= idat.size()) throw std::invalid_argument("decode_png: truncated deflate stream");
    const uint8_t header = idat[zpos];
    if ((header & 0x06) != 0) {
      throw std::invalid_argument("decode_png: compressed deflate blocks are not supported");
    }
    const size_t n = static_cast<size_t>(idat[zpos + 1]) | (static_cast<size_t>(idat[zpos + 2]) << 8);
    zpos += 5;
    if (zpos + n > idat.size()) throw std::invalid_argument("decode_png: truncated stored block");
    raw.insert(raw.end(), idat.begin() + static_cast<ptrdiff_t>(zpos),
               idat.begin() + static_cast<ptrdiff_t>(zpos + n));
    zpos += n;
    if (header & 0x01) break;
  }

  const size_t stride = 1 + static_cast<size_t>(w) * 3;
  if (raw.size() != static_cast<size_t>(h) * stride) {
    throw std::invalid_argument("decode_png: scanline data size mismatch");
  }
  Raster img(h, w);
  for (size_t y = 0; y < h; ++y) {
    if (raw[y * stride] != 0) {
      throw std::invalid_argument("decode_png: only filter 0 scanlines are supported");
    }
    for (size_t x = 0; x < w; ++x) {
      for (size_t c = 0; c < 3; ++c) {
        img.at(y, x, c) = static_cast<float>(raw[y * stride + 1 + x * 3 + c]) / 255.0f;
      }
    }
  }
  return img;
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("write_file: cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write_file: short write to " + path.string());
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("read_file: cannot open " + path.string());
  const std::streamsize n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw std::runtime_error("read_file: short read from " + path.string());
  return bytes;
}

}  // namespace nmslab
