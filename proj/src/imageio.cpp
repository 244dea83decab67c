#include "leanet/imageio.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace leanet {
namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::runtime_error("'" + path + "': " + msg);
}

std::vector<uint8_t> slurp(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<uint8_t> bytes;
  uint8_t buf[1 << 16];
  size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) bytes.insert(bytes.end(), buf, buf + got);
  std::fclose(f);
  return bytes;
}

void spew(const std::string& path, const std::vector<uint8_t>& bytes) {
  FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
  std::fclose(f);
  if (!ok) throw std::runtime_error("cannot write '" + path + "'");
}

bool has_suffix(const std::string& s, const char* suf) {
  const size_t n = std::strlen(suf);
  return s.size() >= n && s.compare(s.size() - n, n, suf) == 0;
}

// ==== PNG ==================================================================

constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

void put_u32be(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v >> 24));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

uint32_t get_u32be(const uint8_t* p) {
  return uint32_t(p[0]) << 24 | uint32_t(p[1]) << 16 | uint32_t(p[2]) << 8 | uint32_t(p[3]);
}

void png_chunk(std::vector<uint8_t>& out, const char tag[4],
               const std::vector<uint8_t>& payload) {
  put_u32be(out, uint32_t(payload.size()));
  const size_t body = out.size();
  out.insert(out.end(), tag, tag + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  put_u32be(out, uint32_t(crc32(0, out.data() + body, uInt(out.size() - body))));
}

std::vector<uint8_t> encode_png(int h, int w, int channels, const uint8_t* pix) {
  const int stride = w * channels;
  std::vector<uint8_t> scan;
  scan.reserve(size_t(h) * (stride + 1));
  for (int y = 0; y < h; ++y) {
    scan.push_back(0);  // filter None
    scan.insert(scan.end(), pix + size_t(y) * stride, pix + size_t(y + 1) * stride);
  }
  std::vector<uint8_t> z(compressBound(uLong(scan.size())));
  uLongf zlen = uLongf(z.size());
  if (compress2(z.data(), &zlen, scan.data(), uLong(scan.size()), 6) != Z_OK)
    throw std::runtime_error("png: deflate failed");
  z.resize(zlen);

  std::vector<uint8_t> out(kPngSig, kPngSig + 8);
  std::vector<uint8_t> ihdr;
  put_u32be(ihdr, uint32_t(w));
  put_u32be(ihdr, uint32_t(h));
  ihdr.push_back(8);                              // bit depth
  ihdr.push_back(channels == 1 ? 0 : 2);          // gray or truecolor
  ihdr.push_back(0);                              // compression
  ihdr.push_back(0);                              // filter method
  ihdr.push_back(0);                              // no interlace
  png_chunk(out, "IHDR", ihdr);
  png_chunk(out, "IDAT", z);
  png_chunk(out, "IEND", {});
  return out;
}

uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return uint8_t(a);
  return pb <= pc ? uint8_t(b) : uint8_t(c);
}

struct DecodedPng {
  int h = 0, w = 0, channels = 0;
  std::vector<uint8_t> pix;  // h*w*channels
};

DecodedPng decode_png(const std::string& path, const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSig, 8) != 0)
    throw std::runtime_error("'" + path + "' is not a PNG file");

  DecodedPng img;
  std::vector<uint8_t> idat;
  bool have_ihdr = false, have_iend = false;
  size_t pos = 8;
  while (!have_iend) {
    if (pos + 12 > bytes.size()) fail(path, "truncated PNG");
    const uint32_t len = get_u32be(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) fail(path, "truncated PNG");
    const uint8_t* tag = &bytes[pos + 4];
    const uint8_t* payload = &bytes[pos + 8];
    if (crc32(0, tag, uInt(4 + len)) != get_u32be(payload + len))
      fail(path, "PNG chunk CRC mismatch");

    if (std::memcmp(tag, "IHDR", 4) == 0) {
      if (len != 13) fail(path, "bad IHDR");
      img.w = int(get_u32be(payload));
      img.h = int(get_u32be(payload + 4));
      const int depth = payload[8], ctype = payload[9];
      const int comp = payload[10], filt = payload[11], interlace = payload[12];
      if (img.w <= 0 || img.h <= 0) fail(path, "bad PNG extents");
      if (depth != 8) fail(path, "unsupported PNG bit depth " + std::to_string(depth));
      const int ch = ctype == 0 ? 1 : ctype == 2 ? 3 : ctype == 4 ? 2 : ctype == 6 ? 4 : 0;
      if (ch == 0) fail(path, "unsupported PNG color type " + std::to_string(ctype));
      if (comp != 0 || filt != 0) fail(path, "unsupported PNG compression");
      if (interlace != 0) fail(path, "interlaced PNG is unsupported");
      img.channels = ch;
      have_ihdr = true;
    } else if (std::memcmp(tag, "IDAT", 4) == 0) {
      if (!have_ihdr) fail(path, "IDAT before IHDR");
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(tag, "IEND", 4) == 0) {
      have_iend = true;
    }
    // ancillary chunks are skipped
    pos += 12 + len;
  }
  if (!have_ihdr) fail(path, "missing IHDR");

  const int stride = img.w * img.channels;
  std::vector<uint8_t> scan(size_t(img.h) * (stride + 1));
  uLongf out_len = uLongf(scan.size());
  if (uncompress(scan.data(), &out_len, idat.data(), uLong(idat.size())) != Z_OK ||
      out_len != scan.size())
    fail(path, "corrupt PNG data");

  img.pix.resize(size_t(img.h) * stride);
  const int bpp = img.channels;
  for (int y = 0; y < img.h; ++y) {
    const uint8_t f = scan[size_t(y) * (stride + 1)];
    const uint8_t* in = &scan[size_t(y) * (stride + 1) + 1];
    uint8_t* cur = &img.pix[size_t(y) * stride];
    const uint8_t* prior = y > 0 ? &img.pix[size_t(y - 1) * stride] : nullptr;
    if (f > 4) fail(path, "bad PNG filter type " + std::to_string(f));
    for (int i = 0; i < stride; ++i) {
      const int left = i >= bpp ? cur[i - bpp] : 0;
      const int up = prior ? prior[i] : 0;
      const int ul = (prior && i >= bpp) ? prior[i - bpp] : 0;
      int pred = 0;
      if (f == 1) pred = left;
      if (f == 2) pred = up;
      if (f == 3) pred = (left + up) / 2;
      if (f == 4) pred = paeth(left, up, ul);
      cur[i] = uint8_t((in[i] + pred) & 0xff);
    }
  }
  return img;
}

// ==== PPM / PGM ============================================================

std::vector<uint8_t> encode_pnm(int h, int w, int channels, const uint8_t* pix) {
  std::string header = std::string(channels == 1 ? "P5" : "P6") + "\n" +
                       std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), pix, pix + size_t(h) * w * channels);
  return out;
}

DecodedPng decode_pnm(const std::string& path, const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(char(bytes[pos++]));
    if (tok.empty()) fail(path, "truncated PNM header");
    return tok;
  };

  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") fail(path, "not a binary PGM/PPM file");
  DecodedPng img;
  img.channels = magic == "P5" ? 1 : 3;
  img.w = std::atoi(next_token().c_str());
  img.h = std::atoi(next_token().c_str());
  const int maxval = std::atoi(next_token().c_str());
  if (img.w <= 0 || img.h <= 0) fail(path, "bad PNM extents");
  if (maxval != 255) fail(path, "unsupported PNM maxval " + std::to_string(maxval));
  ++pos;  // single whitespace after maxval
  const size_t need = size_t(img.h) * img.w * img.channels;
  if (bytes.size() - pos < need) fail(path, "truncated PNM data");
  img.pix.assign(bytes.begin() + long(pos), bytes.begin() + long(pos + need));
  return img;
}

DecodedPng decode_any(const std::string& path) {
  const std::vector<uint8_t> bytes = slurp(path);
  return has_suffix(path, ".png") ? decode_png(path, bytes) : decode_pnm(path, bytes);
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v >> 16));
  out.push_back(uint8_t(v >> 24));
}

uint32_t get_u32le(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

void write_rgb(const std::string& path, const RgbImage& img) {
  spew(path, has_suffix(path, ".png") ? encode_png(img.h, img.w, 3, img.pix.data())
                                      : encode_pnm(img.h, img.w, 3, img.pix.data()));
}

void write_gray(const std::string& path, const GrayImage& img) {
  spew(path, has_suffix(path, ".png") ? encode_png(img.h, img.w, 1, img.pix.data())
                                      : encode_pnm(img.h, img.w, 1, img.pix.data()));
}

RgbImage read_rgb(const std::string& path) {
  const DecodedPng src = decode_any(path);
  RgbImage out(src.h, src.w);
  const int ch = src.channels;
  for (size_t i = 0; i < size_t(src.h) * src.w; ++i)
    for (int c = 0; c < 3; ++c)
      out.pix[3 * i + c] = src.pix[i * ch + (ch >= 3 ? c : 0)];
  return out;
}

GrayImage read_gray(const std::string& path) {
  const DecodedPng src = decode_any(path);
  if (src.channels != 1) fail(path, "expected a single-channel image");
  GrayImage out(src.h, src.w);
  out.pix = src.pix;
  return out;
}

void write_f32_map(const std::string& path, int h, int w, const std::vector<float>& v) {
  if (v.size() != size_t(h) * size_t(w))
    throw std::runtime_error("f32 map: " + std::to_string(v.size()) + " values for " +
                             std::to_string(h) + "x" + std::to_string(w));
  std::vector<uint8_t> out;
  out.reserve(8 + 4 * v.size());
  put_u32le(out, uint32_t(h));
  put_u32le(out, uint32_t(w));
  for (float x : v) put_u32le(out, std::bit_cast<uint32_t>(x));
  spew(path, out);
}

std::vector<float> read_f32_map(const std::string& path, int& h, int& w) {
  const std::vector<uint8_t> bytes = slurp(path);
  if (bytes.size() < 8) fail(path, "truncated f32 map");
  h = int(get_u32le(&bytes[0]));
  w = int(get_u32le(&bytes[4]));
  if (h <= 0 || w <= 0 || bytes.size() != 8 + 4 * size_t(h) * size_t(w))
    fail(path, "f32 map extents do not match file size");
  std::vector<float> v(size_t(h) * size_t(w));
  for (size_t i = 0; i < v.size(); ++i)
    v[i] = std::bit_cast<float>(get_u32le(&bytes[8 + 4 * i]));
  return v;
}

}  // namespace leanet
