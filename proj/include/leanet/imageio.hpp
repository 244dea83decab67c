#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leanet/colorlab.hpp"

namespace leanet {

// 8-bit single-channel image, row-major.
struct GrayImage {
  int h = 0, w = 0;
  std::vector<uint8_t> pix;

  GrayImage() = default;
  GrayImage(int hh, int ww) : h(hh), w(ww), pix(size_t(hh) * size_t(ww), 0) {}
  uint8_t& at(int y, int x) { return pix[size_t(y) * w + x]; }
  uint8_t at(int y, int x) const { return pix[size_t(y) * w + x]; }
};

// Writers emit 8-bit PNG (color type 2 or 0, filter None, one IDAT) for
// .png paths and binary PPM/PGM for .ppm/.pgm paths. Identical pixels
// always produce byte-identical files.
void write_rgb(const std::string& path, const RgbImage& img);
void write_gray(const std::string& path, const GrayImage& img);

// Readers accept 8-bit non-interlaced PNG in grayscale, gray+alpha, RGB and
// RGBA layouts (all five scanline filters), and binary PPM/PGM. read_rgb
// replicates gray and drops alpha; read_gray requires a single-channel
// source. Malformed or unsupported files throw std::runtime_error.
RgbImage read_rgb(const std::string& path);
GrayImage read_gray(const std::string& path);

// Raw float map sidecar: u32 height, u32 width, then h*w row-major f32
// values, all little-endian.
void write_f32_map(const std::string& path, int h, int w, const std::vector<float>& v);
std::vector<float> read_f32_map(const std::string& path, int& h, int& w);

}  // namespace leanet
