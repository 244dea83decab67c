#pragma once

#include <cstdint>
#include <vector>

namespace leanet {

// CIELAB pixel, D65 white point, 2 degree observer. L in [0,100]; a and b
// are unitless and practically within [-128,127]. Stored as float; every
// conversion and color-difference routine computes in double internally.
struct LabPixel {
  float L = 0.0f;
  float a = 0.0f;
  float b = 0.0f;
};

enum class Provenance { Original, Recolored };

// Row-major H x W grid of LabPixel.
struct LabImage {
  int h = 0, w = 0;
  std::vector<LabPixel> pix;
  Provenance tag = Provenance::Original;

  LabImage() = default;
  LabImage(int hh, int ww, Provenance t = Provenance::Original)
      : h(hh), w(ww), pix(size_t(hh) * size_t(ww)), tag(t) {}
  LabPixel& at(int y, int x) { return pix[size_t(y) * w + x]; }
  const LabPixel& at(int y, int x) const { return pix[size_t(y) * w + x]; }
};

// 8-bit RGB image, row-major, 3 bytes per pixel.
struct RgbImage {
  int h = 0, w = 0;
  std::vector<uint8_t> pix;

  RgbImage() = default;
  RgbImage(int hh, int ww) : h(hh), w(ww), pix(size_t(hh) * size_t(ww) * 3, 0) {}
  uint8_t* at(int y, int x) { return &pix[(size_t(y) * w + x) * 3]; }
  const uint8_t* at(int y, int x) const { return &pix[(size_t(y) * w + x) * 3]; }
};

// sRGB (gamma-encoded 8-bit) -> linear RGB -> XYZ (D65) -> CIELAB.
LabPixel srgb_to_lab(uint8_t r, uint8_t g, uint8_t b);

// Inverse of srgb_to_lab; out-of-gamut values clamp to [0,255].
void lab_to_srgb(const LabPixel& p, uint8_t& r, uint8_t& g, uint8_t& b);

LabImage rgb_to_lab(const RgbImage& img, Provenance tag = Provenance::Original);
RgbImage lab_to_rgb(const LabImage& img);

// The full CIEDE2000 color difference with parametric factors
// k_L = k_C = k_H = 1. Non-negative, symmetric, zero exactly when the two
// pixels hold identical values.
double ciede2000(const LabPixel& p, const LabPixel& q);

// Fancy PCA augmentation. Per image: the 3x3 channel covariance (population
// normalization) of the [0,1]-scaled pixels is eigendecomposed and the
// perturbation sum_i alpha_i * lambda_i * e_i is added to every pixel, with
// alpha_i ~ N(0, strength) drawn once per image. Result is scaled back to
// bytes and clamped to [0,255].
//
// Determinism contract: the alphas are the first three next_gaussian()
// draws of Rng(seed), scaled by strength, paired with the eigenvalues in
// descending order; eigenvector signs are canonicalized so the largest-
// magnitude component is positive. strength == 0 (and any constant-color
// image) reproduces the input bit-for-bit.
RgbImage fancy_pca(const RgbImage& img, double strength, uint64_t seed);

}  // namespace leanet
