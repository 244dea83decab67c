#include "leanet/colorlab.hpp"

#include <algorithm>
#include <cmath>

#include "leanet/prng.hpp"

namespace leanet {
namespace {

constexpr double kPi = 3.14159265358979323846;

// D65 white point and the standard sRGB <-> XYZ matrices.
constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;
constexpr double kRgbToXyz[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                    {0.2126729, 0.7151522, 0.0721750},
                                    {0.0193339, 0.1191920, 0.9503041}};
constexpr double kXyzToRgb[3][3] = {{3.2404542, -1.5371385, -0.4985314},
                                    {-0.9692660, 1.8760108, 0.0415560},
                                    {0.0556434, -0.2040259, 1.0572252}};

double gamma_decode(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double gamma_encode(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

// CIE lightness companding and its inverse; delta = 6/29.
double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

double lab_finv(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d ? t * t * t : 3.0 * d * d * (t - 4.0 / 29.0);
}

uint8_t to_byte(double v) {
  const long r = std::llround(v * 255.0);
  return uint8_t(std::clamp(r, 0l, 255l));
}

// Hue angle in degrees in [0,360), defined as 0 for the achromatic point.
double hue_angle(double a, double b) {
  if (a == 0.0 && b == 0.0) return 0.0;
  const double h = std::atan2(b, a) * 180.0 / kPi;
  return h < 0.0 ? h + 360.0 : h;
}

// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix. Eigenvalues
// land in eval, matching eigenvectors in the columns of evec.
void jacobi3(double a[3][3], double eval[3], double evec[3][3]) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) evec[i][j] = i == j ? 1.0 : 0.0;
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    if (off < 1e-30) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0.0) continue;
        const double tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = evec[k][p], vkq = evec[k][q];
          evec[k][p] = c * vkp - s * vkq;
          evec[k][q] = s * vkp + c * vkq;
        }
      }
  }
  for (int i = 0; i < 3; ++i) eval[i] = a[i][i];
}

}  // namespace

LabPixel srgb_to_lab(uint8_t r, uint8_t g, uint8_t b) {
  const double lin[3] = {gamma_decode(r / 255.0), gamma_decode(g / 255.0),
                         gamma_decode(b / 255.0)};
  double xyz[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) xyz[i] += kRgbToXyz[i][j] * lin[j];
  const double fx = lab_f(xyz[0] / kXn), fy = lab_f(xyz[1] / kYn),
               fz = lab_f(xyz[2] / kZn);
  return LabPixel{float(116.0 * fy - 16.0), float(500.0 * (fx - fy)),
                  float(200.0 * (fy - fz))};
}

void lab_to_srgb(const LabPixel& p, uint8_t& r, uint8_t& g, uint8_t& b) {
  const double fy = (double(p.L) + 16.0) / 116.0;
  const double fx = fy + double(p.a) / 500.0;
  const double fz = fy - double(p.b) / 200.0;
  const double xyz[3] = {kXn * lab_finv(fx), kYn * lab_finv(fy), kZn * lab_finv(fz)};
  double lin[3] = {0.0, 0.0, 0.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) lin[i] += kXyzToRgb[i][j] * xyz[j];
  r = to_byte(gamma_encode(std::clamp(lin[0], 0.0, 1.0)));
  g = to_byte(gamma_encode(std::clamp(lin[1], 0.0, 1.0)));
  b = to_byte(gamma_encode(std::clamp(lin[2], 0.0, 1.0)));
}

LabImage rgb_to_lab(const RgbImage& img, Provenance tag) {
  LabImage out(img.h, img.w, tag);
  for (size_t i = 0; i < out.pix.size(); ++i)
    out.pix[i] = srgb_to_lab(img.pix[3 * i], img.pix[3 * i + 1], img.pix[3 * i + 2]);
  return out;
}

RgbImage lab_to_rgb(const LabImage& img) {
  RgbImage out(img.h, img.w);
  for (size_t i = 0; i < img.pix.size(); ++i)
    lab_to_srgb(img.pix[i], out.pix[3 * i], out.pix[3 * i + 1], out.pix[3 * i + 2]);
  return out;
}

double ciede2000(const LabPixel& p, const LabPixel& q) {
  const double L1 = p.L, a1 = p.a, b1 = p.b;
  const double L2 = q.L, a2 = q.a, b2 = q.b;
  constexpr double kPow25_7 = 6103515625.0;  // 25^7

  // Chroma-dependent rescaling of the a axis (the G correction).
  const double cbar = 0.5 * (std::hypot(a1, b1) + std::hypot(a2, b2));
  const double cbar7 = std::pow(cbar, 7.0);
  const double g = 0.5 * (1.0 - std::sqrt(cbar7 / (cbar7 + kPow25_7)));
  const double a1p = (1.0 + g) * a1, a2p = (1.0 + g) * a2;
  const double c1p = std::hypot(a1p, b1), c2p = std::hypot(a2p, b2);
  const double h1p = hue_angle(a1p, b1), h2p = hue_angle(a2p, b2);
  const bool achromatic = c1p * c2p == 0.0;

  // Differences. The hue difference walks the short way around the circle
  // and collapses to zero when either sample is achromatic. Antipodal hues
  // put |h2p - h1p| exactly on 180, where the published convention takes the
  // <= side; the epsilon keeps rounding noise from flipping that branch.
  constexpr double kEdge = 180.0 + 1e-9;
  const double dlp = L2 - L1;
  const double dcp = c2p - c1p;
  double dhp = 0.0;
  if (!achromatic) {
    dhp = h2p - h1p;
    if (dhp > kEdge) dhp -= 360.0;
    if (dhp < -kEdge) dhp += 360.0;
  }
  const double dHp = 2.0 * std::sqrt(c1p * c2p) * std::sin(0.5 * dhp * kPi / 180.0);

  // Arithmetic means, with the hue mean kept on the short arc.
  const double lbar = 0.5 * (L1 + L2);
  const double cpbar = 0.5 * (c1p + c2p);
  double hbar;
  if (achromatic)
    hbar = h1p + h2p;
  else if (std::fabs(h1p - h2p) <= kEdge)
    hbar = 0.5 * (h1p + h2p);
  else
    hbar = 0.5 * (h1p + h2p + (h1p + h2p < 360.0 ? 360.0 : -360.0));

  const double rad = kPi / 180.0;
  const double t = 1.0 - 0.17 * std::cos((hbar - 30.0) * rad) +
                   0.24 * std::cos(2.0 * hbar * rad) +
                   0.32 * std::cos((3.0 * hbar + 6.0) * rad) -
                   0.20 * std::cos((4.0 * hbar - 63.0) * rad);
  const double l50 = (lbar - 50.0) * (lbar - 50.0);
  const double sl = 1.0 + 0.015 * l50 / std::sqrt(20.0 + l50);
  const double sc = 1.0 + 0.045 * cpbar;
  const double sh = 1.0 + 0.015 * cpbar * t;
  const double cpbar7 = std::pow(cpbar, 7.0);
  const double dtheta = 30.0 * std::exp(-((hbar - 275.0) / 25.0) * ((hbar - 275.0) / 25.0));
  const double rt = -2.0 * std::sqrt(cpbar7 / (cpbar7 + kPow25_7)) *
                    std::sin(2.0 * dtheta * rad);

  const double vl = dlp / sl, vc = dcp / sc, vh = dHp / sh;
  return std::sqrt(std::max(0.0, vl * vl + vc * vc + vh * vh + rt * vc * vh));
}

RgbImage fancy_pca(const RgbImage& img, double strength, uint64_t seed) {
  RgbImage out(img.h, img.w);
  const size_t n = img.pix.size() / 3;
  if (n == 0) return out;

  double mean[3] = {0.0, 0.0, 0.0};
  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) mean[c] += img.pix[3 * i + c] / 255.0;
  for (double& m : mean) m /= double(n);

  double cov[3][3] = {};
  for (size_t i = 0; i < n; ++i) {
    const double d[3] = {img.pix[3 * i] / 255.0 - mean[0],
                         img.pix[3 * i + 1] / 255.0 - mean[1],
                         img.pix[3 * i + 2] / 255.0 - mean[2]};
    for (int c = 0; c < 3; ++c)
      for (int e = 0; e < 3; ++e) cov[c][e] += d[c] * d[e];
  }
  for (auto& row : cov)
    for (double& v : row) v /= double(n);

  double eval[3], evec[3][3];
  jacobi3(cov, eval, evec);

  // Sort eigenpairs descending and canonicalize each eigenvector's sign so
  // its largest-magnitude component is positive.
  int order[3] = {0, 1, 2};
  std::sort(order, order + 3, [&](int x, int y) { return eval[x] > eval[y]; });
  double shift[3] = {0.0, 0.0, 0.0};
  Rng rng(seed);
  for (int rank = 0; rank < 3; ++rank) {
    const int i = order[rank];
    int top = 0;
    for (int k = 1; k < 3; ++k)
      if (std::fabs(evec[k][i]) > std::fabs(evec[top][i])) top = k;
    const double sign = evec[top][i] < 0.0 ? -1.0 : 1.0;
    const double alpha = rng.next_gaussian() * strength;
    for (int c = 0; c < 3; ++c) shift[c] += alpha * eval[i] * sign * evec[c][i];
  }

  for (size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) {
      const long v = std::llround(double(img.pix[3 * i + c]) + 255.0 * shift[c]);
      out.pix[3 * i + c] = uint8_t(std::clamp(v, 0l, 255l));
    }
  return out;
}

}  // namespace leanet
