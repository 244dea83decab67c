#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leanet/checkpoint.hpp"
#include "leanet/colorlab.hpp"
#include "leanet/model.hpp"

namespace leanet {

// Lossless channel partition of a LabImage: L and ab grids in their original
// units, row-major. recombine_luminance inverts it bit-for-bit.
struct LuminanceSplit {
  int h = 0, w = 0;
  std::vector<float> L;   // h*w values in [0,100]
  std::vector<float> ab;  // h*w*2 interleaved a,b values
};

LuminanceSplit split_luminance(const LabImage& img);
LabImage recombine_luminance(const LuminanceSplit& s,
                             Provenance tag = Provenance::Original);

// Normalized network views: L/100 as a 1 x H x W x 1 input tensor and
// (a+128)/255, (b+128)/255 as a 1 x H x W x 2 target tensor.
Tensor luminance_input(const LuminanceSplit& s);
Tensor chroma_target(const LuminanceSplit& s);

// Per-pixel CIEDE2000 between an image and its recoloring, plus the
// normalized twin min(dE/100, 1) once normalize_map has run.
struct AnomalyMap {
  int h = 0, w = 0;
  std::vector<float> de;          // h*w values, >= 0
  std::vector<float> normalized;  // empty until normalize_map
};

struct ColorizerConfig {
  int levels = 3;
  int base_filters = 8;
  int extent = 64;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  int epochs = 30;
  int batch = 16;
  int patience = 20;       // early-stop patience, in epochs
  double sigma_alpha = 0.1;  // Fancy PCA strength; 0 disables augmentation
  uint64_t seed = 0;
};

// The U-Net this config trains.
NetworkSpec colorizer_spec(const ColorizerConfig& cfg);

struct ColorizerTraining {
  Checkpoint weights;             // parameters at the best validation epoch
  std::vector<float> train_loss;  // one entry per completed epoch
  std::vector<float> val_loss;
  int best_epoch = 0;
};

// Trains the colorizer U-Net on normal images only: mean absolute error on
// the normalized ab channels, Adam(lr, beta1, beta2), Fancy PCA augmentation
// re-rolled each epoch, and early stopping on a 10% validation slice carved
// deterministically from cfg.seed before augmentation. labels must be all
// zero (normal); any flagged instance is an error, as is an empty dataset or
// fewer than 2*batch images. Identical inputs and seed reproduce the loss
// history bit-for-bit.
ColorizerTraining train_colorizer(const std::vector<LabImage>& images,
                                  const std::vector<int>& labels,
                                  const ColorizerConfig& cfg);

// Recolors img: predicted ab denormalized via v*255-128, luminance copied
// unchanged from the input. img extents must match the network input.
LabImage colorize(Model& unet, const LabImage& img);

// Per-pixel ciede2000(original[p], recolored[p]); extents must agree.
AnomalyMap anomaly_map(const LabImage& original, const LabImage& recolored);

// Fills the normalized twin with min(dE/100, 1).
AnomalyMap normalize_map(AnomalyMap m);

// Stored beside source images as <stem>.anom.png (8-bit preview of the
// normalized map) and <stem>.anom.f32 (raw dE values). Loading reads the
// f32 sidecar and re-normalizes.
void save_anomaly_map(const std::string& stem, const AnomalyMap& m);
AnomalyMap load_anomaly_map(const std::string& stem);

}  // namespace leanet
