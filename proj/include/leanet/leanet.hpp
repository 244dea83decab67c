#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "leanet/anomap.hpp"
#include "leanet/model.hpp"
#include "leanet/netspec.hpp"
#include "leanet/tensor.hpp"

namespace leanet {

// ==== Attention primitives ==================================================

// M = sigmoid(channel-average(features)): ...xHxWxC -> ...xHxWx1. Values lie
// in (0,1); float rounding saturates to exactly 1 only when a channel mean
// exceeds ~17, far outside post-activation feature ranges. Differentiable
// into the producing network.
Tensor attention_map(const Tensor& features);

// f_hat = (1 + m) * f with the single-channel map m broadcast across f's
// channels. Exact at the limits: m == 0 returns f bitwise, m == 1 returns
// 2*f bitwise, and sign(f_hat) == sign(f) with |f| <= |f_hat| <= 2|f|
// everywhere since m stays in [0,1]. Throws on extent mismatch.
Tensor apply_attention(const Tensor& f, const Tensor& m);

// How the attention map crosses from the CAAN into the ADN forward pass.
enum class AttentionPath {
  Active,    // full coupling: values and gradients flow into the CAAN
  Detached,  // same values, but no gradient crosses into the CAAN (probe)
  Zeroed,    // map replaced by detached zeros: the ADN runs exactly baseline
};

// ==== Joint model ===========================================================

// A CAAN (attention branch, fed the normalized anomaly map) paired with an
// ADN (detection branch, fed the image) coupled at one attention point.
// Parameter streams derive from the seed as derive_seed(seed, "caan") and
// derive_seed(seed, "adn"), so Model(adn_spec, derive_seed(seed, "adn"))
// reproduces this model's detection branch bit for bit.
struct LeaModel {
  Model caan;
  Model adn;
  int point;  // active attention point, 1..5

  // Throws when either network lacks point p or their extents disagree.
  LeaModel(NetworkSpec caan_spec, NetworkSpec adn_spec, int p, uint64_t seed);

  // Entries namespaced "caan/..." and "adn/...", metadata records the active
  // point, both network names, and the map normalization convention.
  Checkpoint to_checkpoint() const;
  void load_from_checkpoint(const Checkpoint& ck);
  void save(const std::string& path) const;
  void load(const std::string& path);
};

// One labeled instance: image tensor, its anomaly map, binary label.
struct Sample {
  Tensor x;        // HxWxC floats in [0,1], extents matching the ADN input
  AnomalyMap x_att;  // normalized twin filled; extents matching the CAAN input
  int y = 0;       // 0 = normal, 1 = anomalous
};

// One joint forward pass. y_ad / y_att hold one probability per batch row;
// m is the attention map that entered the ADN (all graph-connected).
struct LeaForward {
  Tensor y_ad;
  Tensor y_att;
  Tensor m;
  ForwardCapture adn_taps;  // before/after snapshots, filled when requested
};

// Runs the CAAN on x_att (N x H x W x 1), extracts the attention map at the
// active point, and runs the ADN on x (N x H x W x C) with the map applied
// there. Taps are captured only when want_taps is set.
LeaForward lea_forward(LeaModel& model, const Tensor& x, const Tensor& x_att, BnMode mode,
                       AttentionPath path = AttentionPath::Active, bool want_taps = false);
// Batch-of-one convenience over a Sample.
LeaForward lea_forward(LeaModel& model, const Sample& s, BnMode mode,
                       AttentionPath path = AttentionPath::Active, bool want_taps = false);

// ==== Joint objective =======================================================

struct LossBreakdown {
  float total = 0.0f;  // att + ad, summed in this order
  float att = 0.0f;    // attention branch BCE
  float ad = 0.0f;     // detection branch BCE
};

// Graph nodes of the joint objective; backward(total) reaches both networks.
struct LeaLoss {
  Tensor total, att, ad;
  LossBreakdown values() const;
};

// L = BCE(y_att, y) + BCE(y_ad, y), mean over the batch.
LeaLoss total_loss(const Tensor& y_ad, const Tensor& y_att, const std::vector<float>& labels);

// ==== Joint training ========================================================

struct LeaTrainConfig {
  int epochs = 100;
  int batch = 16;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  uint64_t seed = 0;
  AttentionPath path = AttentionPath::Active;
};

// End-to-end joint training: one Adam step over the concatenated parameter
// set per batch (CAAN parameters first). Batch order derives only from
// (seed, epoch), never from the attention path, so a Zeroed run shadows a
// standalone detection-network run exactly. Returns the per-epoch mean loss
// breakdown. Throws on an empty or single-class dataset, extents that do not
// match the model, maps without normalized values, or non-binary labels.
std::vector<LossBreakdown> train_lea(LeaModel& model, const std::vector<Sample>& data,
                                     const LeaTrainConfig& cfg);

}  // namespace leanet
