#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "leanet/tensor.hpp"

namespace leanet {

// A small flat architecture IR. Composite blocks (residual blocks, inverted
// bottlenecks) are lowered by the builders into these primitive layers plus
// explicit Add/Concat wiring, so the compiler and shape inference stay simple.
enum class LayerKind {
  Input,
  Conv,           // kernel, stride, pad, filters, use_bias
  ConvTranspose,  // kernel == stride, filters, use_bias
  DepthwiseConv,  // kernel, stride, pad; channels preserved
  BatchNorm,
  Activation,  // act, alpha
  Pool,        // pool, window (Max/Avg)
  Add,         // two inputs, equal shapes
  Concat,      // two inputs, channel concatenation
  PadChannels, // filters = target channel count (zero padding)
  Flatten,
  FullyConnected,  // filters = units, use_bias
};

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int id = -1;             // index into NetworkSpec::layers
  std::vector<int> inputs; // producer layer ids; empty only for Input
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  int filters = 0;
  bool use_bias = true;
  Act act = Act::Relu;
  float alpha = 0.0f;
  PoolKind pool = PoolKind::Max;
  int window = 0;
  int attention_point = 0;  // 1..5, 0 = none; tags this layer's output
  std::string label;        // block name for printing/debugging
};

struct NetworkSpec {
  std::string name;
  int in_h = 0, in_w = 0, in_c = 0;
  std::vector<LayerSpec> layers;
  int downsampling_points = 0;  // stride-2 stages on the main path

  // Assigns the layer's id and appends it; returns the id for wiring.
  int add_layer(LayerSpec layer);
};

// Output dims per layer plus attention-point bookkeeping. Dims are {H,W,C}
// for spatial layers and {D} after Flatten / FullyConnected.
struct ShapeTable {
  std::vector<std::vector<int>> dims;
  std::array<int, 6> ap_layer{-1, -1, -1, -1, -1, -1};  // p -> layer id

  const std::vector<int>& at(int layer_id) const { return dims.at(size_t(layer_id)); }
  bool has_attention_point(int p) const { return p >= 1 && p <= 5 && ap_layer[size_t(p)] >= 0; }
  const std::vector<int>& ap_dims(int p) const;
};

// Walks the layer list, validating wiring and computing exact output extents.
// Throws std::runtime_error naming the offending layer index on any
// inconsistency (non-positive extent, rank mismatch, bad reference, ...).
ShapeTable infer_shapes(const NetworkSpec& spec);

// Trainable parameter count (conv/fc weights and biases, batchnorm gamma and
// beta; running statistics are buffers, not parameters).
int64_t count_params(const NetworkSpec& spec);

// One row per architecture-table block: a Conv/ConvTranspose layer with any
// attached BatchNorm/Activation, or an Input/Concat/Pool row. Only defined
// for linear chains (each layer feeding the next, plus concat skips).
struct SpecRow {
  std::string type;        // "Input", "Conv2D", "Conv2DTranspose", "Concat", ...
  bool bn = false;         // batchnorm attached to this row
  std::string activation;  // "LeakyRelu", "Relu", "sigmoid", "" for none
  std::vector<int> dim;    // output dims
  int kernel = 0, stride = 0, filters = 0;
  int concat_a = 0, concat_b = 0;  // 1-based row numbers for Concat rows
};
std::vector<SpecRow> table_rows(const NetworkSpec& spec, const ShapeTable& shapes);

// Human-readable per-layer dump (CLI `visualize`).
std::string print_spec(const NetworkSpec& spec);

// ---- Builders --------------------------------------------------------------

enum class CaanVariant { ResnetBased, MobilenetLike };
enum class AdnVariant { BasicCnn, Resnet18Like, Vgg16Like };

CaanVariant parse_caan_variant(const std::string& name);
AdnVariant parse_adn_variant(const std::string& name);
std::string to_string(CaanVariant v);
std::string to_string(AdnVariant v);

// Colorization U-Net: encoder of stride-2 k4 convs (LeakyReLU 0.2, batchnorm
// except the first), mirrored decoder of k2/s2 transpose convs with skip
// concatenations, final 2-channel sigmoid head (predicted a*b*).
NetworkSpec build_unet(int levels, int base_filters, int input_extent);

// Color anomaly attention network over a single-channel anomaly map. Both
// variants expose exactly five attention points at extents E, E/2, ..., E/16.
// head_units selects the sigmoid head arity: 2 for the table-faithful form,
// 1 for the single-probability head the joint BCE training consumes.
NetworkSpec build_caan(CaanVariant variant, double scale, int input_extent = 256,
                       int head_units = 2);

// Anomaly detection network; attention points align with build_caan at the
// same input extent. Head is a single sigmoid logit.
NetworkSpec build_adn(AdnVariant variant, double scale, int input_extent = 64,
                      int in_channels = 3);

// Ok iff both specs define attention point p and their spatial extents agree.
// Throws with both extents on mismatch, or on a missing/out-of-range point.
void validate_attention_alignment(const NetworkSpec& adn, const NetworkSpec& caan, int p);

}  // namespace leanet
