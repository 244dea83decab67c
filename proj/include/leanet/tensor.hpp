#pragma once
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "leanet/prng.hpp"

namespace leanet {

// ==== Shapes ================================================================
// Dense row-major f32 grids of rank <= 4. Images are H x W x C; batched images
// N x H x W x C; matrices N x D; scalars {1}. Kernels are k x k x Cin x Cout.
using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int shape_size(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;  // sized lazily by backward()
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // pulls this->grad into parents' grad
  bool requires_grad = false;
};

}  // namespace detail

// ==== Tensor ================================================================
// Cheap handle into the autodiff DAG: copying a Tensor copies the handle, not
// the data. Ops are free functions that append nodes; backward() walks the
// graph reverse-topologically exactly once per node.
class Tensor {
public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, float v);
  static Tensor from_data(Shape shape, std::vector<float> data);
  // He-uniform: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
  static Tensor he_uniform(Shape shape, int fan_in, Rng& rng);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int extent(int axis) const;
  int size() const;

  std::vector<float>& data();
  const std::vector<float>& data() const;
  float scalar() const;  // requires size() == 1

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  const std::vector<float>& grad() const;  // throws if backward never reached it
  void zero_grad();

  // Same values, detached from the graph (no parents, no gradient flow).
  Tensor detach() const;

  std::shared_ptr<detail::Node> node() const { return node_; }

private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
  friend Tensor make_op(Shape, std::vector<Tensor>, std::function<void(detail::Node&)>);
};

// Internal: create an op node (exposed for composite layers).
Tensor make_op(Shape shape, std::vector<Tensor> parents,
               std::function<void(detail::Node&)> backprop);

// ==== Layer primitives ======================================================
// input H x W x Cin or N x H x W x Cin; kernel k x k x Cin x Cout.
Tensor conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);
// kernel k x k x C x 1, per-channel spatial convolution.
Tensor depthwise_conv2d(const Tensor& input, const Tensor& kernel, int stride, int pad);
// kernel k x k x Cin x Cout with k == stride (the only form the U-Net uses).
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernel, int stride);
// bias: rank-1 {C} added across the last axis.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

struct BatchNormStats {
  std::vector<float> mean, var;
  bool initialized = false;
};
enum class BnMode { Train, Eval };
// Train: normalize per channel over batch+spatial dims, update running stats.
// Eval: use running stats; throws "uninitialized running statistics" if none.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BnMode mode, BatchNormStats& stats, float momentum = 0.1f,
                 float eps = 1e-5f);

enum class PoolKind { Max, Avg, GlobalAvg, ChannelAvg };
// Max/Avg need window to divide the spatial extents. GlobalAvg: H x W x C ->
// 1 x 1 x C. ChannelAvg: H x W x C -> H x W x 1 (Eq. 2's phi).
Tensor pool(const Tensor& x, PoolKind kind, int window = 0);

enum class Act { Relu, LeakyRelu, Sigmoid };
Tensor activate(const Tensor& x, Act kind, float alpha = 0.0f);

enum class EwKind { Add, Mul };
// Shapes equal, or b single-channel (last extent 1, other extents equal to
// a's) broadcast across a's channels; gradients sum-reduce over the broadcast.
Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind);
inline Tensor add(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::Add); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(a, b, EwKind::Mul); }
Tensor add_scalar(const Tensor& x, float c);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor pad_channels(const Tensor& x, int extra);  // append zero channels
Tensor flatten(const Tensor& x);                  // N,H,W,C -> N,H*W*C (rank3 -> rank1)
Tensor fully_connected(const Tensor& x, const Tensor& w);  // x: N x D, w: D x K

// Binary cross-entropy, mean over batch; predictions clamped to
// [1e-7, 1-1e-7] before the log. pred must hold labels.size() probabilities.
Tensor bce(const Tensor& pred, const std::vector<float>& labels);
// Mean absolute error against a constant target of identical shape.
Tensor l1_loss(const Tensor& pred, const Tensor& target);
Tensor sum(const Tensor& x);  // scalar sum of all elements

// Reverse-mode sweep from a scalar loss. Zeroes reachable grads first, so two
// calls without reset give identical gradients (no cross-call accumulation).
void backward(const Tensor& loss);

}  // namespace leanet
