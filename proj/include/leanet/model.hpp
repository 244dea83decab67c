#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "leanet/checkpoint.hpp"
#include "leanet/netspec.hpp"
#include "leanet/tensor.hpp"

namespace leanet {

// Tensors observed at attention points during one forward pass: `before` is
// the tapped feature map as produced by the network, `after` is what actually
// flowed on after any hook transformation (equal to `before` without a hook).
struct ForwardCapture {
  std::map<int, Tensor> before;
  std::map<int, Tensor> after;
};

// Called at each tagged attention point p with the tapped tensor; returns the
// tensor to continue the forward pass with (return the argument unchanged to
// leave the point untouched).
using AttentionHook = std::function<Tensor(int p, const Tensor&)>;

// A NetworkSpec compiled to parameters plus an interpreter for its layers.
// Parameters are created deterministically from the seed (He-uniform kernels
// and fc weights, zero biases, unit gamma / zero beta) in layer order, with
// stable names "layer<id>/<kind>/<tensor>" used by checkpoints.
class Model {
 public:
  Model(NetworkSpec spec, uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const NetworkSpec& spec() const { return spec_; }
  const ShapeTable& shapes() const { return shapes_; }
  std::vector<Tensor>& params() { return params_; }
  const std::vector<std::string>& param_names() const { return names_; }
  int64_t param_count() const;

  // x is N x H x W x C matching the spec's declared input. Streaming through
  // the layers in id order; `mode` selects batchnorm statistics handling.
  Tensor forward(const Tensor& x, BnMode mode, const AttentionHook& hook = nullptr,
                 ForwardCapture* capture = nullptr);

  // Entries: every parameter in order, then running statistics of each
  // batchnorm layer whose statistics are initialized.
  Checkpoint to_checkpoint(const std::string& metadata_json = "{}") const;
  // Strict on parameters (missing name or extent mismatch throws); batchnorm
  // statistics are restored when present. Unknown entries are ignored.
  void load_from_checkpoint(const Checkpoint& ck);

  void save(const std::string& path, const std::string& metadata_json = "{}") const;
  void load(const std::string& path);

 private:
  NetworkSpec spec_;
  ShapeTable shapes_;
  std::vector<Tensor> params_;
  std::vector<std::string> names_;
  // per-layer indices into params_ (-1 = none): [0] kernel/weight/gamma,
  // [1] bias/beta
  std::vector<std::array<int, 2>> slots_;
  std::vector<BatchNormStats> bn_stats_;  // parallel to layers (unused slots empty)
};

}  // namespace leanet
