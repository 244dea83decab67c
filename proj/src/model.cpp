#include "leanet/model.hpp"

#include <stdexcept>

namespace leanet {

namespace {

std::string layer_prefix(const LayerSpec& l) {
  const char* kind = "";
  switch (l.kind) {
    case LayerKind::Conv: kind = "conv"; break;
    case LayerKind::ConvTranspose: kind = "conv_transpose"; break;
    case LayerKind::DepthwiseConv: kind = "depthwise_conv"; break;
    case LayerKind::BatchNorm: kind = "batchnorm"; break;
    case LayerKind::FullyConnected: kind = "fc"; break;
    default: break;
  }
  return "layer" + std::to_string(l.id) + "/" + kind + "/";
}

}  // namespace

Model::Model(NetworkSpec spec, uint64_t seed)
    : spec_(std::move(spec)), shapes_(infer_shapes(spec_)) {
  Rng rng(seed);
  slots_.assign(spec_.layers.size(), {-1, -1});
  bn_stats_.resize(spec_.layers.size());

  auto push = [&](const LayerSpec& l, int slot, const std::string& name, Tensor t) {
    slots_[size_t(l.id)][size_t(slot)] = int(params_.size());
    params_.push_back(t.set_requires_grad(true));
    names_.push_back(layer_prefix(l) + name);
  };

  for (const LayerSpec& l : spec_.layers) {
    const std::vector<int>* in = l.inputs.empty() ? nullptr : &shapes_.at(l.inputs[0]);
    switch (l.kind) {
      case LayerKind::Conv: {
        const int ci = (*in)[2];
        push(l, 0, "kernel",
             Tensor::he_uniform({l.kernel, l.kernel, ci, l.filters}, l.kernel * l.kernel * ci,
                                rng));
        if (l.use_bias) push(l, 1, "bias", Tensor::zeros({l.filters}));
        break;
      }
      case LayerKind::ConvTranspose: {
        // k == stride: each output cell receives exactly Ci contributions.
        const int ci = (*in)[2];
        push(l, 0, "kernel",
             Tensor::he_uniform({l.kernel, l.kernel, ci, l.filters}, ci, rng));
        if (l.use_bias) push(l, 1, "bias", Tensor::zeros({l.filters}));
        break;
      }
      case LayerKind::DepthwiseConv: {
        const int c = (*in)[2];
        push(l, 0, "kernel",
             Tensor::he_uniform({l.kernel, l.kernel, c, 1}, l.kernel * l.kernel, rng));
        if (l.use_bias) push(l, 1, "bias", Tensor::zeros({c}));
        break;
      }
      case LayerKind::BatchNorm: {
        const int c = (*in)[2];
        push(l, 0, "gamma", Tensor::full({c}, 1.0f));
        push(l, 1, "beta", Tensor::zeros({c}));
        break;
      }
      case LayerKind::FullyConnected: {
        const int d = (*in)[0];
        push(l, 0, "weight", Tensor::he_uniform({d, l.filters}, d, rng));
        if (l.use_bias) push(l, 1, "bias", Tensor::zeros({l.filters}));
        break;
      }
      default:
        break;
    }
  }
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const Tensor& p : params_) n += p.size();
  return n;
}

Tensor Model::forward(const Tensor& x, BnMode mode, const AttentionHook& hook,
                      ForwardCapture* capture) {
  if (x.rank() != 4 || x.extent(1) != spec_.in_h || x.extent(2) != spec_.in_w ||
      x.extent(3) != spec_.in_c)
    throw std::runtime_error("model '" + spec_.name + "': input shape " + shape_str(x.shape()) +
                             " does not match declared [Nx" + std::to_string(spec_.in_h) + "x" +
                             std::to_string(spec_.in_w) + "x" + std::to_string(spec_.in_c) + "]");

  std::vector<Tensor> values(spec_.layers.size());
  for (const LayerSpec& l : spec_.layers) {
    const auto& slot = slots_[size_t(l.id)];
    auto param = [&](int s) -> Tensor& { return params_[size_t(slot[size_t(s)])]; };
    Tensor y;
    switch (l.kind) {
      case LayerKind::Input:
        y = x;
        break;
      case LayerKind::Conv: {
        y = conv2d(values[size_t(l.inputs[0])], param(0), l.stride, l.pad);
        if (l.use_bias) y = add_channel_bias(y, param(1));
        break;
      }
      case LayerKind::ConvTranspose: {
        y = conv2d_transpose(values[size_t(l.inputs[0])], param(0), l.stride);
        if (l.use_bias) y = add_channel_bias(y, param(1));
        break;
      }
      case LayerKind::DepthwiseConv: {
        y = depthwise_conv2d(values[size_t(l.inputs[0])], param(0), l.stride, l.pad);
        if (l.use_bias) y = add_channel_bias(y, param(1));
        break;
      }
      case LayerKind::BatchNorm:
        y = batchnorm(values[size_t(l.inputs[0])], param(0), param(1), mode,
                      bn_stats_[size_t(l.id)]);
        break;
      case LayerKind::Activation:
        y = activate(values[size_t(l.inputs[0])], l.act, l.alpha);
        break;
      case LayerKind::Pool:
        y = pool(values[size_t(l.inputs[0])], l.pool, l.window);
        break;
      case LayerKind::Add:
        y = add(values[size_t(l.inputs[0])], values[size_t(l.inputs[1])]);
        break;
      case LayerKind::Concat:
        y = concat_channels(values[size_t(l.inputs[0])], values[size_t(l.inputs[1])]);
        break;
      case LayerKind::PadChannels: {
        const Tensor& v = values[size_t(l.inputs[0])];
        y = pad_channels(v, l.filters - v.extent(v.rank() - 1));
        break;
      }
      case LayerKind::Flatten:
        y = flatten(values[size_t(l.inputs[0])]);
        break;
      case LayerKind::FullyConnected:
        y = fully_connected(values[size_t(l.inputs[0])], param(0));
        if (l.use_bias) y = add_channel_bias(y, param(1));
        break;
    }
    if (l.attention_point != 0) {
      const int p = l.attention_point;
      if (capture) capture->before.emplace(p, y);
      if (hook) y = hook(p, y);
      if (capture) capture->after.emplace(p, y);
    }
    values[size_t(l.id)] = y;
  }
  return values.back();
}

Checkpoint Model::to_checkpoint(const std::string& metadata_json) const {
  Checkpoint ck;
  ck.metadata_json = metadata_json;
  for (size_t i = 0; i < params_.size(); ++i)
    ck.add(names_[i], params_[i].shape(), params_[i].data());
  for (const LayerSpec& l : spec_.layers) {
    if (l.kind != LayerKind::BatchNorm) continue;
    const BatchNormStats& st = bn_stats_[size_t(l.id)];
    if (!st.initialized) continue;
    ck.add(layer_prefix(l) + "running_mean", {int(st.mean.size())}, st.mean);
    ck.add(layer_prefix(l) + "running_var", {int(st.var.size())}, st.var);
  }
  return ck;
}

void Model::load_from_checkpoint(const Checkpoint& ck) {
  for (size_t i = 0; i < params_.size(); ++i) {
    const CheckpointEntry* e = ck.find(names_[i]);
    if (!e) throw std::runtime_error("checkpoint missing parameter '" + names_[i] + "'");
    if (e->extents != params_[i].shape())
      throw std::runtime_error("checkpoint entry '" + names_[i] + "' has extents " +
                               shape_str(e->extents) + ", expected " +
                               shape_str(params_[i].shape()));
    params_[i].data() = e->data;
  }
  for (const LayerSpec& l : spec_.layers) {
    if (l.kind != LayerKind::BatchNorm) continue;
    const CheckpointEntry* mean = ck.find(layer_prefix(l) + "running_mean");
    const CheckpointEntry* var = ck.find(layer_prefix(l) + "running_var");
    BatchNormStats& st = bn_stats_[size_t(l.id)];
    if (mean && var) {
      const int c = shapes_.at(l.id)[2];
      if (int(mean->data.size()) != c || int(var->data.size()) != c)
        throw std::runtime_error("checkpoint batchnorm statistics for layer " +
                                 std::to_string(l.id) + " have wrong extent");
      st.mean = mean->data;
      st.var = var->data;
      st.initialized = true;
    }
  }
}

void Model::save(const std::string& path, const std::string& metadata_json) const {
  save_checkpoint(path, to_checkpoint(metadata_json));
}

void Model::load(const std::string& path) { load_from_checkpoint(load_checkpoint(path)); }

}  // namespace leanet
