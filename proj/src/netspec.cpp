#include "leanet/netspec.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace leanet {

namespace {

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Input: return "input";
    case LayerKind::Conv: return "conv";
    case LayerKind::ConvTranspose: return "conv_transpose";
    case LayerKind::DepthwiseConv: return "depthwise_conv";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Activation: return "activation";
    case LayerKind::Pool: return "pool";
    case LayerKind::Add: return "add";
    case LayerKind::Concat: return "concat";
    case LayerKind::PadChannels: return "pad_channels";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::FullyConnected: return "fully_connected";
  }
  return "?";
}

[[noreturn]] void layer_err(const LayerSpec& l, const std::string& msg) {
  throw std::runtime_error("layer " + std::to_string(l.id) + " (" + kind_name(l.kind) +
                           "): " + msg);
}

void need_rank(const LayerSpec& l, const std::vector<int>& d, size_t rank) {
  if (d.size() != rank)
    layer_err(l, "expected rank-" + std::to_string(rank) + " input, got rank-" +
                     std::to_string(d.size()));
}

std::string dims_str(const std::vector<int>& d) {
  std::string s = "[";
  for (size_t i = 0; i < d.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(d[i]);
  }
  return s + "]";
}

const char* act_name(Act a) {
  switch (a) {
    case Act::Relu: return "Relu";
    case Act::LeakyRelu: return "LeakyRelu";
    case Act::Sigmoid: return "sigmoid";
  }
  return "?";
}

}  // namespace

int NetworkSpec::add_layer(LayerSpec layer) {
  layer.id = int(layers.size());
  if (layer.inputs.empty() && layer.kind != LayerKind::Input && layer.id > 0)
    layer.inputs = {layer.id - 1};
  layers.push_back(std::move(layer));
  return layers.back().id;
}

const std::vector<int>& ShapeTable::ap_dims(int p) const {
  if (!has_attention_point(p))
    throw std::runtime_error("no attention point " + std::to_string(p) + " in shape table");
  return dims.at(size_t(ap_layer[size_t(p)]));
}

ShapeTable infer_shapes(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw std::runtime_error("network '" + spec.name + "' has no layers");
  if (spec.layers[0].kind != LayerKind::Input)
    throw std::runtime_error("network '" + spec.name + "' must start with an input layer");
  if (spec.in_h <= 0 || spec.in_w <= 0 || spec.in_c <= 0)
    throw std::runtime_error("network '" + spec.name + "' has a non-positive input extent");

  ShapeTable table;
  table.dims.reserve(spec.layers.size());
  int last_ap = 0;
  for (const LayerSpec& l : spec.layers) {
    if (l.id != int(table.dims.size())) layer_err(l, "id does not match position");
    if (l.kind == LayerKind::Input) {
      if (l.id != 0) layer_err(l, "input layer must be first");
      table.dims.push_back({spec.in_h, spec.in_w, spec.in_c});
    } else {
      if (l.inputs.empty()) layer_err(l, "no input wiring");
      for (int src : l.inputs)
        if (src < 0 || src >= l.id) layer_err(l, "bad input reference " + std::to_string(src));
      const std::vector<int>& a = table.dims[size_t(l.inputs[0])];
      switch (l.kind) {
        case LayerKind::Conv:
        case LayerKind::DepthwiseConv: {
          need_rank(l, a, 3);
          if (l.kernel < 1 || l.stride < 1 || l.pad < 0) layer_err(l, "bad kernel geometry");
          if (l.stride > 1 && (a[0] < 2 || a[1] < 2))
            layer_err(l, "cannot downsample degenerate extent " + dims_str(a));
          const int span_h = a[0] + 2 * l.pad - l.kernel;
          const int span_w = a[1] + 2 * l.pad - l.kernel;
          if (span_h < 0 || span_w < 0)
            layer_err(l, "kernel " + std::to_string(l.kernel) + " exceeds padded input " +
                             dims_str(a));
          const int ho = span_h / l.stride + 1, wo = span_w / l.stride + 1;
          if (ho <= 0 || wo <= 0) layer_err(l, "non-positive output extent");
          const int co = l.kind == LayerKind::Conv ? l.filters : a[2];
          if (co <= 0) layer_err(l, "non-positive filter count");
          table.dims.push_back({ho, wo, co});
          break;
        }
        case LayerKind::ConvTranspose: {
          need_rank(l, a, 3);
          if (l.kernel != l.stride || l.stride < 1)
            layer_err(l, "transpose conv requires kernel == stride >= 1");
          if (l.filters <= 0) layer_err(l, "non-positive filter count");
          table.dims.push_back({a[0] * l.stride, a[1] * l.stride, l.filters});
          break;
        }
        case LayerKind::BatchNorm:
          need_rank(l, a, 3);
          table.dims.push_back(a);
          break;
        case LayerKind::Activation:
          table.dims.push_back(a);
          break;
        case LayerKind::Pool: {
          need_rank(l, a, 3);
          if (l.pool == PoolKind::GlobalAvg) {
            table.dims.push_back({1, 1, a[2]});
          } else if (l.pool == PoolKind::ChannelAvg) {
            table.dims.push_back({a[0], a[1], 1});
          } else {
            if (l.window < 1) layer_err(l, "non-positive pool window");
            if (a[0] % l.window != 0 || a[1] % l.window != 0)
              layer_err(l, "pool window " + std::to_string(l.window) + " does not divide " +
                               dims_str(a));
            const int ho = a[0] / l.window, wo = a[1] / l.window;
            if (ho <= 0 || wo <= 0) layer_err(l, "non-positive output extent");
            table.dims.push_back({ho, wo, a[2]});
          }
          break;
        }
        case LayerKind::Add: {
          if (l.inputs.size() != 2) layer_err(l, "add takes exactly two inputs");
          const std::vector<int>& b = table.dims[size_t(l.inputs[1])];
          if (a != b)
            layer_err(l, "shape mismatch between " + dims_str(a) + " and " + dims_str(b));
          table.dims.push_back(a);
          break;
        }
        case LayerKind::Concat: {
          if (l.inputs.size() != 2) layer_err(l, "concat takes exactly two inputs");
          const std::vector<int>& b = table.dims[size_t(l.inputs[1])];
          need_rank(l, a, 3);
          need_rank(l, b, 3);
          if (a[0] != b[0] || a[1] != b[1])
            layer_err(l, "spatial mismatch between " + dims_str(a) + " and " + dims_str(b));
          table.dims.push_back({a[0], a[1], a[2] + b[2]});
          break;
        }
        case LayerKind::PadChannels: {
          need_rank(l, a, 3);
          if (l.filters < a[2])
            layer_err(l, "target channels " + std::to_string(l.filters) + " below input " +
                             dims_str(a));
          table.dims.push_back({a[0], a[1], l.filters});
          break;
        }
        case LayerKind::Flatten: {
          need_rank(l, a, 3);
          table.dims.push_back({a[0] * a[1] * a[2]});
          break;
        }
        case LayerKind::FullyConnected: {
          need_rank(l, a, 1);
          if (l.filters <= 0) layer_err(l, "non-positive unit count");
          table.dims.push_back({l.filters});
          break;
        }
        case LayerKind::Input:
          break;  // handled above
      }
    }
    if (l.attention_point != 0) {
      const int p = l.attention_point;
      if (p < 1 || p > 5)
        layer_err(l, "attention point " + std::to_string(p) + " out of range [1,5]");
      if (table.ap_layer[size_t(p)] >= 0)
        layer_err(l, "duplicate attention point " + std::to_string(p));
      if (p <= last_ap) layer_err(l, "attention points out of order");
      const std::vector<int>& d = table.dims.back();
      if (d.size() != 3) layer_err(l, "attention point on a non-spatial layer");
      if (last_ap >= 1) {
        const std::vector<int>& prev = table.dims[size_t(table.ap_layer[size_t(last_ap)])];
        if (d[0] > prev[0] || d[1] > prev[1])
          layer_err(l, "attention extents must be monotone nonincreasing");
      }
      table.ap_layer[size_t(p)] = l.id;
      last_ap = p;
    }
  }
  return table;
}

int64_t count_params(const NetworkSpec& spec) {
  const ShapeTable table = infer_shapes(spec);
  int64_t total = 0;
  for (const LayerSpec& l : spec.layers) {
    const std::vector<int>* in = l.inputs.empty() ? nullptr : &table.at(l.inputs[0]);
    switch (l.kind) {
      case LayerKind::Conv:
      case LayerKind::ConvTranspose:
        total += int64_t(l.kernel) * l.kernel * (*in)[2] * l.filters;
        if (l.use_bias) total += l.filters;
        break;
      case LayerKind::DepthwiseConv:
        total += int64_t(l.kernel) * l.kernel * (*in)[2];
        if (l.use_bias) total += (*in)[2];
        break;
      case LayerKind::BatchNorm:
        total += 2 * int64_t((*in)[2]);
        break;
      case LayerKind::FullyConnected:
        total += int64_t((*in)[0]) * l.filters;
        if (l.use_bias) total += l.filters;
        break;
      default:
        break;
    }
  }
  return total;
}

std::vector<SpecRow> table_rows(const NetworkSpec& spec, const ShapeTable& shapes) {
  std::vector<SpecRow> rows;
  std::vector<int> row_of(spec.layers.size(), 0);
  for (const LayerSpec& l : spec.layers) {
    const std::vector<int>& d = shapes.at(l.id);
    switch (l.kind) {
      case LayerKind::BatchNorm:
        rows.back().bn = true;
        break;
      case LayerKind::Activation:
        rows.back().activation = act_name(l.act);
        break;
      default: {
        SpecRow r;
        r.dim = d;
        r.kernel = l.kernel;
        r.stride = l.stride;
        r.filters = l.filters;
        switch (l.kind) {
          case LayerKind::Input: r.type = "Input"; break;
          case LayerKind::Conv: r.type = "Conv2D"; break;
          case LayerKind::ConvTranspose: r.type = "Conv2DTranspose"; break;
          case LayerKind::DepthwiseConv: r.type = "DepthwiseConv2D"; break;
          case LayerKind::Pool: r.type = "Pool"; break;
          case LayerKind::Add: r.type = "Add"; break;
          case LayerKind::PadChannels: r.type = "PadChannels"; break;
          case LayerKind::Flatten: r.type = "Flatten"; break;
          case LayerKind::FullyConnected: r.type = "FC"; break;
          case LayerKind::Concat:
            r.type = "Concat";
            r.concat_a = row_of[size_t(l.inputs[0])];
            r.concat_b = row_of[size_t(l.inputs[1])];
            r.filters = d[2];
            break;
          default: break;
        }
        rows.push_back(std::move(r));
        break;
      }
    }
    rows.back().dim = d;
    row_of[size_t(l.id)] = int(rows.size());
  }
  return rows;
}

std::string print_spec(const NetworkSpec& spec) {
  const ShapeTable table = infer_shapes(spec);
  std::string out = spec.name + " (input " + std::to_string(spec.in_h) + "x" +
                    std::to_string(spec.in_w) + "x" + std::to_string(spec.in_c) + ", " +
                    std::to_string(count_params(spec)) + " params, " +
                    std::to_string(spec.downsampling_points) + " downsampling points)\n";
  char line[256];
  for (const LayerSpec& l : spec.layers) {
    std::string geom;
    if (l.kind == LayerKind::Conv || l.kind == LayerKind::ConvTranspose ||
        l.kind == LayerKind::DepthwiseConv) {
      geom = "k" + std::to_string(l.kernel) + " s" + std::to_string(l.stride) + " p" +
             std::to_string(l.pad);
      if (l.kind != LayerKind::DepthwiseConv) geom += " f" + std::to_string(l.filters);
    } else if (l.kind == LayerKind::Activation) {
      geom = act_name(l.act);
      if (l.act == Act::LeakyRelu) geom += "(" + std::to_string(l.alpha).substr(0, 4) + ")";
    } else if (l.kind == LayerKind::Pool) {
      geom = l.pool == PoolKind::GlobalAvg    ? "global_avg"
             : l.pool == PoolKind::ChannelAvg ? "channel_avg"
             : l.pool == PoolKind::Max        ? "max" + std::to_string(l.window)
                                              : "avg" + std::to_string(l.window);
    } else if (l.kind == LayerKind::Concat || l.kind == LayerKind::Add) {
      geom = "(" + std::to_string(l.inputs[0]) + "," + std::to_string(l.inputs[1]) + ")";
    } else if (l.kind == LayerKind::FullyConnected || l.kind == LayerKind::PadChannels) {
      geom = "f" + std::to_string(l.filters);
    }
    std::snprintf(line, sizeof line, "%4d  %-15s %-14s %-12s %-10s %s\n", l.id, kind_name(l.kind),
                  geom.c_str(), dims_str(table.at(l.id)).c_str(),
                  l.attention_point ? ("@" + std::to_string(l.attention_point)).c_str() : "",
                  l.label.c_str());
    out += line;
  }
  return out;
}

// ---- Builders --------------------------------------------------------------

namespace {

// Thin convenience wrapper threading the "current" layer through a chain.
struct Builder {
  NetworkSpec spec;
  int cur = 0;

  int layer(LayerSpec l) {
    cur = spec.add_layer(std::move(l));
    return cur;
  }
  int conv(int k, int s, int p, int f, std::string label, bool bias = true, int from = -1) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.kernel = k;
    l.stride = s;
    l.pad = p;
    l.filters = f;
    l.use_bias = bias;
    l.label = std::move(label);
    if (from >= 0) l.inputs = {from};
    return layer(std::move(l));
  }
  int convt(int s, int f, std::string label, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::ConvTranspose;
    l.kernel = s;
    l.stride = s;
    l.filters = f;
    l.use_bias = bias;
    l.label = std::move(label);
    return layer(std::move(l));
  }
  int dwconv(int k, int s, int p, std::string label) {
    LayerSpec l;
    l.kind = LayerKind::DepthwiseConv;
    l.kernel = k;
    l.stride = s;
    l.pad = p;
    l.label = std::move(label);
    return layer(std::move(l));
  }
  int bn() {
    LayerSpec l;
    l.kind = LayerKind::BatchNorm;
    return layer(std::move(l));
  }
  int act(Act a, float alpha = 0.0f) {
    LayerSpec l;
    l.kind = LayerKind::Activation;
    l.act = a;
    l.alpha = alpha;
    return layer(std::move(l));
  }
  int pool(PoolKind p, int window = 0, int from = -1) {
    LayerSpec l;
    l.kind = LayerKind::Pool;
    l.pool = p;
    l.window = window;
    if (from >= 0) l.inputs = {from};
    return layer(std::move(l));
  }
  int add(int a, int b) {
    LayerSpec l;
    l.kind = LayerKind::Add;
    l.inputs = {a, b};
    return layer(std::move(l));
  }
  int concat(int a, int b) {
    LayerSpec l;
    l.kind = LayerKind::Concat;
    l.inputs = {a, b};
    return layer(std::move(l));
  }
  int pad_to(int f) {
    LayerSpec l;
    l.kind = LayerKind::PadChannels;
    l.filters = f;
    return layer(std::move(l));
  }
  int flatten() {
    LayerSpec l;
    l.kind = LayerKind::Flatten;
    return layer(std::move(l));
  }
  int fc(int units, bool bias = true) {
    LayerSpec l;
    l.kind = LayerKind::FullyConnected;
    l.filters = units;
    l.use_bias = bias;
    return layer(std::move(l));
  }
  void tag(int p) { spec.layers.back().attention_point = p; }

  void input(std::string name, int h, int w, int c, int downs) {
    spec.name = std::move(name);
    spec.in_h = h;
    spec.in_w = w;
    spec.in_c = c;
    spec.downsampling_points = downs;
    LayerSpec l;
    l.kind = LayerKind::Input;
    layer(std::move(l));
  }
};

int scaled(int width, double scale) {
  return std::max(1, int(std::llround(width * scale)));
}

}  // namespace

NetworkSpec build_unet(int levels, int base_filters, int input_extent) {
  if (levels < 2) throw std::runtime_error("build_unet: levels must be >= 2");
  if (base_filters < 1) throw std::runtime_error("build_unet: base_filters must be >= 1");
  const int denom = 1 << levels;
  if (input_extent < denom || input_extent % denom != 0)
    throw std::runtime_error("build_unet: input extent " + std::to_string(input_extent) +
                             " not divisible by 2^" + std::to_string(levels));

  Builder b;
  b.input("unet", input_extent, input_extent, 1, levels);
  const auto n_levels = static_cast<size_t>(levels);
  std::vector<int> filters(n_levels), skips(n_levels);
  for (int i = 0; i < levels; ++i) filters[size_t(i)] = base_filters * std::min(1 << i, 8);

  for (int i = 0; i < levels; ++i) {
    b.conv(4, 2, 1, filters[size_t(i)], "enc" + std::to_string(i + 1));
    if (i > 0) b.bn();
    b.act(Act::LeakyRelu, 0.2f);
    skips[size_t(i)] = b.cur;
  }
  for (int t = 1; t < levels; ++t) {
    const int j = levels - 1 - t;
    b.convt(2, filters[size_t(j)], "dec" + std::to_string(t));
    b.bn();
    b.act(Act::Relu);
    b.concat(skips[size_t(j)], b.cur);
  }
  b.convt(2, 2, "head");
  b.act(Act::Sigmoid);
  return std::move(b.spec);
}

NetworkSpec build_caan(CaanVariant variant, double scale, int input_extent, int head_units) {
  if (scale <= 0) throw std::runtime_error("build_caan: scale must be positive");
  if (head_units < 1) throw std::runtime_error("build_caan: head_units must be >= 1");
  Builder b;

  if (variant == CaanVariant::ResnetBased) {
    b.input("caan_resnet", input_extent, input_extent, 1, 4);
    b.conv(7, 1, 3, scaled(64, scale), "block1");
    b.act(Act::Relu);
    b.tag(1);
    // Paired 3x3 residual stages; final stage width 496 keeps the parameter
    // count at the published ~4.49M (dense 512-wide pairs overshoot it).
    const int widths[4] = {64, 128, 256, 496};
    int in_c = scaled(64, scale);
    for (int s = 0; s < 4; ++s) {
      const int w = scaled(widths[s], scale);
      const std::string name = "block" + std::to_string(s + 2);
      const int entry = b.cur;
      b.conv(3, 2, 1, w, name + "a");
      b.act(Act::Relu);
      b.conv(3, 1, 1, w, name + "b");
      const int main_path = b.cur;
      int shortcut = b.pool(PoolKind::Avg, 2, entry);
      if (in_c != w) shortcut = b.pad_to(w);
      b.add(main_path, shortcut);
      b.act(Act::Relu);
      b.tag(s + 2);
      in_c = w;
    }
    b.pool(PoolKind::GlobalAvg);
    b.flatten();
    b.fc(head_units);
    b.act(Act::Sigmoid);
    return std::move(b.spec);
  }

  if (variant == CaanVariant::MobilenetLike) {
    b.input("caan_mobilenet", input_extent, input_extent, 1, 4);
    b.conv(3, 1, 1, scaled(16, scale), "block1");
    b.act(Act::Relu);
    b.tag(1);
    int in_c = scaled(16, scale);
    // Inverted bottleneck: expand 1x1 -> depthwise kxk -> project 1x1,
    // residual when stride 1 and widths match; fixed x4 expansion.
    auto bneck = [&](int k, int s, int width_base, const std::string& name) {
      const int w = scaled(width_base, scale);
      const int e = scaled(4 * width_base, scale);
      const int entry = b.cur;
      b.conv(1, 1, 0, e, name + "/expand");
      b.act(Act::Relu);
      b.dwconv(k, s, (k - 1) / 2, name + "/depthwise");
      b.act(Act::Relu);
      b.conv(1, 1, 0, w, name + "/project");
      if (s == 1 && in_c == w) b.add(b.cur, entry);
      in_c = w;
    };
    bneck(3, 2, 16, "block2");
    b.tag(2);
    bneck(3, 2, 24, "block3.1");
    bneck(3, 1, 24, "block3.2");
    b.tag(3);
    bneck(5, 2, 40, "block4.1");
    bneck(5, 1, 40, "block4.2");
    bneck(5, 1, 40, "block4.3");
    bneck(5, 1, 48, "block4.4");
    bneck(5, 1, 48, "block4.5");
    b.tag(4);
    bneck(5, 2, 96, "block5.1");
    bneck(5, 1, 96, "block5.2");
    bneck(5, 1, 96, "block5.3");
    b.tag(5);
    b.conv(1, 1, 0, scaled(576, scale), "head/expand");
    b.act(Act::Relu);
    b.pool(PoolKind::GlobalAvg);
    b.flatten();
    b.fc(scaled(1280, scale));
    b.act(Act::Relu);
    b.fc(head_units);
    b.act(Act::Sigmoid);
    return std::move(b.spec);
  }

  throw std::runtime_error("build_caan: unknown variant");
}

NetworkSpec build_adn(AdnVariant variant, double scale, int input_extent, int in_channels) {
  if (scale <= 0) throw std::runtime_error("build_adn: scale must be positive");
  if (in_channels < 1) throw std::runtime_error("build_adn: in_channels must be >= 1");
  Builder b;

  if (variant == AdnVariant::BasicCnn) {
    b.input("adn_basic_cnn", input_extent, input_extent, in_channels, 5);
    b.conv(3, 1, 1, scaled(32, scale), "stem");
    b.bn();
    b.act(Act::Relu);
    b.tag(1);
    const int widths[5] = {64, 128, 256, 512, 512};
    for (int s = 0; s < 5; ++s) {
      b.conv(3, 2, 1, scaled(widths[s], scale), "stage" + std::to_string(s + 1));
      b.bn();
      b.act(Act::Relu);
      if (s < 4) b.tag(s + 2);
    }
    b.pool(PoolKind::GlobalAvg);
    b.flatten();
    b.fc(1);
    b.act(Act::Sigmoid);
    return std::move(b.spec);
  }

  if (variant == AdnVariant::Resnet18Like) {
    b.input("adn_resnet18", input_extent, input_extent, in_channels, 4);
    b.conv(3, 1, 1, scaled(64, scale), "stem");
    b.bn();
    b.act(Act::Relu);
    b.tag(1);
    int in_c = scaled(64, scale);
    auto block = [&](int w, int stride, const std::string& name) {
      const int entry = b.cur;
      b.conv(3, stride, 1, w, name + "a", /*bias=*/false);
      b.bn();
      b.act(Act::Relu);
      b.conv(3, 1, 1, w, name + "b", /*bias=*/false);
      b.bn();
      const int main_path = b.cur;
      int shortcut = entry;
      if (stride != 1) shortcut = b.pool(PoolKind::Avg, 2, entry);
      if (in_c != w) {
        LayerSpec l;
        l.kind = LayerKind::PadChannels;
        l.filters = w;
        l.inputs = {shortcut};
        shortcut = b.layer(std::move(l));
      }
      b.add(main_path, shortcut);
      b.act(Act::Relu);
      in_c = w;
    };
    const int widths[4] = {64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
      const int w = scaled(widths[s], scale);
      block(w, 2, "layer" + std::to_string(s + 1) + ".1");
      block(w, 1, "layer" + std::to_string(s + 1) + ".2");
      b.tag(s + 2);
    }
    b.pool(PoolKind::GlobalAvg);
    b.flatten();
    b.fc(1);
    b.act(Act::Sigmoid);
    return std::move(b.spec);
  }

  if (variant == AdnVariant::Vgg16Like) {
    b.input("adn_vgg16", input_extent, input_extent, in_channels, 5);
    const int widths[5] = {64, 128, 256, 512, 512};
    const int repeats[5] = {2, 2, 3, 3, 3};
    for (int g = 0; g < 5; ++g) {
      for (int r = 0; r < repeats[g]; ++r) {
        b.conv(3, 1, 1, scaled(widths[g], scale),
               "group" + std::to_string(g + 1) + "." + std::to_string(r + 1));
        b.act(Act::Relu);
      }
      b.tag(g + 1);
      b.pool(PoolKind::Max, 2);
    }
    b.pool(PoolKind::GlobalAvg);
    b.flatten();
    b.fc(1);
    b.act(Act::Sigmoid);
    return std::move(b.spec);
  }

  throw std::runtime_error("build_adn: unknown variant");
}

void validate_attention_alignment(const NetworkSpec& adn, const NetworkSpec& caan, int p) {
  if (p < 1 || p > 5)
    throw std::runtime_error("attention point " + std::to_string(p) + " out of range [1,5]");
  const ShapeTable at = infer_shapes(adn);
  const ShapeTable ct = infer_shapes(caan);
  if (!at.has_attention_point(p))
    throw std::runtime_error("network '" + adn.name + "' has no attention point " +
                             std::to_string(p));
  if (!ct.has_attention_point(p))
    throw std::runtime_error("network '" + caan.name + "' has no attention point " +
                             std::to_string(p));
  const std::vector<int>& a = at.ap_dims(p);
  const std::vector<int>& c = ct.ap_dims(p);
  if (a[0] != c[0] || a[1] != c[1])
    throw std::runtime_error("attention extent mismatch at point " + std::to_string(p) + ": " +
                             adn.name + " " + std::to_string(a[0]) + "x" + std::to_string(a[1]) +
                             " vs " + caan.name + " " + std::to_string(c[0]) + "x" +
                             std::to_string(c[1]));
}

CaanVariant parse_caan_variant(const std::string& name) {
  if (name == "resnet_based") return CaanVariant::ResnetBased;
  if (name == "mobilenet_like") return CaanVariant::MobilenetLike;
  throw std::runtime_error("unknown CAAN variant '" + name +
                           "' (expected resnet_based or mobilenet_like)");
}

AdnVariant parse_adn_variant(const std::string& name) {
  if (name == "basic_cnn") return AdnVariant::BasicCnn;
  if (name == "resnet18_like") return AdnVariant::Resnet18Like;
  if (name == "vgg16_like") return AdnVariant::Vgg16Like;
  throw std::runtime_error("unknown ADN variant '" + name +
                           "' (expected basic_cnn, resnet18_like, or vgg16_like)");
}

std::string to_string(CaanVariant v) {
  return v == CaanVariant::ResnetBased ? "resnet_based" : "mobilenet_like";
}

std::string to_string(AdnVariant v) {
  switch (v) {
    case AdnVariant::BasicCnn: return "basic_cnn";
    case AdnVariant::Resnet18Like: return "resnet18_like";
    case AdnVariant::Vgg16Like: return "vgg16_like";
  }
  return "?";
}

}  // namespace leanet
