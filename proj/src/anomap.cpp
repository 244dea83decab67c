#include "leanet/anomap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "leanet/imageio.hpp"
#include "leanet/optim.hpp"
#include "leanet/prng.hpp"

namespace leanet {
namespace {

std::string ext_str(int h, int w) {
  return std::to_string(h) + "x" + std::to_string(w);
}

// Normalized network views of one (possibly augmented) image, appended to
// flat batch buffers.
void append_normalized(const LabImage& img, std::vector<float>& xs,
                       std::vector<float>& ts) {
  for (const LabPixel& p : img.pix) {
    xs.push_back(float(double(p.L) / 100.0));
    ts.push_back(float((double(p.a) + 128.0) / 255.0));
    ts.push_back(float((double(p.b) + 128.0) / 255.0));
  }
}

LabImage augment(const LabImage& img, double sigma, uint64_t seed) {
  if (sigma <= 0.0) return img;
  return rgb_to_lab(fancy_pca(lab_to_rgb(img), sigma, seed));
}

float mean_abs_error(Model& net, const std::vector<const LabImage*>& batch) {
  std::vector<float> xs, ts;
  for (const LabImage* img : batch) append_normalized(*img, xs, ts);
  const int n = int(batch.size()), h = batch[0]->h, w = batch[0]->w;
  const Tensor x = Tensor::from_data({n, h, w, 1}, std::move(xs));
  const Tensor t = Tensor::from_data({n, h, w, 2}, std::move(ts));
  return l1_loss(net.forward(x, BnMode::Eval), t).scalar();
}

}  // namespace

LuminanceSplit split_luminance(const LabImage& img) {
  LuminanceSplit s;
  s.h = img.h;
  s.w = img.w;
  s.L.reserve(img.pix.size());
  s.ab.reserve(img.pix.size() * 2);
  for (const LabPixel& p : img.pix) {
    s.L.push_back(p.L);
    s.ab.push_back(p.a);
    s.ab.push_back(p.b);
  }
  return s;
}

LabImage recombine_luminance(const LuminanceSplit& s, Provenance tag) {
  LabImage img(s.h, s.w, tag);
  for (size_t i = 0; i < img.pix.size(); ++i)
    img.pix[i] = LabPixel{s.L[i], s.ab[2 * i], s.ab[2 * i + 1]};
  return img;
}

Tensor luminance_input(const LuminanceSplit& s) {
  std::vector<float> v;
  v.reserve(s.L.size());
  for (float L : s.L) v.push_back(float(double(L) / 100.0));
  return Tensor::from_data({1, s.h, s.w, 1}, std::move(v));
}

Tensor chroma_target(const LuminanceSplit& s) {
  std::vector<float> v;
  v.reserve(s.ab.size());
  for (float c : s.ab) v.push_back(float((double(c) + 128.0) / 255.0));
  return Tensor::from_data({1, s.h, s.w, 2}, std::move(v));
}

NetworkSpec colorizer_spec(const ColorizerConfig& cfg) {
  return build_unet(cfg.levels, cfg.base_filters, cfg.extent);
}

ColorizerTraining train_colorizer(const std::vector<LabImage>& images,
                                  const std::vector<int>& labels,
                                  const ColorizerConfig& cfg) {
  const int n = int(images.size());
  if (n == 0) throw std::runtime_error("train_colorizer: empty dataset");
  if (labels.size() != images.size())
    throw std::runtime_error("train_colorizer: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(n) + " images");
  for (int i = 0; i < n; ++i)
    if (labels[i] != 0)
      throw std::runtime_error("train_colorizer: instance " + std::to_string(i) +
                               " is flagged anomalous; colorizer training uses "
                               "normal images only");
  if (n < 2 * cfg.batch)
    throw std::runtime_error("train_colorizer: need at least 2*batch = " +
                             std::to_string(2 * cfg.batch) + " images, got " +
                             std::to_string(n));
  for (int i = 0; i < n; ++i)
    if (images[i].h != cfg.extent || images[i].w != cfg.extent)
      throw std::runtime_error("train_colorizer: image " + std::to_string(i) + " is " +
                               ext_str(images[i].h, images[i].w) + ", expected " +
                               ext_str(cfg.extent, cfg.extent));

  Model net(colorizer_spec(cfg), derive_seed(cfg.seed, "init"));
  Adam opt(AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8f});

  // 10% validation slice, carved by seed before any augmentation.
  std::vector<int> idx(static_cast<size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, "split"));
  shuffle(idx, split_rng);
  const int n_val = std::max(1, n / 10);
  const std::vector<int> val_idx(idx.begin(), idx.begin() + n_val);
  const std::vector<int> train_idx(idx.begin() + n_val, idx.end());

  nlohmann::json meta = {{"levels", cfg.levels},
                         {"base_filters", cfg.base_filters},
                         {"extent", cfg.extent}};

  ColorizerTraining out;
  float best_val = 0.0f;
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<int> order = train_idx;
    Rng order_rng(derive_seed(cfg.seed, "order", uint64_t(epoch)));
    shuffle(order, order_rng);

    double loss_sum = 0.0;
    int seen = 0;
    for (size_t start = 0; start < order.size(); start += size_t(cfg.batch)) {
      const size_t stop = std::min(order.size(), start + size_t(cfg.batch));
      std::vector<float> xs, ts;
      for (size_t k = start; k < stop; ++k) {
        const int i = order[k];
        append_normalized(
            augment(images[i], cfg.sigma_alpha,
                    derive_seed(cfg.seed, "pca", uint64_t(epoch) * uint64_t(n) + i)),
            xs, ts);
      }
      const int bn = int(stop - start);
      const Tensor x = Tensor::from_data({bn, cfg.extent, cfg.extent, 1}, std::move(xs));
      const Tensor t = Tensor::from_data({bn, cfg.extent, cfg.extent, 2}, std::move(ts));
      const Tensor loss = l1_loss(net.forward(x, BnMode::Train), t);
      backward(loss);
      opt.step(net.params());
      loss_sum += double(loss.scalar()) * bn;
      seen += bn;
    }
    out.train_loss.push_back(float(loss_sum / seen));

    double vsum = 0.0;
    for (size_t start = 0; start < val_idx.size(); start += size_t(cfg.batch)) {
      const size_t stop = std::min(val_idx.size(), start + size_t(cfg.batch));
      std::vector<const LabImage*> batch;
      for (size_t k = start; k < stop; ++k) batch.push_back(&images[val_idx[k]]);
      vsum += double(mean_abs_error(net, batch)) * double(batch.size());
    }
    const float vloss = float(vsum / double(val_idx.size()));
    out.val_loss.push_back(vloss);

    if (out.val_loss.size() == 1 || vloss < best_val) {
      best_val = vloss;
      out.best_epoch = epoch;
      out.weights = net.to_checkpoint(meta.dump());
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return out;
}

LabImage colorize(Model& unet, const LabImage& img) {
  const NetworkSpec& spec = unet.spec();
  if (img.h != spec.in_h || img.w != spec.in_w)
    throw std::runtime_error("colorize: image " + ext_str(img.h, img.w) +
                             " does not match network input " +
                             ext_str(spec.in_h, spec.in_w));
  const Tensor y = unet.forward(luminance_input(split_luminance(img)), BnMode::Eval);
  const std::vector<float>& ab = y.data();
  LabImage out(img.h, img.w, Provenance::Recolored);
  for (size_t i = 0; i < out.pix.size(); ++i)
    out.pix[i] = LabPixel{img.pix[i].L, float(double(ab[2 * i]) * 255.0 - 128.0),
                          float(double(ab[2 * i + 1]) * 255.0 - 128.0)};
  return out;
}

AnomalyMap anomaly_map(const LabImage& original, const LabImage& recolored) {
  if (original.h != recolored.h || original.w != recolored.w)
    throw std::runtime_error("anomaly_map: extents differ, " +
                             ext_str(original.h, original.w) + " vs " +
                             ext_str(recolored.h, recolored.w));
  AnomalyMap m;
  m.h = original.h;
  m.w = original.w;
  m.de.reserve(original.pix.size());
  for (size_t i = 0; i < original.pix.size(); ++i)
    m.de.push_back(float(ciede2000(original.pix[i], recolored.pix[i])));
  return m;
}

AnomalyMap normalize_map(AnomalyMap m) {
  m.normalized.resize(m.de.size());
  for (size_t i = 0; i < m.de.size(); ++i)
    m.normalized[i] = float(std::min(double(m.de[i]) / 100.0, 1.0));
  return m;
}

void save_anomaly_map(const std::string& stem, const AnomalyMap& m) {
  const AnomalyMap norm = m.normalized.empty() ? normalize_map(m) : m;
  GrayImage preview(norm.h, norm.w);
  for (size_t i = 0; i < norm.normalized.size(); ++i)
    preview.pix[i] = uint8_t(std::llround(double(norm.normalized[i]) * 255.0));
  write_gray(stem + ".anom.png", preview);
  write_f32_map(stem + ".anom.f32", m.h, m.w, m.de);
}

AnomalyMap load_anomaly_map(const std::string& stem) {
  AnomalyMap m;
  m.de = read_f32_map(stem + ".anom.f32", m.h, m.w);
  return normalize_map(std::move(m));
}

}  // namespace leanet
