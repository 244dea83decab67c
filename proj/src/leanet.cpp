#include "leanet/leanet.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"
#include "leanet/prng.hpp"
#include "leanet/optim.hpp"

namespace leanet {

namespace {

std::string ext_str(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

void check_sample(const Sample& s, size_t i, const LeaModel& model, const std::string& fn) {
  const NetworkSpec& adn = model.adn.spec();
  const NetworkSpec& caan = model.caan.spec();
  const Shape xs = s.x.defined() ? s.x.shape() : Shape{};
  if (xs.size() != 3 || xs[0] != adn.in_h || xs[1] != adn.in_w || xs[2] != adn.in_c)
    throw std::runtime_error(fn + ": sample " + std::to_string(i) + " image shape " +
                             shape_str(xs) + " does not match [" + std::to_string(adn.in_h) +
                             "x" + std::to_string(adn.in_w) + "x" + std::to_string(adn.in_c) +
                             "]");
  if (s.x_att.h != caan.in_h || s.x_att.w != caan.in_w)
    throw std::runtime_error(fn + ": sample " + std::to_string(i) + " anomaly map is " +
                             ext_str(s.x_att.h, s.x_att.w) + ", expected " +
                             ext_str(caan.in_h, caan.in_w));
  if (s.x_att.normalized.size() != size_t(s.x_att.h) * size_t(s.x_att.w))
    throw std::runtime_error(fn + ": sample " + std::to_string(i) +
                             " anomaly map lacks normalized values (apply normalize_map)");
}

// Stacks the chosen samples into one N x H x W x C image batch and one
// N x H x W x 1 map batch.
std::pair<Tensor, Tensor> stack_batch(const std::vector<Sample>& data,
                                      const std::vector<int>& order, int at, int bn) {
  const Shape& xs = data[size_t(order[size_t(at)])].x.shape();
  const int h = xs[0], w = xs[1], c = xs[2];
  const AnomalyMap& m0 = data[size_t(order[size_t(at)])].x_att;
  std::vector<float> img(size_t(bn) * size_t(h) * size_t(w) * size_t(c));
  std::vector<float> att(size_t(bn) * size_t(m0.h) * size_t(m0.w));
  for (int b = 0; b < bn; ++b) {
    const Sample& s = data[size_t(order[size_t(at + b)])];
    std::copy(s.x.data().begin(), s.x.data().end(), img.begin() + ptrdiff_t(b) * s.x.size());
    std::copy(s.x_att.normalized.begin(), s.x_att.normalized.end(),
              att.begin() + ptrdiff_t(b) * ptrdiff_t(s.x_att.normalized.size()));
  }
  return {Tensor::from_data({bn, h, w, c}, std::move(img)),
          Tensor::from_data({bn, m0.h, m0.w, 1}, std::move(att))};
}

void check_head(const Model& m, const char* branch) {
  const std::vector<int>& head = m.shapes().dims.back();
  if (head.size() != 1 || head[0] != 1)
    throw std::runtime_error(std::string("train_lea: ") + branch +
                             " head must emit one probability per row, got " + shape_str(head));
}

}  // namespace

Tensor attention_map(const Tensor& features) {
  return activate(pool(features, PoolKind::ChannelAvg), Act::Sigmoid);
}

Tensor apply_attention(const Tensor& f, const Tensor& m) {
  bool ok = f.rank() == m.rank() && m.extent(m.rank() - 1) == 1;
  for (int a = 0; ok && a < f.rank() - 1; ++a) ok = f.extent(a) == m.extent(a);
  if (!ok)
    throw std::runtime_error("apply_attention: feature extents " + shape_str(f.shape()) +
                             " and map extents " + shape_str(m.shape()) + " do not align");
  return mul(f, add_scalar(m, 1.0f));
}

LeaModel::LeaModel(NetworkSpec caan_spec, NetworkSpec adn_spec, int p, uint64_t seed)
    : caan(std::move(caan_spec), derive_seed(seed, "caan")),
      adn(std::move(adn_spec), derive_seed(seed, "adn")),
      point(p) {
  validate_attention_alignment(adn.spec(), caan.spec(), p);
}

Checkpoint LeaModel::to_checkpoint() const {
  nlohmann::json meta = {{"active_point", point},
                         {"caan", caan.spec().name},
                         {"adn", adn.spec().name},
                         {"map_normalization", "min(de/100, 1)"}};
  Checkpoint ck;
  ck.metadata_json = meta.dump();
  for (const auto& [name, entry] : caan.to_checkpoint().entries)
    ck.entries.emplace_back("caan/" + name, entry);
  for (const auto& [name, entry] : adn.to_checkpoint().entries)
    ck.entries.emplace_back("adn/" + name, entry);
  return ck;
}

void LeaModel::load_from_checkpoint(const Checkpoint& ck) {
  try {
    const nlohmann::json meta = nlohmann::json::parse(ck.metadata_json);
    if (meta.contains("active_point") && meta["active_point"].get<int>() != point)
      throw std::runtime_error("checkpoint was trained with attention point " +
                               meta["active_point"].dump() + ", this model uses " +
                               std::to_string(point));
  } catch (const nlohmann::json::exception&) {
    // foreign metadata: nothing to cross-check
  }
  Checkpoint cc, ac;
  for (const auto& [name, entry] : ck.entries) {
    if (name.rfind("caan/", 0) == 0) cc.entries.emplace_back(name.substr(5), entry);
    if (name.rfind("adn/", 0) == 0) ac.entries.emplace_back(name.substr(4), entry);
  }
  caan.load_from_checkpoint(cc);
  adn.load_from_checkpoint(ac);
}

void LeaModel::save(const std::string& path) const { save_checkpoint(path, to_checkpoint()); }

void LeaModel::load(const std::string& path) { load_from_checkpoint(load_checkpoint(path)); }

LeaForward lea_forward(LeaModel& model, const Tensor& x, const Tensor& x_att, BnMode mode,
                       AttentionPath path, bool want_taps) {
  LeaForward out;
  ForwardCapture caan_taps;
  out.y_att = model.caan.forward(x_att, mode, nullptr, &caan_taps);
  const Tensor& tapped = caan_taps.before.at(model.point);
  switch (path) {
    case AttentionPath::Active:
      out.m = attention_map(tapped);
      break;
    case AttentionPath::Detached:
      out.m = attention_map(tapped).detach();
      break;
    case AttentionPath::Zeroed: {
      Shape s = tapped.shape();
      s.back() = 1;
      out.m = Tensor::zeros(std::move(s));
      break;
    }
  }
  const int active = model.point;
  const Tensor& m = out.m;
  const AttentionHook hook = [active, &m](int p, const Tensor& f) {
    return p == active ? apply_attention(f, m) : f;
  };
  out.y_ad = model.adn.forward(x, mode, hook, want_taps ? &out.adn_taps : nullptr);
  return out;
}

LeaForward lea_forward(LeaModel& model, const Sample& s, BnMode mode, AttentionPath path,
                       bool want_taps) {
  check_sample(s, 0, model, "lea_forward");
  const std::vector<int> order{0};
  auto [xs, atts] = stack_batch({s}, order, 0, 1);
  return lea_forward(model, xs, atts, mode, path, want_taps);
}

LossBreakdown LeaLoss::values() const { return {total.scalar(), att.scalar(), ad.scalar()}; }

LeaLoss total_loss(const Tensor& y_ad, const Tensor& y_att, const std::vector<float>& labels) {
  LeaLoss loss;
  loss.att = bce(y_att, labels);
  loss.ad = bce(y_ad, labels);
  loss.total = add(loss.att, loss.ad);
  return loss;
}

std::vector<LossBreakdown> train_lea(LeaModel& model, const std::vector<Sample>& data,
                                     const LeaTrainConfig& cfg) {
  const int n = int(data.size());
  if (n == 0) throw std::runtime_error("train_lea: empty dataset");
  if (cfg.batch < 1) throw std::runtime_error("train_lea: batch must be >= 1");
  check_head(model.caan, "CAAN");
  check_head(model.adn, "ADN");
  bool has[2] = {false, false};
  for (size_t i = 0; i < data.size(); ++i) {
    if (data[i].y != 0 && data[i].y != 1)
      throw std::runtime_error("train_lea: sample " + std::to_string(i) + " label must be 0 or 1, got " +
                               std::to_string(data[i].y));
    has[data[i].y] = true;
    check_sample(data[i], i, model, "train_lea");
  }
  if (!has[0] || !has[1])
    throw std::runtime_error(std::string("train_lea: dataset must contain both classes (every label is ") +
                             (has[1] ? "1" : "0") + ")");

  std::vector<Tensor> params;
  for (Tensor& t : model.caan.params()) params.push_back(t);
  for (Tensor& t : model.adn.params()) params.push_back(t);
  Adam opt(AdamConfig{cfg.lr, cfg.beta1, cfg.beta2, 1e-8f});

  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<LossBreakdown> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng r(derive_seed(cfg.seed, "order", uint64_t(epoch)));
    shuffle(order, r);
    double att_sum = 0.0, ad_sum = 0.0;
    for (int at = 0; at < n; at += cfg.batch) {
      const int bn = std::min(cfg.batch, n - at);
      auto [xs, atts] = stack_batch(data, order, at, bn);
      std::vector<float> labels(static_cast<size_t>(bn));
      for (int b = 0; b < bn; ++b) labels[size_t(b)] = float(data[size_t(order[size_t(at + b)])].y);
      LeaForward fw = lea_forward(model, xs, atts, BnMode::Train, cfg.path, false);
      const LeaLoss loss = total_loss(fw.y_ad, fw.y_att, labels);
      backward(loss.total);
      opt.step(params);
      att_sum += double(loss.att.scalar()) * bn;
      ad_sum += double(loss.ad.scalar()) * bn;
    }
    LossBreakdown row;
    row.att = float(att_sum / n);
    row.ad = float(ad_sum / n);
    row.total = row.att + row.ad;
    history.push_back(row);
  }
  return history;
}

}  // namespace leanet
