#pragma once

// A small differentiable texture classifier with hand-written backprop:
//
//   x/255 -> conv3x3(C->8) -> ReLU -> avgpool2 -> conv3x3(8->16) -> ReLU
//         -> global average pool -> fully connected (16->classes)
//
// plus the procedural texture data sets it is trained on.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "freqtune/binary_io.hpp"
#include "freqtune/common.hpp"

namespace freqtune {

using Logits = std::vector<std::vector<double>>;

struct LabeledSet {
  std::vector<ImageBuffer> images;
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  std::size_t num_classes() const { return class_names.size(); }

  void validate() const {
    if (images.size() != labels.size())
      throw ShapeError("labeled set: " + std::to_string(images.size()) +
                       " images but " + std::to_string(labels.size()) +
                       " labels");
    for (std::size_t l : labels)
      if (l >= class_names.size())
        throw DomainError("labeled set: label " + std::to_string(l) +
                          " out of range for " +
                          std::to_string(class_names.size()) + " classes");
    for (const auto& img : images)
      if (!img.same_shape(images.front()))
        throw ShapeError("labeled set: mixed image shapes " + img.dims() +
                         " and " + images.front().dims());
  }

  LabeledSet subset(std::span<const std::size_t> idx) const {
    LabeledSet out;
    out.class_names = class_names;
    for (std::size_t i : idx) {
      out.images.push_back(images.at(i));
      out.labels.push_back(labels.at(i));
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Model

/// Layer sizes. Only the input channels and class count vary.
struct ModelShape {
  static constexpr std::size_t kConv1 = 8;
  static constexpr std::size_t kConv2 = 16;
  static constexpr std::size_t kKernel = 3;

  std::size_t in_channels = 3;
  std::size_t num_classes = 4;

  std::size_t conv1_w() const { return kConv1 * in_channels * 9; }
  std::size_t conv2_w() const { return kConv2 * kConv1 * 9; }
  std::size_t fc_w() const { return num_classes * kConv2; }

  // Offsets in declaration order: conv1 w, conv1 b, conv2 w, conv2 b, fc w,
  // fc b.
  std::size_t off_conv1_b() const { return conv1_w(); }
  std::size_t off_conv2_w() const { return off_conv1_b() + kConv1; }
  std::size_t off_conv2_b() const { return off_conv2_w() + conv2_w(); }
  std::size_t off_fc_w() const { return off_conv2_b() + kConv2; }
  std::size_t off_fc_b() const { return off_fc_w() + fc_w(); }
  std::size_t param_count() const { return off_fc_b() + num_classes; }

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct TexModel {
  ModelShape shape;
  std::vector<double> params;

  TexModel() = default;
  explicit TexModel(ModelShape s) : shape(s), params(s.param_count(), 0.0) {
    if (s.num_classes < 2)
      throw DomainError("TexModel: need at least 2 classes");
    if (s.in_channels == 0) throw DomainError("TexModel: need >= 1 channel");
  }

  /// Seeded random weights; zero biases except the first layer's.
  static TexModel initialized(ModelShape s, std::uint64_t seed) {
    TexModel m(s);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t off, std::size_t n, double limit) {
      std::uniform_real_distribution<double> u(-limit, limit);
      for (std::size_t i = 0; i < n; ++i) m.params[off + i] = u(rng);
    };
    // He-uniform for the ReLU layers, Glorot-uniform for the output layer.
    fill(0, s.conv1_w(), std::sqrt(6.0 / (9.0 * static_cast<double>(s.in_channels))));
    fill(s.off_conv2_w(), s.conv2_w(), std::sqrt(6.0 / (9.0 * ModelShape::kConv1)));
    fill(s.off_fc_w(), s.fc_w(),
         std::sqrt(6.0 / (ModelShape::kConv2 + static_cast<double>(s.num_classes))));
    // First-layer biases cancel the response to mid-gray (0.5 after
    // normalization) so the initial filters respond to texture, not to the
    // mean level.
    const std::size_t taps = 9 * s.in_channels;
    for (std::size_t o = 0; o < ModelShape::kConv1; ++o) {
      double sum = 0.0;
      for (std::size_t t = 0; t < taps; ++t) sum += m.params[o * taps + t];
      m.params[s.off_conv1_b() + o] = -0.5 * sum;
    }
    return m;
  }

  std::span<const double> conv1_w() const { return view(0, shape.conv1_w()); }
  std::span<const double> conv1_b() const {
    return view(shape.off_conv1_b(), ModelShape::kConv1);
  }
  std::span<const double> conv2_w() const {
    return view(shape.off_conv2_w(), shape.conv2_w());
  }
  std::span<const double> conv2_b() const {
    return view(shape.off_conv2_b(), ModelShape::kConv2);
  }
  std::span<const double> fc_w() const {
    return view(shape.off_fc_w(), shape.fc_w());
  }
  std::span<const double> fc_b() const {
    return view(shape.off_fc_b(), shape.num_classes);
  }

  friend bool operator==(const TexModel&, const TexModel&) = default;

 private:
  std::span<const double> view(std::size_t off, std::size_t n) const {
    return {params.data() + off, n};
  }
};

/// Loss value and its gradient with respect to each logit row.
struct LossResult {
  double loss = 0.0;
  Logits grad;
};

/// Gradients from one backward pass. `params` has the layout of
/// TexModel::params; `inputs` holds d loss / d pixel in code-value units.
struct Gradients {
  double loss = 0.0;
  std::vector<double> params;
  std::vector<ImageBuffer> inputs;
};

namespace detail {

// Per-sample intermediate values kept for the backward pass.
struct Activations {
  std::size_t h = 0, w = 0;     // input size
  std::vector<double> x;        // normalized input, C x h x w
  std::vector<double> z1;       // 8 x h x w
  std::vector<double> p1;       // 8 x h/2 x w/2
  std::vector<double> z2;       // 16 x h/2 x w/2
  std::vector<double> pooled;   // 16
  std::vector<double> logits;   // classes
};

// out[o] += conv3x3(in) with zero padding 1; out must be pre-sized.
inline void conv3x3_forward(std::span<const double> in, std::size_t cin,
                            std::size_t h, std::size_t w,
                            std::span<const double> weight,
                            std::span<const double> bias, std::size_t cout,
                            std::vector<double>& out) {
  const std::size_t plane = h * w;
  out.assign(cout * plane, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    double* dst = out.data() + o * plane;
    std::fill(dst, dst + plane, bias[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = in.data() + i * plane;
      for (std::size_t dy = 0; dy < 3; ++dy)
        for (std::size_t dx = 0; dx < 3; ++dx) {
          const double wv = weight[((o * cin + i) * 3 + dy) * 3 + dx];
          const std::size_t y0 = dy == 0 ? 1 : 0;
          const std::size_t y1 = dy == 2 ? h - 1 : h;
          const std::size_t x0 = dx == 0 ? 1 : 0;
          const std::size_t x1 = dx == 2 ? w - 1 : w;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* s = src + (y + dy - 1) * w + dx;
            double* d = dst + y * w;
            // s[x - 1] is the tap at column x + dx - 1 >= 0.
            for (std::size_t x = x0; x < x1; ++x) d[x] += wv * s[x - 1];
          }
        }
    }
  }
}

// Accumulates weight/bias gradients and (optionally) the input gradient of a
// 3x3 zero-padded convolution given d loss / d output.
inline void conv3x3_backward(std::span<const double> in, std::size_t cin,
                             std::size_t h, std::size_t w,
                             std::span<const double> weight,
                             std::span<const double> dout, std::size_t cout,
                             std::span<double> dweight, std::span<double> dbias,
                             std::vector<double>* din) {
  const std::size_t plane = h * w;
  if (din) din->assign(cin * plane, 0.0);
  for (std::size_t o = 0; o < cout; ++o) {
    const double* g = dout.data() + o * plane;
    if (!dbias.empty()) {
      double s = 0.0;
      for (std::size_t p = 0; p < plane; ++p) s += g[p];
      dbias[o] += s;
    }
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = in.data() + i * plane;
      for (std::size_t dy = 0; dy < 3; ++dy)
        for (std::size_t dx = 0; dx < 3; ++dx) {
          const std::size_t widx = ((o * cin + i) * 3 + dy) * 3 + dx;
          const double wv = weight[widx];
          const std::size_t y0 = dy == 0 ? 1 : 0;
          const std::size_t y1 = dy == 2 ? h - 1 : h;
          const std::size_t x0 = dx == 0 ? 1 : 0;
          const std::size_t x1 = dx == 2 ? w - 1 : w;
          double acc = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            const double* s = src + (y + dy - 1) * w + dx;
            const double* gy = g + y * w;
            for (std::size_t x = x0; x < x1; ++x) acc += gy[x] * s[x - 1];
            if (din) {
              double* d = din->data() + i * plane + (y + dy - 1) * w + dx;
              for (std::size_t x = x0; x < x1; ++x) d[x - 1] += wv * gy[x];
            }
          }
          if (!dweight.empty()) dweight[widx] += acc;
        }
    }
  }
}

inline void check_input(const TexModel& m, const ImageBuffer& img) {
  if (img.channels != m.shape.in_channels)
    throw ShapeError("model expects " + std::to_string(m.shape.in_channels) +
                     " channels, image is " + img.dims());
  if (img.height < 2 || img.width < 2 || img.height % 2 || img.width % 2 ||
      img.size() != img.channels * img.plane())
    throw ShapeError("model input " + img.dims() +
                     " must have even, non-zero height and width");
}

inline Activations forward_one(const TexModel& m, const ImageBuffer& img) {
  check_input(m, img);
  constexpr std::size_t c1 = ModelShape::kConv1, c2 = ModelShape::kConv2;
  Activations a;
  a.h = img.height;
  a.w = img.width;
  a.x.resize(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) a.x[i] = img.pixels[i] / 255.0;

  conv3x3_forward(a.x, img.channels, a.h, a.w, m.conv1_w(), m.conv1_b(), c1,
                  a.z1);

  const std::size_t h2 = a.h / 2, w2 = a.w / 2;
  a.p1.assign(c1 * h2 * w2, 0.0);
  for (std::size_t c = 0; c < c1; ++c)
    for (std::size_t y = 0; y < h2; ++y)
      for (std::size_t x = 0; x < w2; ++x) {
        const double* z = a.z1.data() + c * a.h * a.w;
        const std::size_t r0 = 2 * y * a.w + 2 * x;
        const std::size_t r1 = r0 + a.w;
        a.p1[(c * h2 + y) * w2 + x] =
            0.25 * (std::max(z[r0], 0.0) + std::max(z[r0 + 1], 0.0) +
                    std::max(z[r1], 0.0) + std::max(z[r1 + 1], 0.0));
      }

  conv3x3_forward(a.p1, c1, h2, w2, m.conv2_w(), m.conv2_b(), c2, a.z2);

  const std::size_t plane2 = h2 * w2;
  a.pooled.assign(c2, 0.0);
  for (std::size_t c = 0; c < c2; ++c) {
    double s = 0.0;
    for (std::size_t p = 0; p < plane2; ++p)
      s += std::max(a.z2[c * plane2 + p], 0.0);
    a.pooled[c] = s / static_cast<double>(plane2);
  }

  const auto fw = m.fc_w();
  const auto fb = m.fc_b();
  a.logits.assign(m.shape.num_classes, 0.0);
  for (std::size_t k = 0; k < m.shape.num_classes; ++k) {
    double s = fb[k];
    for (std::size_t c = 0; c < c2; ++c) s += fw[k * c2 + c] * a.pooled[c];
    a.logits[k] = s;
  }
  return a;
}

// Backpropagates d loss / d logits through one sample. Parameter gradients
// are accumulated into dparams when non-empty; the input gradient (code-value
// units) is written to dinput when non-null.
inline void backward_one(const TexModel& m, const Activations& a,
                         std::span<const double> dlogits,
                         std::span<double> dparams, ImageBuffer* dinput) {
  constexpr std::size_t c1 = ModelShape::kConv1, c2 = ModelShape::kConv2;
  const ModelShape& s = m.shape;
  const bool want_params = !dparams.empty();
  const std::size_t h2 = a.h / 2, w2 = a.w / 2, plane2 = h2 * w2;

  const auto fw = m.fc_w();
  std::vector<double> dpooled(c2, 0.0);
  for (std::size_t k = 0; k < s.num_classes; ++k) {
    const double g = dlogits[k];
    if (want_params) {
      dparams[s.off_fc_b() + k] += g;
      for (std::size_t c = 0; c < c2; ++c)
        dparams[s.off_fc_w() + k * c2 + c] += g * a.pooled[c];
    }
    for (std::size_t c = 0; c < c2; ++c) dpooled[c] += g * fw[k * c2 + c];
  }

  std::vector<double> dz2(c2 * plane2);
  for (std::size_t c = 0; c < c2; ++c) {
    const double g = dpooled[c] / static_cast<double>(plane2);
    for (std::size_t p = 0; p < plane2; ++p)
      dz2[c * plane2 + p] = a.z2[c * plane2 + p] > 0.0 ? g : 0.0;
  }

  std::vector<double> dp1;
  std::span<double> no_grad;
  conv3x3_backward(
      a.p1, c1, h2, w2, m.conv2_w(), dz2, c2,
      want_params ? dparams.subspan(s.off_conv2_w(), s.conv2_w()) : no_grad,
      want_params ? dparams.subspan(s.off_conv2_b(), c2) : no_grad, &dp1);

  const std::size_t plane1 = a.h * a.w;
  std::vector<double> dz1(c1 * plane1, 0.0);
  for (std::size_t c = 0; c < c1; ++c)
    for (std::size_t y = 0; y < a.h; ++y)
      for (std::size_t x = 0; x < a.w; ++x) {
        const std::size_t idx = c * plane1 + y * a.w + x;
        if (a.z1[idx] > 0.0)
          dz1[idx] = 0.25 * dp1[(c * h2 + y / 2) * w2 + x / 2];
      }

  std::vector<double> dx;
  conv3x3_backward(a.x, s.in_channels, a.h, a.w, m.conv1_w(), dz1, c1,
                   want_params ? dparams.subspan(0, s.conv1_w()) : no_grad,
                   want_params ? dparams.subspan(s.off_conv1_b(), c1) : no_grad,
                   dinput ? &dx : nullptr);
  if (dinput) {
    *dinput = ImageBuffer(s.in_channels, a.h, a.w);
    for (std::size_t i = 0; i < dx.size(); ++i)
      dinput->pixels[i] = dx[i] / 255.0;
  }
}

}  // namespace detail

/// Logits for each image of the batch.
inline Logits forward(const TexModel& m, std::span<const ImageBuffer> batch) {
  Logits out(batch.size());
  parallel_for(batch.size(), [&](std::size_t i) {
    out[i] = detail::forward_one(m, batch[i]).logits;
  });
  return out;
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double mx = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) z += (v = std::exp(v - mx));
  for (double& v : p) v /= z;
  return p;
}

/// Mean cross-entropy over the batch and d loss / d logits.
inline LossResult cross_entropy(const Logits& logits,
                                std::span<const std::size_t> labels) {
  if (logits.size() != labels.size())
    throw ShapeError("cross_entropy: " + std::to_string(logits.size()) +
                     " logit rows but " + std::to_string(labels.size()) +
                     " labels");
  LossResult r;
  r.grad.resize(logits.size());
  const double n = static_cast<double>(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& row = logits[i];
    if (labels[i] >= row.size())
      throw DomainError("cross_entropy: label " + std::to_string(labels[i]) +
                        " out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    r.loss += (log_z - row[labels[i]]) / n;
    r.grad[i].resize(row.size());
    for (std::size_t k = 0; k < row.size(); ++k)
      r.grad[i][k] = (std::exp(row[k] - log_z) - (k == labels[i] ? 1.0 : 0.0)) / n;
  }
  return r;
}

using LossFn = std::function<LossResult(const Logits&)>;

struct BackwardOptions {
  bool param_grads = true;
  bool input_grads = true;
};

/// Gradients of an arbitrary logit loss with respect to parameters and
/// input pixels. Per-sample work may run in parallel; reduction is in batch
/// order.
inline Gradients backward(const TexModel& m, std::span<const ImageBuffer> batch,
                          const LossFn& loss_fn, BackwardOptions opt = {}) {
  std::vector<detail::Activations> acts(batch.size());
  parallel_for(batch.size(),
               [&](std::size_t i) { acts[i] = detail::forward_one(m, batch[i]); });
  Logits logits(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) logits[i] = acts[i].logits;
  LossResult lr = loss_fn(logits);

  Gradients g;
  g.loss = lr.loss;
  if (opt.input_grads) g.inputs.resize(batch.size());
  std::vector<std::vector<double>> per_sample(
      opt.param_grads ? batch.size() : 0);
  parallel_for(batch.size(), [&](std::size_t i) {
    std::span<double> dp;
    if (opt.param_grads) {
      per_sample[i].assign(m.params.size(), 0.0);
      dp = per_sample[i];
    }
    detail::backward_one(m, acts[i], lr.grad[i], dp,
                         opt.input_grads ? &g.inputs[i] : nullptr);
  });
  if (opt.param_grads) {
    g.params.assign(m.params.size(), 0.0);
    for (const auto& ps : per_sample)
      for (std::size_t j = 0; j < ps.size(); ++j) g.params[j] += ps[j];
  }
  return g;
}

/// Cross-entropy gradients against the given labels.
inline Gradients backward(const TexModel& m, std::span<const ImageBuffer> batch,
                          std::span<const std::size_t> labels,
                          BackwardOptions opt = {}) {
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return backward(
      m, batch, [&](const Logits& l) { return cross_entropy(l, lab); }, opt);
}

/// Index of the largest value; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

/// Index of the smallest value; ties go to the lowest index.
inline std::size_t argmin(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] < v[best]) best = k;
  return best;
}

inline std::size_t predict_top1(const TexModel& m, const ImageBuffer& img) {
  return argmax(detail::forward_one(m, img).logits);
}

inline std::vector<std::size_t> predict_all(const TexModel& m,
                                            std::span<const ImageBuffer> imgs) {
  std::vector<std::size_t> out(imgs.size());
  parallel_for(imgs.size(),
               [&](std::size_t i) { out[i] = predict_top1(m, imgs[i]); });
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;  // 0 = plain SGD
  std::uint64_t seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double heldout_top1 = 0.0;
};

struct TrainResult {
  TexModel model;
  std::vector<EpochStats> history;
};

inline double accuracy(const TexModel& m, const LabeledSet& set) {
  if (set.empty()) return 0.0;
  const auto pred = predict_all(m, set.images);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == set.labels[i];
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

/// Mini-batch SGD with momentum on cross-entropy. The model is taken by value and the
/// trained copy returned, so a model being trained is never visible to other
/// readers. Per-epoch accuracy is measured on `heldout`, or on `train` when
/// `heldout` is empty.
inline TrainResult train_classifier(TexModel m, const LabeledSet& train,
                                    const LabeledSet& heldout,
                                    const TrainOptions& opt) {
  if (train.empty()) throw DomainError("train_classifier: empty training set");
  train.validate();
  if (opt.batch_size == 0) throw DomainError("train_classifier: batch size 0");
  for (std::size_t l : train.labels)
    if (l >= m.shape.num_classes)
      throw DomainError("train_classifier: label exceeds model classes");
  {
    std::vector<std::size_t> distinct(train.labels);
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() == 1)
      warn("train_classifier: training set contains a single class");
  }

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> velocity(m.params.size(), 0.0);
  TrainResult res;
  const LabeledSet& eval_set = heldout.empty() ? train : heldout;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      std::vector<ImageBuffer> batch;
      std::vector<std::size_t> labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train.images[order[i]]);
        labels.push_back(train.labels[order[i]]);
      }
      Gradients g = backward(m, batch, labels, {.param_grads = true, .input_grads = false});
      for (std::size_t j = 0; j < m.params.size(); ++j) {
        velocity[j] = opt.momentum * velocity[j] + g.params[j];
        m.params[j] -= opt.lr * velocity[j];
      }
      loss_sum += g.loss;
      ++batches;
    }
    res.history.push_back(
        {epoch, loss_sum / static_cast<double>(batches), accuracy(m, eval_set)});
  }
  res.model = std::move(m);
  return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: "FTTX", u32 version, u32 in_channels, u32 conv1, u32 conv2,
// u32 classes, then every parameter as a little-endian f64.

inline constexpr std::uint32_t kModelFormatVersion = 1;

inline void save_model(const TexModel& m, std::ostream& os) {
  binary::write_magic(os, "FTTX");
  binary::write_u32(os, kModelFormatVersion);
  binary::write_u32(os, static_cast<std::uint32_t>(m.shape.in_channels));
  binary::write_u32(os, ModelShape::kConv1);
  binary::write_u32(os, ModelShape::kConv2);
  binary::write_u32(os, static_cast<std::uint32_t>(m.shape.num_classes));
  for (double v : m.params) binary::write_f64(os, v);
}

inline TexModel load_model(std::istream& is, const std::string& source) {
  binary::Reader r(is, source);
  r.expect_magic("FTTX");
  if (auto v = r.u32("version"); v != kModelFormatVersion)
    throw FormatError(source + ": unsupported model version " +
                      std::to_string(v));
  ModelShape s;
  s.in_channels = r.u32("in_channels");
  const auto c1 = r.u32("conv1_channels");
  const auto c2 = r.u32("conv2_channels");
  s.num_classes = r.u32("num_classes");
  if (c1 != ModelShape::kConv1 || c2 != ModelShape::kConv2 ||
      s.in_channels == 0 || s.in_channels > 4 || s.num_classes < 2 ||
      s.num_classes > 4096)
    throw FormatError(source + ": unsupported architecture descriptor");
  TexModel m(s);
  for (double& v : m.params) {
    v = r.f64("parameters");
    if (!std::isfinite(v)) throw FormatError(source + ": non-finite parameter");
  }
  r.expect_end();
  return m;
}

inline void save_model(const TexModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(path + ": cannot open for writing");
  save_model(m, os);
  if (!os) throw Error(path + ": write failed");
}

inline TexModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(path + ": cannot open model file");
  return load_model(is, path);
}

}  // namespace freqtune
