#pragma once

// Universal perturbation optimizers. Spatial variants (sPGD, UPGD) take sign
// steps inside an l-infinity ball; frequency-tuned variants optimize block-DCT
// coefficients with Adam under per-band bounds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "freqtune/binary_io.hpp"
#include "freqtune/common.hpp"
#include "freqtune/perception.hpp"
#include "freqtune/synth.hpp"
#include "freqtune/texclass.hpp"
#include "freqtune/transform.hpp"

namespace freqtune {

enum class PerturbationDomain : std::uint8_t { kSpatial = 0, kDctBands = 1 };

/// A universal perturbation and the constraint it was built under. For the
/// band domain `spatial` always caches bands_to_image(bands).
struct Perturbation {
  PerturbationDomain domain = PerturbationDomain::kSpatial;
  ImageBuffer spatial;
  BandTensor bands;
  double linf_eps = 0.0;       // spatial domain
  ThresholdMatrix thresholds;  // band domain

  static Perturbation zero_spatial(std::size_t c, std::size_t h, std::size_t w,
                                   double eps) {
    Perturbation p;
    p.domain = PerturbationDomain::kSpatial;
    p.spatial = ImageBuffer(c, h, w);
    p.linf_eps = eps;
    return p;
  }

  static Perturbation zero_bands(std::size_t c, std::size_t h, std::size_t w,
                                 const ThresholdMatrix& t) {
    if (h % kBlock || w % kBlock)
      throw ShapeError("band perturbation needs H and W divisible by 8, got " +
                       std::to_string(h) + "x" + std::to_string(w));
    Perturbation p;
    p.domain = PerturbationDomain::kDctBands;
    p.spatial = ImageBuffer(c, h, w);
    p.bands = BandTensor(c, h / kBlock, w / kBlock);
    p.thresholds = t;
    return p;
  }

  bool is_bands() const { return domain == PerturbationDomain::kDctBands; }

  void sync_spatial() {
    if (is_bands()) spatial = bands_to_image(bands);
  }

  /// Exact constraint check (no tolerance).
  bool feasible() const {
    if (!is_bands()) {
      for (double v : spatial.pixels)
        if (!(std::abs(v) <= linf_eps)) return false;
      return true;
    }
    for (std::size_t c = 0; c < bands.channels; ++c)
      for (std::size_t k = 0; k < kBands; ++k)
        for (double v : bands.band(c, k))
          if (!(std::abs(v) <= thresholds[k])) return false;
    return true;
  }

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

// ---------------------------------------------------------------------------
// Losses

/// Negated cross-entropy against the true labels; minimizing it pushes
/// predictions away from the truth.
inline LossResult loss_tar(const Logits& logits,
                           std::span<const std::size_t> true_labels) {
  LossResult r = cross_entropy(logits, true_labels);
  r.loss = -r.loss;
  for (auto& row : r.grad)
    for (double& g : row) g = -g;
  return r;
}

/// Cross-entropy toward each sample's least likely class.
inline LossResult loss_llc(const Logits& logits,
                           std::span<const std::size_t> llc_labels) {
  return cross_entropy(logits, llc_labels);
}

/// Per-row argmin of the logits, ties to the lowest index.
inline std::vector<std::size_t> least_likely_labels(const Logits& logits) {
  std::vector<std::size_t> out;
  out.reserve(logits.size());
  for (const auto& row : logits) out.push_back(argmin(row));
  return out;
}

// ---------------------------------------------------------------------------
// Projection and application

/// clamp(img + p.spatial, 0, 255).
inline ImageBuffer apply_perturbation(const ImageBuffer& img,
                                      const Perturbation& p) {
  if (!img.same_shape(p.spatial))
    throw ShapeError("apply_perturbation: image " + img.dims() +
                     " does not match perturbation " + p.spatial.dims());
  ImageBuffer out = img;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels[i] = std::clamp(img.pixels[i] + p.spatial.pixels[i], 0.0, 255.0);
  return out;
}

inline Perturbation project_spatial_linf(Perturbation p, double eps) {
  if (p.is_bands())
    throw DomainError("project_spatial_linf: perturbation is in the band domain");
  if (!(eps >= 0.0)) throw DomainError("project_spatial_linf: eps < 0");
  for (double& v : p.spatial.pixels) v = std::clamp(v, -eps, eps);
  p.linf_eps = eps;
  return p;
}

inline Perturbation project_bands(Perturbation p, const ThresholdMatrix& t) {
  if (!p.is_bands())
    throw DomainError("project_bands: perturbation is in the spatial domain");
  for (std::size_t c = 0; c < p.bands.channels; ++c)
    for (std::size_t k = 0; k < kBands; ++k)
      for (double& v : p.bands.band(c, k)) v = std::clamp(v, -t[k], t[k]);
  p.thresholds = t;
  p.sync_spatial();
  return p;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
  double alpha = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam descent step on `var`. When `lr_scale` is
/// non-empty, coordinate i uses learning rate alpha * lr_scale[i].
inline void adam_step(std::span<double> var, std::span<const double> grad,
                      AdamState& st, std::span<const double> lr_scale = {}) {
  if (var.size() != grad.size() || st.m.size() != var.size() ||
      st.v.size() != var.size() ||
      (!lr_scale.empty() && lr_scale.size() != var.size()))
    throw ShapeError("adam_step: variable, gradient and moment sizes differ");
  ++st.step;
  const double t = static_cast<double>(st.step);
  const double c1 = 1.0 - std::pow(st.beta1, t);
  const double c2 = 1.0 - std::pow(st.beta2, t);
  for (std::size_t i = 0; i < var.size(); ++i) {
    st.m[i] = st.beta1 * st.m[i] + (1.0 - st.beta1) * grad[i];
    st.v[i] = st.beta2 * st.v[i] + (1.0 - st.beta2) * grad[i] * grad[i];
    const double m_hat = st.m[i] / c1;
    const double v_hat = st.v[i] / c2;
    const double lr = lr_scale.empty() ? st.alpha : st.alpha * lr_scale[i];
    var[i] -= lr * m_hat / (std::sqrt(v_hat) + st.eps);
  }
}

// ---------------------------------------------------------------------------
// Attack driver

enum class AttackVariant { kSpgd, kUpgd, kFtSpgd, kFtUpgd };
enum class AttackLoss { kTar, kLlc };
enum class Reparam { kClamp, kTanh };

inline bool is_frequency_tuned(AttackVariant v) {
  return v == AttackVariant::kFtSpgd || v == AttackVariant::kFtUpgd;
}

inline std::string to_string(AttackVariant v) {
  switch (v) {
    case AttackVariant::kSpgd: return "spgd";
    case AttackVariant::kUpgd: return "upgd";
    case AttackVariant::kFtSpgd: return "ft-spgd";
    case AttackVariant::kFtUpgd: return "ft-upgd";
  }
  return "?";
}

inline std::optional<AttackVariant> parse_variant(std::string_view s) {
  for (auto v : {AttackVariant::kSpgd, AttackVariant::kUpgd,
                 AttackVariant::kFtSpgd, AttackVariant::kFtUpgd})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

struct AttackConfig {
  AttackVariant variant = AttackVariant::kFtSpgd;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  // Stop once the best attack-set fooling rate has not improved by more
  // than min_improvement for `patience` consecutive epochs.
  std::size_t patience = 5;
  double min_improvement = 0.005;
  // Spatial variants: sign-step size in code values. UPGD halves it every
  // step_decay_epochs epochs (0 disables the decay).
  double step = 1.0;
  std::size_t step_decay_epochs = 10;
  double momentum = 0.9;  // UPGD variants
  // Frequency-tuned variants: Adam on the band coefficients. With clamp
  // projection the learning rate of band k is ft_lr * t(k), i.e. ft_lr is a
  // fraction of each band's bound per step.
  double ft_lr = 0.1;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  AttackLoss loss = AttackLoss::kTar;
  Reparam reparam = Reparam::kClamp;
  bool augment = false;
  // With augment: augmented samples drawn per epoch, cycling through the set
  // (0 or anything below the set size means one pass).
  std::size_t epoch_samples = 0;
  std::uint64_t seed = 0;
};

/// The constraint an attack runs under: eps for spatial variants, per-band
/// thresholds for frequency-tuned ones.
struct AttackBudget {
  std::optional<double> linf_eps;
  std::optional<ThresholdMatrix> thresholds;
};

struct CurvePoint {
  std::size_t epoch = 0;
  double fooling_rate = 0.0;       // attack set, perturbation after the epoch
  double best_fooling_rate = 0.0;  // best so far
  double loss = 0.0;               // mean mini-batch attack loss
};

struct AttackResult {
  Perturbation perturbation;  // best-so-far on the attack set
  std::vector<CurvePoint> curve;
  double best_fooling_rate = 0.0;
};

using EpochObserver =
    std::function<void(const CurvePoint&, const Perturbation&)>;

namespace detail {

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

inline double fooling_fraction(const TexModel& model,
                               std::span<const ImageBuffer> images,
                               std::span<const std::size_t> clean_pred,
                               const Perturbation& p) {
  std::vector<std::size_t> flipped(images.size(), 0);
  parallel_for(images.size(), [&](std::size_t i) {
    flipped[i] =
        predict_top1(model, apply_perturbation(images[i], p)) != clean_pred[i];
  });
  std::size_t n = 0;
  for (auto f : flipped) n += f;
  return static_cast<double>(n) / static_cast<double>(images.size());
}

}  // namespace detail

/// Optimizes a universal perturbation against a frozen model on the attack
/// set. `observer`, when set, sees the current (projected) perturbation after
/// every epoch.
inline AttackResult run_attack(const TexModel& model,
                               const LabeledSet& attack_set,
                               const AttackConfig& cfg,
                               const AttackBudget& budget,
                               const EpochObserver& observer = {}) {
  if (attack_set.empty()) throw DomainError("run_attack: empty attack set");
  attack_set.validate();
  if (cfg.batch_size == 0) throw DomainError("run_attack: batch size 0");
  const bool ft = is_frequency_tuned(cfg.variant);
  if (ft && !budget.thresholds)
    throw DomainError("run_attack: frequency-tuned variants need thresholds");
  if (!ft && !budget.linf_eps)
    throw DomainError("run_attack: spatial variants need an l-inf eps");
  if (!ft && cfg.reparam == Reparam::kTanh)
    throw DomainError("run_attack: tanh reparameterization is band-domain only");
  if (!ft && !(*budget.linf_eps >= 0.0))
    throw DomainError("run_attack: eps must be >= 0");
  if (ft)
    for (double t : budget.thresholds->values)
      if (!(t >= 0.0) || !std::isfinite(t))
        throw DomainError("run_attack: thresholds must be finite and >= 0");

  const ImageBuffer& ref = attack_set.images.front();
  if (ref.channels != model.shape.in_channels)
    throw ShapeError("run_attack: data " + ref.dims() + " vs model channels " +
                     std::to_string(model.shape.in_channels));
  Perturbation delta =
      ft ? Perturbation::zero_bands(ref.channels, ref.height, ref.width,
                                    *budget.thresholds)
         : Perturbation::zero_spatial(ref.channels, ref.height, ref.width,
                                      *budget.linf_eps);

  AttackResult result;
  result.perturbation = delta;
  const bool degenerate =
      ft ? std::all_of(budget.thresholds->values.begin(),
                       budget.thresholds->values.end(),
                       [](double t) { return t == 0.0; })
         : *budget.linf_eps == 0.0;
  if (degenerate) {
    warn("run_attack: constraint admits only the zero perturbation");
    return result;
  }

  const auto clean_pred = predict_all(model, attack_set.images);
  std::vector<std::size_t> llc;
  if (cfg.loss == AttackLoss::kLlc)
    llc = least_likely_labels(forward(model, attack_set.images));

  // Optimized variable: spatial pixels, band coefficients, or the pre-tanh
  // parameters of the band coefficients.
  std::vector<double> var = ft ? delta.bands.data : delta.spatial.pixels;
  std::vector<double> momentum(var.size(), 0.0);
  AdamState adam(var.size());
  adam.alpha = cfg.ft_lr;
  adam.beta1 = cfg.adam_beta1;
  adam.beta2 = cfg.adam_beta2;
  std::vector<double> band_bound;  // t(k) for every coefficient
  if (ft) {
    band_bound.resize(var.size());
    const std::size_t blocks = delta.bands.blocks();
    for (std::size_t i = 0; i < var.size(); ++i)
      band_bound[i] = (*budget.thresholds)[(i / blocks) % kBands];
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(
      cfg.augment ? std::max(attack_set.size(), cfg.epoch_samples) : attack_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i % attack_set.size();
  double step = cfg.step;
  double reference_fr = 0.0;
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.variant == AttackVariant::kUpgd && cfg.step_decay_epochs > 0 &&
        epoch > 1 && (epoch - 1) % cfg.step_decay_epochs == 0)
      step *= 0.5;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<ImageBuffer> adv;
      std::vector<std::size_t> targets;
      for (std::size_t i = start; i < end; ++i) {
        const std::size_t idx = order[i];
        ImageBuffer x = cfg.augment ? augment_flip_crop(attack_set.images[idx], rng)
                                    : attack_set.images[idx];
        for (std::size_t p = 0; p < x.size(); ++p)
          x.pixels[p] += delta.spatial.pixels[p];
        adv.push_back(std::move(x));
        targets.push_back(cfg.loss == AttackLoss::kTar ? attack_set.labels[idx]
                                                       : llc[idx]);
      }
      // Pixels pushed outside [0, 255] get zero gradient; the clamp is the
      // identity inside the valid range.
      std::vector<std::vector<char>> inside(adv.size());
      for (std::size_t b = 0; b < adv.size(); ++b) {
        inside[b].resize(adv[b].size());
        for (std::size_t p = 0; p < adv[b].size(); ++p) {
          double& v = adv[b].pixels[p];
          inside[b][p] = v >= 0.0 && v <= 255.0;
          v = std::clamp(v, 0.0, 255.0);
        }
      }
      const LossFn loss_fn = [&](const Logits& l) {
        return cfg.loss == AttackLoss::kTar ? loss_tar(l, targets)
                                            : loss_llc(l, targets);
      };
      const Gradients g =
          backward(model, adv, loss_fn, {.param_grads = false, .input_grads = true});
      loss_sum += g.loss;
      ++batches;

      ImageBuffer pixel_grad(ref.channels, ref.height, ref.width);
      for (std::size_t b = 0; b < adv.size(); ++b)
        for (std::size_t p = 0; p < pixel_grad.size(); ++p)
          if (inside[b][p]) pixel_grad.pixels[p] += g.inputs[b].pixels[p];

      std::vector<double> grad;
      if (ft) {
        // delta = iDCT(bands) is linear and orthogonal, so the band gradient is
        // the forward DCT of the pixel gradient.
        grad = image_to_bands(pixel_grad).data;
        if (cfg.reparam == Reparam::kTanh)
          for (std::size_t i = 0; i < grad.size(); ++i) {
            const double th = std::tanh(var[i]);
            grad[i] *= band_bound[i] * (1.0 - th * th);
          }
      } else {
        grad = std::move(pixel_grad.pixels);
      }

      if (cfg.variant == AttackVariant::kUpgd ||
          cfg.variant == AttackVariant::kFtUpgd) {
        double l1 = 0.0;
        for (double v : grad) l1 += std::abs(v);
        for (std::size_t i = 0; i < grad.size(); ++i)
          momentum[i] = cfg.momentum * momentum[i] + (l1 > 0 ? grad[i] / l1 : 0.0);
        grad = momentum;
      }

      if (ft) {
        if (cfg.reparam == Reparam::kTanh) {
          adam_step(var, grad, adam);
          for (std::size_t i = 0; i < var.size(); ++i)
            delta.bands.data[i] = band_bound[i] * std::tanh(var[i]);
          delta.sync_spatial();
        } else {
          adam_step(var, grad, adam, band_bound);
          delta.bands.data = var;
          delta = project_bands(std::move(delta), *budget.thresholds);
          var = delta.bands.data;
        }
      } else {
        for (std::size_t i = 0; i < var.size(); ++i)
          var[i] -= step * detail::sign(grad[i]);
        delta.spatial.pixels = var;
        delta = project_spatial_linf(std::move(delta), *budget.linf_eps);
        var = delta.spatial.pixels;
      }
    }

    CurvePoint pt;
    pt.epoch = epoch;
    pt.loss = loss_sum / static_cast<double>(batches);
    pt.fooling_rate =
        detail::fooling_fraction(model, attack_set.images, clean_pred, delta);
    if (epoch == 1 || pt.fooling_rate > result.best_fooling_rate) {
      result.best_fooling_rate = pt.fooling_rate;
      result.perturbation = delta;
    }
    pt.best_fooling_rate = result.best_fooling_rate;
    result.curve.push_back(pt);
    if (observer) observer(pt, delta);

    if (result.best_fooling_rate > reference_fr + cfg.min_improvement) {
      reference_fr = result.best_fooling_rate;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

/// A perturbation drawn uniformly from the constraint set: each pixel in
/// [-eps, eps], or each coefficient of band k in [-t(k), t(k)].
inline Perturbation random_perturbation(std::size_t c, std::size_t h,
                                        std::size_t w,
                                        const AttackBudget& budget,
                                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  if (budget.thresholds) {
    Perturbation p = Perturbation::zero_bands(c, h, w, *budget.thresholds);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t k = 0; k < kBands; ++k)
        for (double& v : p.bands.band(ch, k))
          v = std::clamp(u(rng) * (*budget.thresholds)[k],
                         -(*budget.thresholds)[k], (*budget.thresholds)[k]);
    p.sync_spatial();
    return p;
  }
  if (!budget.linf_eps) throw DomainError("random_perturbation: no constraint");
  const double eps = *budget.linf_eps;
  Perturbation p = Perturbation::zero_spatial(c, h, w, eps);
  for (double& v : p.spatial.pixels) v = std::clamp(u(rng) * eps, -eps, eps);
  return p;
}

// ---------------------------------------------------------------------------
// Files: "FTUP", u32 version, u8 domain, u32 C, H, W, then either eps (f64)
// or 64 thresholds (f64), then the payload as little-endian f64: the spatial
// tensor (c, y, x) or the band tensor (c, k, block row, block col).

inline constexpr std::uint32_t kPerturbationFormatVersion = 1;

inline void save_perturbation(const Perturbation& p, std::ostream& os) {
  binary::write_magic(os, "FTUP");
  binary::write_u32(os, kPerturbationFormatVersion);
  binary::write_u8(os, static_cast<std::uint8_t>(p.domain));
  binary::write_u32(os, static_cast<std::uint32_t>(p.spatial.channels));
  binary::write_u32(os, static_cast<std::uint32_t>(p.spatial.height));
  binary::write_u32(os, static_cast<std::uint32_t>(p.spatial.width));
  if (p.is_bands()) {
    for (double t : p.thresholds.values) binary::write_f64(os, t);
    for (double v : p.bands.data) binary::write_f64(os, v);
  } else {
    binary::write_f64(os, p.linf_eps);
    for (double v : p.spatial.pixels) binary::write_f64(os, v);
  }
}

inline Perturbation load_perturbation(std::istream& is,
                                      const std::string& source) {
  binary::Reader r(is, source);
  r.expect_magic("FTUP");
  if (auto v = r.u32("version"); v != kPerturbationFormatVersion)
    throw FormatError(source + ": unsupported perturbation version " +
                      std::to_string(v));
  const auto tag = r.u8("domain");
  if (tag > 1) throw FormatError(source + ": unknown domain tag");
  const std::size_t c = r.u32("channels"), h = r.u32("height"),
                    w = r.u32("width");
  if (c == 0 || h == 0 || w == 0 || c > 4 || h > 16384 || w > 16384)
    throw FormatError(source + ": implausible dimensions");
  Perturbation p;
  if (tag == 1) {
    if (h % kBlock || w % kBlock)
      throw FormatError(source + ": band perturbation with H/W not divisible by 8");
    ThresholdMatrix t;
    for (double& v : t.values) v = r.f64("thresholds");
    p = Perturbation::zero_bands(c, h, w, t);
    for (double& v : p.bands.data) v = r.f64("band payload");
    p.sync_spatial();
  } else {
    p = Perturbation::zero_spatial(c, h, w, r.f64("eps"));
    for (double& v : p.spatial.pixels) v = r.f64("spatial payload");
  }
  r.expect_end();
  return p;
}

inline void save_perturbation(const Perturbation& p, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(path + ": cannot open for writing");
  save_perturbation(p, os);
  if (!os) throw Error(path + ": write failed");
}

inline Perturbation load_perturbation(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(path + ": cannot open perturbation file");
  return load_perturbation(is, path);
}

/// "epoch,attack_set_fooling_rate,loss" rows.
inline std::string curve_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "epoch,attack_set_fooling_rate,loss\n";
  char buf[128];
  for (const auto& pt : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", pt.epoch, pt.fooling_rate,
                  pt.loss);
    out += buf;
  }
  return out;
}

}  // namespace freqtune
