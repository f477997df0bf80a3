#pragma once

// Metrics and experiment harnesses: fooling rate, accuracy, perceptibility,
// cross-model transfer, training-set-size sweeps and gain ablations.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "freqtune/attack.hpp"
#include "freqtune/perception.hpp"
#include "freqtune/synth.hpp"
#include "freqtune/texclass.hpp"

namespace freqtune {

/// An exact k / n ratio.
struct Rate {
  std::size_t count = 0;
  std::size_t total = 0;
  double value() const {
    return total == 0 ? 0.0
                      : static_cast<double>(count) / static_cast<double>(total);
  }
};

/// Fraction of samples whose predicted class changes when the perturbation is
/// applied. The reference is the model's own clean prediction, not the label.
inline Rate fooling_rate(const TexModel& model, const LabeledSet& set,
                         const Perturbation& p) {
  if (set.empty()) throw DomainError("fooling_rate: empty set");
  std::vector<char> flipped(set.size(), 0);
  parallel_for(set.size(), [&](std::size_t i) {
    flipped[i] = predict_top1(model, set.images[i]) !=
                 predict_top1(model, apply_perturbation(set.images[i], p));
  });
  return {static_cast<std::size_t>(std::count(flipped.begin(), flipped.end(), 1)),
          set.size()};
}

/// Top-1 accuracy on clean images, or on perturbed images when p is given.
inline Rate top1_accuracy(const TexModel& model, const LabeledSet& set,
                          const Perturbation* p = nullptr) {
  if (set.empty()) throw DomainError("top1_accuracy: empty set");
  std::vector<char> hit(set.size(), 0);
  parallel_for(set.size(), [&](std::size_t i) {
    const std::size_t pred =
        p ? predict_top1(model, apply_perturbation(set.images[i], *p))
          : predict_top1(model, set.images[i]);
    hit[i] = pred == set.labels[i];
  });
  return {static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1)),
          set.size()};
}

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// PSNR in dB at peak 255; +inf for identical images.
inline double psnr_db(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw ShapeError("psnr: " + a.dims() + " vs " + b.dims());
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  return mse == 0.0 ? kInfinitePsnr : 10.0 * std::log10(255.0 * 255.0 / mse);
}

struct Perceptibility {
  double linf = 0.0;
  double psnr_db = kInfinitePsnr;  // mean over the set
};

/// l-inf of the perturbation and the mean PSNR between clean and clipped
/// perturbed images.
inline Perceptibility perceptibility_stats(const LabeledSet& set,
                                           const Perturbation& p) {
  if (set.empty()) throw DomainError("perceptibility_stats: empty set");
  Perceptibility out;
  out.linf = max_abs(p.spatial.pixels);
  std::vector<double> per(set.size());
  parallel_for(set.size(), [&](std::size_t i) {
    per[i] = psnr_db(set.images[i], apply_perturbation(set.images[i], p));
  });
  double sum = 0.0;
  for (double v : per) sum += v;
  out.psnr_db = sum / static_cast<double>(per.size());
  return out;
}

struct AttackReport {
  std::string variant;
  std::uint64_t seed = 0;
  Rate fooling;
  Rate clean_top1;
  Rate perturbed_top1;
  double linf = 0.0;
  double psnr_db = kInfinitePsnr;
};

inline AttackReport make_report(const TexModel& model, const LabeledSet& set,
                                const Perturbation& p, std::string variant,
                                std::uint64_t seed) {
  AttackReport r;
  r.variant = std::move(variant);
  r.seed = seed;
  r.fooling = fooling_rate(model, set, p);
  r.clean_top1 = top1_accuracy(model, set);
  r.perturbed_top1 = top1_accuracy(model, set, &p);
  const Perceptibility s = perceptibility_stats(set, p);
  r.linf = s.linf;
  r.psnr_db = s.psnr_db;
  return r;
}

/// Same report for images that were perturbed elsewhere (for example files
/// written by `apply`), paired index by index with the clean set.
inline AttackReport make_report_pairs(const TexModel& model,
                                      const LabeledSet& clean,
                                      const std::vector<ImageBuffer>& adv,
                                      std::string variant, std::uint64_t seed) {
  if (clean.empty()) throw DomainError("make_report_pairs: empty set");
  if (adv.size() != clean.size())
    throw ShapeError("make_report_pairs: " + std::to_string(clean.size()) +
                     " clean vs " + std::to_string(adv.size()) + " perturbed images");
  AttackReport r;
  r.variant = std::move(variant);
  r.seed = seed;
  const auto n = clean.size();
  std::vector<std::size_t> pc(n), pa(n);
  std::vector<double> psnr(n), linf(n);
  parallel_for(n, [&](std::size_t i) {
    pc[i] = predict_top1(model, clean.images[i]);
    pa[i] = predict_top1(model, adv[i]);
    psnr[i] = psnr_db(clean.images[i], adv[i]);
    double m = 0.0;
    for (std::size_t p = 0; p < adv[i].size(); ++p)
      m = std::max(m, std::abs(adv[i].pixels[p] - clean.images[i].pixels[p]));
    linf[i] = m;
  });
  r.fooling.total = r.clean_top1.total = r.perturbed_top1.total = n;
  double psum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    r.fooling.count += pc[i] != pa[i];
    r.clean_top1.count += pc[i] == clean.labels[i];
    r.perturbed_top1.count += pa[i] == clean.labels[i];
    r.linf = std::max(r.linf, linf[i]);
    psum += psnr[i];
  }
  r.psnr_db = psum / static_cast<double>(n);
  return r;
}

// ---------------------------------------------------------------------------
// Harnesses

/// fr[i][j]: fooling rate of perturbation i on model j.
struct CrossModelMatrix {
  std::vector<std::vector<double>> fr;
  std::vector<double> row_means;
  std::vector<double> col_means;
};

inline CrossModelMatrix cross_model_matrix(
    const std::vector<TexModel>& models, const LabeledSet& set,
    const std::vector<Perturbation>& perturbations) {
  for (const auto& m : models)
    if (m.shape.in_channels != models.front().shape.in_channels)
      throw ShapeError("cross_model_matrix: models differ in input channels");
  CrossModelMatrix out;
  const std::size_t n = perturbations.size(), k = models.size();
  out.fr.assign(n, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j)
      out.fr[i][j] = fooling_rate(models[j], set, perturbations[i]).value();
  out.row_means.assign(n, 0.0);
  out.col_means.assign(k, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      out.row_means[i] += out.fr[i][j] / static_cast<double>(k);
      out.col_means[j] += out.fr[i][j] / static_cast<double>(n);
    }
  return out;
}

struct SweepPoint {
  double fraction = 0.0;
  bool augment = false;
  std::size_t attack_images = 0;
  double fr = 0.0;  // on the test set
};

/// Runs one attack per fraction of the attack set (seeded stratified
/// subsample, cfg.seed) and records the test-set fooling rate. With
/// augmentation every epoch draws as many augmented samples as the full attack
/// set holds. Points are returned by descending fraction; fractions that
/// select no image are skipped with a warning.
inline std::vector<SweepPoint> data_size_sweep(
    const TexModel& model, const LabeledSet& attack_set,
    const LabeledSet& test_set, std::vector<double> fractions, bool augment,
    AttackConfig cfg, const AttackBudget& budget) {
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0))
      throw DomainError("data_size_sweep: fractions must lie in (0, 1]");
  std::sort(fractions.begin(), fractions.end(), std::greater<>());
  cfg.augment = augment;
  if (augment) cfg.epoch_samples = attack_set.size();
  std::vector<SweepPoint> out;
  for (double f : fractions) {
    const LabeledSet sub = subsample(attack_set, f, cfg.seed);
    if (sub.empty()) {
      warn("data_size_sweep: fraction " + std::to_string(f) +
           " selects no images; skipped");
      continue;
    }
    const AttackResult r = run_attack(model, sub, cfg, budget);
    out.push_back(
        {f, augment, sub.size(), fooling_rate(model, test_set, r.perturbation).value()});
  }
  return out;
}

struct AblationCell {
  double lambda_l = 0.0;
  double lambda_h = 0.0;
  double f_c = 0.0;
  double fr = 0.0;
  double psnr_db = kInfinitePsnr;
};

/// One frequency-tuned attack per (lambda_l, lambda_h, f_c) combination,
/// iterated lambda_l-major.
inline std::vector<AblationCell> ablation_grid(
    const TexModel& model, const LabeledSet& attack_set,
    const LabeledSet& test_set, const std::vector<double>& lambda_l,
    const std::vector<double>& lambda_h, const std::vector<double>& f_c,
    const AttackConfig& cfg, const DisplayModel& disp = {}) {
  if (lambda_l.empty() || lambda_h.empty() || f_c.empty())
    throw DomainError("ablation_grid: empty parameter list");
  if (!is_frequency_tuned(cfg.variant))
    throw DomainError("ablation_grid: needs a frequency-tuned variant");
  std::vector<AblationCell> out;
  for (double ll : lambda_l)
    for (double lh : lambda_h)
      for (double fc : f_c) {
        AttackBudget budget;
        budget.thresholds = effective_thresholds({ll, lh, fc}, disp);
        const AttackResult r = run_attack(model, attack_set, cfg, budget);
        const auto s = perceptibility_stats(test_set, r.perturbation);
        out.push_back({ll, lh, fc,
                       fooling_rate(model, test_set, r.perturbation).value(),
                       s.psnr_db});
      }
  return out;
}

// ---------------------------------------------------------------------------
// CSV (fixed header, 6 fraction digits, "inf" for the infinite PSNR)

inline std::string csv_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string report_csv(const std::vector<AttackReport>& rows) {
  std::string out = "variant,seed,fr,clean_top1,pert_top1,linf,psnr_db\n";
  for (const auto& r : rows)
    out += r.variant + "," + std::to_string(r.seed) + "," +
           csv_number(r.fooling.value()) + "," +
           csv_number(r.clean_top1.value()) + "," +
           csv_number(r.perturbed_top1.value()) + "," + csv_number(r.linf) +
           "," + csv_number(r.psnr_db) + "\n";
  return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& rows) {
  std::string out = "fraction,augment,fr\n";
  for (const auto& r : rows)
    out += csv_number(r.fraction) + "," + (r.augment ? "1" : "0") + "," +
           csv_number(r.fr) + "\n";
  return out;
}

inline std::string ablation_csv(const std::vector<AblationCell>& rows) {
  std::string out = "lambda_l,lambda_h,f_c,fr,psnr_db\n";
  for (const auto& r : rows)
    out += csv_number(r.lambda_l) + "," + csv_number(r.lambda_h) + "," +
           csv_number(r.f_c) + "," + csv_number(r.fr) + "," +
           csv_number(r.psnr_db) + "\n";
  return out;
}

/// Rows are perturbation sources, columns target models; the labels name
/// the model each perturbation was computed on and the evaluated model.
inline std::string cross_csv(const CrossModelMatrix& m,
                             const std::vector<std::string>& source_names,
                             const std::vector<std::string>& target_names) {
  std::string out = "source_model,target_model,fr\n";
  for (std::size_t i = 0; i < m.fr.size(); ++i)
    for (std::size_t j = 0; j < m.fr[i].size(); ++j)
      out += source_names.at(i) + "," + target_names.at(j) + "," +
             csv_number(m.fr[i][j]) + "\n";
  return out;
}

}  // namespace freqtune
