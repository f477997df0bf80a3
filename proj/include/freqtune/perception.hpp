#pragma once

// Luminance-based DCT-domain JND thresholds (Ahumada-Peterson contrast
// sensitivity model) and the sigmoid frequency-gain schedule.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "freqtune/common.hpp"
#include "freqtune/transform.hpp"

namespace freqtune {

/// Display and viewing geometry. Pixel sizes are degrees of visual angle.
struct DisplayModel {
  double l_min = 0.0;    // cd/m^2
  double l_max = 175.0;  // cd/m^2
  double m = 255.0;      // maximum code value
  double w_x = 0.0303;
  double w_y = 0.0303;

  void validate() const {
    if (!(std::isfinite(l_min) && std::isfinite(l_max) && std::isfinite(m) &&
          std::isfinite(w_x) && std::isfinite(w_y)))
      throw DomainError("display model: non-finite parameter");
    if (!(l_max > l_min) || l_min < 0.0)
      throw DomainError("display model: need l_max > l_min >= 0");
    if (!(w_x > 0.0) || !(w_y > 0.0))
      throw DomainError("display model: pixel sizes must be positive");
    if (!(m > 0.0)) throw DomainError("display model: m must be positive");
  }
};

/// Constants of the contrast sensitivity model.
struct CsfConstants {
  double r = 0.7;
  double n_dct = 8.0;
  double l_t = 13.45;  // cd/m^2
  double s0 = 94.7;
  double alpha_t = 0.649;
  double f0 = 6.78;  // cycles/degree
  double alpha_f = 0.182;
  double l_f = 300.0;  // cd/m^2
  double k0 = 3.125;
  double alpha_k = 0.0706;
  double l_k = 300.0;  // cd/m^2
};

/// An 8x8 matrix of per-band values indexed (k1, k2).
struct ThresholdMatrix {
  std::array<double, kBands> values{};

  double& at(std::size_t k1, std::size_t k2) {
    return values[band_index(k1, k2)];
  }
  double at(std::size_t k1, std::size_t k2) const {
    return values[band_index(k1, k2)];
  }
  double operator[](std::size_t k) const { return values[k]; }

  static ThresholdMatrix filled(double v) {
    ThresholdMatrix t;
    t.values.fill(v);
    return t;
  }

  friend bool operator==(const ThresholdMatrix&,
                         const ThresholdMatrix&) = default;
};

/// Low/high frequency gains blended by a sigmoid centred on f_c.
struct GainSchedule {
  double lambda_l = 0.0;
  double lambda_h = 3.0;
  double f_c = 4.0;  // cycles/degree

  void validate() const {
    if (!(std::isfinite(lambda_l) && std::isfinite(lambda_h) &&
          std::isfinite(f_c)))
      throw DomainError("gain schedule: non-finite parameter");
    if (lambda_l < 0.0 || lambda_h < 0.0)
      throw DomainError("gain schedule: gains must be non-negative");
    if (f_c < 0.0) throw DomainError("gain schedule: f_c must be >= 0");
  }
};

struct LuminanceParams {
  double t_min;
  double f_min;
  double k_param;
};

namespace detail {
inline void require_band(std::size_t k1, std::size_t k2) {
  if (k1 >= kBlock || k2 >= kBlock)
    throw DomainError("band index out of range [0, 8)");
}
}  // namespace detail

/// Radial frequency of band (k1, k2) in cycles/degree.
inline double radial_frequency(std::size_t k1, std::size_t k2,
                               const DisplayModel& disp,
                               const CsfConstants& c = {}) {
  detail::require_band(k1, k2);
  const double a = static_cast<double>(k1) / disp.w_x;
  const double b = static_cast<double>(k2) / disp.w_y;
  return std::sqrt(a * a + b * b) / (2.0 * c.n_dct);
}

/// Orientation angle of band (k1, k2). Undefined for the DC band.
inline double orientation(std::size_t k1, std::size_t k2,
                          const DisplayModel& disp,
                          const CsfConstants& c = {}) {
  detail::require_band(k1, k2);
  if (k1 == 0 && k2 == 0)
    throw DomainError("orientation: undefined for the DC band (0,0)");
  const double f = radial_frequency(k1, k2, disp, c);
  double ratio = 2.0 * radial_frequency(k1, 0, disp, c) *
                 radial_frequency(0, k2, disp, c) / (f * f);
  return std::asin(std::clamp(ratio, -1.0, 1.0));
}

/// Luminance-dependent T_min, f_min and K.
inline LuminanceParams luminance_params(double l, const CsfConstants& c = {}) {
  if (!(l > 0.0) || !std::isfinite(l))
    throw DomainError("luminance_params: luminance must be positive");
  LuminanceParams p{};
  p.t_min = l <= c.l_t ? std::pow(l / c.l_t, c.alpha_t) * c.l_t / c.s0
                       : l / c.s0;
  p.f_min = l <= c.l_f ? c.f0 * std::pow(l / c.l_f, c.alpha_f) : c.f0;
  p.k_param = l <= c.l_k ? c.k0 * std::pow(l / c.l_k, c.alpha_k) : c.k0;
  return p;
}

/// Luminance of the median code value (128) on the display.
inline double median_luminance(const DisplayModel& disp) {
  return disp.l_min + 128.0 * (disp.l_max - disp.l_min) / disp.m;
}

/// Contrast threshold T(k1, k2) at background luminance l.
inline double contrast_sensitivity(std::size_t k1, std::size_t k2, double l,
                                   const DisplayModel& disp,
                                   const CsfConstants& c = {}) {
  if (k1 == 0 && k2 == 0)
    throw DomainError(
        "contrast_sensitivity: the DC band has no model value; see "
        "jnd_matrix");
  const LuminanceParams p = luminance_params(l, c);
  const double theta = orientation(k1, k2, disp, c);
  const double f = radial_frequency(k1, k2, disp, c);
  const double cos_t = std::cos(theta);
  const double log_t =
      std::log10(p.t_min / (c.r + (1.0 - c.r) * cos_t * cos_t)) +
      p.k_param * std::pow(std::log10(f) - std::log10(p.f_min), 2.0);
  return std::pow(10.0, log_t);
}

/// JND amplitude thresholds t_DCT in code values for each band.
inline ThresholdMatrix jnd_matrix(const DisplayModel& disp = {},
                                  const CsfConstants& c = {}) {
  disp.validate();
  const double l = median_luminance(disp);
  ThresholdMatrix out;
  for (std::size_t k1 = 0; k1 < kBlock; ++k1)
    for (std::size_t k2 = 0; k2 < kBlock; ++k2) {
      double t = (k1 == 0 && k2 == 0)
                     ? std::min(contrast_sensitivity(0, 1, l, disp, c),
                                contrast_sensitivity(1, 0, l, disp, c))
                     : contrast_sensitivity(k1, k2, l, disp, c);
      out.at(k1, k2) = disp.m * t /
                       (2.0 * dct_norm(k1) * dct_norm(k2) *
                        (disp.l_max - disp.l_min));
    }
  return out;
}

/// Logistic S(f) = 1 / (1 + exp(-(f - f_c))).
inline double shifted_sigmoid(double f, double f_c) {
  return 1.0 / (1.0 + std::exp(-(f - f_c)));
}

/// Per-band gain lambda(k1, k2).
inline ThresholdMatrix gain_matrix(const GainSchedule& g,
                                   const DisplayModel& disp = {},
                                   const CsfConstants& c = {}) {
  g.validate();
  ThresholdMatrix out;
  for (std::size_t k1 = 0; k1 < kBlock; ++k1)
    for (std::size_t k2 = 0; k2 < kBlock; ++k2) {
      const double s = shifted_sigmoid(radial_frequency(k1, k2, disp, c), g.f_c);
      out.at(k1, k2) = g.lambda_l * (1.0 - s) + g.lambda_h * s;
    }
  return out;
}

/// Final per-band bounds: gain times JND threshold.
inline ThresholdMatrix effective_thresholds(const GainSchedule& g,
                                            const DisplayModel& disp = {},
                                            const CsfConstants& c = {}) {
  const ThresholdMatrix lambda = gain_matrix(g, disp, c);
  const ThresholdMatrix t = jnd_matrix(disp, c);
  ThresholdMatrix out;
  for (std::size_t k = 0; k < kBands; ++k) out.values[k] = lambda[k] * t[k];
  return out;
}

/// Named gain presets, one per texture dataset the schedule was tuned on.
/// The `_resnet` variants are the overrides used for ResNet backbones.
struct GainPreset {
  std::string_view name;
  GainSchedule schedule;
};

inline constexpr std::array<GainPreset, 9> kGainPresets{{
    {"minc", {0.0, 3.0, 4.0}},
    {"gtos", {1.0, 3.0, 4.0}},
    {"dtd", {0.0, 1.5, 4.0}},
    {"4dlf", {0.0, 2.5, 4.0}},
    {"fmd", {0.0, 2.5, 4.0}},
    {"kth", {0.0, 2.0, 4.0}},
    {"dtd_resnet", {0.0, 2.0, 4.0}},
    {"4dlf_resnet", {0.0, 3.0, 4.0}},
    {"kth_resnet", {1.0, 3.0, 4.0}},
}};

inline std::optional<GainSchedule> find_preset(std::string_view name) {
  std::string lower(name);
  for (char& ch : lower) ch = static_cast<char>(std::tolower(ch));
  for (const auto& p : kGainPresets)
    if (p.name == lower) return p.schedule;
  return std::nullopt;
}

/// 8 rows of 8 comma-separated values with the given fraction digits.
inline std::string format_matrix(const ThresholdMatrix& t, int digits,
                                 std::string_view sep) {
  std::string out;
  char buf[64];
  for (std::size_t k1 = 0; k1 < kBlock; ++k1) {
    for (std::size_t k2 = 0; k2 < kBlock; ++k2) {
      if (k2 > 0) out += sep;
      std::snprintf(buf, sizeof buf, "%.*f", digits, t.at(k1, k2));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline std::string to_csv(const ThresholdMatrix& t) {
  return format_matrix(t, 4, ",");
}

}  // namespace freqtune
