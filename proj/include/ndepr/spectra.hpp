#pragma once

// Analytic signal model: drive-enabled cross-relaxation rate, the readout
// contrast, spectrum synthesis for both drive modes, orientation averaging
// over a tumbling sensor, and the target linewidth budget.
//
// Units: every rate and frequency is an ordinary frequency in MHz; the
// exponentials of the contrast use exp(-2 pi rate t) with t in microseconds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ndepr/bessel.hpp"
#include "ndepr/error.hpp"
#include "ndepr/parallel.hpp"
#include "ndepr/sensor_drive.hpp"
#include "ndepr/targets.hpp"

namespace ndepr {

/// Sensor-frame dipolar components that enter the rate, MHz.
struct Coupling {
  double d_zx = 0.0;
  double d_zy = 0.0;

  static Coupling from_tensor(const DipolarTensor& t) { return {t.zx(), t.zy()}; }
  double transverse_sq() const { return d_zx * d_zx + d_zy * d_zy; }
};

/// Gamma1' = (3 kappa^2 / 64) (d_zx^2 + d_zy^2) Gamma2 / (Gamma2^2 + (f - omega)^2)
inline double cross_relaxation_rate(double kappa_value, double d_zx, double d_zy, double gamma2, double f,
                                    double omega) {
  if (!(gamma2 > 0.0)) throw InvalidInput("cross_relaxation_rate: gamma2 must be positive");
  if (!(kappa_value >= 0.0)) throw InvalidInput("cross_relaxation_rate: kappa must be non-negative");
  const double det = f - omega;
  return 3.0 * kappa_value * kappa_value / 64.0 * (d_zx * d_zx + d_zy * d_zy) * gamma2 /
         (gamma2 * gamma2 + det * det);
}

/// Direct-drive counterpart: the same Lorentzian without the kappa/4
/// coupling reduction, centred where the dressed gap equals omega.
inline double direct_drive_rate(double d_zx, double d_zy, double gamma2, double dressed_gap, double omega) {
  if (!(gamma2 > 0.0)) throw InvalidInput("direct_drive_rate: gamma2 must be positive");
  const double det = dressed_gap - omega;
  return 0.75 * (d_zx * d_zx + d_zy * d_zy) * gamma2 / (gamma2 * gamma2 + det * det);
}

/// S = (2/3) exp(-2 pi Gamma1 t) (1 - exp(-2 pi Gamma1' t))
inline double signal_contrast(double gamma1, double gamma1p, double t_us) {
  if (!(t_us >= 0.0)) throw InvalidInput("signal_contrast: evolution time must be non-negative");
  return 2.0 / 3.0 * std::exp(-kTwoPi * gamma1 * t_us) * -std::expm1(-kTwoPi * gamma1p * t_us);
}

/// Inverse of signal_contrast for Gamma1' given S, Gamma1 and t.
inline double rate_from_contrast(double gamma1, double contrast, double t_us) {
  const double x = 1.5 * contrast * std::exp(kTwoPi * gamma1 * t_us);
  return -std::log1p(-x) / (kTwoPi * t_us);
}

enum class SweepVariable { kModFreqMhz, kB1mT };

inline std::string to_string(SweepVariable v) { return v == SweepVariable::kModFreqMhz ? "f_mhz" : "b1_mt"; }

struct SweepGrid {
  SweepVariable variable = SweepVariable::kModFreqMhz;
  std::vector<double> values;  // strictly increasing
};

/// Inclusive uniform grid start, start + step, ... <= stop.
inline SweepGrid make_sweep(SweepVariable var, double start, double stop, double step) {
  if (!(step > 0.0)) throw InvalidInput("sweep: step must be positive");
  if (!(start < stop)) throw InvalidInput("sweep: start must be below stop");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  SweepGrid g{var, std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) g.values[i] = start + static_cast<double>(i) * step;
  return g;
}

struct SpectrumPoint {
  double x = 0.0;
  double contrast = 0.0;
  double stderr_ = 0.0;
};

struct SpectrumMeta {
  DriveMode mode = DriveMode::kAmplitudeModulated;
  std::string kappa_policy;
  std::size_t averaging_count = 1;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

struct Spectrum {
  SweepVariable sweep_var = SweepVariable::kModFreqMhz;
  std::vector<SpectrumPoint> points;
  SpectrumMeta meta;

  std::vector<double> xs() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.x);
    return v;
  }
  std::vector<double> contrasts() const {
    std::vector<double> v;
    v.reserve(points.size());
    for (const auto& p : points) v.push_back(p.contrast);
    return v;
  }
};

/// Phenomenological extra line (e.g. the low-frequency P1 bump or the
/// drive artifact at D/2), added to the contrast in sweep units.
struct BackgroundLine {
  double center = 0.0;
  double hwhm = 1.0;
  double amplitude = 0.0;
};

struct SpectrumOptions {
  double t_evol_us = 10.0;
  /// Use the exact first-sideband amplitude 2 J_1(kappa/2) instead of kappa/2.
  bool bessel_coupling = false;
  IntensityPolicy intensity_policy = IntensityPolicy::kAllComponents;
  std::vector<BackgroundLine> backgrounds;
};

namespace detail {

struct ReducedLine {
  double omega;
  double scale_sq;
};

inline std::vector<ReducedLine> reduce_lines(const TargetSpectrumModel& targets, IntensityPolicy policy) {
  std::vector<ReducedLine> lines;
  lines.reserve(targets.transitions.size());
  for (const auto& t : targets.transitions) {
    const auto r = two_level_reduction(t, policy);
    lines.push_back({r.omega, r.coupling_scale * r.coupling_scale});
  }
  return lines;
}

inline void check_mode_matches(const DriveConfig& drive, SweepVariable var) {
  if (drive.mode == DriveMode::kAmplitudeModulated && var != SweepVariable::kModFreqMhz) {
    throw InvalidInput("amplitude-modulated spectra sweep the modulation frequency");
  }
  if (drive.mode == DriveMode::kDirect && var != SweepVariable::kB1mT) {
    throw InvalidInput("direct-drive spectra sweep the drive amplitude B1");
  }
}

/// Total Gamma1' at one sweep point for one orientation.
inline double total_rate(const SensorModel& sensor, const std::vector<ReducedLine>& lines, double gamma2,
                         const Coupling& c, const DriveConfig& drive, double x, const SpectrumOptions& opt) {
  const double s = std::abs(std::sin(drive.theta));
  double rate = 0.0;
  if (drive.mode == DriveMode::kAmplitudeModulated) {
    const double f = x;
    double k = 0.0;
    if (const auto* fk = std::get_if<FixedKappa>(&drive.kappa_policy)) {
      k = fk->kappa * s;
    } else {
      k = std::abs(sensor.gamma) * drive.b1 * s / f;
    }
    // The rate prefactor expressed through the first-sideband amplitude a1:
    // 3 kappa^2 / 64 = (3/16) (kappa/2)^2.
    const double a1 = opt.bessel_coupling ? effective_coupling(1, k) : k / 2.0;
    const double kappa_equiv = 2.0 * a1;
    for (const auto& l : lines) {
      rate += l.scale_sq * cross_relaxation_rate(kappa_equiv, c.d_zx, c.d_zy, gamma2, f, l.omega);
    }
  } else {
    const double omega_rabi = std::abs(sensor.gamma) * x * s;
    const double gap = drive.convention == RabiConvention::kHalfRabi ? omega_rabi / 2.0 : omega_rabi;
    for (const auto& l : lines) rate += l.scale_sq * direct_drive_rate(c.d_zx, c.d_zy, gamma2, gap, l.omega);
  }
  return rate;
}

inline double background_at(const std::vector<BackgroundLine>& bg, double x) {
  double v = 0.0;
  for (const auto& b : bg) {
    const double w2 = b.hwhm * b.hwhm;
    v += b.amplitude * w2 / (w2 + (x - b.center) * (x - b.center));
  }
  return v;
}

inline bool direct_axial(const DriveConfig& drive) {
  return drive.mode == DriveMode::kDirect && std::abs(std::sin(drive.theta)) < 1e-12;
}

}  // namespace detail

/// Contrast versus sweep value for a single sensor orientation. Rates of all
/// transitions add before the contrast is formed.
inline Spectrum synthesize_spectrum(const SensorModel& sensor, const TargetSpectrumModel& targets,
                                    const Coupling& coupling, const DriveConfig& drive, const SweepGrid& grid,
                                    const SpectrumOptions& options) {
  sensor.validate();
  drive.validate();
  if (grid.values.empty()) throw InvalidInput("synthesize_spectrum: sweep grid is empty");
  detail::check_mode_matches(drive, grid.variable);
  const auto lines = detail::reduce_lines(targets, options.intensity_policy);
  const double gamma2 = sensor.gamma2_nv + targets.gamma2_target;

  Spectrum spec;
  spec.sweep_var = grid.variable;
  spec.meta.mode = drive.mode;
  spec.meta.kappa_policy = drive.mode == DriveMode::kDirect ? "n/a" : describe(drive.kappa_policy);
  spec.points.reserve(grid.values.size());
  const bool axial = detail::direct_axial(drive);
  if (axial) {
    spec.meta.warnings.push_back("direct drive along the N-V axis (sin(theta) = 0): no resonance reachable");
  }
  for (double x : grid.values) {
    double c = 0.0;
    if (!axial) {
      const double rate = detail::total_rate(sensor, lines, gamma2, coupling, drive, x, options);
      c = signal_contrast(sensor.gamma1, rate, options.t_evol_us);
    }
    c += detail::background_at(options.backgrounds, x);
    spec.points.push_back({x, c, 0.0});
  }
  return spec;
}

/// Mean spectrum over the given sensor orientations (the template's theta is
/// replaced by each entry). Work is split into fixed blocks and reduced in
/// block order with compensated sums, so results do not depend on `threads`.
inline Spectrum average_over_orientations(const SensorModel& sensor, const TargetSpectrumModel& targets,
                                          const Coupling& coupling, const DriveConfig& drive_template,
                                          const SweepGrid& grid, const SpectrumOptions& options,
                                          std::span<const double> thetas, std::size_t threads = 1) {
  sensor.validate();
  drive_template.validate();
  if (grid.values.empty()) throw InvalidInput("orientation average: sweep grid is empty");
  if (thetas.empty()) throw InvalidInput("orientation average: need at least one orientation");
  detail::check_mode_matches(drive_template, grid.variable);
  const auto lines = detail::reduce_lines(targets, options.intensity_policy);
  const double gamma2 = sensor.gamma2_nv + targets.gamma2_target;
  const std::size_t nx = grid.values.size();
  constexpr std::size_t kBlock = 128;
  const std::size_t n = thetas.size();
  const std::size_t n_blocks = (n + kBlock - 1) / kBlock;

  std::vector<std::vector<double>> block_sum(n_blocks), block_sumsq(n_blocks);
  std::vector<std::size_t> block_axial(n_blocks, 0);
  parallel_for(n_blocks, threads, [&](std::size_t b) {
    std::vector<CompensatedSum> s(nx), s2(nx);
    DriveConfig drive = drive_template;
    for (std::size_t i = b * kBlock; i < std::min(n, (b + 1) * kBlock); ++i) {
      drive.theta = thetas[i];
      const bool axial = detail::direct_axial(drive);
      if (axial) ++block_axial[b];
      for (std::size_t j = 0; j < nx; ++j) {
        const double x = grid.values[j];
        double c = 0.0;
        if (!axial) {
          c = signal_contrast(sensor.gamma1,
                              detail::total_rate(sensor, lines, gamma2, coupling, drive, x, options),
                              options.t_evol_us);
        }
        s[j].add(c);
        s2[j].add(c * c);
      }
    }
    block_sum[b].resize(nx);
    block_sumsq[b].resize(nx);
    for (std::size_t j = 0; j < nx; ++j) {
      block_sum[b][j] = s[j].value();
      block_sumsq[b][j] = s2[j].value();
    }
  });

  Spectrum spec;
  spec.sweep_var = grid.variable;
  spec.meta.mode = drive_template.mode;
  spec.meta.kappa_policy = drive_template.mode == DriveMode::kDirect ? "n/a" : describe(drive_template.kappa_policy);
  spec.meta.averaging_count = n;
  std::size_t axial_total = 0;
  for (auto a : block_axial) axial_total += a;
  if (axial_total > 0) {
    spec.meta.warnings.push_back(std::to_string(axial_total) +
                                 " orientation(s) had the drive along the N-V axis and contribute zero");
  }
  const double nn = static_cast<double>(n);
  for (std::size_t j = 0; j < nx; ++j) {
    CompensatedSum s, s2;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      s.add(block_sum[b][j]);
      s2.add(block_sumsq[b][j]);
    }
    const double mean = s.value() / nn;
    double se = 0.0;
    if (n > 1) {
      const double var = std::max(0.0, (s2.value() - nn * mean * mean) / (nn - 1.0));
      se = std::sqrt(var / nn);
    }
    const double x = grid.values[j];
    spec.points.push_back({x, mean + detail::background_at(options.backgrounds, x), se});
  }
  return spec;
}

/// Polar angles of uniformly random axes (density sin(theta)/2 on [0, pi]),
/// one independent stream per sample.
inline std::vector<double> sample_orientations(std::size_t n_samples, std::uint64_t seed) {
  std::vector<double> thetas(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    SampleStream rng(seed, i);
    thetas[i] = std::acos(1.0 - 2.0 * rng.uniform());
  }
  return thetas;
}

/// Monte-Carlo powder average over random sensor orientations.
inline Spectrum orientation_average(const SensorModel& sensor, const TargetSpectrumModel& targets,
                                    const Coupling& coupling, const DriveConfig& drive_template,
                                    const SweepGrid& grid, const SpectrumOptions& options, std::size_t n_samples,
                                    std::uint64_t seed, std::size_t threads = 1) {
  if (n_samples < 1) throw InvalidInput("orientation_average: n_samples must be at least 1");
  const auto thetas = sample_orientations(n_samples, seed);
  Spectrum spec =
      average_over_orientations(sensor, targets, coupling, drive_template, grid, options, thetas, threads);
  spec.meta.seed = seed;
  return spec;
}

// ---------------------------------------------------------------------------
// Linewidth contributions.

inline constexpr double kBoltzmann = 1.380649e-23;       // J/K
inline constexpr double kDipolarBroadeningMhzPerMolar = 272.0;

/// k_B T / (8 pi r^3 eta), returned as an ordinary frequency (s^-1 / 2 pi) in MHz.
inline double rotational_diffusion_rate(double temp_k, double radius_nm, double viscosity_pa_s) {
  if (!(temp_k > 0.0 && radius_nm > 0.0 && viscosity_pa_s > 0.0)) {
    throw InvalidInput("rotational_diffusion_rate: inputs must be positive");
  }
  const double r = radius_nm * 1e-9;
  const double per_second = kBoltzmann * temp_k / (8.0 * kPi * r * r * r * viscosity_pa_s);
  return per_second / kTwoPi / 1e6;
}

/// Ion-ion dipolar broadening, 272 MHz per mol/L.
inline double dipolar_broadening(double concentration_m) {
  if (!(concentration_m >= 0.0)) throw InvalidInput("dipolar_broadening: concentration must be non-negative");
  return kDipolarBroadeningMhzPerMolar * concentration_m;
}

struct LinewidthBudget {
  double gamma2_nv = 0.0;
  double r_int = 0.0;
  double r_dip = 0.0;
  double r_rot = 0.0;
  double r_trans = 0.0;  // translational diffusion, ~kHz in viscous solvent
  double fwhm = 0.0;

  double gamma2_total() const { return gamma2_nv + r_int + r_dip + r_rot + r_trans; }
};

/// FWHM = 2 (Gamma2_NV + R_int + R_dip + R_rot + R_trans).
inline LinewidthBudget linewidth_budget(double gamma2_nv, double r_int, double r_dip, double r_rot,
                                        double r_trans = 0.0) {
  for (double v : {gamma2_nv, r_int, r_dip, r_rot, r_trans}) {
    if (!(v >= 0.0)) throw InvalidInput("linewidth_budget: component rates must be non-negative");
  }
  LinewidthBudget b{gamma2_nv, r_int, r_dip, r_rot, r_trans, 0.0};
  b.fwhm = 2.0 * b.gamma2_total();
  return b;
}

// ---------------------------------------------------------------------------
// Line-shape measurements on sampled spectra.

/// Sweep value of the largest contrast (first one on ties).
inline double argmax_x(const Spectrum& s) {
  if (s.points.empty()) throw InvalidInput("argmax_x: empty spectrum");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.points.size(); ++i)
    if (s.points[i].contrast > s.points[best].contrast) best = i;
  return s.points[best].x;
}

/// Contrast-weighted third standardized moment inside the largest window
/// centred on the maximum that fits in the sweep, so that edge truncation
/// cannot fake an asymmetry.
inline double peak_skewness(const Spectrum& s) {
  const double peak = argmax_x(s);
  const double half = std::min(peak - s.points.front().x, s.points.back().x - peak);
  CompensatedSum w, m1;
  for (const auto& p : s.points) {
    if (std::abs(p.x - peak) > half + 1e-12) continue;
    w.add(p.contrast);
    m1.add(p.contrast * p.x);
  }
  if (!(w.value() > 0.0)) return 0.0;
  const double mean = m1.value() / w.value();
  CompensatedSum m2, m3;
  for (const auto& p : s.points) {
    if (std::abs(p.x - peak) > half + 1e-12) continue;
    const double d = p.x - mean;
    m2.add(p.contrast * d * d);
    m3.add(p.contrast * d * d * d);
  }
  const double var = m2.value() / w.value();
  if (!(var > 0.0)) return 0.0;
  return (m3.value() / w.value()) / std::pow(var, 1.5);
}

/// Full width at half maximum around the global maximum, by linear
/// interpolation between samples. NaN if a half-maximum crossing is missing.
inline double measured_fwhm(const Spectrum& s) {
  if (s.points.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  std::size_t i_max = 0;
  for (std::size_t i = 1; i < s.points.size(); ++i)
    if (s.points[i].contrast > s.points[i_max].contrast) i_max = i;
  const double half = s.points[i_max].contrast / 2.0;
  double left = std::numeric_limits<double>::quiet_NaN(), right = left;
  for (std::size_t i = i_max; i > 0; --i) {
    const auto &a = s.points[i - 1], &b = s.points[i];
    if (a.contrast <= half) {
      left = a.x + (half - a.contrast) * (b.x - a.x) / (b.contrast - a.contrast);
      break;
    }
  }
  for (std::size_t i = i_max; i + 1 < s.points.size(); ++i) {
    const auto &a = s.points[i], &b = s.points[i + 1];
    if (b.contrast <= half) {
      right = a.x + (a.contrast - half) * (b.x - a.x) / (a.contrast - b.contrast);
      break;
    }
  }
  return right - left;
}

}  // namespace ndepr
