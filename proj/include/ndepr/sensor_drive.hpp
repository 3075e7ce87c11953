#pragma once

// NV sensor, microwave drive models, point-dipole geometry and Rabi
// simulation. All frequencies are ordinary frequencies in MHz, fields in mT,
// times in microseconds.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ndepr/bessel.hpp"
#include "ndepr/error.hpp"

namespace ndepr {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// |gamma_NV| = 28.03 GHz/T = 28.03 MHz/mT. The physical sign is negative.
inline constexpr double kNvGammaMhzPerMt = 28.03;
inline constexpr int kNvGammaSign = -1;
inline constexpr double kNvZeroFieldSplittingMhz = 2870.0;

struct SensorModel {
  double d_zfs = kNvZeroFieldSplittingMhz;  // MHz
  double gamma = kNvGammaMhzPerMt;          // MHz/mT, magnitude
  double gamma1 = 0.0;                      // MHz, intrinsic 1/T1
  double gamma2_nv = 12.0;                  // MHz

  void validate() const {
    if (!(d_zfs > 0.0)) throw InvalidInput("sensor: d_zfs must be positive");
    if (!(gamma1 >= 0.0)) throw InvalidInput("sensor: gamma1 must be non-negative");
    if (!(gamma2_nv > 0.0)) throw InvalidInput("sensor: gamma2_nv must be positive");
  }
};

enum class DriveMode { kDirect, kAmplitudeModulated };

inline std::string to_string(DriveMode m) {
  return m == DriveMode::kDirect ? "direct" : "amplitude_modulated";
}

/// B1 is rescaled with f so that kappa = kappa_nominal * sin(theta); the
/// nominal value is the one seen by an NV with its axis perpendicular to B1.
struct FixedKappa {
  double kappa = 0.5;
};
/// B1 is held constant; kappa = |gamma| B1 sin(theta) / f varies along the sweep.
struct FixedB1 {};
using KappaPolicy = std::variant<FixedKappa, FixedB1>;

inline std::string describe(const KappaPolicy& p) {
  if (const auto* fk = std::get_if<FixedKappa>(&p)) return "fixed_kappa(" + std::to_string(fk->kappa) + ")";
  return "fixed_b1";
}

/// Which dressed gap the direct-drive resonance condition uses.
enum class RabiConvention {
  kAsPrinted,  // |gamma| B1 sin(theta) = omega
  kHalfRabi,   // Omega / 2 = omega, the gap coupled by S_z in the spin-1 dressed frame
};

struct DriveConfig {
  DriveMode mode = DriveMode::kAmplitudeModulated;
  double b1 = 0.0;     // mT
  double f_mod = 0.0;  // MHz, AM only
  double theta = kPi / 2.0;
  KappaPolicy kappa_policy = FixedKappa{};
  RabiConvention convention = RabiConvention::kAsPrinted;

  void validate() const {
    if (!(theta >= 0.0 && theta <= kPi + 1e-12)) throw InvalidInput("drive: theta must lie in [0, pi]");
    if (!(b1 >= 0.0)) throw InvalidInput("drive: b1 must be non-negative");
    if (const auto* fk = std::get_if<FixedKappa>(&kappa_policy); fk && !(fk->kappa >= 0.0)) {
      throw InvalidInput("drive: kappa must be non-negative");
    }
  }
};

/// Omega = |gamma| B1 sin(theta), MHz.
inline double rabi_frequency(const SensorModel& sensor, const DriveConfig& drive) {
  return std::abs(sensor.gamma) * drive.b1 * std::sin(drive.theta);
}

/// Relative driving index Omega / f.
inline double kappa(double omega_rabi, double f_mod) {
  if (!(f_mod > 0.0)) throw InvalidInput("kappa: modulation frequency must be positive");
  return omega_rabi / f_mod;
}

/// Sweep value at which a target line of frequency omega comes into resonance.
struct ResonanceLocus {
  enum class Variable { kModulationFrequencyMhz, kDriveAmplitudeMt };
  Variable variable = Variable::kModulationFrequencyMhz;
  bool reachable = true;
  double value = 0.0;
};

inline ResonanceLocus resonance_locus(DriveMode mode, const SensorModel& sensor, double target_omega,
                                      double theta, RabiConvention convention = RabiConvention::kAsPrinted) {
  if (!(target_omega > 0.0)) throw InvalidInput("resonance_locus: target frequency must be positive");
  if (mode == DriveMode::kAmplitudeModulated) {
    return {ResonanceLocus::Variable::kModulationFrequencyMhz, true, target_omega};
  }
  const double s = std::sin(theta);
  if (std::abs(s) < 1e-12) return {ResonanceLocus::Variable::kDriveAmplitudeMt, false, INFINITY};
  const double factor = convention == RabiConvention::kHalfRabi ? 2.0 : 1.0;
  return {ResonanceLocus::Variable::kDriveAmplitudeMt, true,
          factor * target_omega / (std::abs(sensor.gamma) * std::abs(s))};
}

/// Amplitude 2 J_m(kappa/2) of the m-th odd Floquet sideband of the
/// toggling-frame dipolar coupling.
inline double effective_coupling(int m, double kappa_value) {
  if (m <= 0 || m % 2 == 0) {
    throw InvalidInput("effective_coupling: sideband order must be odd and positive, got " + std::to_string(m));
  }
  return 2.0 * bessel_j(m, kappa_value / 2.0);
}

/// Real symmetric 3x3 coupling tensor in MHz, sensor frame (z = N-V axis).
struct DipolarTensor {
  std::array<std::array<double, 3>, 3> d{};

  double trace() const { return d[0][0] + d[1][1] + d[2][2]; }
  double zx() const { return d[2][0]; }
  double zy() const { return d[2][1]; }
  double zz() const { return d[2][2]; }
};

/// mu0 h / (4 pi) * gamma_a gamma_b in MHz nm^3 for gyromagnetic ratios
/// given in MHz/mT (~52.04 for two free electrons).
inline double dipolar_prefactor_mhz_nm3(double gamma_a, double gamma_b) {
  constexpr double kMu0Over4Pi = 1e-7;      // T m / A
  constexpr double kPlanck = 6.62607015e-34;  // J s
  // (MHz/mT -> Hz/T) twice, nm^-3 -> m^-3, Hz -> MHz.
  return kMu0Over4Pi * kPlanck * (gamma_a * 1e9) * (gamma_b * 1e9) * 1e27 * 1e-6;
}

inline DipolarTensor dipolar_tensor(const std::array<double, 3>& r_nm,
                                    double gamma_sensor = kNvGammaMhzPerMt,
                                    double gamma_target = kNvGammaMhzPerMt) {
  const double r = std::sqrt(r_nm[0] * r_nm[0] + r_nm[1] * r_nm[1] + r_nm[2] * r_nm[2]);
  if (!(r > 0.1)) {
    throw InvalidInput("dipolar_tensor: separation must exceed 0.1 nm for the point-dipole form");
  }
  const double p = dipolar_prefactor_mhz_nm3(std::abs(gamma_sensor), std::abs(gamma_target)) / (r * r * r);
  DipolarTensor t;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      t.d[i][j] = p * ((i == j ? 1.0 : 0.0) - 3.0 * (r_nm[i] / r) * (r_nm[j] / r));
  return t;
}

// ---------------------------------------------------------------------------
// Rabi oscillation of an NV ensemble with a spread of orientations.

struct OrientationWeight {
  double theta = kPi / 2.0;
  double weight = 1.0;
};

struct RabiOptions {
  double decay_time_us = INFINITY;  // exponential envelope time constant
  int zero_pad_factor = 1;          // DFT length = factor * samples
};

struct RabiResult {
  std::vector<double> times;            // us
  std::vector<double> signal;
  std::vector<double> fft_freqs;        // MHz, 0 .. Nyquist
  std::vector<double> fft_magnitude;
};

/// Plain DFT magnitude (rectangular window) of uniformly sampled data.
inline void dft_magnitude(const std::vector<double>& x, double dt, int pad,
                          std::vector<double>& freqs, std::vector<double>& mag) {
  const std::size_t n = x.size() * static_cast<std::size_t>(std::max(pad, 1));
  const std::size_t half = n / 2 + 1;
  freqs.assign(half, 0.0);
  mag.assign(half, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double ph = -kTwoPi * static_cast<double>((k * j) % n) / static_cast<double>(n);
      re += x[j] * std::cos(ph);
      im += x[j] * std::sin(ph);
    }
    freqs[k] = static_cast<double>(k) / (static_cast<double>(n) * dt);
    mag[k] = std::hypot(re, im) / static_cast<double>(x.size());
  }
}

/// signal(t) = sum_k w_k cos(2 pi Omega_k t) exp(-t / tau), normalized by the
/// total weight, plus its DFT magnitude spectrum.
inline RabiResult simulate_rabi(const SensorModel& sensor, const std::vector<OrientationWeight>& orientations,
                                double b1, const std::vector<double>& t_grid, const RabiOptions& options = {}) {
  if (t_grid.size() < 2) throw InvalidInput("simulate_rabi: time grid needs at least two samples");
  if (orientations.empty()) throw InvalidInput("simulate_rabi: no orientations given");
  double wsum = 0.0;
  for (const auto& o : orientations) {
    if (!(o.weight >= 0.0)) throw InvalidInput("simulate_rabi: weights must be non-negative");
    wsum += o.weight;
  }
  if (!(wsum > 0.0)) throw InvalidInput("simulate_rabi: weights must not all be zero");
  const double dt = t_grid[1] - t_grid[0];
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (std::abs((t_grid[i] - t_grid[i - 1]) - dt) > 1e-9 * std::max(1.0, std::abs(dt)) || !(dt > 0.0)) {
      throw InvalidInput("simulate_rabi: time grid must be uniform and increasing");
    }
  }

  RabiResult out;
  out.times = t_grid;
  out.signal.assign(t_grid.size(), 0.0);
  for (const auto& o : orientations) {
    const double omega = std::abs(sensor.gamma) * b1 * std::sin(o.theta);
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      out.signal[i] += o.weight / wsum * std::cos(kTwoPi * omega * t_grid[i]);
    }
  }
  if (std::isfinite(options.decay_time_us)) {
    for (std::size_t i = 0; i < t_grid.size(); ++i)
      out.signal[i] *= std::exp(-(t_grid[i] - t_grid[0]) / options.decay_time_us);
  }
  dft_magnitude(out.signal, dt, options.zero_pad_factor, out.fft_freqs, out.fft_magnitude);
  return out;
}

/// Frequencies of local maxima in a magnitude spectrum above `rel_threshold`
/// times the global maximum (DC bin excluded).
inline std::vector<double> spectral_peaks(const std::vector<double>& freqs, const std::vector<double>& mag,
                                          double rel_threshold = 0.3) {
  double top = 0.0;
  for (std::size_t k = 1; k < mag.size(); ++k) top = std::max(top, mag[k]);
  std::vector<double> peaks;
  for (std::size_t k = 1; k + 1 < mag.size(); ++k) {
    if (mag[k] > mag[k - 1] && mag[k] >= mag[k + 1] && mag[k] >= rel_threshold * top) peaks.push_back(freqs[k]);
  }
  return peaks;
}

}  // namespace ndepr
