#pragma once

// Multi-Lorentzian spectral fitting with a linear baseline, and the
// hyperfine-constrained variant whose centres are functions of (A_perp, A_par).

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ndepr/error.hpp"
#include "ndepr/least_squares.hpp"
#include "ndepr/parallel.hpp"
#include "ndepr/spectra.hpp"
#include "ndepr/targets.hpp"

namespace ndepr {

struct LorentzianModel {
  std::vector<double> centers;     // MHz
  std::vector<double> widths;      // HWHM, MHz
  std::vector<double> amplitudes;  // contrast
  double baseline_offset = 0.0;
  double baseline_slope = 0.0;  // per MHz

  std::size_t n_peaks() const { return centers.size(); }

  void validate() const {
    if (centers.empty()) throw InvalidInput("LorentzianModel: need at least one peak");
    if (widths.size() != centers.size() || amplitudes.size() != centers.size()) {
      throw InvalidInput("LorentzianModel: centers, widths and amplitudes differ in length");
    }
    for (double w : widths)
      if (!(w > 0.0)) throw InvalidInput("LorentzianModel: widths must be positive");
  }

  // Packed order: (center, width, amplitude) per peak, then offset, slope.
  std::vector<double> pack() const {
    std::vector<double> p;
    for (std::size_t k = 0; k < n_peaks(); ++k) {
      p.push_back(centers[k]);
      p.push_back(widths[k]);
      p.push_back(amplitudes[k]);
    }
    p.push_back(baseline_offset);
    p.push_back(baseline_slope);
    return p;
  }

  static LorentzianModel unpack(const std::vector<double>& p) {
    if (p.size() < 5 || (p.size() - 2) % 3 != 0) throw InvalidInput("LorentzianModel::unpack: bad length");
    LorentzianModel m;
    const std::size_t n = (p.size() - 2) / 3;
    for (std::size_t k = 0; k < n; ++k) {
      m.centers.push_back(p[3 * k]);
      m.widths.push_back(p[3 * k + 1]);
      m.amplitudes.push_back(p[3 * k + 2]);
    }
    m.baseline_offset = p[3 * n];
    m.baseline_slope = p[3 * n + 1];
    return m;
  }
};

inline double lorentz_eval(const LorentzianModel& m, double x) {
  double v = m.baseline_offset + m.baseline_slope * x;
  for (std::size_t k = 0; k < m.n_peaks(); ++k) {
    const double w2 = m.widths[k] * m.widths[k];
    const double d = x - m.centers[k];
    v += m.amplitudes[k] * w2 / (w2 + d * d);
  }
  return v;
}

/// Partial derivatives in LorentzianModel::pack() order.
inline std::vector<double> lorentz_gradient(const LorentzianModel& m, double x) {
  std::vector<double> g;
  g.reserve(3 * m.n_peaks() + 2);
  for (std::size_t k = 0; k < m.n_peaks(); ++k) {
    const double w = m.widths[k], a = m.amplitudes[k];
    const double d = x - m.centers[k];
    const double den = w * w + d * d;
    const double shape = w * w / den;
    g.push_back(a * 2.0 * w * w * d / (den * den));    // d/dc
    g.push_back(a * 2.0 * w * d * d / (den * den));    // d/dw
    g.push_back(shape);                                // d/da
  }
  g.push_back(1.0);
  g.push_back(x);
  return g;
}

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<double> errors;      // 1-sigma, sqrt of covariance diagonal
  std::vector<double> covariance;  // row-major; empty if unavailable
  std::vector<double> residuals;   // data - model, same order as the data
  std::vector<double> cost_history;
  double residual_norm = 0.0;
  bool converged = false;
  int n_iter = 0;
  std::string message;

  std::size_t index(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    throw InvalidInput("FitResult: no parameter named '" + name + "'");
  }
  double value(const std::string& name) const { return values[index(name)]; }
  double error(const std::string& name) const { return errors[index(name)]; }
};

struct FitBounds {
  std::vector<double> lower;  // pack() order, MHz; empty = centres inside the sweep, widths in [dx/2, span]
  std::vector<double> upper;
};

namespace detail {

inline bool flat_data(const Spectrum& data) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : data.points) {
    lo = std::min(lo, p.contrast);
    hi = std::max(hi, p.contrast);
  }
  return !(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)));
}

inline void fill_errors(FitResult& fr) {
  const std::size_t n = fr.values.size();
  fr.errors.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (fr.covariance.size() == n * n)
    for (std::size_t i = 0; i < n; ++i) fr.errors[i] = std::sqrt(std::max(0.0, fr.covariance[i * n + i]));
}

}  // namespace detail

inline std::vector<std::string> lorentz_param_names(std::size_t n_peaks) {
  std::vector<std::string> names;
  for (std::size_t k = 1; k <= n_peaks; ++k) {
    names.push_back("center" + std::to_string(k) + "_mhz");
    names.push_back("hwhm" + std::to_string(k) + "_mhz");
    names.push_back("amp" + std::to_string(k));
  }
  names.push_back("baseline_offset");
  names.push_back("baseline_slope_per_mhz");
  return names;
}

inline FitResult fit_free(const Spectrum& data, const LorentzianModel& init, const FitBounds& bounds = {},
                          const LsqOptions& options = {}) {
  init.validate();
  const std::size_t np = 3 * init.n_peaks() + 2;
  if (data.points.size() < np) {
    throw InvalidInput("fit_free: need at least " + std::to_string(np) + " data points, got " +
                       std::to_string(data.points.size()));
  }
  FitResult fr;
  fr.names = lorentz_param_names(init.n_peaks());
  if (detail::flat_data(data)) {
    fr.values = init.pack();
    detail::fill_errors(fr);
    fr.message = "data carry no signal (constant); nothing to fit";
    return fr;
  }

  // Widths are fitted as log(HWHM), so no step can drive one through zero.
  // Default box: centres inside the sweep, widths between half the finest
  // sample spacing and the sweep span.
  const double x_lo = data.points.front().x, x_hi = data.points.back().x;
  double min_dx = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < data.points.size(); ++i)
    min_dx = std::min(min_dx, std::abs(data.points[i].x - data.points[i - 1].x));
  auto is_width = [](std::size_t j, std::size_t n_peak_params) { return j < n_peak_params && j % 3 == 1; };
  const std::size_t npp = 3 * init.n_peaks();
  std::vector<double> lo = bounds.lower, hi = bounds.upper;
  if (lo.empty()) {
    lo.assign(np, -std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < init.n_peaks(); ++k) {
      lo[3 * k] = x_lo;
      lo[3 * k + 1] = 0.5 * min_dx;
    }
  }
  if (hi.empty()) {
    hi.assign(np, std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < init.n_peaks(); ++k) {
      hi[3 * k] = x_hi;
      hi[3 * k + 1] = x_hi - x_lo;
    }
  }
  if (lo.size() != np || hi.size() != np) throw InvalidInput("fit_free: bounds must have one entry per parameter");
  LsqProblem prob;
  prob.n_params = np;
  prob.n_residuals = data.points.size();
  prob.lower = lo;
  prob.upper = hi;
  std::vector<double> p0 = init.pack();
  for (std::size_t j = 0; j < np; ++j) {
    if (!is_width(j, npp)) continue;
    prob.lower[j] = lo[j] > 0.0 ? std::log(lo[j]) : -std::numeric_limits<double>::infinity();
    prob.upper[j] = std::log(hi[j]);
    p0[j] = std::log(p0[j]);
  }
  auto to_model = [&](const std::vector<double>& p) {
    std::vector<double> q = p;
    for (std::size_t j = 0; j < npp; j += 3) q[j + 1] = std::exp(p[j + 1]);
    return q;
  };
  prob.eval = [&](const std::vector<double>& p, std::vector<double>& r, std::vector<double>* jac) {
    const auto q = to_model(p);
    const auto m = LorentzianModel::unpack(q);
    for (std::size_t i = 0; i < data.points.size(); ++i) {
      const double x = data.points[i].x;
      r[i] = lorentz_eval(m, x) - data.points[i].contrast;
      if (jac) {
        const auto g = lorentz_gradient(m, x);
        for (std::size_t j = 0; j < np; ++j) (*jac)[i * np + j] = is_width(j, npp) ? g[j] * q[j] : g[j];
      }
    }
  };
  const auto res = levenberg_marquardt(prob, p0, options);
  fr.values = to_model(res.params);
  if (!res.covariance.empty()) {
    fr.covariance = res.covariance;
    for (std::size_t a = 0; a < np; ++a)
      for (std::size_t b = 0; b < np; ++b) {
        const double sa = is_width(a, npp) ? fr.values[a] : 1.0, sb = is_width(b, npp) ? fr.values[b] : 1.0;
        fr.covariance[a * np + b] *= sa * sb;
      }
  }
  fr.cost_history = res.cost_history;
  fr.residual_norm = std::sqrt(res.cost);
  fr.converged = res.converged;
  fr.n_iter = res.n_iter;
  fr.message = res.message;
  fr.residuals.resize(res.residuals.size());
  for (std::size_t i = 0; i < res.residuals.size(); ++i) fr.residuals[i] = -res.residuals[i];
  detail::fill_errors(fr);
  return fr;
}

/// Runs fit_free from `init` and from n_starts - 1 seeded perturbations whose
/// centres move by up to +-spread_widths HWHM; keeps the lowest-cost result,
/// preferring converged fits.
inline FitResult fit_free_multistart(const Spectrum& data, const LorentzianModel& init, std::size_t n_starts,
                                     std::uint64_t seed, double spread_widths = 3.0, const FitBounds& bounds = {},
                                     const LsqOptions& options = {}) {
  if (n_starts < 1) throw InvalidInput("fit_free_multistart: n_starts must be at least 1");
  FitResult best = fit_free(data, init, bounds, options);
  for (std::size_t s = 1; s < n_starts; ++s) {
    SampleStream rng(seed, s);
    LorentzianModel start = init;
    for (std::size_t k = 0; k < start.n_peaks(); ++k)
      start.centers[k] += (2.0 * rng.uniform() - 1.0) * spread_widths * start.widths[k];
    FitResult fr = fit_free(data, start, bounds, options);
    const bool better = (fr.converged && !best.converged) ||
                        (fr.converged == best.converged && fr.residual_norm < best.residual_norm);
    if (better) best = std::move(fr);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hyperfine-constrained fit.

enum class WidthPolicy { kPerPeak, kShared };

struct HyperfineFitOptions {
  std::vector<HyperfinePeak> peaks = {HyperfinePeak::kPeak1, HyperfinePeak::kPeak2, HyperfinePeak::kPeak10};
  WidthPolicy width_policy = WidthPolicy::kPerPeak;
  double init_hwhm = 30.0;  // MHz
  LsqOptions lsq;
};

/// Model evaluation shared by the fit and by synthetic-data generation.
inline LorentzianModel hyperfine_lorentzians(double a_perp, double a_par, const std::vector<HyperfinePeak>& peaks,
                                             const std::vector<double>& hwhm, const std::vector<double>& amps,
                                             double offset = 0.0, double slope = 0.0) {
  if (hwhm.size() != peaks.size() || amps.size() != peaks.size()) {
    throw InvalidInput("hyperfine_lorentzians: one width and amplitude per peak required");
  }
  LorentzianModel m;
  for (std::size_t k = 0; k < peaks.size(); ++k) m.centers.push_back(vanadyl_peak_center(peaks[k], a_perp, a_par));
  m.widths = hwhm;
  m.amplitudes = amps;
  m.baseline_offset = offset;
  m.baseline_slope = slope;
  return m;
}

namespace detail {

inline constexpr double kMinHwhm = 0.05;  // MHz; keeps log-widths finite

/// One LM solve of the hyperfine model. Parameter layout: log A_perp,
/// log A_par, nw log widths, one amplitude per peak, offset, slope.
inline LsqResult hyperfine_solve(const Spectrum& data, const std::vector<HyperfinePeak>& peaks, std::size_t nw,
                                 const std::vector<double>& p0, const LsqOptions& lsq) {
  const std::size_t npk = peaks.size();
  const std::size_t np = 2 + nw + npk + 2;
  LsqProblem prob;
  prob.n_params = np;
  prob.n_residuals = data.points.size();
  prob.lower.assign(np, -std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < nw; ++k) prob.lower[2 + k] = std::log(kMinHwhm);
  prob.eval = [&](const std::vector<double>& p, std::vector<double>& r, std::vector<double>* jac) {
    const double ap = std::exp(p[0]), aa = std::exp(p[1]);
    for (std::size_t i = 0; i < data.points.size(); ++i) {
      const double x = data.points[i].x;
      double y = p[np - 2] + p[np - 1] * x;
      if (jac) std::fill(jac->begin() + i * np, jac->begin() + (i + 1) * np, 0.0);
      for (std::size_t k = 0; k < npk; ++k) {
        const double c = vanadyl_peak_center(peaks[k], ap, aa);
        const std::size_t wi = 2 + (nw == 1 ? 0 : k);
        const double w = std::exp(p[wi]);
        const double a = p[2 + nw + k];
        const double d = x - c, den = w * w + d * d;
        y += a * w * w / den;
        if (jac) {
          const double dy_dc = a * 2.0 * w * w * d / (den * den);
          const auto grad = vanadyl_peak_center_gradient(peaks[k], ap, aa);
          (*jac)[i * np + 0] += dy_dc * grad[0] * ap;
          (*jac)[i * np + 1] += dy_dc * grad[1] * aa;
          (*jac)[i * np + wi] += a * 2.0 * w * d * d / (den * den) * w;
          (*jac)[i * np + 2 + nw + k] = w * w / den;
        }
      }
      if (jac) {
        (*jac)[i * np + np - 2] = 1.0;
        (*jac)[i * np + np - 1] = x;
      }
      r[i] = y - data.points[i].contrast;
    }
  };
  return levenberg_marquardt(prob, p0, lsq);
}

}  // namespace detail

/// Fits (A_perp, A_par) with peak centres tied to the hyperfine formulas.
/// Internally A = exp(u) and HWHM = exp(v), so both stay positive; reported
/// values and 1-sigma errors are transformed back to MHz. With per-peak
/// widths a shared-width fit runs first and seeds the full one, which keeps
/// a narrow peak from collapsing when the starting constants are far off.
inline FitResult fit_hyperfine(const Spectrum& data, double init_a_perp, double init_a_par,
                               const HyperfineFitOptions& opt = {}) {
  if (!(init_a_perp > 0.0 && init_a_par > 0.0)) {
    throw InvalidInput("fit_hyperfine: initial hyperfine constants must be positive");
  }
  if (opt.peaks.empty()) throw InvalidInput("fit_hyperfine: peak subset is empty");
  if (!(opt.init_hwhm > 0.0)) throw InvalidInput("fit_hyperfine: initial width must be positive");
  const std::size_t npk = opt.peaks.size();
  const std::size_t nw = opt.width_policy == WidthPolicy::kShared ? 1 : npk;
  const std::size_t np = 2 + nw + npk + 2;
  if (data.points.size() < np) throw InvalidInput("fit_hyperfine: too few data points for the model");

  FitResult fr;
  fr.names = {"a_perp_mhz", "a_par_mhz"};
  if (nw == 1) {
    fr.names.push_back("hwhm_shared_mhz");
  } else {
    for (auto pk : opt.peaks) fr.names.push_back("hwhm_" + to_string(pk) + "_mhz");
  }
  for (auto pk : opt.peaks) fr.names.push_back("amp_" + to_string(pk));
  fr.names.push_back("baseline_offset");
  fr.names.push_back("baseline_slope_per_mhz");

  // Starting amplitudes: data height above the minimum at each predicted centre.
  double ymin = std::numeric_limits<double>::infinity();
  for (const auto& p : data.points) ymin = std::min(ymin, p.contrast);
  std::vector<double> shared0 = {std::log(init_a_perp), std::log(init_a_par), std::log(opt.init_hwhm)};
  for (auto pk : opt.peaks) {
    const double c = vanadyl_peak_center(pk, init_a_perp, init_a_par);
    std::size_t best = 0;
    for (std::size_t i = 1; i < data.points.size(); ++i)
      if (std::abs(data.points[i].x - c) < std::abs(data.points[best].x - c)) best = i;
    shared0.push_back(data.points[best].contrast - ymin);
  }
  shared0.push_back(ymin);
  shared0.push_back(0.0);

  if (detail::flat_data(data)) {
    fr.values.assign(np, 0.0);
    fr.values[0] = init_a_perp;
    fr.values[1] = init_a_par;
    for (std::size_t k = 0; k < nw; ++k) fr.values[2 + k] = opt.init_hwhm;
    fr.values[np - 2] = ymin;
    detail::fill_errors(fr);
    fr.message = "data carry no signal (constant); nothing to fit";
    return fr;
  }

  auto res = detail::hyperfine_solve(data, opt.peaks, 1, shared0, opt.lsq);
  if (nw > 1) {
    std::vector<double> p0 = {res.params[0], res.params[1]};
    for (std::size_t k = 0; k < nw; ++k) p0.push_back(res.params[2]);
    p0.insert(p0.end(), res.params.begin() + 3, res.params.end());
    res = detail::hyperfine_solve(data, opt.peaks, nw, p0, opt.lsq);
  }

  // Back-transform: d(value)/d(internal) is exp(u) for log parameters, else 1.
  std::vector<double> scale(np, 1.0);
  fr.values = res.params;
  for (std::size_t j = 0; j < 2 + nw; ++j) {
    fr.values[j] = std::exp(res.params[j]);
    scale[j] = fr.values[j];
  }
  if (!res.covariance.empty()) {
    fr.covariance.resize(np * np);
    for (std::size_t a = 0; a < np; ++a)
      for (std::size_t b = 0; b < np; ++b) fr.covariance[a * np + b] = scale[a] * scale[b] * res.covariance[a * np + b];
  }
  fr.cost_history = res.cost_history;
  fr.residual_norm = std::sqrt(res.cost);
  fr.converged = res.converged;
  fr.n_iter = res.n_iter;
  fr.message = res.message;
  fr.residuals.resize(res.residuals.size());
  for (std::size_t i = 0; i < res.residuals.size(); ++i) fr.residuals[i] = -res.residuals[i];
  detail::fill_errors(fr);
  return fr;
}

}  // namespace ndepr
