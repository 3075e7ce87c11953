#pragma once

// Time-domain master-equation integrator and the brute-force checks built on
// it: the cross-relaxation Lorentzian and the dressed-gap convention of the
// direct drive.
//
// d rho/dt = -i 2 pi [H(t), rho] + 2 pi sum_k r_k (L rho L^+ - {L^+ L, rho}/2)
// with H in MHz, rates in MHz and t in microseconds, so that a pure-dephasing
// coherence decays as exp(-2 pi r t).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ndepr/bessel.hpp"
#include "ndepr/error.hpp"
#include "ndepr/least_squares.hpp"
#include "ndepr/linalg.hpp"
#include "ndepr/parallel.hpp"
#include "ndepr/sensor_drive.hpp"
#include "ndepr/spectra.hpp"
#include "ndepr/spin.hpp"

namespace ndepr {

struct DriveTerm {
  ComplexMatrix op;
  std::function<double(double)> envelope;  // dimensionless, |envelope| <= max_amplitude
  double max_amplitude = 1.0;
  double max_frequency = 0.0;  // MHz, highest frequency present in the envelope
};

struct CollapseOp {
  ComplexMatrix op;
  double rate = 0.0;  // MHz
};

struct OpenSystem {
  ComplexMatrix h_static;
  std::vector<DriveTerm> drives;
  std::vector<CollapseOp> collapse_ops;
  ComplexMatrix rho0;

  void validate() const {
    const std::size_t n = h_static.dim();
    if (n == 0) throw InvalidInput("OpenSystem: empty Hamiltonian");
    if (rho0.dim() != n) throw InvalidInput("OpenSystem: rho0 dimension differs from H");
    if (hermiticity_residual(h_static) > 1e-10 * std::max(1.0, h_static.max_abs())) {
      throw InvalidInput("OpenSystem: static Hamiltonian is not Hermitian");
    }
    for (const auto& d : drives) {
      if (d.op.dim() != n) throw InvalidInput("OpenSystem: drive operator dimension mismatch");
      if (!d.envelope) throw InvalidInput("OpenSystem: drive term without envelope");
      if (hermiticity_residual(d.op) > 1e-10 * std::max(1.0, d.op.max_abs())) {
        throw InvalidInput("OpenSystem: drive operator is not Hermitian");
      }
    }
    for (const auto& c : collapse_ops) {
      if (c.op.dim() != n) throw InvalidInput("OpenSystem: collapse operator dimension mismatch");
      if (!(c.rate >= 0.0)) throw InvalidInput("OpenSystem: collapse rates must be non-negative");
    }
    if (std::abs(rho0.trace() - cplx(1.0, 0.0)) > 1e-10) throw InvalidInput("OpenSystem: trace(rho0) must be 1");
    const auto es = eigh(rho0);
    if (es.values.front() < -1e-10) throw InvalidInput("OpenSystem: rho0 is not positive semidefinite");
  }

  /// Upper bound on the fastest frequency in the dynamics, MHz.
  double fastest_frequency() const {
    auto spread = [](const ComplexMatrix& m) {
      const auto es = eigh(m);
      return es.values.back() - es.values.front();
    };
    double bohr = spread(h_static);
    double f = 0.0;
    for (const auto& d : drives) {
      bohr += std::abs(d.max_amplitude) * spread(d.op);
      f = std::max(f, d.max_frequency);
    }
    double rates = 0.0;
    for (const auto& c : collapse_ops) rates += c.rate * std::pow(c.op.frobenius_norm(), 2);
    return std::max({bohr, f, rates});
  }
};

struct Observable {
  std::string name;
  ComplexMatrix op;
};

struct Trajectory {
  std::vector<double> times;  // us
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;  // values[k][i] = <O_k>(t_i)
  double max_trace_error = 0.0;
  double max_hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
  ComplexMatrix final_rho;

  const std::vector<double>& trace(const std::string& name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return values[k];
    throw InvalidInput("Trajectory: no observable named '" + name + "'");
  }
};

struct EvolveOptions {
  std::size_t record_every = 1;  // record one point per this many steps
  bool check_positivity = true;
};

namespace detail {

/// Right-hand side with the anti-Hermitian collapse part folded into an
/// effective Hamiltonian: drho = -i (K rho - rho K^+) + sum_k M_k rho M_k^+.
class LindbladRhs {
 public:
  explicit LindbladRhs(const OpenSystem& sys) : sys_(sys), n_(sys.h_static.dim()) {
    const cplx mi(0.0, -1.0);
    k0_ = sys.h_static * kTwoPi;
    for (const auto& c : sys.collapse_ops) {
      if (c.rate == 0.0) continue;
      k0_ += (c.op.adjoint() * c.op) * (mi * 0.5 * kTwoPi * c.rate);
      jumps_.push_back(c.op * std::sqrt(kTwoPi * c.rate));
      jumps_adj_.push_back(jumps_.back().adjoint());
    }
    drive_ops_.reserve(sys.drives.size());
    for (const auto& d : sys.drives) drive_ops_.push_back(d.op * kTwoPi);
  }

  void operator()(double t, const ComplexMatrix& rho, ComplexMatrix& out) {
    ComplexMatrix k = k0_;
    for (std::size_t i = 0; i < drive_ops_.size(); ++i) {
      const double e = sys_.drives[i].envelope(t);
      if (e != 0.0) k += drive_ops_[i] * cplx(e, 0.0);
    }
    const ComplexMatrix kr = k * rho;
    // -i (K rho - rho K^+) = -i K rho + (-i K rho)^+
    out = ComplexMatrix(n_);
    const cplx mi(0.0, -1.0);
    for (std::size_t a = 0; a < n_; ++a) {
      for (std::size_t b = 0; b < n_; ++b) out(a, b) = mi * kr(a, b) + std::conj(mi * kr(b, a));
    }
    for (std::size_t j = 0; j < jumps_.size(); ++j) out += jumps_[j] * rho * jumps_adj_[j];
  }

 private:
  const OpenSystem& sys_;
  std::size_t n_;
  ComplexMatrix k0_;
  std::vector<ComplexMatrix> jumps_, jumps_adj_, drive_ops_;
};

}  // namespace detail

/// Classical fixed-step RK4 from t = 0 to the first multiple of dt at or
/// beyond t_max. Observables are recorded at t = 0 and every
/// `record_every` steps (and at the end); trace, Hermiticity and positivity
/// are checked at each record.
inline Trajectory evolve(const OpenSystem& sys, const std::vector<Observable>& observables, double t_max, double dt,
                         const EvolveOptions& options = {}) {
  sys.validate();
  if (!(dt > 0.0) || !(t_max > 0.0)) throw InvalidInput("evolve: t_max and dt must be positive");
  const double fmax = sys.fastest_frequency();
  if (!(dt * fmax < 0.05)) {
    std::ostringstream os;
    os << "evolve: step " << dt << " us does not resolve the fastest frequency " << fmax
       << " MHz (need dt < " << 0.05 / fmax << " us)";
    throw InvalidInput(os.str());
  }
  if (options.record_every < 1) throw InvalidInput("evolve: record_every must be at least 1");
  for (const auto& o : observables)
    if (o.op.dim() != sys.h_static.dim()) throw InvalidInput("evolve: observable '" + o.name + "' has wrong dimension");

  const auto n_steps = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
  detail::LindbladRhs rhs(sys);
  ComplexMatrix rho = sys.rho0, k1, k2, k3, k4;

  Trajectory traj;
  traj.names.reserve(observables.size());
  for (const auto& o : observables) traj.names.push_back(o.name);
  traj.values.assign(observables.size(), {});
  traj.min_eigenvalue = std::numeric_limits<double>::infinity();

  auto record = [&](double t) {
    traj.times.push_back(t);
    for (std::size_t k = 0; k < observables.size(); ++k) {
      traj.values[k].push_back((observables[k].op * rho).trace().real());
    }
    const double terr = std::abs(rho.trace() - cplx(1.0, 0.0));
    const double herr = hermiticity_residual(rho);
    traj.max_trace_error = std::max(traj.max_trace_error, terr);
    traj.max_hermiticity_error = std::max(traj.max_hermiticity_error, herr);
    if (terr > 1e-7) {
      throw NumericError("evolve: trace drifted by " + std::to_string(terr) + " at t = " + std::to_string(t) + " us");
    }
    if (options.check_positivity) {
      const double lmin = eigh((rho + rho.adjoint()) * 0.5).values.front();
      traj.min_eigenvalue = std::min(traj.min_eigenvalue, lmin);
      if (lmin < -1e-6) {
        throw NumericError("evolve: density matrix lost positivity (eigenvalue " + std::to_string(lmin) +
                           ") at t = " + std::to_string(t) + " us; reduce dt");
      }
    }
  };

  record(0.0);
  for (std::size_t s = 0; s < n_steps; ++s) {
    const double t = static_cast<double>(s) * dt;
    rhs(t, rho, k1);
    rhs(t + dt / 2, rho + k1 * (dt / 2), k2);
    rhs(t + dt / 2, rho + k2 * (dt / 2), k3);
    rhs(t + dt, rho + k3 * dt, k4);
    rho += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if ((s + 1) % options.record_every == 0 || s + 1 == n_steps) record(static_cast<double>(s + 1) * dt);
  }
  traj.final_rho = rho;
  return traj;
}

// ---------------------------------------------------------------------------
// Decay-rate extraction.

struct RateEstimate {
  double rate = 0.0;  // MHz
  double stderr_ = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
};

/// Least-squares fit of y = a exp(-2 pi G t) + c. With `fixed_offset` the
/// asymptote c is held at that value.
inline RateEstimate fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& y,
                                          std::optional<double> fixed_offset = std::nullopt) {
  if (t.size() != y.size() || t.size() < 4) throw InvalidInput("extract_rate: need at least four samples");
  double lo = *std::min_element(y.begin(), y.end()), hi = *std::max_element(y.begin(), y.end());
  if (!(hi - lo > 1e-12 * std::max(1.0, std::abs(hi)))) {
    throw NumericError("extract_rate: trace does not decay (constant signal)");
  }
  const double c0 = fixed_offset.value_or(y.back());
  const double a0 = y.front() - c0;
  // Log-linear estimate from samples that still carry most of the amplitude.
  double g0 = 0.0;
  {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = (y[i] - c0) / a0;
      if (v > 0.05 && v <= 1.0 + 1e-12) {
        const double ly = std::log(v);
        sx += t[i];
        sy += ly;
        sxx += t[i] * t[i];
        sxy += t[i] * ly;
        ++n;
      }
    }
    if (n >= 2 && sxx * n - sx * sx > 0) g0 = -(n * sxy - sx * sy) / (n * sxx - sx * sx) / kTwoPi;
    if (!(g0 > 0.0)) g0 = 1.0 / (kTwoPi * (t.back() - t.front()));
  }

  const bool free_c = !fixed_offset.has_value();
  LsqProblem prob;
  prob.n_params = free_c ? 3 : 2;
  prob.n_residuals = t.size();
  prob.lower = free_c ? std::vector<double>{-INFINITY, 0.0, -INFINITY} : std::vector<double>{-INFINITY, 0.0};
  prob.eval = [&](const std::vector<double>& p, std::vector<double>& r, std::vector<double>* jac) {
    const double c = free_c ? p[2] : *fixed_offset;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double e = std::exp(-kTwoPi * p[1] * t[i]);
      r[i] = p[0] * e + c - y[i];
      if (jac) {
        (*jac)[i * prob.n_params + 0] = e;
        (*jac)[i * prob.n_params + 1] = -kTwoPi * t[i] * p[0] * e;
        if (free_c) (*jac)[i * prob.n_params + 2] = 1.0;
      }
    }
  };
  std::vector<double> p0 = {a0, g0};
  if (free_c) p0.push_back(c0);
  const auto res = levenberg_marquardt(prob, p0);
  RateEstimate est;
  est.amplitude = res.params[0];
  est.rate = res.params[1];
  est.offset = free_c ? res.params[2] : *fixed_offset;
  if (!res.covariance.empty()) est.stderr_ = std::sqrt(std::max(0.0, res.covariance[prob.n_params + 1]));
  if (!(est.rate > 0.0) || !std::isfinite(est.rate)) {
    throw NumericError("extract_rate: fitted trace shows no decay");
  }
  return est;
}

inline RateEstimate extract_rate(const Trajectory& traj, const std::string& observable,
                                 std::optional<double> fixed_offset = std::nullopt) {
  return fit_exponential_decay(traj.times, traj.trace(observable), fixed_offset);
}

// ---------------------------------------------------------------------------
// Cross-relaxation check against the analytic Lorentzian.

/// kToggling: NV spin-1 in the frame co-rotating with the AM drive, keeping
/// the odd Floquet sidebands 2 J_m(kappa/2) sin(2 pi m f t) S_y (d.T) up to
/// m_max. kLabDrive: the AM drive (kappa f / 2) cos(2 pi f t) S_x and the
/// static coupling S_z (d.T) integrated directly, with an NV-only run
/// subtracted to remove drive-induced relaxation unrelated to the target.
enum class OracleModel { kToggling, kLabDrive };

inline std::string to_string(OracleModel m) { return m == OracleModel::kToggling ? "toggling" : "lab_drive"; }

struct RateOracleConfig {
  double kappa = 0.1;
  double d_zx = 2.0, d_zy = 2.0, d_zz = 0.0;  // MHz
  double gamma2 = 1.0;                        // MHz, total
  double nv_share = 0.5;                      // fraction of gamma2 carried by NV dephasing
  double omega = 10.0;                        // MHz, target splitting
  int m_max = 3;
  std::vector<double> detunings = {-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0};  // f - omega, MHz
  OracleModel model = OracleModel::kToggling;
  double decay_extent = 0.75;  // simulate until 2 pi Gamma1'(peak) t reaches this
  double step_fraction = 0.04;  // dt * f_max
  std::size_t threads = 1;
};

struct RateOraclePoint {
  double detuning = 0.0;
  double analytic_rate = 0.0;
  double oracle_rate = 0.0;
  double oracle_stderr = 0.0;
  double rel_deviation = 0.0;
};

struct RateOracleReport {
  RateOracleConfig config;
  std::vector<RateOraclePoint> points;
  double max_rel_deviation = 0.0;
  std::optional<double> on_resonance_deviation;
  double fitted_peak = 0.0, fitted_center = 0.0, fitted_hwhm = 0.0;
  double hwhm_rel_deviation = 0.0;
  bool fit_converged = false;
  std::vector<std::string> warnings;
};

namespace detail {

struct CoupledSpins {
  SpinOps nv = spin_operators(1.0);
  SpinOps tg = spin_operators(0.5);
  ComplexMatrix id_nv = ComplexMatrix::identity(3), id_tg = ComplexMatrix::identity(2);

  ComplexMatrix nv_op(const ComplexMatrix& a) const { return kron(a, id_tg); }
  ComplexMatrix tg_op(const ComplexMatrix& b) const { return kron(id_nv, b); }
  ComplexMatrix target_dot(double dx, double dy, double dz) const {
    return tg.sx * cplx(dx) + tg.sy * cplx(dy) + tg.sz * cplx(dz);
  }
  ComplexMatrix rho_nv0() const {
    ComplexMatrix p(3);
    p(1, 1) = 1.0;  // basis m = +1, 0, -1
    return kron(p, id_tg * 0.5);
  }
  ComplexMatrix p0() const {
    ComplexMatrix p(3);
    p(1, 1) = 1.0;
    return nv_op(p);
  }
};

inline double oracle_run(const RateOracleConfig& cfg, double f, bool with_target_coupling, double t_max) {
  CoupledSpins sp;
  OpenSystem sys;
  sys.h_static = sp.tg_op(sp.tg.sz) * cfg.omega;
  const ComplexMatrix dot = sp.target_dot(cfg.d_zx, cfg.d_zy, cfg.d_zz);
  if (cfg.model == OracleModel::kToggling) {
    for (int m = 1; m <= cfg.m_max; m += 2) {
      const double amp = effective_coupling(m, cfg.kappa);
      const double fm = m * f;
      sys.drives.push_back({kron(sp.nv.sy, dot), [amp, fm](double t) { return amp * std::sin(kTwoPi * fm * t); },
                            std::abs(amp), fm});
    }
  } else {
    if (with_target_coupling) sys.h_static += kron(sp.nv.sz, dot);
    const double amp = cfg.kappa * f / 2.0;
    sys.drives.push_back({sp.nv_op(sp.nv.sx), [amp, f](double t) { return amp * std::cos(kTwoPi * f * t); },
                          amp, f});
  }
  const double g_nv = cfg.gamma2 * cfg.nv_share, g_tg = cfg.gamma2 * (1.0 - cfg.nv_share);
  if (g_nv > 0.0) sys.collapse_ops.push_back({sp.nv_op(sp.nv.sz) * std::sqrt(2.0), g_nv});
  if (g_tg > 0.0) sys.collapse_ops.push_back({sp.tg_op(sp.tg.sz) * std::sqrt(2.0), g_tg});
  sys.rho0 = sp.rho_nv0();

  // Sample stroboscopically, once per modulation period.
  const double fmax = sys.fastest_frequency();
  const auto steps_per_period = static_cast<std::size_t>(std::ceil(fmax / (cfg.step_fraction * f)));
  const double dt = 1.0 / (f * static_cast<double>(steps_per_period));
  EvolveOptions eo;
  eo.record_every = steps_per_period;
  const auto traj = evolve(sys, {{"p0", sp.p0()}}, t_max, dt, eo);
  const double asymptote = g_nv > 0.0 ? 1.0 / 3.0 : 0.5;
  return fit_exponential_decay(traj.times, traj.trace("p0"), asymptote).rate;
}

}  // namespace detail

/// Integrates the sensor-target open system over the detuning grid and
/// compares the extracted cross-relaxation rate with the analytic
/// Lorentzian; a three-parameter Lorentzian fit of the oracle rates yields
/// the HWHM to compare against gamma2.
inline RateOracleReport validate_rate_law(const RateOracleConfig& cfg) {
  if (!(cfg.kappa >= 0.0)) throw InvalidInput("validate_rate_law: kappa must be non-negative");
  if (!(cfg.gamma2 > 0.0)) throw InvalidInput("validate_rate_law: gamma2 must be positive");
  if (!(cfg.nv_share >= 0.0 && cfg.nv_share <= 1.0)) throw InvalidInput("validate_rate_law: nv_share must lie in [0, 1]");
  if (!(cfg.omega > 0.0)) throw InvalidInput("validate_rate_law: omega must be positive");
  if (cfg.m_max < 1) throw InvalidInput("validate_rate_law: m_max must be at least 1");
  if (cfg.detunings.empty()) throw InvalidInput("validate_rate_law: detuning grid is empty");
  for (double d : cfg.detunings)
    if (!(cfg.omega + d > 0.0)) throw InvalidInput("validate_rate_law: modulation frequency omega + detuning must be positive");

  RateOracleReport rep;
  rep.config = cfg;
  if (cfg.kappa > 0.3) rep.warnings.push_back("kappa above 0.3: higher Floquet orders make deviations expected");
  rep.points.resize(cfg.detunings.size());
  const double peak_rate = cross_relaxation_rate(cfg.kappa, cfg.d_zx, cfg.d_zy, cfg.gamma2, 1.0, 1.0);
  if (peak_rate == 0.0) {
    for (std::size_t i = 0; i < cfg.detunings.size(); ++i) rep.points[i] = {cfg.detunings[i], 0.0, 0.0, 0.0, 0.0};
    rep.warnings.push_back("no coupling (kappa or transverse coupling is zero): both rates vanish");
    return rep;
  }
  const double t_max = cfg.decay_extent / (kTwoPi * peak_rate);

  parallel_for(cfg.detunings.size(), cfg.threads, [&](std::size_t i) {
    const double f = cfg.omega + cfg.detunings[i];
    double r = detail::oracle_run(cfg, f, true, t_max);
    if (cfg.model == OracleModel::kLabDrive) r -= detail::oracle_run(cfg, f, false, t_max);
    RateOraclePoint p;
    p.detuning = cfg.detunings[i];
    p.analytic_rate = cross_relaxation_rate(cfg.kappa, cfg.d_zx, cfg.d_zy, cfg.gamma2, f, cfg.omega);
    p.oracle_rate = r;
    p.rel_deviation = (r - p.analytic_rate) / p.analytic_rate;
    rep.points[i] = p;
  });
  for (const auto& p : rep.points) {
    rep.max_rel_deviation = std::max(rep.max_rel_deviation, std::abs(p.rel_deviation));
    if (p.detuning == 0.0) rep.on_resonance_deviation = p.rel_deviation;
  }

  if (rep.points.size() >= 4) {
    LsqProblem prob;
    prob.n_params = 3;
    prob.n_residuals = rep.points.size();
    prob.lower = {0.0, -INFINITY, 1e-9};
    prob.eval = [&](const std::vector<double>& p, std::vector<double>& r, std::vector<double>* jac) {
      for (std::size_t i = 0; i < rep.points.size(); ++i) {
        const double d = rep.points[i].detuning - p[1], w2 = p[2] * p[2], den = w2 + d * d;
        r[i] = (p[0] * w2 / den - rep.points[i].oracle_rate) / peak_rate;
        if (jac) {
          (*jac)[i * 3 + 0] = w2 / den / peak_rate;
          (*jac)[i * 3 + 1] = p[0] * 2.0 * w2 * d / (den * den) / peak_rate;
          (*jac)[i * 3 + 2] = p[0] * 2.0 * p[2] * d * d / (den * den) / peak_rate;
        }
      }
    };
    const auto res = levenberg_marquardt(prob, {peak_rate, 0.0, cfg.gamma2});
    rep.fit_converged = res.converged;
    rep.fitted_peak = res.params[0];
    rep.fitted_center = res.params[1];
    rep.fitted_hwhm = res.params[2];
    rep.hwhm_rel_deviation = (rep.fitted_hwhm - cfg.gamma2) / cfg.gamma2;
  } else {
    rep.warnings.push_back("fewer than four detunings: no Lorentzian fit");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Direct-drive dressed gap.

struct RabiAdjudication {
  double omega_target = 0.0;
  double coupled_gap_per_rabi = 0.0;  // dressed gap bridged by S_z, in units of the Rabi frequency
  double transfer_as_printed = 0.0;   // population moved with Rabi = omega
  double transfer_half_rabi = 0.0;    // with Rabi = 2 omega
  RabiConvention favoured = RabiConvention::kAsPrinted;
};

struct RabiAdjudicationConfig {
  double omega = 10.0;       // MHz, target splitting
  double d_zx = 0.3;         // MHz
  double gamma2_target = 1.0;  // MHz
  double t_evol = 10.0;      // us
};

/// Spin-1 NV under a resonant drive (Rabi/2) S_x in the microwave frame,
/// coupled by d S_z T_x to a target of splitting omega. Reports which Rabi
/// frequency brings the S_z-coupled dressed gap onto the target.
inline RabiAdjudication adjudicate_rabi_convention(const RabiAdjudicationConfig& cfg = {}) {
  if (!(cfg.omega > 0.0 && cfg.gamma2_target > 0.0 && cfg.t_evol > 0.0)) {
    throw InvalidInput("adjudicate_rabi_convention: omega, gamma2 and t_evol must be positive");
  }
  detail::CoupledSpins sp;
  RabiAdjudication out;
  out.omega_target = cfg.omega;

  // Dressed gap bridged by S_z for a unit Rabi frequency.
  const auto es = eigh(sp.nv.sx * 0.5);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = a + 1; b < 3; ++b)
      if (std::abs(matrix_element(es.vectors.column(a), sp.nv.sz, es.vectors.column(b))) > 1e-9) {
        const double gap = es.values[b] - es.values[a];
        if (out.coupled_gap_per_rabi == 0.0 || gap < out.coupled_gap_per_rabi) out.coupled_gap_per_rabi = gap;
      }

  ComplexMatrix proj_0x(3);
  {
    const auto col = es.vectors.column(1);  // S_x eigenvalue 0
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) proj_0x(i, j) = col[i] * std::conj(col[j]);
  }
  auto transfer = [&](double rabi) {
    OpenSystem sys;
    sys.h_static = sp.nv_op(sp.nv.sx) * (rabi / 2.0) + kron(sp.nv.sz, sp.tg.sx) * cfg.d_zx +
                   sp.tg_op(sp.tg.sz) * cfg.omega;
    sys.collapse_ops.push_back({sp.tg_op(sp.tg.sz) * std::sqrt(2.0), cfg.gamma2_target});
    sys.rho0 = sp.rho_nv0();
    const double dt = 0.04 / sys.fastest_frequency();
    EvolveOptions eo;
    eo.record_every = 1000000;
    const auto traj = evolve(sys, {{"p0x", sp.nv_op(proj_0x)}}, cfg.t_evol, dt, eo);
    return traj.trace("p0x").back();
  };
  out.transfer_as_printed = transfer(cfg.omega);
  out.transfer_half_rabi = transfer(2.0 * cfg.omega);
  out.favoured =
      out.transfer_half_rabi > out.transfer_as_printed ? RabiConvention::kHalfRabi : RabiConvention::kAsPrinted;
  return out;
}

}  // namespace ndepr
