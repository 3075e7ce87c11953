// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ndepr/ndepr.hpp"

using namespace ndepr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail += (detail.empty() ? "" : "; ") + std::string(ok ? "" : "FAILED ") + what;
  }
};

std::string f(double v, int digits = 5) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

double peak_contrast(const Spectrum& s) {
  double c = -INFINITY;
  for (const auto& p : s.points) c = std::max(c, p.contrast);
  return c;
}

std::vector<Spectrum> per_theta(const ExperimentConfig& cfg) {
  std::vector<Spectrum> out;
  const auto targets = cfg.target->build();
  for (double deg : cfg.drive->theta_deg) {
    DriveConfig d = cfg.drive->base;
    d.theta = deg * kPi / 180.0;
    out.push_back(synthesize_spectrum(*cfg.sensor, targets, *cfg.coupling, d, cfg.sweep->grid(), cfg.signal));
  }
  return out;
}

Spectrum averaged(const ExperimentConfig& cfg) {
  return orientation_average(*cfg.sensor, cfg.target->build(), *cfg.coupling, cfg.drive->base, cfg.sweep->grid(),
                             cfg.signal, cfg.averaging.n_samples, cfg.averaging.seed, 0);
}

// AC1: 16 states on 9 levels; every m_T != 0 level doubly degenerate.
Outcome ac1() {
  Outcome o;
  const auto model = vanadyl(208.5, 547.0);
  const auto h = hyperfine_hamiltonian(model);
  const auto es = eigh(h);
  const double scale = std::abs(es.values.front()) + std::abs(es.values.back());
  const double resid = eigen_residual(h, es) / scale;
  o.check(es.values.size() == 16, std::to_string(es.values.size()) + " states");
  // Cluster the sorted eigenvalues.
  std::vector<std::vector<std::size_t>> levels;
  for (std::size_t k = 0; k < es.values.size(); ++k) {
    if (levels.empty() || es.values[k] - es.values[levels.back().front()] > 1e-6 * scale) levels.push_back({});
    levels.back().push_back(k);
  }
  o.check(levels.size() == 9, std::to_string(levels.size()) + " distinct levels");
  const auto lab = labeled_eigensystem(model);
  bool pattern = true;
  int singles = 0, doubles = 0;
  for (const auto& lv : levels) {
    const double m = std::abs(lab.labels[lv.front()].projection);
    for (auto k : lv) pattern = pattern && std::abs(std::abs(lab.labels[k].projection) - m) < 1e-9;
    if (m < 1e-9) {
      pattern = pattern && lv.size() == 1;
      ++singles;
    } else {
      pattern = pattern && lv.size() == 2;
      ++doubles;
    }
  }
  o.check(pattern && singles == 2 && doubles == 7,
          "degeneracy pattern (" + std::to_string(singles) + " singlets at m_T = 0, " + std::to_string(doubles) +
              " doublets at m_T != 0)");
  o.check(resid < 1e-9, "relative eigen residual " + f(resid, 2));
  return o;
}

// AC2: analytic peak centres vs observation and vs the transition table.
Outcome ac2() {
  Outcome o;
  const HyperfinePeak peaks[] = {HyperfinePeak::kPeak1, HyperfinePeak::kPeak2, HyperfinePeak::kPeak10};
  const double printed[] = {780.0, 951.6, 1146.1};
  const double observed[] = {780.0, 950.0, 1150.0};
  for (int k = 0; k < 3; ++k) {
    const double c = vanadyl_peak_center(peaks[k], 195.0, 579.0);
    o.check(std::abs(c - printed[k]) < 0.05 && std::abs(c - observed[k]) <= 5.0,
            to_string(peaks[k]) + " " + f(c, 6) + " MHz");
  }
  const auto table = transition_table(vanadyl(208.5, 547.0));
  const double expected[] = {834.0, 975.3, 1143.1};
  for (int k = 0; k < 3; ++k) {
    const double c = vanadyl_peak_center(peaks[k], 208.5, 547.0);
    double best = INFINITY;
    for (const auto& t : table.transitions) best = std::min(best, std::abs(t.freq - c));
    o.check(best < 0.01 && std::abs(c - expected[k]) < 0.05,
            to_string(peaks[k]) + " " + f(c, 7) + " vs table, diff " + f(best, 2));
  }
  return o;
}

// AC3: orientation robustness of the modulated drive.
Outcome ac3() {
  Outcome o;
  const auto am_cfg = load_config("am-orientation");
  const auto direct_cfg = load_config("direct-orientation");
  const double step = am_cfg.sweep->step;

  std::vector<double> am_peaks, direct_peaks;
  for (const auto& s : per_theta(am_cfg)) am_peaks.push_back(argmax_x(s));
  for (const auto& s : per_theta(direct_cfg)) direct_peaks.push_back(argmax_x(s));
  const auto [am_lo, am_hi] = std::minmax_element(am_peaks.begin(), am_peaks.end());
  o.check(*am_hi - *am_lo <= step + 1e-9, "AM argmax spread " + f(*am_hi - *am_lo) + " MHz over theta 15/30/60/90");
  const double d90 = direct_peaks.back();  // theta list ends at 90 deg
  const auto [d_lo, d_hi] = std::minmax_element(direct_peaks.begin(), direct_peaks.end());
  o.check((*d_hi - *d_lo) > 0.5 * d90, "direct argmax shift " + f(*d_hi - *d_lo) + " mT vs " + f(d90) + " mT at 90 deg");

  const auto direct_avg = averaged(load_config("powder-direct"));
  const double skew = peak_skewness(direct_avg);
  o.check(skew > 0.0, "averaged direct skewness " + f(skew, 3));
  const auto am_avg_cfg = load_config("powder-am");
  const auto am_avg = averaged(am_avg_cfg);
  const double drift = argmax_x(am_avg) - 130.0;
  o.check(std::abs(drift) < am_avg_cfg.sweep->step, "averaged AM centre drift " + f(drift) + " MHz (n = " +
                                                         std::to_string(am_avg_cfg.averaging.n_samples) + ")");
  return o;
}

// AC4: analytic cross-relaxation rate vs Lindblad integration.
Outcome ac4() {
  Outcome o;
  RateOracleConfig base = load_config("oracle-default").oracle->base;
  base.threads = 0;
  for (double k : {0.05, 0.1, 0.2}) {
    RateOracleConfig c = base;
    c.kappa = k;
    const auto rep = validate_rate_law(c);
    const bool on = rep.on_resonance_deviation && std::abs(*rep.on_resonance_deviation) < 0.10;
    const bool hw = rep.fit_converged && std::abs(rep.hwhm_rel_deviation) < 0.15;
    o.check(on && hw, "kappa " + f(k) + ": on-resonance dev " +
                          (rep.on_resonance_deviation ? f(*rep.on_resonance_deviation, 3) : std::string("n/a")) +
                          ", HWHM dev " + f(rep.hwhm_rel_deviation, 3));
  }
  return o;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// AC5: Gamma1' grows as kappa^2 and the peak does not move.
Outcome ac5() {
  Outcome o;
  SensorModel sensor;
  sensor.gamma2_nv = 4.0;
  sensor.gamma1 = 0.002;  // MHz; exercises the exp(Gamma1 t) factor of the inversion
  const auto targets = p1_target({130.0}, 1.0);
  const Coupling coupling{0.5, 0.3};
  const auto grid = make_sweep(SweepVariable::kModFreqMhz, 100.0, 160.0, 0.5);
  const double t = 10.0;
  const std::vector<double> kappas = {0.02, 0.05, 0.1, 0.2};
  for (bool bessel : {false, true}) {
    SpectrumOptions opt;
    opt.t_evol_us = t;
    opt.bessel_coupling = bessel;
    std::vector<double> lx, ly, peaks;
    double max_s = 0.0;
    for (double k : kappas) {
      DriveConfig d;
      d.kappa_policy = FixedKappa{k};
      const auto s = synthesize_spectrum(sensor, targets, coupling, d, grid, opt);
      const double c = peak_contrast(s);
      max_s = std::max(max_s, c);
      // log(-log(1 - (3/2) S exp(Gamma1 t))) with t in the 2 pi-scaled units.
      lx.push_back(std::log(k));
      ly.push_back(std::log(-std::log1p(-1.5 * c * std::exp(kTwoPi * sensor.gamma1 * t))));
      peaks.push_back(argmax_x(s));
    }
    const double m = slope(lx, ly);
    const auto [lo, hi] = std::minmax_element(peaks.begin(), peaks.end());
    const std::string tag = bessel ? "Bessel coupling" : "first-order coupling";
    o.check(std::abs(m - 2.0) <= 0.05, tag + ": slope " + f(m, 4) + " (max contrast " + f(max_s, 2) + ")");
    o.check(*hi - *lo <= 0.5 + 1e-9, tag + ": argmax spread " + f(*hi - *lo));
  }
  return o;
}

// AC6: linewidth budget.
Outcome ac6() {
  Outcome o;
  const auto rep = compute_budget(*load_config("budget-nanodiamond").budget);
  o.check(std::abs(rep.budget.fwhm - 65.0) <= 2.0 && rep.budget.fwhm <= 66.0, "FWHM " + f(rep.budget.fwhm) + " MHz");
  o.check(std::abs(rep.budget.r_rot - 1.7) < 0.05 && std::abs(rep.budget.r_rot - 2.0) <= 0.2 * 2.0,
          "R_rot " + f(rep.budget.r_rot, 4) + " MHz");
  o.check(std::abs(rep.budget.r_dip - 6.8) < 1e-9 && std::abs(rep.budget.r_dip - 7.0) < 0.5,
          "R_dip " + f(rep.budget.r_dip, 4) + " MHz");
  return o;
}

// AC7: hyperfine fit round trip on synthetic data.
Outcome ac7() {
  Outcome o;
  const auto cfg = load_config("fit-vanadyl");
  FitConfig fc = *cfg.fit;
  const auto noisy = fit_hyperfine(detail::synthetic_spectrum(fc), fc.init_a_perp, fc.init_a_par, fc.hyperfine);
  o.check(noisy.converged && std::abs(noisy.value("a_perp_mhz") - 195.0) <= 4.0 &&
              std::abs(noisy.value("a_par_mhz") - 579.0) <= 16.0,
          "5% noise, seed " + std::to_string(fc.synthetic->seed) + ": A_perp " + f(noisy.value("a_perp_mhz"), 6) +
              " +- " + f(noisy.error("a_perp_mhz"), 2) + ", A_par " + f(noisy.value("a_par_mhz"), 6) + " +- " +
              f(noisy.error("a_par_mhz"), 2));
  fc.synthetic->noise_sigma = 0.0;
  const auto clean = fit_hyperfine(detail::synthetic_spectrum(fc), fc.init_a_perp, fc.init_a_par, fc.hyperfine);
  const double e1 = std::abs(clean.value("a_perp_mhz") - 195.0), e2 = std::abs(clean.value("a_par_mhz") - 579.0);
  o.check(clean.converged && e1 < 0.5 && e2 < 0.5, "noiseless errors " + f(e1, 2) + " / " + f(e2, 2) + " MHz");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {{"AC1", 1.0, ac1},  {"AC2", INFINITY, ac2}, {"AC3", 10.0, ac3},
                                      {"AC4", 60.0, ac4}, {"AC5", INFINITY, ac5}, {"AC6", INFINITY, ac6},
                                      {"AC7", 5.0, ac7}};
  int failures = 0;
  for (const auto& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (std::isfinite(c.budget_s)) o.check(secs < c.budget_s, "runtime limit " + f(c.budget_s) + " s");
    if (!o.pass) ++failures;
    std::printf("%s %s (%.2f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
