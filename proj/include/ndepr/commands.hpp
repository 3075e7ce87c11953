#pragma once

// The five CLI operations as library calls. Each returns the files it wrote
// plus a human-readable summary; failures surface as InvalidInput,
// NumericError or IoError and map onto exit codes via exit_code_for().

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ndepr/bundled_configs.hpp"
#include "ndepr/config.hpp"
#include "ndepr/error.hpp"
#include "ndepr/fitting.hpp"
#include "ndepr/io.hpp"
#include "ndepr/lindblad.hpp"
#include "ndepr/parallel.hpp"
#include "ndepr/spectra.hpp"
#include "ndepr/targets.hpp"

#ifndef NDEPR_VERSION
#define NDEPR_VERSION "0.0.0"
#endif

namespace ndepr {

inline constexpr const char* kVersion = NDEPR_VERSION;

// ---------------------------------------------------------------------------
// Config lookup.

inline std::vector<std::string> bundled_config_names() {
  std::vector<std::string> names;
  for (const auto& [name, text] : bundled::kRecipes) names.emplace_back(name);
  return names;
}

inline std::optional<std::string> bundled_config(const std::string& name) {
  for (const auto& [n, text] : bundled::kRecipes)
    if (n == name) return std::string(text);
  return std::nullopt;
}

/// `name_or_path` is an existing file or the name of a bundled recipe.
inline ExperimentConfig load_config(const std::string& name_or_path) {
  std::error_code ec;
  if (std::filesystem::is_regular_file(name_or_path, ec)) {
    return parse_experiment_config(read_file(name_or_path), name_or_path);
  }
  if (auto text = bundled_config(name_or_path)) return parse_experiment_config(*text, name_or_path);
  std::string names;
  for (const auto& n : bundled_config_names()) names += (names.empty() ? "" : ", ") + n;
  throw InvalidInput("config '" + name_or_path + "': no such file or bundled recipe (bundled: " + names + ")");
}

// ---------------------------------------------------------------------------
// Run plumbing.

struct RunContext {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides every seed in the config
  std::size_t threads = 1;            // 0 = hardware concurrency
  bool plot = false;                  // also honoured from output.plot
  bool write_files = true;
  std::string command_line;           // recorded in sidecars
};

struct RunResult {
  ExitCode code = ExitCode::kSuccess;
  std::vector<std::filesystem::path> files;
  std::vector<std::string> warnings;
  std::string summary;
};

inline ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidInput*>(&e)) return ExitCode::kConfigError;
  if (dynamic_cast<const NumericError*>(&e)) return ExitCode::kNumericFailure;
  if (dynamic_cast<const IoError*>(&e)) return ExitCode::kIoFailure;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return ExitCode::kIoFailure;
  return ExitCode::kNumericFailure;
}

namespace detail {

inline std::string fmt(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

template <class T>
const T& require_block(const std::optional<T>& block, const ExperimentConfig& cfg, const char* name,
                       const char* command) {
  if (!block) throw InvalidInput(cfg.source + ": " + name + ": block is required by '" + command + "'");
  return *block;
}

/// Writes output files and their `.meta.json` sidecars.
class Emitter {
 public:
  Emitter(const ExperimentConfig& cfg, const RunContext& ctx, std::string command, RunResult& result)
      : cfg_(cfg), ctx_(ctx), command_(std::move(command)), result_(result) {}

  void write(const std::string& name, const std::string& content, const Json& extra = Json::object()) {
    if (!ctx_.write_files) return;
    const auto path = ctx_.out_dir / name;
    write_file_durable(path, content);
    Json meta = {{"ndepr_version", kVersion},
                 {"command", command_},
                 {"command_line", ctx_.command_line},
                 {"config_source", cfg_.source},
                 {"config", to_json(cfg_)},
                 {"warnings", result_.warnings}};
    for (auto it = extra.begin(); it != extra.end(); ++it) meta[it.key()] = it.value();
    write_sidecar(path, meta);
    result_.files.push_back(path);
  }

 private:
  const ExperimentConfig& cfg_;
  const RunContext& ctx_;
  std::string command_;
  RunResult& result_;
};

inline std::string theta_tag(double deg) {
  std::string s = fmt(deg, 10);
  for (auto& c : s)
    if (c == '.') c = 'p';
  return "_theta" + s;
}

inline std::string transitions_csv(const TargetSpectrumModel& t) {
  std::string out = "freq_mhz,lower_T,lower_mT,upper_T,upper_mT,delta_mT,intensity_weight,intensity_weight_z,degeneracy\n";
  for (const auto& tr : t.transitions) {
    out += format_double(tr.freq) + "," + fmt(tr.lower_label.total) + "," + fmt(tr.lower_label.projection) + "," +
           fmt(tr.upper_label.total) + "," + fmt(tr.upper_label.projection) + "," + std::to_string(tr.delta_mT) + "," +
           format_double(tr.intensity_weight) + "," + format_double(tr.intensity_weight_z) + "," +
           std::to_string(tr.degeneracy) + "\n";
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// simulate

inline RunResult run_simulate(ExperimentConfig cfg, const RunContext& ctx) {
  if (ctx.seed) cfg.averaging.seed = *ctx.seed;
  const auto& sensor = detail::require_block(cfg.sensor, cfg, "sensor", "simulate");
  const auto& target = detail::require_block(cfg.target, cfg, "target", "simulate");
  const auto& coupling = detail::require_block(cfg.coupling, cfg, "coupling", "simulate");
  const auto& drive = detail::require_block(cfg.drive, cfg, "drive", "simulate");
  const auto& sweep = detail::require_block(cfg.sweep, cfg, "sweep", "simulate");
  const std::string base = cfg.output.basename.value_or("spectrum");

  const auto targets = target.build();
  const auto grid = sweep.grid();
  const std::string x_name = to_string(sweep.variable);

  RunResult res;
  std::vector<std::pair<std::string, Spectrum>> spectra;  // label, spectrum
  if (cfg.averaging.n_samples == 0) {
    for (double deg : drive.theta_deg) {
      DriveConfig d = drive.base;
      d.theta = deg * kPi / 180.0;
      spectra.emplace_back("theta " + detail::fmt(deg) + " deg",
                           synthesize_spectrum(sensor, targets, coupling, d, grid, cfg.signal));
    }
  } else {
    spectra.emplace_back("orientation average, n = " + std::to_string(cfg.averaging.n_samples),
                         orientation_average(sensor, targets, coupling, drive.base, grid, cfg.signal,
                                             cfg.averaging.n_samples, cfg.averaging.seed, ctx.threads));
  }
  for (const auto& [label, s] : spectra)
    for (const auto& w : s.meta.warnings) res.warnings.push_back(label + ": " + w);

  detail::Emitter emit(cfg, ctx, "simulate", res);
  std::string summary = "simulate: " + to_string(drive.base.mode) + " drive, " +
                        std::to_string(targets.transitions.size()) + " transition(s), sweep " + x_name + " " +
                        detail::fmt(sweep.start) + ".." + detail::fmt(sweep.stop) + " step " + detail::fmt(sweep.step) + "\n";
  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t k = 0; k < spectra.size(); ++k) {
    const auto& [label, s] = spectra[k];
    const bool per_theta = cfg.averaging.n_samples == 0;
    const std::string name = base + (per_theta && spectra.size() > 1 ? detail::theta_tag(drive.theta_deg[k]) : "") + ".csv";
    Json extra = {{"sweep_variable", x_name},
                  {"drive_mode", to_string(s.meta.mode)},
                  {"kappa_policy", s.meta.kappa_policy},
                  {"averaging_count", s.meta.averaging_count},
                  {"seed", cfg.averaging.seed}};
    if (per_theta) extra["theta_deg"] = drive.theta_deg[k];
    emit.write(name, spectrum_to_csv(s), extra);
    const double peak = argmax_x(s);
    lo = std::min(lo, peak);
    hi = std::max(hi, peak);
    double cmax = 0.0;
    for (const auto& p : s.points) cmax = std::max(cmax, p.contrast);
    summary += "  " + label + ": argmax " + x_name + " = " + detail::fmt(peak) + ", peak contrast = " +
               detail::fmt(cmax) + ", FWHM = " + detail::fmt(measured_fwhm(s)) + "\n";
  }
  if (spectra.size() > 1) summary += "  argmax spread across spectra = " + detail::fmt(hi - lo) + " " + x_name + "\n";

  if (target.kind == TargetConfig::Kind::kVanadyl) emit.write(base + "_transitions.csv", detail::transitions_csv(targets));
  if (ctx.plot || cfg.output.plot) {
    std::vector<PlotSeries> series;
    for (const auto& [label, s] : spectra) series.push_back({label, s.xs(), s.contrasts()});
    emit.write(base + ".svg", render_svg(series, x_name, "contrast", "simulated spectrum"));
  }
  res.summary = summary;
  return res;
}

// ---------------------------------------------------------------------------
// fit

namespace detail {

inline Spectrum synthetic_spectrum(const FitConfig& f) {
  const auto& s = *f.synthetic;
  std::vector<double> hwhm;
  for (double w : s.fwhm_mhz) hwhm.push_back(w / 2.0);
  LorentzianModel truth;
  if (f.model == FitConfig::Model::kHyperfine) {
    truth = hyperfine_lorentzians(*s.a_perp, *s.a_par, f.hyperfine.peaks, hwhm, s.amplitudes, s.offset, s.slope);
  } else {
    truth.centers = s.centers_mhz;
    truth.widths = hwhm;
    truth.amplitudes = s.amplitudes;
    truth.baseline_offset = s.offset;
    truth.baseline_slope = s.slope;
  }
  const auto grid = make_sweep(SweepVariable::kModFreqMhz, s.f_start, s.f_stop, s.f_step);
  Spectrum out;
  for (std::size_t i = 0; i < grid.values.size(); ++i) {
    SampleStream rng(s.seed, i);
    const double x = grid.values[i];
    out.points.push_back({x, lorentz_eval(truth, x) + s.noise_sigma * rng.normal(), s.noise_sigma});
  }
  return out;
}

inline Spectrum restrict_range(const Spectrum& s, std::optional<double> lo, std::optional<double> hi) {
  if (!lo && !hi) return s;
  Spectrum out;
  out.sweep_var = s.sweep_var;
  out.meta = s.meta;
  for (const auto& p : s.points)
    if ((!lo || p.x >= *lo) && (!hi || p.x <= *hi)) out.points.push_back(p);
  return out;
}

}  // namespace detail

inline RunResult run_fit(ExperimentConfig cfg, const std::optional<std::filesystem::path>& data_path,
                         const RunContext& ctx) {
  if (!cfg.fit) throw InvalidInput(cfg.source + ": fit: block is required by 'fit'");
  FitConfig& f = *cfg.fit;
  if (ctx.seed) {
    f.seed = *ctx.seed;
    if (f.synthetic) f.synthetic->seed = *ctx.seed;
  }
  const std::string base = cfg.output.basename.value_or("fit");
  RunResult res;
  detail::Emitter emit(cfg, ctx, "fit", res);

  Spectrum data;
  Json extra = Json::object();
  if (data_path) {
    data = read_spectrum_csv(*data_path);
    extra["data_file"] = data_path->string();
  } else if (f.synthetic) {
    data = detail::synthetic_spectrum(f);
    extra["data_file"] = base + "_data.csv";
    emit.write(base + "_data.csv", spectrum_to_csv(data), {{"seed", f.synthetic->seed}});
  } else {
    throw InvalidInput(cfg.source + ": fit: no data; pass --data or add a fit.synthetic block");
  }
  data = detail::restrict_range(data, f.x_min, f.x_max);
  if (data.points.empty()) throw InvalidInput(cfg.source + ": fit: x_min_mhz/x_max_mhz leave no data points");

  FitResult fr;
  std::string title;
  if (f.model == FitConfig::Model::kHyperfine) {
    fr = fit_hyperfine(data, f.init_a_perp, f.init_a_par, f.hyperfine);
    title = "hyperfine-constrained Lorentzian fit";
  } else {
    LorentzianModel init = f.free_init;
    if (!f.free_amplitudes_given) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& p : data.points) {
        lo = std::min(lo, p.contrast);
        hi = std::max(hi, p.contrast);
      }
      init.amplitudes.assign(init.n_peaks(), hi - lo);
      init.baseline_offset = lo;
    }
    fr = fit_free_multistart(data, init, f.n_starts, f.seed);
    extra["seed"] = f.seed;
    title = "free multi-Lorentzian fit";
  }
  if (!fr.converged) res.warnings.push_back("fit did not converge: " + fr.message);

  emit.write(base + "_report.txt", fit_report_text(fr, title), extra);
  emit.write(base + "_residuals.csv", fit_residuals_csv(data, fr), extra);
  if (ctx.plot || cfg.output.plot) {
    PlotSeries d{"data", data.xs(), data.contrasts()}, m{"model", data.xs(), {}};
    for (std::size_t i = 0; i < data.points.size(); ++i)
      m.y.push_back(data.points[i].contrast - (i < fr.residuals.size() ? fr.residuals[i] : 0.0));
    emit.write(base + ".svg", render_svg({d, m}, "f_mhz", "contrast", title));
  }

  std::string summary = "fit: " + title + " on " + std::to_string(data.points.size()) + " points, converged = " +
                        (fr.converged ? "true" : "false") + " (" + fr.message + ")\n";
  for (std::size_t i = 0; i < fr.names.size(); ++i)
    summary += "  " + fr.names[i] + " = " + detail::fmt(fr.values[i], 8) + " +- " + detail::fmt(fr.errors[i], 3) + "\n";
  if (f.model == FitConfig::Model::kHyperfine && fr.converged) {
    const double ap = fr.value("a_perp_mhz"), apar = fr.value("a_par_mhz");
    for (auto p : f.hyperfine.peaks)
      summary += "  " + to_string(p) + " centre = " + detail::fmt(vanadyl_peak_center(p, ap, apar)) + " MHz\n";
  }
  res.summary = summary;
  res.code = fr.converged ? ExitCode::kSuccess : ExitCode::kNumericFailure;
  return res;
}

// ---------------------------------------------------------------------------
// budget

struct BudgetReport {
  LinewidthBudget budget;
  double max_resolvable_fwhm = 0.0;
  bool measurement_possible = true;
  std::string text;
};

inline BudgetReport compute_budget(const BudgetConfig& c) {
  using detail::fmt;
  BudgetReport r;
  const double r_dip = c.r_dip ? *c.r_dip : dipolar_broadening(*c.concentration_m);
  const double r_rot = c.r_rot ? *c.r_rot : rotational_diffusion_rate(*c.temperature_k, *c.radius_nm, *c.viscosity_pa_s);
  r.budget = linewidth_budget(c.gamma2_nv, c.r_int, r_dip, r_rot, c.r_trans);
  r.max_resolvable_fwhm = c.max_resolvable_fwhm;
  r.measurement_possible = r.budget.fwhm <= c.max_resolvable_fwhm;

  std::string t = "# linewidth budget; rates are ordinary frequencies in MHz, FWHM = 2 x (sum of rates)\n";
  t += "gamma2_nv_mhz = " + fmt(c.gamma2_nv) + "  # sensor dephasing (input)\n";
  t += "r_int_mhz = " + fmt(c.r_int) + "  # intrinsic target relaxation (input, upper estimate)\n";
  if (c.r_dip) {
    t += "r_dip_mhz = " + fmt(r_dip) + "  # ion-ion dipolar relaxation (input)\n";
  } else {
    t += "r_dip_mhz = " + fmt(r_dip) + "  # ion-ion dipolar relaxation, " + fmt(kDipolarBroadeningMhzPerMolar) +
         " MHz/M x " + fmt(*c.concentration_m) + " M\n";
  }
  if (c.r_rot) {
    t += "r_rot_mhz = " + fmt(r_rot) + "  # rotational diffusion (input)\n";
  } else {
    t += "r_rot_mhz = " + fmt(r_rot) + "  # rotational diffusion k_B T / (8 pi r^3 eta) / (2 pi), T = " +
         fmt(*c.temperature_k) + " K, r = " + fmt(*c.radius_nm) + " nm, eta = " + fmt(*c.viscosity_pa_s) + " Pa s\n";
  }
  t += "r_trans_mhz = " + fmt(c.r_trans) + "  # translational diffusion (input)\n";
  t += "gamma2_target_mhz = " + fmt(r.budget.r_int + r.budget.r_dip + r.budget.r_rot + r.budget.r_trans) + "\n";
  t += "gamma2_total_mhz = " + fmt(r.budget.gamma2_total()) + "\n";
  t += "fwhm_mhz = " + fmt(r.budget.fwhm) + "\n";
  t += "max_resolvable_fwhm_mhz = " + fmt(c.max_resolvable_fwhm) + "\n";
  t += std::string("measurement_possible = ") + (r.measurement_possible ? "true" : "false") + "\n";
  if (!r.measurement_possible) {
    t += "# measurement impossible: the line is broader than the resolvable limit\n";
  }
  r.text = t;
  return r;
}

inline RunResult run_budget(ExperimentConfig cfg, const RunContext& ctx) {
  const auto& b = detail::require_block(cfg.budget, cfg, "budget", "budget");
  const auto rep = compute_budget(b);
  RunResult res;
  if (!rep.measurement_possible) {
    res.warnings.push_back("FWHM " + detail::fmt(rep.budget.fwhm) + " MHz exceeds max_resolvable_fwhm_mhz " +
                           detail::fmt(rep.max_resolvable_fwhm) + ": measurement impossible");
  }
  detail::Emitter emit(cfg, ctx, "budget", res);
  emit.write(cfg.output.basename.value_or("budget") + ".txt", rep.text,
             {{"fwhm_mhz", rep.budget.fwhm}, {"measurement_possible", rep.measurement_possible}});
  res.summary = rep.text;
  return res;
}

// ---------------------------------------------------------------------------
// oracle

struct OracleRunReport {
  std::vector<RateOracleReport> per_kappa;
  std::optional<RabiAdjudication> adjudication;
  std::string csv;
  std::string summary;
};

inline OracleRunReport compute_oracle(const OracleRunConfig& oc, std::size_t threads) {
  using detail::fmt;
  OracleRunReport r;
  r.csv = "kappa,detuning_mhz,analytic_rate_mhz,oracle_rate_mhz,rel_deviation\n";
  std::string s = "# cross-relaxation rate: analytic Lorentzian vs Lindblad integration (" + to_string(oc.base.model) +
                  " model)\n";
  for (double k : oc.kappas) {
    RateOracleConfig e = oc.base;
    e.kappa = k;
    e.threads = threads;
    const auto rep = validate_rate_law(e);
    for (const auto& p : rep.points) {
      r.csv += format_double(k) + "," + format_double(p.detuning) + "," + format_double(p.analytic_rate) + "," +
               format_double(p.oracle_rate) + "," + format_double(p.rel_deviation) + "\n";
    }
    s += "kappa = " + fmt(k) + ": max |rel deviation| = " + fmt(rep.max_rel_deviation, 4);
    if (rep.on_resonance_deviation) s += ", on resonance = " + fmt(*rep.on_resonance_deviation, 4);
    if (rep.fit_converged) {
      s += ", fitted HWHM = " + fmt(rep.fitted_hwhm, 5) + " MHz (gamma2 = " + fmt(e.gamma2) + ", rel deviation " +
           fmt(rep.hwhm_rel_deviation, 4) + ")";
    }
    s += "\n";
    for (const auto& w : rep.warnings) s += "  warning: " + w + "\n";
    r.per_kappa.push_back(rep);
  }
  if (oc.spin1_adjudication) {
    const auto a = adjudicate_rabi_convention();
    r.adjudication = a;
    s += "# direct-drive dressed gap, spin-1 NV in the microwave frame\n";
    s += "S_z-coupled dressed gap = " + fmt(a.coupled_gap_per_rabi) + " x Rabi frequency\n";
    s += "as_printed convention: resonance at Rabi = omega, dressed gap there = " +
         fmt(a.coupled_gap_per_rabi * a.omega_target) + " MHz for omega = " + fmt(a.omega_target) +
         " MHz, population transfer = " + fmt(a.transfer_as_printed, 4) + "\n";
    s += "half_rabi convention: resonance at Rabi = 2 omega, dressed gap there = " +
         fmt(a.coupled_gap_per_rabi * 2.0 * a.omega_target) + " MHz, population transfer = " +
         fmt(a.transfer_half_rabi, 4) + "\n";
    s += std::string("favoured convention = ") +
         (a.favoured == RabiConvention::kHalfRabi ? "half_rabi" : "as_printed") + "\n";
  }
  r.summary = s;
  return r;
}

inline RunResult run_oracle(ExperimentConfig cfg, const RunContext& ctx) {
  const auto& oc = detail::require_block(cfg.oracle, cfg, "oracle", "oracle");
  const auto rep = compute_oracle(oc, ctx.threads);
  RunResult res;
  for (std::size_t i = 0; i < rep.per_kappa.size(); ++i)
    for (const auto& w : rep.per_kappa[i].warnings) res.warnings.push_back("kappa " + detail::fmt(oc.kappas[i]) + ": " + w);
  detail::Emitter emit(cfg, ctx, "oracle", res);
  const std::string base = cfg.output.basename.value_or("oracle");
  emit.write(base + ".csv", rep.csv);
  emit.write(base + "_summary.txt", rep.summary);
  if (ctx.plot || cfg.output.plot) {
    std::vector<PlotSeries> series;
    for (std::size_t i = 0; i < rep.per_kappa.size(); ++i) {
      PlotSeries a{"analytic, kappa " + detail::fmt(oc.kappas[i]), {}, {}}, o{"oracle, kappa " + detail::fmt(oc.kappas[i]), {}, {}};
      for (const auto& p : rep.per_kappa[i].points) {
        a.x.push_back(p.detuning);
        a.y.push_back(p.analytic_rate);
        o.x.push_back(p.detuning);
        o.y.push_back(p.oracle_rate);
      }
      series.push_back(a);
      series.push_back(o);
    }
    emit.write(base + ".svg", render_svg(series, "detuning_mhz", "rate_mhz", "cross-relaxation rate"));
  }
  res.summary = rep.summary;
  return res;
}

// ---------------------------------------------------------------------------
// transitions

inline RunResult run_transitions(ExperimentConfig cfg, const RunContext& ctx) {
  using detail::fmt;
  HyperfineModel model = vanadyl();
  if (cfg.target) {
    if (cfg.target->kind != TargetConfig::Kind::kVanadyl) {
      throw InvalidInput(cfg.source + ": target: 'transitions' needs a vanadyl target");
    }
    model = vanadyl(cfg.target->a_perp, cfg.target->a_par);
  }
  const auto table = transition_table(model);
  std::string s = "vanadyl transitions, A_perp = " + fmt(model.a_perp) + " MHz, A_par = " + fmt(model.a_par) + " MHz\n";
  s += "  #    freq_mhz   lower (T, m_T)   upper (T, m_T)   delta_mT   weight   weight_z   pairs\n";
  char line[160];
  for (std::size_t i = 0; i < table.transitions.size(); ++i) {
    const auto& t = table.transitions[i];
    std::snprintf(line, sizeof line, "%3zu  %10.3f   (%g, %+g)%*s(%g, %+g)%*s%+3d      %7.4f  %7.4f    %d\n", i + 1, t.freq,
                  t.lower_label.total, t.lower_label.projection, 8, "", t.upper_label.total, t.upper_label.projection,
                  8, "", t.delta_mT, t.intensity_weight, t.intensity_weight_z, t.degeneracy);
    s += line;
  }
  s += "distinct frequencies: " + std::to_string(table.distinct_frequencies(1e-6).size()) + "\n";
  s += "closed-form block energies vs eigensolver (m_T >= 0):\n";
  std::string csv = "m_T,printed_e_plus,printed_e_minus,block_e_plus,block_e_minus,printed_matches,block_matches\n";
  for (const auto& row : closed_form_check(model)) {
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(""); };
    csv += std::to_string(row.m_T) + "," + format_double(row.printed.e_plus) + "," + opt(row.printed.e_minus) + "," +
           format_double(row.block.e_plus) + "," + opt(row.block.e_minus) + "," +
           (row.printed_matches ? "true" : "false") + "," + (row.block_matches ? "true" : "false") + "\n";
    s += "  m_T = " + std::to_string(row.m_T) + ": printed form " + (row.printed_matches ? "matches" : "DIFFERS") +
         ", block-diagonalization form " + (row.block_matches ? "matches" : "DIFFERS") + "\n";
  }
  RunResult res;
  detail::Emitter emit(cfg, ctx, "transitions", res);
  const std::string base = cfg.output.basename.value_or("transitions");
  emit.write(base + ".csv", detail::transitions_csv(table));
  emit.write(base + "_closed_form.csv", csv);
  res.summary = s;
  return res;
}

}  // namespace ndepr
