#pragma once

// Experiment configuration: a JSON document (comments allowed) with one
// block per concern. Units are part of every key name. Keys that are not
// consumed by the reader are reported as errors with their full path, and
// the resolved configuration (defaults filled in) serializes back to a
// document that parses to the same values.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ndepr/error.hpp"
#include "ndepr/fitting.hpp"
#include "ndepr/lindblad.hpp"
#include "ndepr/sensor_drive.hpp"
#include "ndepr/spectra.hpp"
#include "ndepr/targets.hpp"

namespace ndepr {

using Json = nlohmann::json;

/// "line L, column C" for a 1-based byte offset into `text`.
inline std::string text_location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

/// Parses JSON text, rejecting syntax errors (with position) and duplicate keys.
inline Json parse_json_text(const std::string& text, const std::string& source) {
  std::vector<std::set<std::string>> open;
  std::string duplicate;
  const Json::parser_callback_t cb = [&](int, Json::parse_event_t ev, Json& parsed) {
    if (ev == Json::parse_event_t::object_start) {
      open.emplace_back();
    } else if (ev == Json::parse_event_t::object_end) {
      if (!open.empty()) open.pop_back();
    } else if (ev == Json::parse_event_t::key && !open.empty()) {
      const auto k = parsed.get<std::string>();
      if (!open.back().insert(k).second && duplicate.empty()) duplicate = k;
    }
    return true;
  };
  Json j;
  try {
    j = Json::parse(text, cb, true, true);
  } catch (const Json::parse_error& e) {
    std::string what = e.what();
    // Drop the library's "[json.exception.parse_error.101] parse error at line x, column y: " prefix.
    if (const auto p = what.find(": "); p != std::string::npos) what = what.substr(p + 2);
    throw InvalidInput(source + ": " + text_location(text, e.byte) + ": syntax error: " + what);
  }
  if (!duplicate.empty()) throw InvalidInput(source + ": duplicate key '" + duplicate + "'");
  if (!j.is_object()) throw InvalidInput(source + ": top level must be an object");
  return j;
}

/// Typed, consumption-tracking view of one JSON object.
class ConfigBlock {
 public:
  ConfigBlock(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw InvalidInput(where() + "expected an object");
  }

  const std::string& path() const { return path_; }
  bool has(const std::string& key) const { return j_->contains(key); }

  double number(const std::string& key) {
    const Json& v = take(key);
    if (!v.is_number()) throw InvalidInput(where(key) + "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw InvalidInput(where(key) + "must be finite");
    return d;
  }
  double number(const std::string& key, double def) { return has(key) ? number(key) : def; }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def) {
    if (!has(key)) return def;
    const Json& v = take(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) throw InvalidInput(where(key) + "must be non-negative");
    throw InvalidInput(where(key) + "expected an integer");
  }

  bool boolean(const std::string& key, bool def) {
    if (!has(key)) return def;
    const Json& v = take(key);
    if (!v.is_boolean()) throw InvalidInput(where(key) + "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    const Json& v = take(key);
    if (!v.is_string()) throw InvalidInput(where(key) + "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& def) { return has(key) ? string(key) : def; }

  std::string choice(const std::string& key, const std::vector<std::string>& allowed, std::optional<std::string> def = {}) {
    if (!has(key) && def) return *def;
    const std::string s = string(key);
    for (const auto& a : allowed)
      if (a == s) return s;
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    throw InvalidInput(where(key) + "'" + s + "' is not one of: " + list);
  }

  /// A number or a list of numbers.
  std::vector<double> numbers(const std::string& key) {
    const Json& v = take(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw InvalidInput(where(key) + "element " + std::to_string(i) + " is not a number");
        out.push_back(v[i].get<double>());
      }
    } else {
      throw InvalidInput(where(key) + "expected a number or a list of numbers");
    }
    for (double d : out)
      if (!std::isfinite(d)) throw InvalidInput(where(key) + "values must be finite");
    if (out.empty()) throw InvalidInput(where(key) + "list is empty");
    return out;
  }

  std::vector<std::string> strings(const std::string& key) {
    const Json& v = take(key);
    if (!v.is_array() || v.empty()) throw InvalidInput(where(key) + "expected a non-empty list of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw InvalidInput(where(key) + "element " + std::to_string(i) + " is not a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }

  ConfigBlock child(const std::string& key) { return ConfigBlock(take(key), join(key)); }

  std::vector<ConfigBlock> children(const std::string& key) {
    const Json& v = take(key);
    if (!v.is_array()) throw InvalidInput(where(key) + "expected a list of objects");
    std::vector<ConfigBlock> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], join(key) + "[" + std::to_string(i) + "]");
    return out;
  }

  /// Every key must have been read.
  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!used_.count(it.key())) throw InvalidInput(join(it.key()) + ": unknown key");
  }

  std::string where(const std::string& key = "") const { return (key.empty() ? path_ : join(key)) + ": "; }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& take(const std::string& key) {
    if (!has(key)) throw InvalidInput(join(key) + ": required key is missing");
    used_.insert(key);
    return (*j_)[key];
  }

  const Json* j_;
  std::string path_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Blocks.

struct TargetConfig {
  enum class Kind { kVanadyl, kLines };
  Kind kind = Kind::kVanadyl;
  double a_perp = 208.5, a_par = 547.0;  // MHz
  std::vector<double> lines_mhz;
  double gamma2 = 0.0;  // MHz

  TargetSpectrumModel build() const {
    return kind == Kind::kVanadyl ? transition_table(vanadyl(a_perp, a_par), gamma2) : p1_target(lines_mhz, gamma2);
  }
};

struct DriveBlock {
  DriveConfig base;                        // theta is filled per spectrum
  std::vector<double> theta_deg = {90.0};  // one spectrum each when not averaging
};

struct SweepBlock {
  SweepVariable variable = SweepVariable::kModFreqMhz;
  double start = 0.0, stop = 0.0, step = 0.0;
  SweepGrid grid() const { return make_sweep(variable, start, stop, step); }
  std::string unit_suffix() const { return variable == SweepVariable::kModFreqMhz ? "_mhz" : "_mt"; }
};

struct AveragingBlock {
  std::size_t n_samples = 0;  // 0: one spectrum per listed theta
  std::uint64_t seed = 1;
};

struct OutputBlock {
  std::optional<std::string> basename;
  bool plot = false;
};

struct SyntheticBlock {
  // Either hyperfine constants (centres from the fit block's peak list) or explicit centres.
  std::optional<double> a_perp, a_par;
  std::vector<double> centers_mhz;
  std::vector<double> fwhm_mhz;
  std::vector<double> amplitudes;
  double offset = 0.0;
  double slope = 0.0;  // per MHz
  double f_start = 0.0, f_stop = 0.0, f_step = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
};

struct FitConfig {
  enum class Model { kHyperfine, kFree };
  Model model = Model::kHyperfine;
  // hyperfine
  double init_a_perp = 208.5, init_a_par = 547.0;
  HyperfineFitOptions hyperfine;
  // free
  LorentzianModel free_init;
  bool free_amplitudes_given = false;
  std::size_t n_starts = 1;
  std::uint64_t seed = 1;
  // both
  std::optional<double> x_min, x_max;
  std::optional<SyntheticBlock> synthetic;
};

struct BudgetConfig {
  double gamma2_nv = 12.0, r_int = 12.0;
  std::optional<double> r_dip, concentration_m;
  std::optional<double> r_rot, temperature_k, radius_nm, viscosity_pa_s;
  double r_trans = 0.0;
  double max_resolvable_fwhm = 200.0;  // MHz
};

struct OracleRunConfig {
  RateOracleConfig base;  // kappa is filled per grid entry
  std::vector<double> kappas = {0.05, 0.1, 0.2};
  bool spin1_adjudication = false;
};

struct ExperimentConfig {
  std::string source;
  std::string description;
  std::optional<SensorModel> sensor;
  std::optional<TargetConfig> target;
  std::optional<Coupling> coupling;
  std::optional<DriveBlock> drive;
  std::optional<SweepBlock> sweep;
  SpectrumOptions signal;
  AveragingBlock averaging;
  OutputBlock output;
  std::optional<FitConfig> fit;
  std::optional<BudgetConfig> budget;
  std::optional<OracleRunConfig> oracle;
};

// ---------------------------------------------------------------------------
// Readers.

namespace detail {

inline double positive(ConfigBlock& b, const std::string& key, double v) {
  if (!(v > 0.0)) throw InvalidInput(b.where(key) + "must be positive");
  return v;
}
inline double non_negative(ConfigBlock& b, const std::string& key, double v) {
  if (!(v >= 0.0)) throw InvalidInput(b.where(key) + "must be non-negative");
  return v;
}

inline HyperfinePeak parse_peak(ConfigBlock& b, const std::string& name) {
  if (name == "peak1") return HyperfinePeak::kPeak1;
  if (name == "peak2") return HyperfinePeak::kPeak2;
  if (name == "peak10") return HyperfinePeak::kPeak10;
  throw InvalidInput(b.where("peaks") + "'" + name + "' is not one of: peak1, peak2, peak10");
}

inline SensorModel read_sensor(ConfigBlock b) {
  SensorModel s;
  s.d_zfs = b.number("d_zfs_mhz", s.d_zfs);
  s.gamma = b.number("gamma_mhz_per_mt", s.gamma);
  s.gamma1 = b.number("gamma1_mhz", s.gamma1);
  s.gamma2_nv = b.number("gamma2_nv_mhz", s.gamma2_nv);
  b.finish();
  s.validate();
  return s;
}

inline TargetConfig read_target(ConfigBlock b) {
  TargetConfig t;
  const auto kind = b.choice("kind", {"vanadyl", "lines"});
  if (kind == "vanadyl") {
    t.kind = TargetConfig::Kind::kVanadyl;
    t.a_perp = positive(b, "a_perp_mhz", b.number("a_perp_mhz", t.a_perp));
    t.a_par = positive(b, "a_par_mhz", b.number("a_par_mhz", t.a_par));
  } else {
    t.kind = TargetConfig::Kind::kLines;
    t.lines_mhz = b.numbers("lines_mhz");
    for (double f : t.lines_mhz)
      if (!(f > 0.0)) throw InvalidInput(b.where("lines_mhz") + "frequencies must be positive");
  }
  t.gamma2 = non_negative(b, "gamma2_mhz", b.number("gamma2_mhz", 0.0));
  b.finish();
  return t;
}

inline Coupling read_coupling(ConfigBlock b) {
  Coupling c;
  c.d_zx = b.number("d_zx_mhz", 1.0);
  c.d_zy = b.number("d_zy_mhz", 0.0);
  b.finish();
  return c;
}

inline DriveBlock read_drive(ConfigBlock b) {
  DriveBlock d;
  const auto mode = b.choice("mode", {"amplitude_modulated", "direct"});
  if (mode == "direct") {
    d.base.mode = DriveMode::kDirect;
    const auto conv = b.choice("rabi_convention", {"as_printed", "half_rabi"}, std::string("as_printed"));
    d.base.convention = conv == "half_rabi" ? RabiConvention::kHalfRabi : RabiConvention::kAsPrinted;
  } else {
    d.base.mode = DriveMode::kAmplitudeModulated;
    const auto policy = b.choice("kappa_policy", {"fixed_kappa", "fixed_b1"}, std::string("fixed_kappa"));
    if (policy == "fixed_kappa") {
      d.base.kappa_policy = FixedKappa{non_negative(b, "kappa", b.number("kappa", 0.5))};
    } else {
      d.base.kappa_policy = FixedB1{};
      d.base.b1 = non_negative(b, "b1_mt", b.number("b1_mt"));
    }
  }
  if (b.has("theta_deg")) d.theta_deg = b.numbers("theta_deg");
  for (double th : d.theta_deg)
    if (!(th >= 0.0 && th <= 180.0)) throw InvalidInput(b.where("theta_deg") + "angles must lie in [0, 180]");
  b.finish();
  return d;
}

inline SweepBlock read_sweep(ConfigBlock b) {
  SweepBlock s;
  if (b.has("f_start_mhz") || b.has("f_stop_mhz") || b.has("f_step_mhz")) {
    s.variable = SweepVariable::kModFreqMhz;
    s.start = b.number("f_start_mhz");
    s.stop = b.number("f_stop_mhz");
    s.step = b.number("f_step_mhz");
  } else if (b.has("b1_start_mt") || b.has("b1_stop_mt") || b.has("b1_step_mt")) {
    s.variable = SweepVariable::kB1mT;
    s.start = b.number("b1_start_mt");
    s.stop = b.number("b1_stop_mt");
    s.step = b.number("b1_step_mt");
  } else {
    throw InvalidInput(b.where() + "needs f_start_mhz/f_stop_mhz/f_step_mhz or b1_start_mt/b1_stop_mt/b1_step_mt");
  }
  b.finish();
  if (!(s.step > 0.0)) throw InvalidInput(b.where() + "step must be positive");
  if (!(s.start < s.stop)) throw InvalidInput(b.where() + "start must be below stop (empty sweep)");
  if (s.variable == SweepVariable::kModFreqMhz && !(s.start > 0.0)) {
    throw InvalidInput(b.where() + "modulation frequencies must be positive");
  }
  if (s.variable == SweepVariable::kB1mT && !(s.start >= 0.0)) {
    throw InvalidInput(b.where() + "drive amplitudes must be non-negative");
  }
  return s;
}

inline SpectrumOptions read_signal(ConfigBlock b, const std::optional<SweepBlock>& sweep) {
  SpectrumOptions o;
  o.t_evol_us = non_negative(b, "t_evol_us", b.number("t_evol_us", o.t_evol_us));
  o.bessel_coupling = b.boolean("bessel_coupling", o.bessel_coupling);
  const auto pol = b.choice("intensity", {"all_components", "transverse_only"}, std::string("all_components"));
  o.intensity_policy = pol == "transverse_only" ? IntensityPolicy::kTransverseOnly : IntensityPolicy::kAllComponents;
  if (b.has("backgrounds")) {
    if (!sweep) throw InvalidInput(b.where("backgrounds") + "needs a sweep block to fix the units");
    const std::string u = sweep->unit_suffix();
    for (auto& bg : b.children("backgrounds")) {
      BackgroundLine l;
      l.center = bg.number("center" + u);
      l.hwhm = positive(bg, "hwhm" + u, bg.number("hwhm" + u));
      l.amplitude = bg.number("amplitude");
      bg.finish();
      o.backgrounds.push_back(l);
    }
  }
  b.finish();
  return o;
}

inline AveragingBlock read_averaging(ConfigBlock b) {
  AveragingBlock a;
  a.n_samples = b.unsigned_integer("n_samples", a.n_samples);
  a.seed = b.unsigned_integer("seed", a.seed);
  b.finish();
  return a;
}

inline OutputBlock read_output(ConfigBlock b) {
  OutputBlock o;
  if (b.has("basename")) {
    o.basename = b.string("basename");
    if (o.basename->empty() || o.basename->find('/') != std::string::npos) {
      throw InvalidInput(b.where("basename") + "must be a non-empty file name without '/'");
    }
  }
  o.plot = b.boolean("plot", o.plot);
  b.finish();
  return o;
}

inline SyntheticBlock read_synthetic(ConfigBlock b, FitConfig::Model model, std::size_t n_peaks_hint) {
  SyntheticBlock s;
  if (model == FitConfig::Model::kHyperfine) {
    s.a_perp = positive(b, "a_perp_mhz", b.number("a_perp_mhz"));
    s.a_par = positive(b, "a_par_mhz", b.number("a_par_mhz"));
  } else {
    s.centers_mhz = b.numbers("centers_mhz");
    n_peaks_hint = s.centers_mhz.size();
  }
  s.fwhm_mhz = b.numbers("fwhm_mhz");
  s.amplitudes = b.numbers("amplitudes");
  if (s.fwhm_mhz.size() != n_peaks_hint || s.amplitudes.size() != n_peaks_hint) {
    throw InvalidInput(b.where() + "fwhm_mhz and amplitudes need one entry per peak (" + std::to_string(n_peaks_hint) + ")");
  }
  for (double w : s.fwhm_mhz)
    if (!(w > 0.0)) throw InvalidInput(b.where("fwhm_mhz") + "widths must be positive");
  s.offset = b.number("offset", 0.0);
  s.slope = b.number("slope_per_mhz", 0.0);
  s.f_start = b.number("f_start_mhz");
  s.f_stop = b.number("f_stop_mhz");
  s.f_step = positive(b, "f_step_mhz", b.number("f_step_mhz"));
  if (!(s.f_start < s.f_stop)) throw InvalidInput(b.where() + "f_start_mhz must be below f_stop_mhz");
  s.noise_sigma = non_negative(b, "noise_sigma", b.number("noise_sigma", 0.0));
  s.seed = b.unsigned_integer("seed", s.seed);
  b.finish();
  return s;
}

inline FitConfig read_fit(ConfigBlock b) {
  FitConfig f;
  const auto model = b.choice("model", {"hyperfine", "free"});
  std::size_t n_peaks = 0;
  if (model == "hyperfine") {
    f.model = FitConfig::Model::kHyperfine;
    f.init_a_perp = positive(b, "init_a_perp_mhz", b.number("init_a_perp_mhz", f.init_a_perp));
    f.init_a_par = positive(b, "init_a_par_mhz", b.number("init_a_par_mhz", f.init_a_par));
    if (b.has("peaks")) {
      f.hyperfine.peaks.clear();
      for (const auto& p : b.strings("peaks")) f.hyperfine.peaks.push_back(parse_peak(b, p));
    }
    const auto wp = b.choice("width_policy", {"per_peak", "shared"}, std::string("per_peak"));
    f.hyperfine.width_policy = wp == "shared" ? WidthPolicy::kShared : WidthPolicy::kPerPeak;
    f.hyperfine.init_hwhm = positive(b, "init_hwhm_mhz", b.number("init_hwhm_mhz", f.hyperfine.init_hwhm));
    n_peaks = f.hyperfine.peaks.size();
  } else {
    f.model = FitConfig::Model::kFree;
    f.free_init.centers = b.numbers("centers_mhz");
    n_peaks = f.free_init.centers.size();
    auto widths = b.numbers("init_hwhm_mhz");
    if (widths.size() == 1) widths.assign(n_peaks, widths[0]);
    if (widths.size() != n_peaks) throw InvalidInput(b.where("init_hwhm_mhz") + "give one width or one per peak");
    for (double w : widths)
      if (!(w > 0.0)) throw InvalidInput(b.where("init_hwhm_mhz") + "widths must be positive");
    f.free_init.widths = widths;
    if (b.has("init_amplitudes")) {
      f.free_init.amplitudes = b.numbers("init_amplitudes");
      if (f.free_init.amplitudes.size() != n_peaks) {
        throw InvalidInput(b.where("init_amplitudes") + "need one amplitude per peak");
      }
      f.free_amplitudes_given = true;
    } else {
      f.free_init.amplitudes.assign(n_peaks, 0.0);
    }
    f.n_starts = b.unsigned_integer("n_starts", f.n_starts);
    if (f.n_starts < 1) throw InvalidInput(b.where("n_starts") + "must be at least 1");
    f.seed = b.unsigned_integer("seed", f.seed);
  }
  if (b.has("x_min_mhz")) f.x_min = b.number("x_min_mhz");
  if (b.has("x_max_mhz")) f.x_max = b.number("x_max_mhz");
  if (f.x_min && f.x_max && !(*f.x_min < *f.x_max)) throw InvalidInput(b.where() + "x_min_mhz must be below x_max_mhz");
  if (b.has("synthetic")) f.synthetic = read_synthetic(b.child("synthetic"), f.model, n_peaks);
  b.finish();
  return f;
}

inline BudgetConfig read_budget(ConfigBlock b) {
  BudgetConfig c;
  c.gamma2_nv = non_negative(b, "gamma2_nv_mhz", b.number("gamma2_nv_mhz"));
  c.r_int = non_negative(b, "r_int_mhz", b.number("r_int_mhz"));
  if (b.has("r_dip_mhz") == b.has("concentration_m")) {
    throw InvalidInput(b.where() + "give exactly one of r_dip_mhz or concentration_m");
  }
  if (b.has("r_dip_mhz")) c.r_dip = non_negative(b, "r_dip_mhz", b.number("r_dip_mhz"));
  else c.concentration_m = non_negative(b, "concentration_m", b.number("concentration_m"));
  const bool physical = b.has("temperature_k") || b.has("radius_nm") || b.has("viscosity_pa_s");
  if (b.has("r_rot_mhz") == physical) {
    throw InvalidInput(b.where() + "give exactly one of r_rot_mhz or temperature_k/radius_nm/viscosity_pa_s");
  }
  if (physical) {
    c.temperature_k = positive(b, "temperature_k", b.number("temperature_k"));
    c.radius_nm = positive(b, "radius_nm", b.number("radius_nm"));
    c.viscosity_pa_s = positive(b, "viscosity_pa_s", b.number("viscosity_pa_s"));
  } else {
    c.r_rot = non_negative(b, "r_rot_mhz", b.number("r_rot_mhz"));
  }
  c.r_trans = non_negative(b, "r_trans_mhz", b.number("r_trans_mhz", 0.0));
  c.max_resolvable_fwhm = positive(b, "max_resolvable_fwhm_mhz", b.number("max_resolvable_fwhm_mhz", c.max_resolvable_fwhm));
  b.finish();
  return c;
}

inline OracleRunConfig read_oracle(ConfigBlock b) {
  OracleRunConfig o;
  auto& e = o.base;
  if (b.has("kappas")) o.kappas = b.numbers("kappas");
  for (double k : o.kappas)
    if (!(k >= 0.0)) throw InvalidInput(b.where("kappas") + "values must be non-negative");
  e.d_zx = b.number("d_zx_mhz", e.d_zx);
  e.d_zy = b.number("d_zy_mhz", e.d_zy);
  e.d_zz = b.number("d_zz_mhz", e.d_zz);
  e.gamma2 = positive(b, "gamma2_mhz", b.number("gamma2_mhz", e.gamma2));
  e.nv_share = b.number("nv_share", e.nv_share);
  if (!(e.nv_share >= 0.0 && e.nv_share <= 1.0)) throw InvalidInput(b.where("nv_share") + "must lie in [0, 1]");
  e.omega = positive(b, "omega_mhz", b.number("omega_mhz", e.omega));
  const auto m_max = b.unsigned_integer("m_max", static_cast<std::uint64_t>(e.m_max));
  if (m_max < 1 || m_max > 15) throw InvalidInput(b.where("m_max") + "must lie in [1, 15]");
  e.m_max = static_cast<int>(m_max);
  if (b.has("detunings_mhz")) e.detunings = b.numbers("detunings_mhz");
  const auto model = b.choice("model", {"toggling", "lab_drive"}, std::string("toggling"));
  e.model = model == "lab_drive" ? OracleModel::kLabDrive : OracleModel::kToggling;
  e.decay_extent = positive(b, "decay_extent", b.number("decay_extent", e.decay_extent));
  e.step_fraction = positive(b, "step_fraction", b.number("step_fraction", e.step_fraction));
  o.spin1_adjudication = b.boolean("spin1_adjudication", o.spin1_adjudication);
  b.finish();
  return o;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "config") {
  const Json root = parse_json_text(text, source);
  ExperimentConfig c;
  c.source = source;
  try {
    ConfigBlock b(root, "");
    c.description = b.string("description", "");
    if (b.has("sensor")) c.sensor = detail::read_sensor(b.child("sensor"));
    if (b.has("target")) c.target = detail::read_target(b.child("target"));
    if (b.has("coupling")) c.coupling = detail::read_coupling(b.child("coupling"));
    if (b.has("drive")) c.drive = detail::read_drive(b.child("drive"));
    if (b.has("sweep")) c.sweep = detail::read_sweep(b.child("sweep"));
    if (b.has("signal")) c.signal = detail::read_signal(b.child("signal"), c.sweep);
    if (b.has("averaging")) c.averaging = detail::read_averaging(b.child("averaging"));
    if (b.has("output")) c.output = detail::read_output(b.child("output"));
    if (b.has("fit")) c.fit = detail::read_fit(b.child("fit"));
    if (b.has("budget")) c.budget = detail::read_budget(b.child("budget"));
    if (b.has("oracle")) c.oracle = detail::read_oracle(b.child("oracle"));
    b.finish();
  } catch (const InvalidInput& e) {
    throw InvalidInput(source + ": " + e.what());
  }
  if (c.drive && c.sweep) {
    const bool am = c.drive->base.mode == DriveMode::kAmplitudeModulated;
    if (am != (c.sweep->variable == SweepVariable::kModFreqMhz)) {
      throw InvalidInput(source + ": sweep: amplitude-modulated drive sweeps f_*_mhz, direct drive sweeps b1_*_mt");
    }
  }
  if (c.drive && c.averaging.n_samples > 0 && c.drive->theta_deg != std::vector<double>{90.0}) {
    throw InvalidInput(source + ": drive.theta_deg: not used when averaging.n_samples > 0 (orientations are sampled)");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Resolved configuration as JSON (parses back to the same values).

inline Json to_json(const ExperimentConfig& c) {
  Json j = Json::object();
  if (!c.description.empty()) j["description"] = c.description;
  if (c.sensor) {
    j["sensor"] = {{"d_zfs_mhz", c.sensor->d_zfs},
                   {"gamma_mhz_per_mt", c.sensor->gamma},
                   {"gamma1_mhz", c.sensor->gamma1},
                   {"gamma2_nv_mhz", c.sensor->gamma2_nv}};
  }
  if (c.target) {
    Json t;
    if (c.target->kind == TargetConfig::Kind::kVanadyl) {
      t = {{"kind", "vanadyl"}, {"a_perp_mhz", c.target->a_perp}, {"a_par_mhz", c.target->a_par}};
    } else {
      t = {{"kind", "lines"}, {"lines_mhz", c.target->lines_mhz}};
    }
    t["gamma2_mhz"] = c.target->gamma2;
    j["target"] = t;
  }
  if (c.coupling) j["coupling"] = {{"d_zx_mhz", c.coupling->d_zx}, {"d_zy_mhz", c.coupling->d_zy}};
  if (c.drive) {
    const auto& d = c.drive->base;
    Json dj = {{"mode", to_string(d.mode)}};
    if (d.mode == DriveMode::kDirect) {
      dj["rabi_convention"] = d.convention == RabiConvention::kHalfRabi ? "half_rabi" : "as_printed";
    } else if (const auto* fk = std::get_if<FixedKappa>(&d.kappa_policy)) {
      dj["kappa_policy"] = "fixed_kappa";
      dj["kappa"] = fk->kappa;
    } else {
      dj["kappa_policy"] = "fixed_b1";
      dj["b1_mt"] = d.b1;
    }
    if (c.averaging.n_samples == 0) dj["theta_deg"] = c.drive->theta_deg;
    j["drive"] = dj;
  }
  if (c.sweep) {
    const std::string p = c.sweep->variable == SweepVariable::kModFreqMhz ? "f_" : "b1_";
    const std::string u = c.sweep->unit_suffix();
    j["sweep"] = {{p + "start" + u, c.sweep->start}, {p + "stop" + u, c.sweep->stop}, {p + "step" + u, c.sweep->step}};
  }
  {
    Json s = {{"t_evol_us", c.signal.t_evol_us},
              {"bessel_coupling", c.signal.bessel_coupling},
              {"intensity", c.signal.intensity_policy == IntensityPolicy::kTransverseOnly ? "transverse_only"
                                                                                           : "all_components"}};
    if (!c.signal.backgrounds.empty() && c.sweep) {
      const std::string u = c.sweep->unit_suffix();
      Json bg = Json::array();
      for (const auto& l : c.signal.backgrounds)
        bg.push_back({{"center" + u, l.center}, {"hwhm" + u, l.hwhm}, {"amplitude", l.amplitude}});
      s["backgrounds"] = bg;
    }
    j["signal"] = s;
  }
  j["averaging"] = {{"n_samples", c.averaging.n_samples}, {"seed", c.averaging.seed}};
  {
    Json o = {{"plot", c.output.plot}};
    if (c.output.basename) o["basename"] = *c.output.basename;
    j["output"] = o;
  }
  if (c.fit) {
    const auto& f = *c.fit;
    Json fj;
    if (f.model == FitConfig::Model::kHyperfine) {
      Json peaks = Json::array();
      for (auto p : f.hyperfine.peaks) peaks.push_back(to_string(p));
      fj = {{"model", "hyperfine"},
            {"init_a_perp_mhz", f.init_a_perp},
            {"init_a_par_mhz", f.init_a_par},
            {"peaks", peaks},
            {"width_policy", f.hyperfine.width_policy == WidthPolicy::kShared ? "shared" : "per_peak"},
            {"init_hwhm_mhz", f.hyperfine.init_hwhm}};
    } else {
      fj = {{"model", "free"},
            {"centers_mhz", f.free_init.centers},
            {"init_hwhm_mhz", f.free_init.widths},
            {"n_starts", f.n_starts},
            {"seed", f.seed}};
      if (f.free_amplitudes_given) fj["init_amplitudes"] = f.free_init.amplitudes;
    }
    if (f.x_min) fj["x_min_mhz"] = *f.x_min;
    if (f.x_max) fj["x_max_mhz"] = *f.x_max;
    if (f.synthetic) {
      const auto& s = *f.synthetic;
      Json sj;
      if (s.a_perp) {
        sj["a_perp_mhz"] = *s.a_perp;
        sj["a_par_mhz"] = *s.a_par;
      } else {
        sj["centers_mhz"] = s.centers_mhz;
      }
      sj["fwhm_mhz"] = s.fwhm_mhz;
      sj["amplitudes"] = s.amplitudes;
      sj["offset"] = s.offset;
      sj["slope_per_mhz"] = s.slope;
      sj["f_start_mhz"] = s.f_start;
      sj["f_stop_mhz"] = s.f_stop;
      sj["f_step_mhz"] = s.f_step;
      sj["noise_sigma"] = s.noise_sigma;
      sj["seed"] = s.seed;
      fj["synthetic"] = sj;
    }
    j["fit"] = fj;
  }
  if (c.budget) {
    const auto& b = *c.budget;
    Json bj = {{"gamma2_nv_mhz", b.gamma2_nv}, {"r_int_mhz", b.r_int}, {"r_trans_mhz", b.r_trans},
               {"max_resolvable_fwhm_mhz", b.max_resolvable_fwhm}};
    if (b.r_dip) bj["r_dip_mhz"] = *b.r_dip;
    else bj["concentration_m"] = *b.concentration_m;
    if (b.r_rot) {
      bj["r_rot_mhz"] = *b.r_rot;
    } else {
      bj["temperature_k"] = *b.temperature_k;
      bj["radius_nm"] = *b.radius_nm;
      bj["viscosity_pa_s"] = *b.viscosity_pa_s;
    }
    j["budget"] = bj;
  }
  if (c.oracle) {
    const auto& e = c.oracle->base;
    j["oracle"] = {{"kappas", c.oracle->kappas},
                   {"d_zx_mhz", e.d_zx},
                   {"d_zy_mhz", e.d_zy},
                   {"d_zz_mhz", e.d_zz},
                   {"gamma2_mhz", e.gamma2},
                   {"nv_share", e.nv_share},
                   {"omega_mhz", e.omega},
                   {"m_max", e.m_max},
                   {"detunings_mhz", e.detunings},
                   {"model", to_string(e.model)},
                   {"decay_extent", e.decay_extent},
                   {"step_fraction", e.step_fraction},
                   {"spin1_adjudication", c.oracle->spin1_adjudication}};
  }
  return j;
}

}  // namespace ndepr
