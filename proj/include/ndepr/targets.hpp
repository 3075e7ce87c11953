#pragma once

// Target spin species: hyperfine-coupled vanadyl (S = 1/2, I = 7/2) and
// phenomenological line lists such as the P1 center. Every target is
// reduced to a list of effective two-level transitions for the rate model.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ndepr/error.hpp"
#include "ndepr/linalg.hpp"
#include "ndepr/spin.hpp"

namespace ndepr {

struct HyperfineModel {
  double electron_spin = 0.5;
  double nuclear_spin = 3.5;
  double a_perp = 208.5;  // MHz
  double a_par = 547.0;   // MHz
};

/// Literature vanadyl constants for [VO(H2O)5]2+.
inline HyperfineModel vanadyl(double a_perp = 208.5, double a_par = 547.0) {
  return HyperfineModel{0.5, 3.5, a_perp, a_par};
}

/// (T, m_T) in the coupled basis T = S + I.
struct CoupledLabel {
  double total = 0.0;
  double projection = 0.0;
  bool operator==(const CoupledLabel&) const = default;
};

struct Transition {
  double freq = 0.0;  // MHz
  CoupledLabel lower_label;
  CoupledLabel upper_label;
  int delta_mT = 0;
  double intensity_weight = 0.0;    // sum_alpha |<u|S_alpha|l>|^2 over sublevel pairs
  double intensity_weight_z = 0.0;  // alpha = z share of the above
  int degeneracy = 1;               // contributing sublevel pairs
};

/// Which target-spin components count towards a transition's strength.
enum class IntensityPolicy {
  kAllComponents,  // x, y and z (default)
  kTransverseOnly, // drop the z share (no axial drive contribution)
};

struct TargetSpectrumModel {
  std::vector<Transition> transitions;  // sorted by freq
  double gamma2_target = 0.0;           // MHz

  /// Transition frequencies merged within `tol_mhz`.
  std::vector<double> distinct_frequencies(double tol_mhz = 1e-6) const {
    std::vector<double> out;
    for (const auto& t : transitions) {
      if (out.empty() || t.freq - out.back() > tol_mhz) out.push_back(t.freq);
    }
    return out;
  }
};

namespace detail {

inline void require_spins(const HyperfineModel& model) {
  if (!is_half_integer_spin(model.electron_spin) || !is_half_integer_spin(model.nuclear_spin)) {
    throw InvalidInput("hyperfine model spins must be positive multiples of 1/2");
  }
}

inline void require_vanadyl_shape(const HyperfineModel& model, const char* who) {
  require_spins(model);
  if (std::abs(model.electron_spin - 0.5) > 1e-12) {
    throw InvalidInput(std::string(who) + ": closed forms require electron spin 1/2");
  }
}

}  // namespace detail

/// A_perp (Sx Ix + Sy Iy) + A_par Sz Iz on the product space (electron factor first).
/// Throws if the supplied operators do not match the model's spins.
inline ComplexMatrix hyperfine_hamiltonian(const HyperfineModel& model, const SpinOps& s_ops,
                                           const SpinOps& i_ops) {
  if (s_ops.dim() != static_cast<std::size_t>(std::lround(2 * model.electron_spin)) + 1 ||
      i_ops.dim() != static_cast<std::size_t>(std::lround(2 * model.nuclear_spin)) + 1) {
    std::ostringstream msg;
    msg << "hyperfine_hamiltonian: operator dimensions (" << s_ops.dim() << ", " << i_ops.dim()
        << ") do not match spins (" << model.electron_spin << ", " << model.nuclear_spin << ")";
    throw InvalidInput(msg.str());
  }
  return model.a_perp * (kron(s_ops.sx, i_ops.sx) + kron(s_ops.sy, i_ops.sy)) +
         model.a_par * kron(s_ops.sz, i_ops.sz);
}

inline ComplexMatrix hyperfine_hamiltonian(const HyperfineModel& model) {
  detail::require_spins(model);
  return hyperfine_hamiltonian(model, spin_operators(model.electron_spin),
                               spin_operators(model.nuclear_spin));
}

/// The 16 x 16 vanadyl Hamiltonian; rejects models other than S = 1/2, I = 7/2.
inline ComplexMatrix vanadyl_hamiltonian(const HyperfineModel& model) {
  if (std::abs(model.electron_spin - 0.5) > 1e-12 || std::abs(model.nuclear_spin - 3.5) > 1e-12) {
    throw InvalidInput("vanadyl_hamiltonian: model must have S = 1/2 and I = 7/2");
  }
  return hyperfine_hamiltonian(model);
}

/// How the analytic 2x2-block energies are evaluated.
enum class EnergyFormula {
  kAsPrinted,            // (-A_par +/- sqrt(m^2 A_par^2 + (16 - m^2) A_perp^2)) / 4
  kBlockDiagonalization, // -A_par/4 +/- sqrt(m^2 A_par^2 + (16 - m^2) A_perp^2) / 2
};

/// Upper (T = I + 1/2) and lower (T = I - 1/2) energies of the fixed-m_T
/// block. The stretched states |m_T| = I + 1/2 form a 1x1 block, so only
/// `e_plus` is set there.
struct BlockEnergies {
  double e_plus = 0.0;
  std::optional<double> e_minus;
};

/// Analytic energies for electron spin 1/2. The "16" of the I = 7/2 case is
/// (I + 1/2)^2 in general.
inline BlockEnergies closed_form_energies(int m_T, const HyperfineModel& model,
                                          EnergyFormula formula = EnergyFormula::kBlockDiagonalization) {
  detail::require_vanadyl_shape(model, "closed_form_energies");
  const double top = model.nuclear_spin + 0.5;
  const double m = m_T;
  if (std::abs(m) > top + 1e-12) {
    throw InvalidInput("closed_form_energies: |m_T| exceeds I + 1/2");
  }
  const double n2 = top * top;
  const double root = std::sqrt(m * m * model.a_par * model.a_par +
                                (n2 - m * m) * model.a_perp * model.a_perp);
  const bool stretched = std::abs(std::abs(m) - top) < 1e-12;
  BlockEnergies out;
  if (formula == EnergyFormula::kAsPrinted) {
    out.e_plus = (-model.a_par + root) / 4.0;
    if (!stretched) out.e_minus = (-model.a_par - root) / 4.0;
  } else {
    out.e_plus = -model.a_par / 4.0 + root / 2.0;
    if (!stretched) out.e_minus = -model.a_par / 4.0 - root / 2.0;
  }
  return out;
}

/// Vanadyl lines that carry analytic center expressions.
enum class HyperfinePeak { kPeak1, kPeak2, kPeak10 };

inline std::string to_string(HyperfinePeak p) {
  switch (p) {
    case HyperfinePeak::kPeak1: return "peak1";
    case HyperfinePeak::kPeak2: return "peak2";
    case HyperfinePeak::kPeak10: return "peak10";
  }
  return "?";
}

/// Line center in MHz: 4 A_perp, sqrt(A_par^2 + 15 A_perp^2), or the mean of
/// that and sqrt(4 A_par^2 + 12 A_perp^2).
inline double vanadyl_peak_center(HyperfinePeak peak, double a_perp, double a_par) {
  const double r1 = std::sqrt(a_par * a_par + 15.0 * a_perp * a_perp);
  switch (peak) {
    case HyperfinePeak::kPeak1: return 4.0 * a_perp;
    case HyperfinePeak::kPeak2: return r1;
    case HyperfinePeak::kPeak10: {
      const double r2 = std::sqrt(4.0 * a_par * a_par + 12.0 * a_perp * a_perp);
      return 0.5 * (r1 + r2);
    }
  }
  return 0.0;
}

/// (d center / d A_perp, d center / d A_par)
inline std::array<double, 2> vanadyl_peak_center_gradient(HyperfinePeak peak, double a_perp,
                                                          double a_par) {
  const double r1 = std::sqrt(a_par * a_par + 15.0 * a_perp * a_perp);
  switch (peak) {
    case HyperfinePeak::kPeak1: return {4.0, 0.0};
    case HyperfinePeak::kPeak2: return {15.0 * a_perp / r1, a_par / r1};
    case HyperfinePeak::kPeak10: {
      const double r2 = std::sqrt(4.0 * a_par * a_par + 12.0 * a_perp * a_perp);
      return {0.5 * (15.0 * a_perp / r1 + 12.0 * a_perp / r2),
              0.5 * (a_par / r1 + 4.0 * a_par / r2)};
    }
  }
  return {0.0, 0.0};
}

/// Eigenstates of a hyperfine Hamiltonian with (T, m_T) labels.
struct LabeledEigensystem {
  std::vector<double> energies;          // ascending
  ComplexMatrix vectors;                 // columns, degenerate spaces rotated to Tz eigenstates
  std::vector<CoupledLabel> labels;
  std::vector<std::size_t> level_of;     // state index -> distinct level index
  std::vector<double> level_energies;    // distinct levels, ascending
};

/// Diagonalizes the hyperfine Hamiltonian and labels every state.
///
/// Degenerate eigenspaces are rotated onto eigenvectors of Tz (which commutes
/// with the axial Hamiltonian), m_T is the rounded <Tz>, and T comes from
/// ranking <T^2> inside each m_T sector with energy as the tie-break.
inline LabeledEigensystem labeled_eigensystem(const HyperfineModel& model) {
  detail::require_spins(model);
  const SpinOps s = spin_operators(model.electron_spin);
  const SpinOps i = spin_operators(model.nuclear_spin);
  const ComplexMatrix h = hyperfine_hamiltonian(model, s, i);
  const std::size_t n = h.dim();
  const ComplexMatrix e_s = s.identity(), e_i = i.identity();
  const ComplexMatrix tx = kron(s.sx, e_i) + kron(e_s, i.sx);
  const ComplexMatrix ty = kron(s.sy, e_i) + kron(e_s, i.sy);
  const ComplexMatrix tz = kron(s.sz, e_i) + kron(e_s, i.sz);
  const ComplexMatrix t2 = tx * tx + ty * ty + tz * tz;

  EigenSystem es = eigh(h);
  const double tol = 1e-9 * std::max(1.0, h.frobenius_norm());

  LabeledEigensystem out;
  out.energies = es.values;
  out.vectors = es.vectors;
  out.level_of.assign(n, 0);

  // Group degenerate states and resolve each group in the Tz basis.
  std::size_t start = 0;
  while (start < n) {
    std::size_t stop = start + 1;
    while (stop < n && es.values[stop] - es.values[start] < tol) ++stop;
    const std::size_t k = stop - start;
    const double level_e = es.values[start];
    out.level_energies.push_back(level_e);
    for (std::size_t a = start; a < stop; ++a) out.level_of[a] = out.level_energies.size() - 1;
    if (k > 1) {
      ComplexMatrix block(k);
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = 0; b < k; ++b)
          block(a, b) = matrix_element(es.vectors.column(start + a), tz, es.vectors.column(start + b));
      const EigenSystem sub = eigh(block, 1e-8);
      ComplexMatrix rotated(n);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t b = 0; b < k; ++b) {
          cplx acc = 0.0;
          for (std::size_t a = 0; a < k; ++a) acc += es.vectors(r, start + a) * sub.vectors(a, b);
          rotated(r, b) = acc;
        }
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t b = 0; b < k; ++b) out.vectors(r, start + b) = rotated(r, b);
    }
    start = stop;
  }

  // m_T from <Tz>, T estimate from <T^2>.
  std::vector<double> m_of(n), t_est(n);
  for (std::size_t a = 0; a < n; ++a) {
    const auto va = out.vectors.column(a);
    m_of[a] = 0.5 * std::round(2.0 * matrix_element(va, tz, va).real());
    const double t2v = matrix_element(va, t2, va).real();
    t_est[a] = 0.5 * (-1.0 + std::sqrt(1.0 + 4.0 * std::max(0.0, t2v)));
  }
  out.labels.assign(n, {});
  const double t_max = model.electron_spin + model.nuclear_spin;
  const double t_min = std::abs(model.electron_spin - model.nuclear_spin);
  std::vector<bool> done(n, false);
  for (std::size_t a = 0; a < n; ++a) {
    if (done[a]) continue;
    std::vector<std::size_t> sector;
    for (std::size_t b = 0; b < n; ++b)
      if (!done[b] && std::abs(m_of[b] - m_of[a]) < 1e-9) sector.push_back(b);
    std::stable_sort(sector.begin(), sector.end(), [&](std::size_t x, std::size_t y) {
      if (std::abs(t_est[x] - t_est[y]) > 1e-9) return t_est[x] > t_est[y];
      return out.energies[x] > out.energies[y];
    });
    double t_value = t_max;
    for (std::size_t b : sector) {
      const double t_assigned = std::max(t_value, std::max(t_min, std::abs(m_of[b])));
      out.labels[b] = {t_assigned, m_of[b]};
      done[b] = true;
      t_value -= 1.0;
    }
  }
  return out;
}

/// Enumerates every level pair connected under the selection rule
/// |Delta m_T| <= 1. Strengths are summed |<u|S_alpha|l>|^2 of the electron
/// spin (the dipole-coupled moment) over all contributing sublevel pairs.
inline TargetSpectrumModel transition_table(const HyperfineModel& model, double gamma2_target = 0.0) {
  const LabeledEigensystem les = labeled_eigensystem(model);
  const SpinOps s = spin_operators(model.electron_spin);
  const ComplexMatrix e_i = ComplexMatrix::identity(static_cast<std::size_t>(std::lround(2 * model.nuclear_spin)) + 1);
  const std::array<ComplexMatrix, 3> s_full = {kron(s.sx, e_i), kron(s.sy, e_i), kron(s.sz, e_i)};
  const std::size_t n = les.energies.size();
  const std::size_t n_levels = les.level_energies.size();

  TargetSpectrumModel out;
  out.gamma2_target = gamma2_target;
  for (std::size_t lo = 0; lo < n_levels; ++lo) {
    for (std::size_t hi = lo + 1; hi < n_levels; ++hi) {
      Transition t;
      t.freq = les.level_energies[hi] - les.level_energies[lo];
      bool allowed = false;
      double best = -1.0;
      int contributing = 0;
      for (std::size_t a = 0; a < n; ++a) {
        if (les.level_of[a] != lo) continue;
        for (std::size_t b = 0; b < n; ++b) {
          if (les.level_of[b] != hi) continue;
          const double dm = les.labels[b].projection - les.labels[a].projection;
          if (std::abs(dm) > 1.0 + 1e-9) continue;
          allowed = true;
          const auto va = les.vectors.column(a), vb = les.vectors.column(b);
          double w_xyz = 0.0, w_z = 0.0;
          for (int alpha = 0; alpha < 3; ++alpha) {
            const double w = std::norm(matrix_element(vb, s_full[alpha], va));
            w_xyz += w;
            if (alpha == 2) w_z = w;
          }
          t.intensity_weight += w_xyz;
          t.intensity_weight_z += w_z;
          if (w_xyz > 1e-12) ++contributing;
          // Representative labels: prefer m_T >= 0 on the lower level.
          const double rank = w_xyz + (les.labels[a].projection >= 0.0 ? 10.0 : 0.0);
          if (rank > best) {
            best = rank;
            t.lower_label = les.labels[a];
            t.upper_label = les.labels[b];
            t.delta_mT = static_cast<int>(std::lround(dm));
          }
        }
      }
      if (!allowed) continue;
      t.degeneracy = std::max(contributing, 1);
      out.transitions.push_back(t);
    }
  }
  std::stable_sort(out.transitions.begin(), out.transitions.end(),
                   [](const Transition& a, const Transition& b) { return a.freq < b.freq; });
  return out;
}

/// Effective two-level picture of one transition.
struct TwoLevelTarget {
  double omega = 0.0;          // MHz
  double coupling_scale = 1.0; // multiplies d_zj; a bare spin-1/2 gives 1
};

/// A free spin-1/2 has transverse strength |<up|Sx|dn>|^2 + |<up|Sy|dn>|^2 = 1/2,
/// so coupling_scale = sqrt(weight / (1/2)) rescales the dipolar coupling to
/// the transition's strength.
inline TwoLevelTarget two_level_reduction(const Transition& t,
                                          IntensityPolicy policy = IntensityPolicy::kAllComponents) {
  double w = t.intensity_weight;
  if (policy == IntensityPolicy::kTransverseOnly) w -= t.intensity_weight_z;
  return {t.freq, std::sqrt(std::max(0.0, 2.0 * w))};
}

/// Target defined directly by its line positions, each with the strength of
/// a bare spin-1/2 transition (coupling_scale 1).
inline TargetSpectrumModel p1_target(const std::vector<double>& freqs, double gamma2_target = 0.0) {
  if (freqs.empty()) throw InvalidInput("p1_target: frequency list is empty");
  TargetSpectrumModel out;
  out.gamma2_target = gamma2_target;
  for (double f : freqs) {
    if (!(f > 0.0)) throw InvalidInput("p1_target: frequencies must be positive, got " + std::to_string(f));
    Transition t;
    t.freq = f;
    t.lower_label = {0.5, -0.5};
    t.upper_label = {0.5, 0.5};
    t.delta_mT = 1;
    t.intensity_weight = 0.5;
    out.transitions.push_back(t);
  }
  std::stable_sort(out.transitions.begin(), out.transitions.end(),
                   [](const Transition& a, const Transition& b) { return a.freq < b.freq; });
  return out;
}

/// One row of the analytic-vs-numerical energy comparison.
struct ClosedFormCheck {
  int m_T = 0;
  BlockEnergies printed;
  BlockEnergies block;
  bool printed_matches = false;
  bool block_matches = false;
};

/// Compares both analytic energy expressions with the eigensolver for every
/// m_T >= 0. A formula "matches" when each of its energies lies within
/// `rtol * max|E|` of a numerical eigenvalue.
inline std::vector<ClosedFormCheck> closed_form_check(const HyperfineModel& model, double rtol = 1e-9) {
  detail::require_vanadyl_shape(model, "closed_form_check");
  const EigenSystem es = eigh(hyperfine_hamiltonian(model));
  double scale = 0.0;
  for (double e : es.values) scale = std::max(scale, std::abs(e));
  const auto near = [&](double e) {
    for (double v : es.values)
      if (std::abs(v - e) <= rtol * std::max(scale, 1.0)) return true;
    return false;
  };
  const auto ok = [&](const BlockEnergies& b) {
    return near(b.e_plus) && (!b.e_minus || near(*b.e_minus));
  };
  std::vector<ClosedFormCheck> rows;
  const int top = static_cast<int>(std::lround(model.nuclear_spin + 0.5));
  for (int m = 0; m <= top; ++m) {
    ClosedFormCheck row;
    row.m_T = m;
    row.printed = closed_form_energies(m, model, EnergyFormula::kAsPrinted);
    row.block = closed_form_energies(m, model, EnergyFormula::kBlockDiagonalization);
    row.printed_matches = ok(row.printed);
    row.block_matches = ok(row.block);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ndepr
