#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ndepr/targets.hpp"

using namespace ndepr;

namespace {

std::vector<double> eigenvalues(const HyperfineModel& m) { return eigh(vanadyl_hamiltonian(m)).values; }

std::vector<double> distinct(std::vector<double> v, double tol) {
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (double x : v)
    if (out.empty() || x - out.back() > tol) out.push_back(x);
  return out;
}

// Level energies from the 2x2 blocks at fixed m_T, built by hand in the
// product basis (|+1/2, m_T - 1/2>, |-1/2, m_T + 1/2>): diagonal A_par m_S m_I,
// off-diagonal (A_perp/2) <I+>. Independent of the library's closed forms.
std::vector<double> hand_block_levels(double ap, double aa) {
  std::vector<double> levels;
  for (int m2 = -8; m2 <= 8; m2 += 2) {  // 2 m_T
    const double mt = m2 / 2.0;
    const double mi_up = mt - 0.5, mi_dn = mt + 0.5;
    const bool has_up = std::abs(mi_up) <= 3.5, has_dn = std::abs(mi_dn) <= 3.5;
    const double h11 = aa * 0.5 * mi_up, h22 = -aa * 0.5 * mi_dn;
    if (has_up && has_dn) {
      // <+1/2, mi_up| (A_perp/2)(S+ I- + S- I+) |-1/2, mi_dn> = (A_perp/2) sqrt(I(I+1) - mi_dn(mi_dn-1))
      const double off = 0.5 * ap * std::sqrt(3.5 * 4.5 - mi_dn * (mi_dn - 1.0));
      const double mean = 0.5 * (h11 + h22), half = std::sqrt(0.25 * (h11 - h22) * (h11 - h22) + off * off);
      levels.push_back(mean + half);
      levels.push_back(mean - half);
    } else if (has_up) {
      levels.push_back(h11);
    } else if (has_dn) {
      levels.push_back(h22);
    }
  }
  return levels;
}

}  // namespace

TEST(VanadylHamiltonian, IsotropicCouplingIdentity) {
  const double a = 100.0;
  const auto ev = eigenvalues(vanadyl(a, a));
  int low = 0, high = 0;
  for (double e : ev) {
    if (std::abs(e + 9.0 * a / 4.0) < 1e-9) ++low;
    if (std::abs(e - 7.0 * a / 4.0) < 1e-9) ++high;
  }
  EXPECT_EQ(low, 7);
  EXPECT_EQ(high, 9);
}

TEST(VanadylHamiltonian, AxialOnlyIsDiagonal) {
  const double aa = 547.0;
  const auto lv = distinct(eigenvalues(vanadyl(0.0, aa)), 1e-9);
  std::vector<double> expect;
  for (double k : {-7.0, -5.0, -3.0, -1.0, 1.0, 3.0, 5.0, 7.0}) expect.push_back(k * aa / 4.0);
  ASSERT_EQ(lv.size(), expect.size());
  for (std::size_t i = 0; i < lv.size(); ++i) EXPECT_NEAR(lv[i], expect[i], 1e-9);
}

TEST(VanadylHamiltonian, NineLevelsWithDoubleDegeneracy) {
  const auto les = labeled_eigensystem(vanadyl(208.5, 547.0));
  EXPECT_EQ(les.energies.size(), 16u);
  EXPECT_EQ(les.level_energies.size(), 9u);
  std::vector<int> mult(9, 0);
  for (auto l : les.level_of) ++mult[l];
  int total = 0;
  for (std::size_t lvl = 0; lvl < 9; ++lvl) {
    total += mult[lvl];
    bool has_m0 = false;
    for (std::size_t a = 0; a < 16; ++a)
      if (les.level_of[a] == lvl && les.labels[a].projection == 0.0) has_m0 = true;
    EXPECT_EQ(mult[lvl], has_m0 ? 1 : 2) << "level " << lvl;
  }
  EXPECT_EQ(total, 16);
}

TEST(VanadylHamiltonian, TracelessAndHermitian) {
  for (auto [ap, aa] : {std::pair{208.5, 547.0}, std::pair{195.0, 579.0}, std::pair{10.0, -30.0}}) {
    const auto h = vanadyl_hamiltonian(vanadyl(ap, aa));
    EXPECT_LT(std::abs(h.trace()), 1e-12);
    EXPECT_EQ(hermiticity_residual(h), 0.0);
  }
}

TEST(VanadylHamiltonian, MatchesHandDerivedBlocks) {
  const auto ev = eigenvalues(vanadyl(208.5, 547.0));
  auto hand = hand_block_levels(208.5, 547.0);
  std::sort(hand.begin(), hand.end());
  ASSERT_EQ(hand.size(), 16u);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(ev[i], hand[i], 1e-9 * 800.0);
}

TEST(VanadylHamiltonian, HellmannFeynman) {
  const auto s = spin_operators(0.5), i = spin_operators(3.5);
  const auto transverse = kron(s.sx, i.sx) + kron(s.sy, i.sy);
  const double ap = 208.5, aa = 547.0, h = 1e-4;
  const auto les = labeled_eigensystem(vanadyl(ap, aa));
  const auto up = eigenvalues(vanadyl(ap + h, aa)), dn = eigenvalues(vanadyl(ap - h, aa));
  for (std::size_t k = 0; k < 16; ++k) {
    const auto v = les.vectors.column(k);
    const double hf = matrix_element(v, transverse, v).real();
    const double fd = (up[k] - dn[k]) / (2 * h);
    EXPECT_NEAR(fd, hf, 1e-6 * std::max(1.0, std::abs(hf))) << "state " << k;
  }
}

TEST(VanadylHamiltonian, RejectsOtherSpins) {
  HyperfineModel m = vanadyl();
  m.nuclear_spin = 2.5;
  EXPECT_THROW(vanadyl_hamiltonian(m), InvalidInput);
  m.nuclear_spin = 3.5;
  const auto s = spin_operators(0.5), wrong = spin_operators(1.0);
  EXPECT_THROW(hyperfine_hamiltonian(m, s, wrong), InvalidInput);
}

TEST(ClosedForm, StretchedStateAndCentralBlock) {
  const auto m = vanadyl(208.5, 547.0);
  const auto top = closed_form_energies(4, m);
  EXPECT_NEAR(top.e_plus, 7.0 * 547.0 / 4.0, 1e-12);
  EXPECT_FALSE(top.e_minus.has_value());
  const auto mid = closed_form_energies(0, m);
  EXPECT_NEAR(mid.e_plus, 280.25, 1e-9);
  EXPECT_NEAR(*mid.e_minus, -553.75, 1e-9);
  EXPECT_THROW(closed_form_energies(5, m), InvalidInput);
}

TEST(ClosedForm, PrintedVariantFailsAtStretchedStateBlockVariantMatches) {
  const auto rows = closed_form_check(vanadyl(208.5, 547.0));
  ASSERT_EQ(rows.size(), 5u);
  for (const auto& r : rows) EXPECT_TRUE(r.block_matches) << "m_T=" << r.m_T;
  EXPECT_FALSE(rows[4].printed_matches);
  EXPECT_NEAR(rows[4].printed.e_plus, 3.0 * 547.0 / 4.0, 1e-12);
}

TEST(TransitionTable, TwelveDistinctLines) {
  const auto tab = transition_table(vanadyl(208.5, 547.0));
  EXPECT_EQ(tab.distinct_frequencies(1e-6).size(), 12u);
  EXPECT_TRUE(std::is_sorted(tab.transitions.begin(), tab.transitions.end(),
                             [](const Transition& a, const Transition& b) { return a.freq < b.freq; }));
  for (const auto& t : tab.transitions) {
    EXPECT_GT(t.freq, 0.0);
    EXPECT_LE(std::abs(t.delta_mT), 1);
    EXPECT_GE(t.intensity_weight, t.intensity_weight_z);
    EXPECT_GE(t.degeneracy, 1);
  }
}

TEST(TransitionTable, FrequenciesAreDifferencesOfHandDerivedLevels) {
  const auto lv = distinct(hand_block_levels(208.5, 547.0), 1e-6);
  std::vector<double> diffs;
  for (std::size_t i = 0; i < lv.size(); ++i)
    for (std::size_t j = i + 1; j < lv.size(); ++j) diffs.push_back(lv[j] - lv[i]);
  for (const auto& t : transition_table(vanadyl(208.5, 547.0)).transitions) {
    double best = 1e300;
    for (double d : diffs) best = std::min(best, std::abs(d - t.freq));
    EXPECT_LT(best, 1e-6) << t.freq;
  }
}

TEST(TransitionTable, PeakFormulasMatchTable) {
  for (auto [ap, aa] : {std::pair{208.5, 547.0}, std::pair{195.0, 579.0}}) {
    const auto freqs = transition_table(vanadyl(ap, aa)).distinct_frequencies();
    for (auto pk : {HyperfinePeak::kPeak1, HyperfinePeak::kPeak2, HyperfinePeak::kPeak10}) {
      const double c = vanadyl_peak_center(pk, ap, aa);
      double best = 1e300;
      for (double f : freqs) best = std::min(best, std::abs(f - c));
      EXPECT_LT(best, 0.01) << to_string(pk) << " A=" << ap << "," << aa;
    }
  }
}

TEST(TransitionTable, PeakFormulaValues) {
  EXPECT_NEAR(vanadyl_peak_center(HyperfinePeak::kPeak1, 195, 579), 780.0, 1e-9);
  EXPECT_NEAR(vanadyl_peak_center(HyperfinePeak::kPeak2, 195, 579), 951.6, 0.05);
  EXPECT_NEAR(vanadyl_peak_center(HyperfinePeak::kPeak10, 195, 579), 1146.1, 0.05);
  EXPECT_NEAR(vanadyl_peak_center(HyperfinePeak::kPeak1, 208.5, 547), 834.0, 1e-9);
  EXPECT_NEAR(vanadyl_peak_center(HyperfinePeak::kPeak2, 208.5, 547), 975.3, 0.05);
  EXPECT_NEAR(vanadyl_peak_center(HyperfinePeak::kPeak10, 208.5, 547), 1143.1, 0.05);
}

TEST(TransitionTable, PeakGradientMatchesFiniteDifferences) {
  const double ap = 195.0, aa = 579.0, h = 1e-4;
  for (auto pk : {HyperfinePeak::kPeak1, HyperfinePeak::kPeak2, HyperfinePeak::kPeak10}) {
    const auto g = vanadyl_peak_center_gradient(pk, ap, aa);
    const double fd_p = (vanadyl_peak_center(pk, ap + h, aa) - vanadyl_peak_center(pk, ap - h, aa)) / (2 * h);
    const double fd_a = (vanadyl_peak_center(pk, ap, aa + h) - vanadyl_peak_center(pk, ap, aa - h)) / (2 * h);
    EXPECT_NEAR(g[0], fd_p, 1e-6 * std::max(1.0, std::abs(fd_p)));
    EXPECT_NEAR(g[1], fd_a, 1e-6 * std::max(1.0, std::abs(fd_a)));
  }
}

TEST(TransitionTable, ShiftInvariance) {
  // Adding a multiple of the identity moves every level but no line.
  const auto m = vanadyl(208.5, 547.0);
  const auto h = vanadyl_hamiltonian(m);
  const auto a = eigh(h).values, b = eigh(h + ComplexMatrix::identity(16) * 1234.5).values;
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(a[j] - a[i], b[j] - b[i], 1e-9);
}

TEST(TransitionTable, StrengthSumRule) {
  // sum over ordered pairs in different levels of |<b|S_a|a>|^2 equals
  // Tr(S_a^2) minus the intra-level part; the table counts each pair once.
  const auto m = vanadyl(208.5, 547.0);
  const auto les = labeled_eigensystem(m);
  const auto s = spin_operators(0.5);
  const auto e8 = ComplexMatrix::identity(8);
  double intra = 0.0;
  for (const auto& op : {kron(s.sx, e8), kron(s.sy, e8), kron(s.sz, e8)})
    for (std::size_t a = 0; a < 16; ++a)
      for (std::size_t b = 0; b < 16; ++b)
        if (les.level_of[a] == les.level_of[b])
          intra += std::norm(matrix_element(les.vectors.column(b), op, les.vectors.column(a)));
  const double total = 3.0 * 16.0 * 0.25;
  double table = 0.0;
  for (const auto& t : transition_table(m).transitions) table += t.intensity_weight;
  EXPECT_NEAR(table, 0.5 * (total - intra), 1e-9);
}

TEST(TransitionTable, DegenerateLinesCarryTwoSublevelPairs) {
  const auto tab = transition_table(vanadyl(208.5, 547.0));
  bool found_two = false;
  for (const auto& t : tab.transitions)
    if (t.degeneracy == 2) found_two = true;
  EXPECT_TRUE(found_two);
  // Line 4 A_perp joins the two non-degenerate m_T = 0 levels: one pair,
  // driven by S_z alone.
  for (const auto& t : tab.transitions) {
    if (std::abs(t.freq - 834.0) < 1e-6) {
      EXPECT_EQ(t.degeneracy, 1);
      EXPECT_EQ(t.delta_mT, 0);
      EXPECT_NEAR(t.intensity_weight, 0.25, 1e-9);
      EXPECT_NEAR(t.intensity_weight_z, 0.25, 1e-9);
    }
  }
}

TEST(TransitionTable, PeakNineRelativeToPeakTen) {
  // Strength of the 904.7 MHz line relative to the 1143.1 MHz line; a
  // qualitative check only (roughly two thirds).
  const auto tab = transition_table(vanadyl(208.5, 547.0));
  double w9 = 0.0, w10 = 0.0;
  for (const auto& t : tab.transitions) {
    if (std::abs(t.freq - 904.67) < 0.01) w9 += t.intensity_weight;
    if (std::abs(t.freq - vanadyl_peak_center(HyperfinePeak::kPeak10, 208.5, 547.0)) < 0.01) w10 += t.intensity_weight;
  }
  ASSERT_GT(w10, 0.0);
  EXPECT_GT(w9 / w10, 0.5);
  EXPECT_LT(w9 / w10, 0.8);
}

TEST(TwoLevelReduction, OmegaAndScale) {
  const auto tab = transition_table(vanadyl(208.5, 547.0));
  for (const auto& t : tab.transitions) {
    const auto r = two_level_reduction(t);
    EXPECT_EQ(r.omega, t.freq);
    EXPECT_NEAR(r.coupling_scale * r.coupling_scale, 2.0 * t.intensity_weight, 1e-12);
    const auto rt = two_level_reduction(t, IntensityPolicy::kTransverseOnly);
    EXPECT_LE(rt.coupling_scale, r.coupling_scale + 1e-15);
  }
  const auto p1 = p1_target({130.0});
  EXPECT_DOUBLE_EQ(two_level_reduction(p1.transitions[0]).coupling_scale, 1.0);
}

TEST(P1Target, Construction) {
  const auto p = p1_target({148.0, 18.0, 130.0});
  ASSERT_EQ(p.transitions.size(), 3u);
  EXPECT_EQ(p.transitions[0].freq, 18.0);
  EXPECT_EQ(p.transitions[2].freq, 148.0);
  const auto q = p1_target({129.9, 148.9});
  EXPECT_EQ(q.transitions[0].freq, 129.9);
  EXPECT_THROW(p1_target({}), InvalidInput);
  EXPECT_THROW(p1_target({130.0, -1.0}), InvalidInput);
  EXPECT_THROW(p1_target({0.0}), InvalidInput);
}
