#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "iongate/gate.hpp"

using namespace iongate;

namespace {

struct Baseline {
  IonChain chain = solve_for_spacing(-6.1, 10e-6, PhysicalParams{}, 120, 10);
  ModeSet modes = diagonalize(chain, Axis::transverse_x);
  ThermalState thermal = thermal_state(modes, chain.params);
  double tau0 = constants::two_pi / chain.params.omega_x;
};

const Baseline& baseline() {
  static const Baseline b;
  return b;
}

GateProblem problem(double mu_rel, double periods, std::size_t segments, IonPair pair = {}) {
  const auto& b = baseline();
  return build_gate_problem(pair, b.chain.params.omega_x * (1.0 + mu_rel), periods * b.tau0, segments, b.modes,
                            b.thermal, b.chain.params);
}

// Two ions with the rocking mode at 0.95 omega_x; a constant pulse of
// omega_x tau = 2 pi 20 at mu = 1.1 omega_x closes every loop.
struct TwoIon {
  PhysicalParams params;
  IonChain chain;
  ModeSet modes;
  ThermalState thermal;
  double tau = 0.0;
  double mu = 0.0;

  TwoIon() {
    const double wx = params.omega_x;
    const double wz = wx * std::sqrt(1.0 - 0.95 * 0.95);
    chain = solve_equilibrium(AxialPotential::harmonic_from_frequency(wz, params), params, 2, std::nullopt, 0);
    modes = diagonalize(chain, Axis::transverse_x);
    thermal = thermal_state(modes, params);
    tau = 20.0 * constants::two_pi / wx;
    mu = 1.1 * wx;
  }
};

}  // namespace

TEST(TwoIonGate, ConstantPulseCloses) {
  const TwoIon t;
  ASSERT_NEAR(t.modes.frequencies[1] / t.params.omega_x, 0.95, 1e-9);
  const auto p = build_gate_problem({1, 2}, t.mu, t.tau, 1, t.modes, t.thermal, t.params);
  const std::vector<double> one{1.0};
  const auto r = evaluate_gate(p, one);
  const double scale = std::abs(segment_alpha_kernel(t.params.omega_x, t.mu, 0.0, 0.25 * t.tau));
  for (const auto& a : r.alpha_first) EXPECT_LT(std::abs(a), 1e-9 * scale);
  for (const auto& a : r.alpha_second) EXPECT_LT(std::abs(a), 1e-9 * scale);
}

TEST(TwoIonGate, SingleSegmentOptimumIsPerfect) {
  const TwoIon t;
  const auto r = optimize_segments({1, 2}, t.mu, t.tau, 1, t.modes, t.thermal, t.params);
  EXPECT_NEAR(std::abs(r.phase), cp_phase, 1e-9);
  EXPECT_LT(r.infidelity_exact, 1e-15);
}

TEST(Gate, ZeroAmplitudesAreTrivial) {
  const auto p = problem(0.0093, 100, 5);
  const auto r = evaluate_gate(p, std::vector<double>(5, 0.0));
  EXPECT_EQ(r.infidelity_exact, 0.0);
  EXPECT_EQ(r.infidelity_quadratic, 0.0);
  EXPECT_EQ(r.phase, 0.0);
}

TEST(Gate, NonzeroAmplitudesHaveInfidelity) {
  const auto p = problem(0.0093, 100, 5);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1e6);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> a(5);
    for (double& x : a) x = n(rng);
    EXPECT_GT(evaluate_gate(p, a).infidelity_exact, 0.0);
  }
}

TEST(Gate, GlobalSignInvariance) {
  const auto p = problem(0.0093, 100, 5);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1e6);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> a(5), b(5);
    for (int s = 0; s < 5; ++s) b[s] = -(a[s] = n(rng));
    const auto ra = evaluate_gate(p, a), rb = evaluate_gate(p, b);
    EXPECT_NEAR(ra.infidelity_exact, rb.infidelity_exact, 1e-14 * ra.infidelity_exact);
    EXPECT_NEAR(ra.phase, rb.phase, 1e-12 * std::abs(ra.phase));
  }
}

TEST(Gate, ExactApproachesQuadraticForWeakDrive) {
  const auto p = problem(0.0093, 100, 5);
  std::vector<double> a{1.0, -0.4, 0.7, 0.2, -1.1};
  const double s0 = 1.0 / std::sqrt(evaluate_gate(p, a).infidelity_quadratic);
  double last_gap = 1.0;
  for (double s : {1e-1, 1e-2, 1e-3}) {
    std::vector<double> b = a;
    for (double& x : b) x *= s * s0;
    const auto r = evaluate_gate(p, b);
    const double gap = std::abs(r.infidelity_exact / r.infidelity_quadratic - 1.0);
    EXPECT_LT(gap, last_gap);
    last_gap = gap;
  }
  EXPECT_LT(last_gap, 1e-5);
}

TEST(Gate, SwappingTargetsChangesNothing) {
  const auto a = optimize_segments(problem(0.0093, 100, 5, {59, 62}));
  const auto b = optimize_segments(problem(0.0093, 100, 5, {62, 59}));
  EXPECT_NEAR(a.infidelity_exact, b.infidelity_exact, 1e-12 * a.infidelity_exact);
  for (int s = 0; s < 5; ++s) EXPECT_NEAR(a.schedule.amplitudes[s], b.schedule.amplitudes[s], 1e-9 * std::abs(a.schedule.amplitudes[s]) + 1e-6);
}

TEST(Gate, OptimumBeatsRandomFeasiblePulses) {
  const auto p = problem(0.0093, 100, 5);
  const auto best = optimize_segments(p);
  EXPECT_NEAR(std::abs(best.phase), cp_phase, 1e-9);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  int tried = 0;
  while (tried < 100) {
    std::vector<double> a(5);
    for (double& x : a) x = n(rng);
    const double phase = evaluate_gate(p, a).phase;
    if (std::abs(phase) < 1e-300) continue;
    for (double& x : a) x *= std::sqrt(cp_phase / std::abs(phase));
    const auto r = evaluate_gate(p, a);
    ASSERT_NEAR(std::abs(r.phase), cp_phase, 1e-9);
    EXPECT_LE(best.infidelity_exact, r.infidelity_exact);
    ++tried;
  }
}

TEST(Gate, AcceptedOptimizationsMeetThePhase) {
  const auto& b = baseline();
  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(b.chain.params.omega_x * (1.0 + 0.001 * i));
  const auto scan = scan_detuning({59, 62}, grid, 100 * b.tau0, 5, b.modes, b.thermal, b.chain.params);
  for (const auto& pt : scan) {
    if (!pt.result) continue;
    EXPECT_NEAR(std::abs(pt.result->phase), cp_phase, 1e-9) << pt.detuning;
  }
}

TEST(Gate, ScanIsDeterministicAcrossThreads) {
  const auto& b = baseline();
  std::vector<double> grid;
  for (int i = 0; i < 12; ++i) grid.push_back(b.chain.params.omega_x * (1.0 + 0.002 * i));
  const auto one = scan_detuning({59, 62}, grid, 50 * b.tau0, 5, b.modes, b.thermal, b.chain.params, 1);
  const auto four = scan_detuning({59, 62}, grid, 50 * b.tau0, 5, b.modes, b.thermal, b.chain.params, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(one[i].detuning, four[i].detuning);
    EXPECT_EQ(one[i].infidelity, four[i].infidelity);
  }
}

TEST(Gate, RejectsBadProblems) {
  const auto& b = baseline();
  const auto& p = b.chain.params;
  EXPECT_THROW(build_gate_problem({5, 62}, p.omega_x, b.tau0, 5, b.modes, b.thermal, p), ConfigError);
  EXPECT_THROW(build_gate_problem({60, 60}, p.omega_x, b.tau0, 5, b.modes, b.thermal, p), ConfigError);
  EXPECT_THROW(build_gate_problem({59, 62}, p.omega_x, -1.0, 5, b.modes, b.thermal, p), ConfigError);
  EXPECT_THROW(build_gate_problem({59, 62}, p.omega_x, b.tau0, 0, b.modes, b.thermal, p), ConfigError);
  const auto ax = diagonalize(b.chain, Axis::axial);
  EXPECT_THROW(build_gate_problem({59, 62}, p.omega_x, b.tau0, 5, ax, thermal_state(ax, p), p), ConfigError);
  const auto pr = problem(0.0093, 100, 5);
  EXPECT_THROW(evaluate_gate(pr, std::vector<double>(4, 1.0)), ConfigError);
}

TEST(Truncation, FullWindowReproducesFullChain) {
  const auto& b = baseline();
  const auto sub = truncated_modes(b.chain, 1, 120);
  for (std::size_t k = 0; k < sub.size(); ++k) EXPECT_DOUBLE_EQ(sub.frequencies[k], b.modes.frequencies[k]);
  const auto t = truncated_chain_gate({59, 62}, 120, b.chain, b.chain.params.omega_x * 1.0093, 100 * b.tau0, 5);
  EXPECT_EQ(t.first_free, 1u);
  EXPECT_EQ(t.last_free, 120u);
  EXPECT_LT(t.amplitude_distance, 1e-9);
}

TEST(Truncation, WindowPlacement) {
  EXPECT_EQ(free_window({59, 62}, 8, 120), std::make_pair(std::size_t{57}, std::size_t{64}));
  EXPECT_EQ(free_window({59, 62}, 4, 120), std::make_pair(std::size_t{59}, std::size_t{62}));
  EXPECT_THROW(free_window({59, 62}, 2, 120), ConfigError);
  EXPECT_THROW(free_window({59, 62}, 7, 120), ConfigError);
  EXPECT_THROW(free_window({59, 62}, 122, 120), ConfigError);
}

TEST(Truncation, DistanceIgnoresGlobalSign) {
  const std::vector<double> a{1.0, -2.0, 3.0}, b{-1.0, 2.0, -3.0};
  EXPECT_EQ(amplitude_distance(a, b), 0.0);
  const std::vector<double> c{1.1, -2.0, 3.0};
  EXPECT_NEAR(amplitude_distance(c, a), 0.1 / std::sqrt(14.0), 1e-15);
}

TEST(Response, BranchesAreMirrorImages) {
  const auto& b = baseline();
  const auto r = optimize_segments(problem(0.0093, 100, 5));
  const auto up = response_profile(r, b.modes, b.chain.params, {1, 1});
  const auto down = response_profile(r, b.modes, b.chain.params, {-1, -1});
  ASSERT_EQ(up.ions.size(), 120u);
  for (std::size_t n = 0; n < up.ions.size(); ++n) {
    EXPECT_NEAR(up.max_displacement[n], down.max_displacement[n], 1e-12 * up.max_displacement[n] + 1e-30);
  }
  EXPECT_NEAR(0.5 * (up.normalized[58] + up.normalized[61]), 1.0, 1e-12);
}

TEST(Response, DecaysAwayFromTargets) {
  const auto& b = baseline();
  const auto r = optimize_segments(problem(0.0093, 500, 5));
  const auto prof = response_profile(r, b.modes, b.chain.params);
  EXPECT_LT(prof.normalized[53], 0.1);
  EXPECT_LT(prof.normalized[66], 0.1);
  EXPECT_LT(prof.normalized[10], 1e-3);
}
