#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "iongate/modes.hpp"

using namespace iongate;

namespace {

constexpr double wz = constants::two_pi * 1e6;

IonChain harmonic_chain(std::size_t n, std::size_t n_edge = 0) {
  const PhysicalParams p;
  return solve_equilibrium(AxialPotential::harmonic_from_frequency(wz, p), p, n, std::nullopt, n_edge);
}

const IonChain& baseline() {
  static const IonChain chain = solve_for_spacing(-6.1, 10e-6, PhysicalParams{}, 120, 10);
  return chain;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(Modes, TwoIonSpectra) {
  const auto chain = harmonic_chain(2);
  const double wx = chain.params.omega_x;
  const auto ax = diagonalize(chain, Axis::axial);
  EXPECT_LT(rel(ax.frequencies[0], wz), 1e-8);
  EXPECT_LT(rel(ax.frequencies[1], std::sqrt(3.0) * wz), 1e-8);
  const auto tr = diagonalize(chain, Axis::transverse_x);
  EXPECT_LT(rel(tr.frequencies[0], wx), 1e-8);
  EXPECT_LT(rel(tr.frequencies[1], std::sqrt(wx * wx - wz * wz)), 1e-8);
}

TEST(Modes, ThreeIonSpectra) {
  const auto chain = harmonic_chain(3);
  const double wx = chain.params.omega_x;
  const auto ax = diagonalize(chain, Axis::axial);
  EXPECT_LT(rel(ax.frequencies[0], wz), 1e-8);
  EXPECT_LT(rel(ax.frequencies[1], std::sqrt(3.0) * wz), 1e-8);
  EXPECT_LT(rel(ax.frequencies[2], std::sqrt(29.0 / 5.0) * wz), 1e-8);
  const auto tr = diagonalize(chain, Axis::transverse_x);
  EXPECT_LT(rel(tr.frequencies[0], wx), 1e-8);
  EXPECT_LT(rel(tr.frequencies[1], std::sqrt(wx * wx - wz * wz)), 1e-8);
  EXPECT_LT(rel(tr.frequencies[2], std::sqrt(wx * wx - 2.4 * wz * wz)), 1e-8);
}

TEST(Modes, TransverseHessianIdentity) {
  for (std::size_t n : {2u, 7u, 120u}) {
    const IonChain chain = n == 120 ? baseline() : harmonic_chain(n);
    const Eigen::MatrixXd ax = hessian(chain, Axis::axial);
    const Eigen::MatrixXd tr = hessian(chain, Axis::transverse_x);
    Eigen::MatrixXd coulomb = ax;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      coulomb(ii, ii) -= chain.potential.curvature(chain.positions[i]) / chain.params.ion_mass;
    }
    const double wx = chain.params.omega_x;
    const Eigen::MatrixXd expected =
        wx * wx * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) -
        0.5 * coulomb;
    EXPECT_LT((tr - expected).cwiseAbs().maxCoeff(), 1e-12 * tr.cwiseAbs().maxCoeff()) << "n=" << n;
  }
}

TEST(Modes, TraceSumRule) {
  const auto& chain = baseline();
  for (Axis a : {Axis::axial, Axis::transverse_x}) {
    const auto modes = diagonalize(chain, a);
    const double sum = std::accumulate(modes.frequencies.begin(), modes.frequencies.end(), 0.0,
                                       [](double acc, double w) { return acc + w * w; });
    EXPECT_LT(rel(sum, hessian(chain, a).trace()), 1e-10);
  }
}

TEST(Modes, CenterOfMassModeIsExactForHarmonicTraps) {
  for (std::size_t n = 2; n <= 10; ++n) {
    const auto chain = harmonic_chain(n);
    const auto ax = diagonalize(chain, Axis::axial);
    EXPECT_LT(rel(ax.frequencies[0], wz), 1e-9);
    const auto tr = diagonalize(chain, Axis::transverse_x);
    EXPECT_LT(rel(tr.frequencies[0], chain.params.omega_x), 1e-12);
    const double expected = 1.0 / std::sqrt(static_cast<double>(n));
    for (Eigen::Index i = 0; i < ax.vectors.rows(); ++i) {
      EXPECT_NEAR(ax.vectors(i, 0), expected, 1e-8);
      EXPECT_NEAR(tr.vectors(i, 0), expected, 1e-8);
    }
  }
}

TEST(Modes, OrthonormalAndResidualOnBaseline) {
  const auto& chain = baseline();
  for (Axis a : {Axis::axial, Axis::transverse_x, Axis::transverse_y}) {
    const auto modes = diagonalize(chain, a);
    const Eigen::MatrixXd& v = modes.vectors;
    const Eigen::Index n = v.rows();
    EXPECT_LT((v.transpose() * v - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::MatrixXd h = hessian(chain, a);
    Eigen::VectorXd lambda(n);
    for (Eigen::Index k = 0; k < n; ++k) lambda[k] = modes.frequencies[k] * modes.frequencies[k];
    const double resid = (h * v - v * lambda.asDiagonal()).cwiseAbs().maxCoeff();
    EXPECT_LT(resid, 1e-12 * h.cwiseAbs().maxCoeff());
  }
}

TEST(Modes, OrderingAndSignConvention) {
  const auto& chain = baseline();
  const auto tr = diagonalize(chain, Axis::transverse_x);
  const auto ax = diagonalize(chain, Axis::axial);
  EXPECT_TRUE(std::is_sorted(tr.frequencies.rbegin(), tr.frequencies.rend()));
  EXPECT_TRUE(std::is_sorted(ax.frequencies.begin(), ax.frequencies.end()));
  for (const auto* m : {&tr, &ax}) {
    for (Eigen::Index k = 0; k < m->vectors.cols(); ++k) {
      // First entry (lowest index) of largest magnitude is positive; mirror
      // modes tie, so take the first within rounding.
      const auto col = m->vectors.col(k);
      const double largest = col.cwiseAbs().maxCoeff();
      Eigen::Index arg = 0;
      while (std::abs(col[arg]) < largest * (1.0 - 1e-9)) ++arg;
      EXPECT_GT(col[arg], 0.0);
    }
  }
}

TEST(Modes, ZigzagRaisesStabilityError) {
  auto chain = baseline();
  chain.params.omega_x = constants::two_pi * 100e3;
  try {
    diagonalize(chain, Axis::transverse_x);
    FAIL() << "expected StabilityError";
  } catch (const StabilityError& e) {
    EXPECT_LT(e.eigenvalue(), 0.0);
  }
}

TEST(Stability, TwoIonThresholdIsAxialFrequency) {
  EXPECT_LT(rel(stability_threshold_exact(harmonic_chain(2)), wz), 1e-8);
}

TEST(Stability, ExactThresholdMatchesBisection) {
  const auto& chain = baseline();
  const double exact = stability_threshold_exact(chain);
  auto stable = [&](double w) {
    auto c = chain;
    c.params.omega_x = w;
    try {
      diagonalize(c, Axis::transverse_x);
      return true;
    } catch (const StabilityError&) {
      return false;
    }
  };
  double lo = 0.1 * exact, hi = 10.0 * exact;
  ASSERT_FALSE(stable(lo));
  ASSERT_TRUE(stable(hi));
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    (stable(mid) ? hi : lo) = mid;
  }
  EXPECT_LT(rel(hi, exact), 1e-7);
}

TEST(Stability, UniformChainApproachesInfiniteLimitFromBelow) {
  const PhysicalParams p;
  const double d0 = 10e-6;
  IonChain chain;
  chain.params = p;
  chain.n_edge = 0;
  chain.positions.resize(200);
  for (std::size_t i = 0; i < 200; ++i) chain.positions[i] = d0 * static_cast<double>(i);
  const double finite = stability_threshold_exact(chain);
  const double infinite = stability_threshold_uniform(d0, p);
  EXPECT_LE(finite, infinite);
  EXPECT_GT(finite, 0.97 * infinite);
}

TEST(Stability, FactoryOverloadUsesGivenParams) {
  PhysicalParams p;
  p.omega_x = constants::two_pi * 1e5;
  const double w = stability_threshold_exact([] { return harmonic_chain(2); }, p);
  EXPECT_LT(rel(w, wz), 1e-8);
}

TEST(Stability, HarmonicAnisotropyBound) {
  EXPECT_NEAR(anisotropy_bound_harmonic(120), 42.2, 0.05);
  EXPECT_NEAR(anisotropy_bound_harmonic(10), 5.07, 0.01);
  EXPECT_THROW(anisotropy_bound_harmonic(1), ConfigError);
}

TEST(Thermal, OccupationAndBetaLimits) {
  const double w = constants::two_pi * 1e6;
  EXPECT_NEAR(thermal_beta(w, 1e-3 * w, ThermalConvention::paper), 1.0, 1e-12);
  EXPECT_NEAR(thermal_beta(w, 1e-3 * w, ThermalConvention::standard), 1.0, 1e-12);
  // High temperature: coth(x) -> 1/x.
  EXPECT_LT(rel(thermal_beta(w, 1e4 * w, ThermalConvention::paper), 1e4), 1e-7);
  EXPECT_LT(rel(thermal_beta(w, 1e4 * w, ThermalConvention::standard), 2e4), 1e-7);
}

TEST(Thermal, StateOnBaseline) {
  const auto& chain = baseline();
  const auto tr = diagonalize(chain, Axis::transverse_x);
  const auto th = thermal_state(tr, chain.params);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    EXPECT_DOUBLE_EQ(th.nbar[k], chain.params.doppler_temperature / tr.frequencies[k]);
    EXPECT_GT(th.beta_bar[k], 1.0);
  }
  EXPECT_THROW(thermal_state(tr, chain.params, ThermalConvention::paper, std::vector<double>{1.0}), ConfigError);
}

TEST(Thermal, ZeroTemperatureFluctuationAgreesAcrossConventions) {
  const auto& chain = baseline();
  const auto ax = diagonalize(chain, Axis::axial);
  const std::vector<double> cold(ax.size(), 1e-14 * ax.frequencies.front());
  const auto a = axial_position_fluctuation(ax, thermal_state(ax, chain.params, ThermalConvention::paper, cold),
                                            chain.params);
  const auto b = axial_position_fluctuation(ax, thermal_state(ax, chain.params, ThermalConvention::standard, cold),
                                            chain.params);
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_LT(rel(a[n], b[n]), 1e-12);
}

TEST(Thermal, FluctuationScalesWithSquareRootOfTemperature) {
  const auto& chain = baseline();
  const auto ax = diagonalize(chain, Axis::axial);
  const std::vector<double> t1(ax.size(), 1e4 * ax.frequencies.back());
  std::vector<double> t4 = t1;
  for (double& t : t4) t *= 4.0;
  const auto a = axial_position_fluctuation(ax, thermal_state(ax, chain.params, ThermalConvention::paper, t1),
                                            chain.params);
  const auto b = axial_position_fluctuation(ax, thermal_state(ax, chain.params, ThermalConvention::paper, t4),
                                            chain.params);
  for (std::size_t n = 0; n < a.size(); ++n) EXPECT_LT(rel(b[n], 2.0 * a[n]), 1e-6);
}

TEST(LambDicke, ScalesAsInverseRootFrequency) {
  const PhysicalParams p;
  const double w = constants::two_pi * 5e6;
  EXPECT_NEAR(lamb_dicke(p, w), 0.0379, 5e-4);
  EXPECT_LT(rel(lamb_dicke(p, 4.0 * w), 0.5 * lamb_dicke(p, w)), 1e-14);
  EXPECT_THROW(lamb_dicke(p, 0.0), ConfigError);
}
