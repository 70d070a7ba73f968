#include <cmath>

#include <gtest/gtest.h>

#include "iongate/errbudget.hpp"

using namespace iongate;

TEST(Crosstalk, Values) {
  EXPECT_NEAR(crosstalk(10e-6, 4e-6), 3.7e-6, 0.05e-6);
  EXPECT_NEAR(crosstalk(4e-6, 4e-6), std::exp(-2.0), 1e-15);
  EXPECT_LT(crosstalk(10e-6, 1e-9), 1e-300);
  EXPECT_THROW(crosstalk(0.0, 4e-6), ConfigError);
}

TEST(AxialRabi, Values) {
  EXPECT_NEAR(axial_rabi_infidelity(0.26e-6, 4e-6), 4.4e-5, 0.05e-5);
  EXPECT_EQ(axial_rabi_infidelity(0.0, 4e-6), 0.0);
  EXPECT_NEAR(axial_rabi_infidelity(0.52e-6, 4e-6), 16.0 * axial_rabi_infidelity(0.26e-6, 4e-6), 1e-18);
  EXPECT_THROW(axial_rabi_infidelity(0.1e-6, 0.0), ConfigError);
}

TEST(Anharmonic, Values) {
  EXPECT_NEAR(anharmonic_infidelity(0.26e-6, 10e-6), 6.8e-4, 0.05e-4);
  EXPECT_EQ(anharmonic_infidelity(0.0, 10e-6), 0.0);
  EXPECT_NEAR(anharmonic_infidelity(0.52e-6, 10e-6), 4.0 * anharmonic_infidelity(0.26e-6, 10e-6), 1e-16);
}

TEST(LambDickeError, Values) {
  EXPECT_NEAR(lamb_dicke_infidelity(0.038, 2.0), 1.3e-4, 0.05e-4);
  EXPECT_NEAR(lamb_dicke_infidelity(0.038, 0.0), constants::pi * constants::pi * std::pow(0.038, 4) / 8.0, 1e-18);
  EXPECT_EQ(lamb_dicke_infidelity(0.0, 2.0), 0.0);
}

TEST(Estimators, MonotoneInLeadingArgument) {
  double prev_c = 0, prev_r = 0, prev_a = 0, prev_l = 0;
  for (int i = 1; i <= 50; ++i) {
    const double x = 0.02 * i;
    const double c = crosstalk(10e-6, (1.0 + x) * 2e-6);
    const double r = axial_rabi_infidelity(x * 1e-6, 4e-6);
    const double a = anharmonic_infidelity(x * 1e-6, 10e-6);
    const double l = lamb_dicke_infidelity(0.1 * x, 2.0);
    EXPECT_GT(c, prev_c);
    EXPECT_GT(r, prev_r);
    EXPECT_GT(a, prev_a);
    EXPECT_GT(l, prev_l);
    prev_c = c, prev_r = r, prev_a = a, prev_l = l;
  }
}

TEST(FullBudget, BaselineChain) {
  const PhysicalParams p;
  const auto chain = solve_for_spacing(-6.1, 10e-6, p, 120, 10);
  const auto ax = diagonalize(chain, Axis::axial);
  const auto tr = diagonalize(chain, Axis::transverse_x);
  const auto b = full_budget(chain, ax, tr, p);
  for (double v : {b.crosstalk_p, b.axial_rabi_infidelity, b.anharmonic_infidelity, b.lamb_dicke_infidelity}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_LT(b.crosstalk_p, 1e-5);
  EXPECT_NEAR(b.mean_spacing, 10e-6, 1e-15);
  EXPECT_NEAR(b.eta_x, lamb_dicke(p, p.omega_x), 1e-15);
  EXPECT_FALSE(b.note.empty());
  EXPECT_THROW(full_budget(chain, tr, ax, p), ConfigError);
}
