#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "iongate/errors.hpp"
#include "iongate/physcore.hpp"

namespace iongate {

// Equilibrium configuration of a linear chain. Positions are in meters,
// strictly increasing; the outer n_edge ions on each side are coolant ions.
struct IonChain {
  std::vector<double> positions;
  std::size_t n_edge = 10;
  AxialPotential potential;
  PhysicalParams params;
  UnitSystem units;

  std::size_t size() const { return positions.size(); }

  std::vector<double> dimensionless_positions() const {
    std::vector<double> u(positions.size());
    std::transform(positions.begin(), positions.end(), u.begin(),
                   [&](double z) { return units.to_dimensionless_length(z); });
    return u;
  }
};

struct SpacingStats {
  std::vector<double> spacings;
  double qubit_mean = 0.0;
  double s_z = 0.0;
  double relative_deviation = 0.0;
};

struct SolveOptions {
  double tolerance = 1e-10;  // max |dU/du_i| in dimensionless units
  int max_iterations = 500;
};

// Raw result of the dimensionless solve; energies[k] is U after iteration k.
struct EquilibriumSolution {
  std::vector<double> positions;
  std::vector<double> energies;
  int iterations = 0;
  double max_force = 0.0;
};

namespace chain_detail {

inline double energy(const DimensionlessPotential& pot, std::span<const double> u) {
  double total = 0.0;
  const std::size_t n = u.size();
  for (std::size_t i = 0; i < n; ++i) {
    total += pot.value(u[i]);
    for (std::size_t j = i + 1; j < n; ++j) total += 1.0 / (u[j] - u[i]);
  }
  return total;
}

inline Eigen::VectorXd gradient(const DimensionlessPotential& pot, std::span<const double> u) {
  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double coulomb = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double r = u[i] - u[j];
      coulomb += std::copysign(1.0 / (r * r), r);
    }
    g[i] = pot.derivative(u[i]) - coulomb;
  }
  return g;
}

inline Eigen::MatrixXd hessian(const DimensionlessPotential& pot, std::span<const double> u) {
  const auto n = static_cast<Eigen::Index>(u.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i, i) = pot.curvature(u[i]);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double r = std::abs(u[i] - u[j]);
      const double c = 2.0 / (r * r * r);
      h(i, i) += c;
      h(i, j) = -c;
    }
  }
  return h;
}

inline bool strictly_increasing(std::span<const double> u) {
  return std::adjacent_find(u.begin(), u.end(), [](double a, double b) { return !(a < b); }) == u.end();
}

// Forces cannot be resolved below (position ulp) x (stiffest curvature); long
// chains hit that floor before a fixed tolerance.
inline double force_tolerance(double requested, std::span<const double> u, const Eigen::MatrixXd& h) {
  double extent = 0.0;
  for (double x : u) extent = std::max(extent, std::abs(x));
  const double floor = 4.0 * std::numeric_limits<double>::epsilon() * extent * h.diagonal().maxCoeff();
  return std::max(requested, floor);
}

// Half-extent L of a uniformly spaced chain whose outermost ion is in force
// balance: c2 L^3 + c4 L^5 = H_{N-1}^{(2)} (N-1)^2 / 4.
inline double balanced_half_extent(const DimensionlessPotential& pot, std::size_t n) {
  double h2 = 0.0;
  for (std::size_t k = 1; k < n; ++k) h2 += 1.0 / (static_cast<double>(k) * static_cast<double>(k));
  const double nm1 = static_cast<double>(n - 1);
  const double rhs = h2 * nm1 * nm1 / 4.0;
  auto f = [&](double l) { return pot.quadratic * l * l * l + pot.quartic * l * l * l * l * l - rhs; };

  double lo = 0.0;
  if (pot.quadratic < 0.0) lo = std::sqrt(-pot.quadratic / pot.quartic);
  double hi = std::max(1.0, 2.0 * lo);
  while (f(hi) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return hi;
}

inline std::vector<double> default_guess(const DimensionlessPotential& pot, std::size_t n) {
  std::vector<double> u(n, 0.0);
  if (n < 2) return u;
  const double half = balanced_half_extent(pot, n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return u;
}

}  // namespace chain_detail

// Damped Newton on the force-balance equations in dimensionless units, with
// a steepest-descent fallback when the Hessian is not positive definite.
// Every accepted step keeps the ions ordered and lowers the energy.
inline EquilibriumSolution solve_dimensionless(const DimensionlessPotential& pot, std::size_t n_ions,
                                               std::span<const double> guess = {},
                                               const SolveOptions& options = {}) {
  if (n_ions < 2) throw ConfigError("a chain needs at least two ions");
  if (pot.quartic < 0.0 || (pot.quartic == 0.0 && pot.quadratic <= 0.0)) {
    throw ConfigError("axial potential does not confine");
  }

  EquilibriumSolution sol;
  if (guess.empty()) {
    sol.positions = chain_detail::default_guess(pot, n_ions);
  } else {
    if (guess.size() != n_ions) throw ConfigError("initial guess has the wrong number of ions");
    sol.positions.assign(guess.begin(), guess.end());
    std::sort(sol.positions.begin(), sol.positions.end());
    if (!chain_detail::strictly_increasing(sol.positions)) {
      throw ConfigError("initial guess has coincident ions");
    }
  }

  auto& u = sol.positions;
  const auto n = static_cast<Eigen::Index>(n_ions);
  double current = chain_detail::energy(pot, u);
  sol.energies.push_back(current);
  std::vector<double> trial(n_ions);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd g = chain_detail::gradient(pot, u);
    const Eigen::MatrixXd h = chain_detail::hessian(pot, u);
    sol.max_force = g.cwiseAbs().maxCoeff();
    if (sol.max_force < chain_detail::force_tolerance(options.tolerance, u, h)) {
      sol.iterations = iter;
      return sol;
    }

    Eigen::VectorXd step;
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() == Eigen::Success) {
      step = llt.solve(-g);
    } else {
      step = -g;
    }
    double slope = g.dot(step);
    if (!(slope < 0.0)) {
      step = -g;
      slope = -g.squaredNorm();
    }

    // Backtracking: keep ordering, require sufficient decrease up to roundoff.
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::abs(current);
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 80; ++halving, t *= 0.5) {
      for (Eigen::Index i = 0; i < n; ++i) trial[i] = u[i] + t * step[i];
      if (!chain_detail::strictly_increasing(trial)) continue;
      const double e = chain_detail::energy(pot, trial);
      if (e <= current + 1e-4 * t * slope + noise) {
        u.swap(trial);
        current = e;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw PhysicsError("ion ordering collapsed during equilibrium iteration");
    }
    sol.energies.push_back(current);
  }

  const Eigen::VectorXd g = chain_detail::gradient(pot, u);
  sol.max_force = g.cwiseAbs().maxCoeff();
  if (sol.max_force < chain_detail::force_tolerance(options.tolerance, u, chain_detail::hessian(pot, u))) {
    sol.iterations = options.max_iterations;
    return sol;
  }
  throw ConvergenceError("equilibrium solve did not converge: max force " + std::to_string(sol.max_force));
}

inline IonChain solve_equilibrium(const AxialPotential& pot, const PhysicalParams& params, std::size_t n_ions,
                                  std::optional<std::vector<double>> initial_guess = std::nullopt,
                                  std::size_t n_edge = 10, const SolveOptions& options = {}) {
  params.validate();
  IonChain chain;
  chain.n_edge = n_edge;
  chain.potential = pot;
  chain.params = params;
  chain.units = UnitSystem::for_potential(pot, params);

  std::vector<double> guess;
  if (initial_guess) {
    guess.resize(initial_guess->size());
    std::transform(initial_guess->begin(), initial_guess->end(), guess.begin(),
                   [&](double z) { return chain.units.to_dimensionless_length(z); });
  }
  const auto sol = solve_dimensionless(DimensionlessPotential::of(pot, chain.units), n_ions, guess, options);
  chain.positions.resize(n_ions);
  std::transform(sol.positions.begin(), sol.positions.end(), chain.positions.begin(),
                 [&](double u) { return chain.units.to_physical_length(u); });
  return chain;
}

// Net axial force on each ion in newtons (zero at equilibrium).
inline std::vector<double> axial_forces(const IonChain& chain) {
  const auto& z = chain.positions;
  std::vector<double> f(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    double coulomb = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (j == i) continue;
      const double r = z[i] - z[j];
      coulomb += std::copysign(chain.params.coulomb_coupling / (r * r), r);
    }
    f[i] = coulomb - chain.potential.derivative(z[i]);
  }
  return f;
}

// Statistics over the qubit window: spacing indices n_edge .. N - n_edge - 2
// (zero-based), i.e. the spacings between the first and last qubit ion.
inline SpacingStats spacing_stats(std::span<const double> positions, std::size_t n_edge) {
  const std::size_t n = positions.size();
  if (n < 2 || n < 2 * n_edge + 2) {
    throw ConfigError("qubit window is empty for this chain length and edge count");
  }
  SpacingStats s;
  s.spacings.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) s.spacings[i] = positions[i + 1] - positions[i];

  const auto first = s.spacings.begin() + static_cast<std::ptrdiff_t>(n_edge);
  const auto last = s.spacings.end() - static_cast<std::ptrdiff_t>(n_edge);
  const double count = static_cast<double>(last - first);
  s.qubit_mean = std::accumulate(first, last, 0.0) / count;
  double var = 0.0;
  for (auto it = first; it != last; ++it) var += (*it - s.qubit_mean) * (*it - s.qubit_mean);
  s.s_z = std::sqrt(var / count);
  s.relative_deviation = s.s_z / s.qubit_mean;
  return s;
}

inline SpacingStats spacing_stats(const IonChain& chain) { return spacing_stats(chain.positions, chain.n_edge); }

inline DimensionlessPotential quartic_shape(double b) {
  return {std::copysign(std::pow(std::abs(b), 0.6), b), 1.0};
}

// Quartic chain at trap parameter B, with the unit length chosen so that the
// mean qubit spacing equals mean_spacing. Positions scale exactly with l, so
// one dimensionless solve fixes both.
inline IonChain solve_for_spacing(double b, double mean_spacing, const PhysicalParams& params, std::size_t n_ions,
                                  std::size_t n_edge = 10, const SolveOptions& options = {}) {
  if (!(mean_spacing > 0.0)) throw ConfigError("mean spacing must be positive");
  const auto sol = solve_dimensionless(quartic_shape(b), n_ions, {}, options);
  const double unit_mean = spacing_stats(sol.positions, n_edge).qubit_mean;
  const double length = mean_spacing / unit_mean;

  IonChain chain;
  chain.n_edge = n_edge;
  chain.params = params;
  chain.potential = potential_from_b(b, length, params);
  chain.units = UnitSystem::from_length(length, params);
  chain.positions.resize(n_ions);
  std::transform(sol.positions.begin(), sol.positions.end(), chain.positions.begin(),
                 [&](double u) { return u * length; });
  return chain;
}

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

enum class MinimumLocation { interior, lower_boundary, upper_boundary };

struct BCurvePoint {
  double b = 0.0;
  double s_z = 0.0;  // meters, at the pinned mean spacing
  double relative_deviation = 0.0;
};

struct BOptimization {
  double b_opt = 0.0;
  double s_z = 0.0;
  double relative_deviation = 0.0;
  double length_scale = 0.0;
  MinimumLocation location = MinimumLocation::interior;
  std::vector<BCurvePoint> curve;

  bool at_boundary() const { return location != MinimumLocation::interior; }
};

inline double relative_spacing_deviation(double b, std::size_t n_ions, std::size_t n_edge) {
  const auto sol = solve_dimensionless(quartic_shape(b), n_ions);
  return spacing_stats(sol.positions, n_edge).relative_deviation;
}

// Minimizes s_z(B) with the mean qubit spacing held at mean_spacing: a coarse
// grid locates the basin, golden-section search refines it. A grid minimum
// on either end of the range is reported through `location`.
inline BOptimization optimize_b(const PhysicalParams& params, std::size_t n_ions, std::size_t n_edge,
                                Interval b_range, double mean_spacing = 10e-6, std::size_t grid_points = 60,
                                unsigned threads = 1) {
  if (!(std::isfinite(b_range.lower) && std::isfinite(b_range.upper) && b_range.lower < b_range.upper)) {
    throw ConfigError("B range must be finite with lower < upper");
  }
  if (grid_points < 3) throw ConfigError("B grid needs at least three points");
  params.validate();

  BOptimization out;
  out.curve.resize(grid_points);
  const double h = (b_range.upper - b_range.lower) / static_cast<double>(grid_points - 1);
  auto eval_point = [&](std::size_t k) {
    const double b = b_range.lower + h * static_cast<double>(k);
    const double rel = relative_spacing_deviation(b, n_ions, n_edge);
    out.curve[k] = {b, rel * mean_spacing, rel};
  };

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(grid_points)));
  if (threads == 1) {
    for (std::size_t k = 0; k < grid_points; ++k) eval_point(k);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t k = t; k < grid_points; k += threads) eval_point(k);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  const auto best = static_cast<std::size_t>(
      std::min_element(out.curve.begin(), out.curve.end(),
                       [](const BCurvePoint& a, const BCurvePoint& b) { return a.s_z < b.s_z; }) -
      out.curve.begin());

  if (best == 0 || best + 1 == grid_points) {
    out.location = best == 0 ? MinimumLocation::lower_boundary : MinimumLocation::upper_boundary;
    out.b_opt = out.curve[best].b;
    out.relative_deviation = out.curve[best].relative_deviation;
  } else {
    constexpr double inv_phi = 0.6180339887498949;
    double a = out.curve[best - 1].b;
    double d = out.curve[best + 1].b;
    double x1 = d - inv_phi * (d - a);
    double x2 = a + inv_phi * (d - a);
    double f1 = relative_spacing_deviation(x1, n_ions, n_edge);
    double f2 = relative_spacing_deviation(x2, n_ions, n_edge);
    while (d - a > 1e-6 * std::max(1.0, std::abs(a))) {
      if (f1 < f2) {
        d = x2;
        x2 = x1;
        f2 = f1;
        x1 = d - inv_phi * (d - a);
        f1 = relative_spacing_deviation(x1, n_ions, n_edge);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (d - a);
        f2 = relative_spacing_deviation(x2, n_ions, n_edge);
      }
    }
    out.b_opt = f1 < f2 ? x1 : x2;
    out.relative_deviation = std::min(f1, f2);
    if (out.curve[best].relative_deviation < out.relative_deviation) {
      out.b_opt = out.curve[best].b;
      out.relative_deviation = out.curve[best].relative_deviation;
    }
  }
  out.s_z = out.relative_deviation * mean_spacing;
  const auto sol = solve_dimensionless(quartic_shape(out.b_opt), n_ions);
  out.length_scale = mean_spacing / spacing_stats(sol.positions, n_edge).qubit_mean;
  return out;
}

}  // namespace iongate
