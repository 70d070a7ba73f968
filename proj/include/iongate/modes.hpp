#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "iongate/chain.hpp"
#include "iongate/constants.hpp"
#include "iongate/errors.hpp"
#include "iongate/physcore.hpp"

namespace iongate {

enum class Axis { transverse_x, transverse_y, axial };

inline bool is_transverse(Axis a) { return a != Axis::axial; }

// Normal modes along one axis. Column k of `vectors` is mode k; row r holds
// the amplitude of chain ion ions[r]. Transverse modes are sorted by
// descending frequency (center of mass first), axial modes ascending.
struct ModeSet {
  Axis axis = Axis::transverse_x;
  std::vector<double> frequencies;
  Eigen::MatrixXd vectors;
  std::vector<std::size_t> ions;
  std::size_t chain_size = 0;
  std::size_t n_edge = 0;

  std::size_t size() const { return frequencies.size(); }

  std::optional<Eigen::Index> row_of(std::size_t ion) const {
    auto it = std::find(ions.begin(), ions.end(), ion);
    if (it == ions.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - ions.begin());
  }
};

// Second derivatives of the total potential divided by the ion mass, at the
// equilibrium positions, in rad^2/s^2.
inline Eigen::MatrixXd hessian(const IonChain& chain, Axis axis) {
  const auto& z = chain.positions;
  const auto n = static_cast<Eigen::Index>(z.size());
  const double m = chain.params.ion_mass;
  const double e2m = chain.params.coulomb_coupling / m;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);

  if (is_transverse(axis)) {
    const double w = axis == Axis::transverse_x ? chain.params.omega_x : chain.params.omega_y;
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i, i) = w * w;
      for (Eigen::Index p = 0; p < n; ++p) {
        if (p == i) continue;
        const double r = std::abs(z[i] - z[p]);
        const double c = e2m / (r * r * r);
        a(i, i) -= c;
        a(i, p) = c;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      a(i, i) = chain.potential.curvature(z[i]) / m;
      for (Eigen::Index p = 0; p < n; ++p) {
        if (p == i) continue;
        const double r = std::abs(z[i] - z[p]);
        const double c = 2.0 * e2m / (r * r * r);
        a(i, i) += c;
        a(i, p) = -c;
      }
    }
  }
  return a;
}

namespace modes_detail {

inline void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  const double largest = v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) >= largest * (1.0 - 1e-9)) {
      arg = i;
      break;
    }
  }
  if (v[arg] < 0.0) v = -v;
}

}  // namespace modes_detail

// Diagonalizes a symmetric (sub)Hessian whose rows correspond to `ions`.
inline ModeSet diagonalize(const Eigen::MatrixXd& a, Axis axis, std::vector<std::size_t> ions,
                           std::size_t chain_size, std::size_t n_edge) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success) throw PhysicsError("eigensolver failed");
  const Eigen::VectorXd& lambda = solver.eigenvalues();  // ascending
  const auto n = lambda.size();

  if (lambda[0] <= 0.0) {
    if (is_transverse(axis)) throw StabilityError(lambda[0]);
    throw PhysicsError("axial Hessian is not positive definite");
  }

  ModeSet modes;
  modes.axis = axis;
  modes.ions = std::move(ions);
  modes.chain_size = chain_size;
  modes.n_edge = n_edge;
  modes.frequencies.resize(static_cast<std::size_t>(n));
  modes.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = is_transverse(axis) ? n - 1 - k : k;
    modes.frequencies[static_cast<std::size_t>(k)] = std::sqrt(lambda[src]);
    modes.vectors.col(k) = solver.eigenvectors().col(src);
    modes_detail::fix_sign(modes.vectors.col(k));
  }
  return modes;
}

inline ModeSet diagonalize(const IonChain& chain, Axis axis) {
  std::vector<std::size_t> ions(chain.size());
  std::iota(ions.begin(), ions.end(), std::size_t{0});
  return diagonalize(hessian(chain, axis), axis, std::move(ions), chain.size(), chain.n_edge);
}

// Transverse confinement needed by an infinite chain of uniform spacing d0:
// omega^2 > 7 zeta(3) e^2 / (2 m d0^3).
inline double stability_threshold_uniform(double d0, const PhysicalParams& params) {
  if (!(d0 > 0.0)) throw ConfigError("spacing must be positive");
  return std::sqrt(3.5 * constants::zeta3 * params.coulomb_coupling / (params.ion_mass * d0 * d0 * d0));
}

// Smallest transverse frequency keeping this finite chain linear. The
// transverse spectrum shifts rigidly with omega_t^2, so the threshold is
// sqrt(-lambda_min) of the Coulomb-only transverse Hessian.
inline double stability_threshold_exact(const IonChain& chain) {
  IonChain bare = chain;
  bare.params.omega_x = 0.0;
  const Eigen::MatrixXd k = hessian(bare, Axis::transverse_x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(k, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, -solver.eigenvalues()[0]));
}

template <std::invocable ChainFactory>
double stability_threshold_exact(ChainFactory&& factory, const PhysicalParams& params) {
  IonChain chain = std::forward<ChainFactory>(factory)();
  chain.params = params;
  return stability_threshold_exact(chain);
}

// omega_{x,y} / omega_z above which a harmonic chain of n ions stays linear
// (natural log).
inline double anisotropy_bound_harmonic(std::size_t n_ions) {
  if (n_ions < 2) throw ConfigError("anisotropy bound needs at least two ions");
  const double n = static_cast<double>(n_ions);
  return 0.77 * n / std::sqrt(std::log(n));
}

inline double lamb_dicke(const PhysicalParams& params, double omega) {
  if (!(omega > 0.0)) throw ConfigError("mode frequency must be positive");
  return params.effective_wavevector * std::sqrt(constants::hbar / (2.0 * params.ion_mass * omega));
}

// `paper`: beta = coth(hbar w / k_B T); `standard`: coth(hbar w / 2 k_B T).
enum class ThermalConvention { paper, standard };

struct ThermalState {
  ThermalConvention convention = ThermalConvention::paper;
  std::vector<double> temperatures;  // k_B T_k / hbar, rad/s
  std::vector<double> nbar;
  std::vector<double> beta_bar;
};

inline double thermal_beta(double omega, double temperature, ThermalConvention convention) {
  const double x = convention == ThermalConvention::paper ? omega / temperature : 0.5 * omega / temperature;
  return 1.0 / std::tanh(x);
}

inline ThermalState thermal_state(const ModeSet& modes, const PhysicalParams& params,
                                  ThermalConvention convention = ThermalConvention::paper,
                                  std::optional<std::vector<double>> temperatures = std::nullopt) {
  ThermalState th;
  th.convention = convention;
  th.temperatures = temperatures.value_or(std::vector<double>(modes.size(), params.doppler_temperature));
  if (th.temperatures.size() != modes.size()) throw ConfigError("one temperature per mode required");
  th.nbar.resize(modes.size());
  th.beta_bar.resize(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double w = modes.frequencies[k];
    const double t = th.temperatures[k];
    if (!(w > 0.0)) throw PhysicsError("mode frequency must be positive");
    if (!(t > 0.0)) throw ConfigError("mode temperature must be positive");
    th.nbar[k] = t / w;
    th.beta_bar[k] = thermal_beta(w, t, convention);
  }
  return th;
}

// Axial thermal position spread per ion (meters):
//   dz_n = sqrt(hbar/2m) [ sqrt(2) sum_k (b_n^k)^2 f_k / w_k ]^(1/2)
// with f_k = 2 nbar_k + 1 under the standard convention and the mode's
// beta_bar = coth(hbar w / k_B T) under the paper convention.
inline std::vector<double> axial_position_fluctuation(const ModeSet& axial, const ThermalState& thermal,
                                                      const PhysicalParams& params) {
  if (axial.axis != Axis::axial) throw ConfigError("position fluctuation needs axial modes");
  if (thermal.nbar.size() != axial.size()) throw ConfigError("thermal state does not match the mode set");
  const auto rows = axial.vectors.rows();
  std::vector<double> dz(static_cast<std::size_t>(rows));
  const double prefactor = constants::hbar / (2.0 * params.ion_mass);
  for (Eigen::Index n = 0; n < rows; ++n) {
    double sum = 0.0;
    for (std::size_t k = 0; k < axial.size(); ++k) {
      const double b = axial.vectors(n, static_cast<Eigen::Index>(k));
      const double factor = thermal.convention == ThermalConvention::standard ? 2.0 * thermal.nbar[k] + 1.0
                                                                               : thermal.beta_bar[k];
      sum += b * b * factor / axial.frequencies[k];
    }
    dz[static_cast<std::size_t>(n)] = std::sqrt(prefactor * std::sqrt(2.0) * sum);
  }
  return dz;
}

}  // namespace iongate
