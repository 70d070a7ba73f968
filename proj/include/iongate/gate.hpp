#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <exception>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "iongate/chain.hpp"
#include "iongate/constants.hpp"
#include "iongate/errors.hpp"
#include "iongate/kernels.hpp"
#include "iongate/modes.hpp"

namespace iongate {

// Target ions, 1-based chain indices.
struct IonPair {
  std::size_t first = 59;
  std::size_t second = 62;
};

// Piecewise-constant Rabi frequency Omega(t) (rad/s) applied equally to both
// targets; segment s spans [s tau/M, (s+1) tau/M).
struct PulseSchedule {
  IonPair target_pair;
  double detuning = 0.0;   // mu, rad/s
  double gate_time = 0.0;  // tau, s
  std::vector<double> amplitudes;

  std::size_t n_segments() const { return amplitudes.size(); }

  Segment segment(std::size_t s) const {
    const double m = static_cast<double>(n_segments());
    return {gate_time * static_cast<double>(s) / m, gate_time * static_cast<double>(s + 1) / m};
  }
};

struct GateResult {
  std::vector<cplx> alpha_first;   // alpha_i^k(tau), one per mode
  std::vector<cplx> alpha_second;  // alpha_j^k(tau)
  double phase = 0.0;              // phi_ij(tau), rad
  double infidelity_exact = 0.0;
  double infidelity_quadratic = 0.0;
  PulseSchedule schedule;
};

// Everything needed to evaluate any amplitude vector at fixed (pair, mu, tau, M):
// alpha_n^k = g_n^k sum_s kernels(k, s) Omega_s, phase = Omega^T phase_form Omega,
// surrogate infidelity = Omega^T surrogate Omega.
struct GateProblem {
  IonPair pair;
  double detuning = 0.0;
  double gate_time = 0.0;
  std::size_t n_segments = 0;
  Eigen::MatrixXcd kernels;  // modes x segments
  Eigen::VectorXd coupling_first;
  Eigen::VectorXd coupling_second;
  Eigen::VectorXd beta;
  Eigen::MatrixXd surrogate;
  Eigen::MatrixXd phase_form;
};

namespace gate_detail {

inline Eigen::Index target_row(const ModeSet& modes, std::size_t ion) {
  if (ion < 1 || ion > modes.chain_size) throw ConfigError("target ion index out of range");
  const auto row = modes.row_of(ion - 1);
  if (!row) throw ConfigError("target ion " + std::to_string(ion) + " is not part of the mode set");
  return *row;
}

inline void check_pair(const IonPair& pair, const ModeSet& modes) {
  if (pair.first == pair.second) throw ConfigError("target ions must differ");
  for (std::size_t ion : {pair.first, pair.second}) {
    if (ion <= modes.n_edge || ion > modes.chain_size - modes.n_edge) {
      throw ConfigError("target ion " + std::to_string(ion) + " lies outside the qubit window");
    }
  }
}

inline double exact_infidelity(const Eigen::VectorXcd& ai, const Eigen::VectorXcd& aj, const Eigen::VectorXd& beta) {
  auto gamma = [&](const Eigen::VectorXcd& a) { return std::exp(-0.5 * a.cwiseAbs2().dot(beta)); };
  const double gi = gamma(ai);
  const double gj = gamma(aj);
  const double gp = gamma(ai + aj);
  const double gm = gamma(ai - aj);
  return std::max(0.0, (6.0 - 2.0 * (gi + gj) - gp - gm) / 8.0);
}

// Largest-magnitude entry positive.
inline void canonical_sign(std::vector<double>& v) {
  if (v.empty()) return;
  auto it = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  if (*it < 0.0) {
    for (double& x : v) x = -x;
  }
}

}  // namespace gate_detail

inline GateProblem build_gate_problem(IonPair pair, double mu, double tau, std::size_t n_segments,
                                      const ModeSet& modes, const ThermalState& thermal,
                                      const PhysicalParams& params) {
  if (modes.axis != Axis::transverse_x) throw ConfigError("gates couple to transverse-x modes only");
  if (!(tau > 0.0)) throw ConfigError("gate time must be positive");
  if (n_segments < 1) throw ConfigError("at least one pulse segment is required");
  if (thermal.beta_bar.size() != modes.size()) throw ConfigError("thermal state does not match the mode set");
  gate_detail::check_pair(pair, modes);

  const auto ri = gate_detail::target_row(modes, pair.first);
  const auto rj = gate_detail::target_row(modes, pair.second);
  const auto nk = static_cast<Eigen::Index>(modes.size());
  const auto ns = static_cast<Eigen::Index>(n_segments);

  GateProblem p;
  p.pair = pair;
  p.detuning = mu;
  p.gate_time = tau;
  p.n_segments = n_segments;
  p.kernels.resize(nk, ns);
  p.coupling_first.resize(nk);
  p.coupling_second.resize(nk);
  p.beta = Eigen::Map<const Eigen::VectorXd>(thermal.beta_bar.data(), nk);
  p.surrogate = Eigen::MatrixXd::Zero(ns, ns);
  p.phase_form = Eigen::MatrixXd::Zero(ns, ns);

  PulseSchedule grid{pair, mu, tau, std::vector<double>(n_segments, 0.0)};
  for (Eigen::Index k = 0; k < nk; ++k) {
    const double w = modes.frequencies[static_cast<std::size_t>(k)];
    const double eta = lamb_dicke(params, w);
    p.coupling_first[k] = eta * modes.vectors(ri, k);
    p.coupling_second[k] = eta * modes.vectors(rj, k);
    for (Eigen::Index s = 0; s < ns; ++s) {
      p.kernels(k, s) = segment_alpha_kernel(w, mu, grid.segment(static_cast<std::size_t>(s)));
    }

    const double gi = p.coupling_first[k];
    const double gj = p.coupling_second[k];
    const Eigen::VectorXcd row = p.kernels.row(k).transpose();
    p.surrogate += 0.25 * p.beta[k] * (gi * gi + gj * gj) * (row * row.adjoint()).real();

    const double c = gi * gj;
    for (Eigen::Index s = 0; s < ns; ++s) {
      const Segment later = grid.segment(static_cast<std::size_t>(s));
      p.phase_form(s, s) += 2.0 * c * segment_phi_kernel(w, mu, later, later);
      for (Eigen::Index e = 0; e < s; ++e) {
        // Off-diagonal blocks of the ordered integral; split symmetrically.
        const double v = c * (p.kernels(k, s) * std::conj(p.kernels(k, e))).imag();
        p.phase_form(s, e) += v;
        p.phase_form(e, s) += v;
      }
    }
  }
  return p;
}

inline GateResult evaluate_gate(const GateProblem& problem, std::span<const double> amplitudes) {
  if (amplitudes.size() != problem.n_segments) throw ConfigError("amplitude count does not match segment count");
  const Eigen::Map<const Eigen::VectorXd> omega(amplitudes.data(), static_cast<Eigen::Index>(amplitudes.size()));
  const Eigen::VectorXcd drive = problem.kernels * omega.cast<cplx>();
  const Eigen::VectorXcd ai = problem.coupling_first.cast<cplx>().cwiseProduct(drive);
  const Eigen::VectorXcd aj = problem.coupling_second.cast<cplx>().cwiseProduct(drive);

  GateResult r;
  r.alpha_first.assign(ai.data(), ai.data() + ai.size());
  r.alpha_second.assign(aj.data(), aj.data() + aj.size());
  r.phase = omega.dot(problem.phase_form * omega);
  r.infidelity_exact = gate_detail::exact_infidelity(ai, aj, problem.beta);
  r.infidelity_quadratic = 0.25 * (ai.cwiseAbs2() + aj.cwiseAbs2()).dot(problem.beta);
  r.schedule = {problem.pair, problem.detuning, problem.gate_time,
                std::vector<double>(amplitudes.begin(), amplitudes.end())};
  return r;
}

inline GateResult evaluate_gate(const PulseSchedule& schedule, const ModeSet& modes, const ThermalState& thermal,
                                const PhysicalParams& params) {
  const auto problem = build_gate_problem(schedule.target_pair, schedule.detuning, schedule.gate_time,
                                          schedule.n_segments(), modes, thermal, params);
  return evaluate_gate(problem, schedule.amplitudes);
}

inline constexpr double cp_phase = constants::pi / 4.0;

// Minimizes the quadratic surrogate subject to |phase| = pi/4. Stationary
// points are the generalized eigenvectors of (phase_form, surrogate); each is
// scaled onto the constraint and the one with the lowest exact infidelity wins.
inline GateResult optimize_segments(const GateProblem& problem) {
  const auto ns = static_cast<Eigen::Index>(problem.n_segments);
  const Eigen::MatrixXd& q = problem.surrogate;
  const Eigen::MatrixXd& g = problem.phase_form;

  // Tiny ridge keeps the metric positive definite when pulses close exactly.
  const double scale = q.trace() / static_cast<double>(ns);
  const double ridge = scale > 0.0 ? 1e-13 * scale : 1.0;
  const Eigen::MatrixXd metric = q + ridge * Eigen::MatrixXd::Identity(ns, ns);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, metric);
  if (solver.info() != Eigen::Success) throw PhysicsError("generalized eigensolver failed");

  const double g_norm = g.cwiseAbs().maxCoeff();
  std::optional<GateResult> best;
  for (Eigen::Index c = 0; c < ns; ++c) {
    const Eigen::VectorXd v = solver.eigenvectors().col(c);
    const double gv = v.dot(g * v);
    if (!(std::abs(gv) > 1e-12 * g_norm * v.squaredNorm())) continue;
    const Eigen::VectorXd scaled = v * std::sqrt(cp_phase / std::abs(gv));
    std::vector<double> amps(scaled.data(), scaled.data() + ns);
    gate_detail::canonical_sign(amps);
    GateResult r = evaluate_gate(problem, amps);
    if (!best || r.infidelity_exact < best->infidelity_exact) best = std::move(r);
  }
  if (!best) throw PhysicsError("no pulse reaches the target phase at this detuning");
  return *best;
}

inline GateResult optimize_segments(IonPair pair, double mu, double tau, std::size_t n_segments,
                                    const ModeSet& modes, const ThermalState& thermal, const PhysicalParams& params) {
  return optimize_segments(build_gate_problem(pair, mu, tau, n_segments, modes, thermal, params));
}

struct ScanPoint {
  double detuning = 0.0;
  double infidelity = std::numeric_limits<double>::quiet_NaN();
  std::optional<GateResult> result;
  std::string error;  // non-empty when this detuning was degenerate
};

// Optimized infidelity at every detuning of the grid. Points are independent;
// results come back in grid order whatever the thread count.
inline std::vector<ScanPoint> scan_detuning(IonPair pair, std::span<const double> mu_grid, double tau,
                                            std::size_t n_segments, const ModeSet& modes,
                                            const ThermalState& thermal, const PhysicalParams& params,
                                            unsigned threads = 1) {
  std::vector<ScanPoint> out(mu_grid.size());
  auto eval_point = [&](std::size_t idx) {
    ScanPoint& pt = out[idx];
    pt.detuning = mu_grid[idx];
    try {
      pt.result = optimize_segments(pair, pt.detuning, tau, n_segments, modes, thermal, params);
      pt.infidelity = pt.result->infidelity_exact;
    } catch (const PhysicsError& e) {
      pt.error = e.what();
    }
  };
  if (mu_grid.empty()) return out;
  // Validate once up front so configuration errors are not swallowed per point.
  build_gate_problem(pair, mu_grid.front(), tau, n_segments, modes, thermal, params);

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(mu_grid.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < mu_grid.size(); ++i) eval_point(i);
    return out;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < mu_grid.size(); i += threads) eval_point(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

// First and last (1-based) free ion of an even window centred on the pair.
inline std::pair<std::size_t, std::size_t> free_window(IonPair pair, std::size_t window, std::size_t n_ions) {
  if (window < 2 || window % 2 != 0) throw ConfigError("free window must be even and at least 2");
  if (window > n_ions) throw ConfigError("free window exceeds the chain length");
  const std::size_t lo = std::min(pair.first, pair.second);
  const std::size_t hi = std::max(pair.first, pair.second);
  const std::size_t centre = (lo + hi - 1) / 2;
  if (centre + 1 < window / 2) throw ConfigError("free window does not fit at the chain start");
  std::size_t first = centre + 1 - window / 2;
  std::size_t last = first + window - 1;
  if (last > n_ions) throw ConfigError("free window does not fit at the chain end");
  if (first > lo || last < hi) throw ConfigError("free window does not contain both target ions");
  return {first, last};
}

// Transverse modes when only ions first..last (1-based) may move. Pinned
// ions keep contributing Coulomb curvature to the diagonal.
inline ModeSet truncated_modes(const IonChain& chain, std::size_t first, std::size_t last) {
  const Eigen::MatrixXd full = hessian(chain, Axis::transverse_x);
  const auto start = static_cast<Eigen::Index>(first - 1);
  const auto count = static_cast<Eigen::Index>(last - first + 1);
  std::vector<std::size_t> ions(static_cast<std::size_t>(count));
  for (std::size_t r = 0; r < ions.size(); ++r) ions[r] = first - 1 + r;
  return diagonalize(full.block(start, start, count, count), Axis::transverse_x, std::move(ions), chain.size(),
                     chain.n_edge);
}

struct TruncatedGate {
  GateResult result;
  GateResult full;
  std::size_t first_free = 0;
  std::size_t last_free = 0;
  double amplitude_distance = 0.0;  // relative L2, up to a global sign
};

inline double amplitude_distance(std::span<const double> a, std::span<const double> reference) {
  if (a.size() != reference.size()) throw ConfigError("amplitude vectors differ in length");
  double plus = 0.0, minus = 0.0, norm = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    plus += (a[s] - reference[s]) * (a[s] - reference[s]);
    minus += (a[s] + reference[s]) * (a[s] + reference[s]);
    norm += reference[s] * reference[s];
  }
  return std::sqrt(std::min(plus, minus) / norm);
}

inline TruncatedGate truncated_chain_gate(IonPair pair, std::size_t window, const IonChain& chain, double mu,
                                          double tau, std::size_t n_segments,
                                          ThermalConvention convention = ThermalConvention::paper) {
  const auto [first, last] = free_window(pair, window, chain.size());
  const ModeSet full_modes = diagonalize(chain, Axis::transverse_x);
  const ModeSet sub_modes = truncated_modes(chain, first, last);

  TruncatedGate out;
  out.first_free = first;
  out.last_free = last;
  out.full = optimize_segments(pair, mu, tau, n_segments, full_modes,
                               thermal_state(full_modes, chain.params, convention), chain.params);
  out.result = optimize_segments(pair, mu, tau, n_segments, sub_modes,
                                 thermal_state(sub_modes, chain.params, convention), chain.params);
  out.amplitude_distance = amplitude_distance(out.result.schedule.amplitudes, out.full.schedule.amplitudes);
  return out;
}

struct SpinBranch {
  int first = 1;
  int second = 1;
};

// Largest spin-dependent transverse displacement of each mode-set ion during
// the gate, in meters, plus the same divided by the mean over the two targets.
struct ResponseProfile {
  std::vector<std::size_t> ions;  // 1-based chain indices
  std::vector<double> max_displacement;
  std::vector<double> normalized;
};

// For spin branch (s_i, s_j) mode k carries the coherent amplitude
// a_k(t) = (s_i g_i^k + s_j g_j^k) sum_s Omega_s int_0^t sin(mu t') e^{i w_k t'} dt'
// (interaction picture, displacement D(i a_k)). Back in the lab frame
//   <q_n>(t) = -sum_k b_n^k sqrt(2 hbar / m w_k) Im[a_k(t) e^{-i w_k t}].
// Sampled at samples_per_period points per transverse period 2 pi/omega_x,
// then refined 4x around each ion's coarse maximum.
inline ResponseProfile response_profile(const GateResult& result, const ModeSet& modes, const PhysicalParams& params,
                                        SpinBranch branch = {}, std::size_t samples_per_period = 20) {
  if (modes.axis != Axis::transverse_x) throw ConfigError("response needs transverse-x modes");
  if (samples_per_period < 1) throw ConfigError("at least one sample per period is required");
  const PulseSchedule& sched = result.schedule;
  const auto ri = gate_detail::target_row(modes, sched.target_pair.first);
  const auto rj = gate_detail::target_row(modes, sched.target_pair.second);
  const auto nk = static_cast<Eigen::Index>(modes.size());
  const auto rows = modes.vectors.rows();
  const std::size_t ns = sched.n_segments();
  if (ns == 0) throw ConfigError("schedule has no segments");

  Eigen::VectorXd coupling(nk), zpf(nk);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const double w = modes.frequencies[static_cast<std::size_t>(k)];
    const double eta = lamb_dicke(params, w);
    coupling[k] = branch.first * eta * modes.vectors(ri, k) + branch.second * eta * modes.vectors(rj, k);
    zpf[k] = std::sqrt(2.0 * constants::hbar / (params.ion_mass * w));
  }

  // Cumulative drive up to the start of each segment.
  Eigen::MatrixXcd prefix = Eigen::MatrixXcd::Zero(nk, static_cast<Eigen::Index>(ns));
  for (std::size_t s = 1; s < ns; ++s) {
    const Segment prev = sched.segment(s - 1);
    for (Eigen::Index k = 0; k < nk; ++k) {
      prefix(k, static_cast<Eigen::Index>(s)) =
          prefix(k, static_cast<Eigen::Index>(s - 1)) +
          sched.amplitudes[s - 1] * segment_alpha_kernel(modes.frequencies[static_cast<std::size_t>(k)],
                                                         sched.detuning, prev);
    }
  }

  Eigen::VectorXd y(nk);
  auto mode_coordinates = [&](double t) {
    std::size_t s = std::min(ns - 1, static_cast<std::size_t>(t / sched.gate_time * static_cast<double>(ns)));
    const Segment seg = sched.segment(s);
    for (Eigen::Index k = 0; k < nk; ++k) {
      const double w = modes.frequencies[static_cast<std::size_t>(k)];
      const cplx drive = prefix(k, static_cast<Eigen::Index>(s)) +
                         sched.amplitudes[s] * segment_alpha_kernel(w, sched.detuning, seg.begin, std::max(seg.begin, t));
      const cplx a = coupling[k] * drive * std::polar(1.0, -w * t);
      y[k] = -zpf[k] * a.imag();
    }
  };

  const double period = constants::two_pi / params.omega_x;
  const double dt_target = period / static_cast<double>(samples_per_period);
  const auto steps = static_cast<std::size_t>(std::ceil(sched.gate_time / dt_target));
  const double dt = sched.gate_time / static_cast<double>(steps);

  Eigen::VectorXd peak = Eigen::VectorXd::Zero(rows);
  std::vector<std::size_t> peak_step(static_cast<std::size_t>(rows), 0);
  for (std::size_t step = 0; step <= steps; ++step) {
    mode_coordinates(dt * static_cast<double>(step));
    const Eigen::VectorXd q = modes.vectors * y;
    for (Eigen::Index n = 0; n < rows; ++n) {
      if (std::abs(q[n]) > peak[n]) {
        peak[n] = std::abs(q[n]);
        peak_step[static_cast<std::size_t>(n)] = step;
      }
    }
  }
  for (Eigen::Index n = 0; n < rows; ++n) {
    const double centre = dt * static_cast<double>(peak_step[static_cast<std::size_t>(n)]);
    for (int j = -3; j <= 3; ++j) {
      if (j == 0) continue;
      const double t = centre + 0.25 * dt * j;
      if (t < 0.0 || t > sched.gate_time) continue;
      mode_coordinates(t);
      peak[n] = std::max(peak[n], std::abs(modes.vectors.row(n).dot(y)));
    }
  }

  ResponseProfile out;
  out.ions.resize(static_cast<std::size_t>(rows));
  out.max_displacement.resize(static_cast<std::size_t>(rows));
  out.normalized.resize(static_cast<std::size_t>(rows));
  const double reference = 0.5 * (peak[ri] + peak[rj]);
  for (Eigen::Index n = 0; n < rows; ++n) {
    const auto idx = static_cast<std::size_t>(n);
    out.ions[idx] = modes.ions[idx] + 1;
    out.max_displacement[idx] = peak[n];
    out.normalized[idx] = reference > 0.0 ? peak[n] / reference : 0.0;
  }
  return out;
}

}  // namespace iongate
