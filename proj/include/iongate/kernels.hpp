#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace iongate {

using cplx = std::complex<double>;

// Half-open time interval of a pulse segment, seconds.
struct Segment {
  double begin = 0.0;
  double end = 0.0;

  double length() const { return end - begin; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

namespace kernel_detail {

// sinh(z)/z, continuous through z = 0.
inline cplx sinhc(cplx z) {
  if (std::abs(z) < 1e-4) {
    const cplx z2 = z * z;
    return 1.0 + z2 / 6.0 + z2 * z2 / 120.0;
  }
  return std::sinh(z) / z;
}

}  // namespace kernel_detail

// First divided difference of exp: (e^b - e^a)/(b - a), stable as b -> a.
inline cplx exp_divided_difference(cplx a, cplx b) {
  return std::exp(0.5 * (a + b)) * kernel_detail::sinhc(0.5 * (b - a));
}

// Second divided difference of exp, i.e. the integral of exp over the unit
// simplex spanned by the three nodes. Clustered nodes use the series
// e^c sum_k h_k(z - c) / (k+2)! about their centroid c; spread nodes divide
// by the widest separation.
inline cplx exp_divided_difference(cplx z0, cplx z1, cplx z2) {
  std::array<cplx, 3> z{z0, z1, z2};
  const double d01 = std::abs(z[0] - z[1]);
  const double d02 = std::abs(z[0] - z[2]);
  const double d12 = std::abs(z[1] - z[2]);
  const double spread = std::max({d01, d02, d12});

  if (spread < 1.0) {
    const cplx c = (z[0] + z[1] + z[2]) / 3.0;
    const cplx x0 = z[0] - c, x1 = z[1] - c, x2 = z[2] - c;
    // h1_k = x0^k, h2_k = h2_{k-1} x1 + h1_k, h3_k = h3_{k-1} x2 + h2_k
    cplx h1 = 1.0, h2 = 1.0, h3 = 1.0;
    double factorial = 2.0;  // (k+2)!
    cplx sum = h3 / factorial;
    for (int k = 1; k < 40; ++k) {
      h1 *= x0;
      h2 = h2 * x1 + h1;
      h3 = h3 * x2 + h2;
      factorial *= static_cast<double>(k + 2);
      const cplx term = h3 / factorial;
      sum += term;
      if (k > 3 && std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return std::exp(c) * sum;
  }

  // Put the widest pair at the ends: f[a,b,c] = (f[b,c] - f[a,b]) / (c - a).
  if (d01 == spread) {
    std::swap(z[1], z[2]);
  } else if (d12 == spread) {
    std::swap(z[0], z[1]);
  }
  return (exp_divided_difference(z[1], z[2]) - exp_divided_difference(z[0], z[1])) / (z[2] - z[0]);
}

// Integral of sin(mu t) exp(i omega t) over [t_a, t_b], closed form; the
// resonant cases mu = +-omega are covered by the divided differences.
inline cplx segment_alpha_kernel(double omega, double mu, double t_a, double t_b) {
  if (t_b < t_a) throw std::invalid_argument("segment_alpha_kernel: t_a must not exceed t_b");
  const double len = t_b - t_a;
  if (len == 0.0) return 0.0;
  const cplx i{0.0, 1.0};
  auto plane_wave = [&](double nu) { return len * exp_divided_difference(i * nu * t_a, i * nu * t_b); };
  return (plane_wave(omega + mu) - plane_wave(omega - mu)) / (2.0 * i);
}

inline cplx segment_alpha_kernel(double omega, double mu, Segment s) {
  return segment_alpha_kernel(omega, mu, s.begin, s.end);
}

namespace kernel_detail {

// Ordered double integral over a <= t1 <= t2 <= b of exp(i p t2 + i q t1).
inline cplx ordered_plane_wave(double p, double q, double a, double b) {
  const double len = b - a;
  const cplx i{0.0, 1.0};
  return std::exp(i * ((p + q) * a)) * (len * len) *
         exp_divided_difference(0.0, i * (p * len), i * ((p + q) * len));
}

}  // namespace kernel_detail

// Integral of sin(mu t2) sin(mu t1) sin(omega (t2 - t1)) over t2 in `later`
// and t1 in `earlier` with t1 < t2. `earlier` must either precede `later`
// or coincide with it (the triangular diagonal block).
inline double segment_phi_kernel(double omega, double mu, Segment later, Segment earlier) {
  if (later == earlier) {
    const double a = later.begin, b = later.end;
    if (b < a) throw std::invalid_argument("segment_phi_kernel: inverted segment");
    if (b == a) return 0.0;
    // sin(mu t2) sin(mu t1) = -1/4 sum_{s2,s1} s2 s1 e^{i s2 mu t2} e^{i s1 mu t1}
    cplx sum = 0.0;
    for (int s2 : {1, -1}) {
      for (int s1 : {1, -1}) {
        sum += static_cast<double>(s2 * s1) *
               kernel_detail::ordered_plane_wave(omega + s2 * mu, s1 * mu - omega, a, b);
      }
    }
    return (-0.25 * sum).imag();
  }
  if (earlier.end > later.begin) {
    throw std::invalid_argument("segment_phi_kernel: earlier segment must precede the later one");
  }
  // Rectangular block factorizes: Im[K(later) conj(K(earlier))].
  const cplx k_later = segment_alpha_kernel(omega, mu, later);
  const cplx k_earlier = segment_alpha_kernel(omega, mu, earlier);
  return (k_later * std::conj(k_earlier)).imag();
}

}  // namespace iongate
