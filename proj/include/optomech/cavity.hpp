#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "optomech/constants.hpp"

namespace optomech {

using cplx = std::complex<double>;

struct OpticalField {
  double lambda = 1e-6;  // m
  double flux = 0.0;     // incident photons/s

  OpticalField() = default;
  OpticalField(double lambda_m, double flux_per_s) : lambda(lambda_m), flux(flux_per_s) {
    require(lambda > 0.0, "wavelength must be positive");
    require(flux >= 0.0, "incident flux must be non-negative");
  }
  static OpticalField from_power(double lambda_m, double power_w) {
    return OpticalField(lambda_m, flux_from_power(power_w, lambda_m));
  }

  double k() const { return 2.0 * pi / lambda; }
  double power() const { return power_from_flux(flux, lambda); }
};

// Single-port Fabry-Perot. gamma1 = T1/2, gamma2 = half the other round-trip losses.
struct CavityParams {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double length = 0.0;                                        // m
  double curvature = std::numeric_limits<double>::infinity();  // input mirror, m

  CavityParams() = default;
  CavityParams(double g1, double g2, double length_m,
               double curvature_m = std::numeric_limits<double>::infinity())
      : gamma1(g1), gamma2(g2), length(length_m), curvature(curvature_m) {
    require(gamma1 >= 0.0 && gamma2 >= 0.0, "cavity loss coefficients must be non-negative");
    require(gamma() > 0.0 && gamma() < 0.5, "total cavity loss gamma must satisfy 0 < gamma << 1");
    require(length > 0.0, "cavity length must be positive");
  }

  // Build from a bandwidth instead of a length: tau = gamma / Omega_cav.
  static CavityParams from_bandwidth(double g1, double g2, double omega_cav) {
    require(omega_cav > 0.0, "cavity bandwidth must be positive");
    double tau = (g1 + g2) / omega_cav;
    return CavityParams(g1, g2, 0.5 * c_light * tau);
  }
  static CavityParams from_finesse(double finesse, double omega_cav, double g2 = 0.0) {
    require(finesse > 0.0, "finesse must be positive");
    double g = pi / finesse;
    require(g2 < g, "internal losses exceed total losses");
    return from_bandwidth(g - g2, g2, omega_cav);
  }

  double gamma() const { return gamma1 + gamma2; }
  double T1() const { return 2.0 * gamma1; }
  double tau() const { return 2.0 * length / c_light; }
  double finesse() const { return pi / gamma(); }
  double omega_cav() const { return gamma() / tau(); }
  double nu_bp() const { return omega_cav() / (2.0 * pi); }
  double nu_isl() const { return c_light / (2.0 * length); }
};

enum class Branch { lower, middle, upper };

inline const char* to_string(Branch b) {
  switch (b) {
    case Branch::lower: return "lower";
    case Branch::middle: return "middle";
    case Branch::upper: return "upper";
  }
  return "?";
}

struct OperatingPoint {
  double psi0 = 0.0;
  double psi_nl = 0.0;
  double psi_bar = 0.0;
  double intracavity = 0.0;  // photons/s
  bool stable = true;
  Branch branch = Branch::lower;

  static OperatingPoint make(double psi0, double psi_nl, double intracavity = 0.0) {
    OperatingPoint op;
    op.psi0 = psi0;
    op.psi_nl = psi_nl;
    op.psi_bar = psi0 + psi_nl;
    op.intracavity = intracavity;
    return op;
  }
};

inline double bistability_slope(double psi0, double psi_nl, double gamma) {
  require(gamma > 0.0, "gamma must be positive");
  return (3.0 * psi_nl * psi_nl + 4.0 * psi0 * psi_nl + gamma * gamma + psi0 * psi0) / (2.0 * gamma);
}

// Psi_NL values (rad) where the slope vanishes; empty when psi0 > -sqrt(3) gamma.
inline std::vector<double> turning_points(double psi0, double gamma) {
  require(gamma > 0.0, "gamma must be positive");
  double p0 = psi0 / gamma;
  double disc = p0 * p0 - 3.0;
  if (disc <= 0.0) return {};
  double s = std::sqrt(disc);
  std::vector<double> out;
  for (double x : {(-2.0 * p0 - s) / 3.0, (-2.0 * p0 + s) / 3.0})
    if (x > 0.0) out.push_back(x * gamma);
  return out;
}

namespace detail {

// Real roots of x^3 + b x^2 + c x + d = 0, ascending, each polished by Newton.
inline std::vector<double> real_cubic_roots(double b, double c, double d) {
  const double p = c - b * b / 3.0;
  const double q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
  const double shift = -b / 3.0;
  const double scale = 1.0 + std::abs(b) + std::sqrt(std::abs(c)) + std::cbrt(std::abs(d));
  const double disc = -(4.0 * p * p * p + 27.0 * q * q);
  std::vector<double> roots;
  if (disc > 1e-12 * std::pow(scale, 6)) {
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double th = std::acos(arg) / 3.0;
    for (int j = 0; j < 3; ++j) roots.push_back(m * std::cos(th - 2.0 * pi * j / 3.0) + shift);
  } else {
    const double h = std::sqrt(std::max(0.0, q * q / 4.0 + p * p * p / 27.0));
    roots.push_back(std::cbrt(-q / 2.0 + h) + std::cbrt(-q / 2.0 - h) + shift);
  }
  for (double& x : roots) {
    for (int it = 0; it < 3; ++it) {
      double f = ((x + b) * x + c) * x + d;
      double fp = (3.0 * x + 2.0 * b) * x + c;
      if (fp == 0.0) break;
      double step = f / fp;
      if (!std::isfinite(step) || std::abs(step) > 1e-3 * scale) break;
      x -= step;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace detail

// All steady states of the radiation-pressure detuned cavity, ascending in intracavity flux.
inline std::vector<OperatingPoint> steady_states(const CavityParams& cav, const OpticalField& field,
                                                 double psi0, double chi0) {
  require_finite(psi0, "psi0");
  require_finite(chi0, "chi0");
  require_finite(field.flux, "incident flux");
  require(chi0 >= 0.0, "static susceptibility must be non-negative");
  require(field.flux >= 0.0, "incident flux must be non-negative");
  const double g = cav.gamma();
  const double k = field.k();
  const double a = 4.0 * hbar * k * k * chi0;  // Psi_NL per intracavity photon/s

  std::vector<OperatingPoint> out;
  if (a == 0.0) {
    auto op = OperatingPoint::make(psi0, 0.0, 2.0 * g * field.flux / (g * g + psi0 * psi0));
    out.push_back(op);
    return out;
  }
  const double p0 = psi0 / g;
  const double drive = 2.0 * a * field.flux / (g * g);
  auto xs = detail::real_cubic_roots(2.0 * p0, 1.0 + p0 * p0, -drive);
  for (double x : xs) {
    x = std::max(x, 0.0);
    out.push_back(OperatingPoint::make(psi0, x * g, x * g / a));
  }
  if (out.size() == 3) {
    out[0].branch = Branch::lower;
    out[1].branch = Branch::middle;
    out[1].stable = false;
    out[2].branch = Branch::upper;
  } else {
    auto tp = turning_points(psi0, g);
    if (tp.size() == 2 && out[0].psi_nl >= tp[1]) out[0].branch = Branch::upper;
  }
  return out;
}

// Incident flux needed to reach a given nonlinear phase at mean detuning psi_bar.
inline double required_input_flux(const CavityParams& cav, double k, double mass, double omega_m,
                                  double psi_bar, double psi_nl_target) {
  require(mass > 0.0 && omega_m > 0.0, "mass and resonance frequency must be positive");
  require(psi_nl_target >= 0.0, "target nonlinear phase must be non-negative");
  const double g = cav.gamma();
  const double per_flux = (2.0 * g / (g * g + psi_bar * psi_bar)) * (4.0 * hbar * k * k / (mass * omega_m * omega_m));
  return psi_nl_target / per_flux;
}

inline cplx mean_reflection(double gamma1, double gamma2, double psi_bar) {
  require(gamma1 > 0.0, "gamma1 must be positive");
  require(gamma2 >= 0.0, "gamma2 must be non-negative");
  const double g = gamma1 + gamma2;
  return cplx(2.0 * gamma1 - g, psi_bar) / cplx(g, -psi_bar);
}

// Resonant intensity reflection (1 - F T1/pi)^2.
inline double resonant_reflection(double finesse, double T1) {
  double r = 1.0 - finesse * T1 / pi;
  return r * r;
}

// Reflection measured with imperfect mode matching eta.
inline double mode_matched_reflection(double R0, double eta = 1.0) {
  require(eta > 0.0 && eta <= 1.0, "mode matching must lie in (0, 1]");
  return 1.0 - eta * (1.0 - R0);
}

// Phase of the reflected mean field; the intracavity mean field is taken real.
inline double output_mean_phase(double gamma, double psi_bar) { return std::arg(cplx(gamma, psi_bar)); }

struct CavityGeometry {
  double w0;        // waist on the flat mirror, m
  double nu_isl;    // Hz
  double nu_gouy;   // transverse spacing per unit of p+l, Hz

  double transverse_spacing(int order) const { return nu_gouy * order; }
};

inline CavityGeometry geometry(double length, double curvature, double lambda) {
  require(length > 0.0 && lambda > 0.0, "length and wavelength must be positive");
  if (!(length < curvature)) throw DomainError("unstable cavity geometry: length must be below curvature radius");
  CavityGeometry g;
  g.w0 = std::sqrt((lambda / pi) * std::sqrt(length * (curvature - length)));
  g.nu_isl = c_light / (2.0 * length);
  g.nu_gouy = (g.nu_isl / pi) * std::acos(std::sqrt(1.0 - length / curvature));
  return g;
}

inline double two_port_resonant_transmission(double T1, double T2, double P1, double P2) {
  for (double v : {T1, T2, P1, P2}) require(v >= 0.0 && v < 1.0, "mirror coefficients must lie in [0, 1)");
  const double R1 = 1.0 - T1 - P1, R2 = 1.0 - T2 - P2;
  require(R1 >= 0.0 && R2 >= 0.0, "mirror reflectivity negative");
  const double den = 1.0 - std::sqrt(R1 * R2);
  require(den > 0.0, "resonant transmission denominator vanishes");
  return T1 * T2 / (den * den);
}

struct FilterResponse {
  double T;      // intensity transmission of fluctuations
  double R;      // reflected part, 1 - T
  double q_out;  // transmitted Mandel factor
};

inline FilterResponse intensity_filter(double omega, double omega_cav, double q_in) {
  require(omega_cav > 0.0, "filter bandwidth must be positive");
  const double u = omega / omega_cav;
  const double T = 1.0 / (1.0 + u * u);
  return {T, 1.0 - T, T * q_in};
}

// Mandel factor after an attenuation eta.
inline double attenuated_mandel(double q, double eta) {
  require(eta >= 0.0 && eta <= 1.0, "attenuation must lie in [0, 1]");
  return eta * q;
}

}  // namespace optomech
