#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "optomech/cavity.hpp"
#include "optomech/mechanics.hpp"
#include "optomech/quantum_noise.hpp"

namespace optomech {

// Signal and meter beams sharing one cavity, orthogonally polarized.
// psi_s, psi_m: nonlinear phases each beam alone would produce; psi_bar: meter detuning.
struct TwoBeamSetup {
  CavityParams cav;
  const MechanicalResponse* mech = nullptr;
  double psi_s = 0.0;
  double psi_m = 0.0;
  double psi_bar = 0.0;

  void validate() const {
    require(mech != nullptr, "two-beam setup needs a mechanical response");
    require(psi_s >= 0.0 && psi_m >= 0.0, "nonlinear phases must be non-negative");
  }
  double filter_amplitude(double omega) const {
    const double g = cav.gamma(), wt = omega * cav.tau();
    return g * g / (g * g + wt * wt);
  }
};

struct SignalNoise {
  double signal;
  double noise;
  double correlation() const { return signal / (signal + noise); }
};

// Resonant meter read in its phase quadrature, signal in its amplitude quadrature.
inline SignalNoise resonant_signal_noise(const TwoBeamSetup& s, double omega) {
  s.validate();
  require(s.psi_bar == 0.0, "resonant configuration needs psi_bar = 0");
  require(omega > 0.0, "spectra need omega > 0");
  const double g = s.cav.gamma();
  const double f = s.filter_amplitude(omega);
  const cplx cb = s.mech->chi_bar(omega);
  const double ba = 16.0 * f * f * std::norm(cb);
  SignalNoise r;
  r.signal = ba * s.psi_s * s.psi_m / (g * g);
  r.noise = 1.0 + ba * s.psi_m * s.psi_m / (g * g) +
            16.0 * f * cb.imag() * (s.psi_m / g) * k_B * s.mech->temperature() / (hbar * omega);
  return r;
}

// Near-resonance form without the cavity filter.
inline SignalNoise resonant_signal_noise_approx(const TwoBeamSetup& s, const HarmonicOscillator& osc, double omega) {
  s.validate();
  const double g = s.cav.gamma();
  const double c2 = std::norm(osc.chi_bar(omega));
  const double nt = phonon_number(osc.omega_m, osc.temp);
  return {16.0 * c2 * s.psi_s * s.psi_m / (g * g),
          1.0 + 16.0 * c2 * s.psi_m * s.psi_m / (g * g) + 16.0 * c2 * (s.psi_m / g) * nt / osc.q};
}

inline double correlation(const TwoBeamSetup& s, double omega) { return resonant_signal_noise(s, omega).correlation(); }

// Classical force spectrum imprinted by the signal beam's intensity noise, N^2/Hz.
inline double signal_force_spectrum(const TwoBeamSetup& s, double omega) {
  const double g = s.cav.gamma(), wt = omega * s.cav.tau();
  return 2.0 * g / (g * g + wt * wt) * hbar * s.psi_s / s.mech->chi0();
}

struct MeterPoint {
  OperatingPoint op;
  double turning_distance;  // |Psi_NL - nearest turning point| / gamma, inf without bistability
  bool near_turning_point;
};

// Meter on the lower branch at mean detuning psi_bar with its own nonlinear phase psi_m.
inline MeterPoint meter_operating_point(const TwoBeamSetup& s) {
  const double g = s.cav.gamma();
  MeterPoint m;
  m.op = OperatingPoint::make(s.psi_bar - s.psi_m, s.psi_m);
  const auto tp = turning_points(m.op.psi0, g);
  const double sigma = bistability_slope(m.op.psi0, m.op.psi_nl, g);
  if (!(sigma > 0.0)) throw SingularityError("meter operating point lies on the unstable branch");
  m.op.stable = true;
  m.op.branch = (tp.size() == 2 && m.op.psi_nl >= tp[1]) ? Branch::upper : Branch::lower;
  m.turning_distance = std::numeric_limits<double>::infinity();
  for (double t : tp) m.turning_distance = std::min(m.turning_distance, std::abs(m.op.psi_nl - t) / g);
  m.near_turning_point = m.turning_distance < 0.25;
  return m;
}

struct DetunedSpectra {
  QuadratureForm own;     // meter noise without the signal contribution
  QuadratureForm signal;  // C_T(theta) S_F
  double total(double theta) const { return own.at(theta) + signal.at(theta); }
  double correlation(double theta) const {
    const double t = total(theta);
    return t > 0.0 ? signal.at(theta) / t : 0.0;
  }
};

inline DetunedSpectra detuned_spectra(const TwoBeamSetup& s, double omega) {
  s.validate();
  require(omega > 0.0, "spectra need omega > 0");
  const auto m = meter_operating_point(s);
  const double chi0 = s.mech->chi0();
  const auto p = fluctuation_coefficients(s.cav, m.op, s.mech->chi_bar(omega), chi0, omega);
  const auto n = fluctuation_coefficients(s.cav, m.op, s.mech->chi_bar(-omega), chi0, -omega);
  const double st = s.mech->temperature() > 0.0 ? s.mech->force_spectrum(omega) : 0.0;
  const double sf = signal_force_spectrum(s, omega);
  const double ct_a = std::norm(p.cT) + std::norm(n.cT);
  const cplx ct_z = 2.0 * p.cT * n.cT;
  DetunedSpectra d;
  d.own.A = 0.5 * (std::norm(p.c1) + std::norm(n.c2) + std::norm(n.c1) + std::norm(p.c2)) + ct_a * st;
  d.own.Z = p.c1 * n.c2 + n.c1 * p.c2 + ct_z * st;
  d.signal.A = ct_a * sf;
  d.signal.Z = ct_z * sf;
  return d;
}

inline double detuned_meter_spectrum(const TwoBeamSetup& s, double theta, double omega) {
  return detuned_spectra(s, omega).total(theta);
}

inline double detuned_correlation(const TwoBeamSetup& s, double theta, double omega) {
  return detuned_spectra(s, omega).correlation(theta);
}

struct OptimalCorrelation {
  double correlation;
  double theta;  // quadrature minimizing the meter's own noise
};

inline OptimalCorrelation detuned_optimal_correlation(const TwoBeamSetup& s, double omega) {
  const auto d = detuned_spectra(s, omega);
  const double th = d.own.argmin();
  return {d.correlation(th), th};
}

}  // namespace optomech
