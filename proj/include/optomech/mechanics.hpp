#pragma once

#include <cmath>
#include <complex>

#include "optomech/constants.hpp"

namespace optomech {

using cplx = std::complex<double>;

enum class Damping { viscous, constant_phi };

inline const char* to_string(Damping d) { return d == Damping::viscous ? "viscous" : "constant_phi"; }

// Loss angle; equals 1/Q at Omega = Omega_M for both models.
inline double loss_angle(Damping d, double omega, double omega_m, double q) {
  return d == Damping::viscous ? std::abs(omega) / (q * omega_m) : 1.0 / q;
}

// Anything that can answer "how does the mirror surface move under a force".
class MechanicalResponse {
 public:
  virtual ~MechanicalResponse() = default;

  // Complex susceptibility, m/N. Negative frequencies by conjugation.
  virtual cplx chi(double omega) const = 0;
  virtual double chi0() const = 0;
  virtual double temperature() const = 0;

  cplx chi_bar(double omega) const { return chi(omega) / chi0(); }

  // Langevin force spectrum from the fluctuation-dissipation theorem, N^2/Hz.
  virtual double force_spectrum(double omega) const {
    require(omega > 0.0, "force spectrum needs omega > 0");
    return -(2.0 * k_B * temperature() / omega) * std::imag(1.0 / chi(omega));
  }

  // Thermal displacement spectrum (2 k_B T / Omega) Im chi, m^2/Hz.
  double displacement_spectrum(double omega) const {
    require(omega > 0.0, "displacement spectrum needs omega > 0");
    return (2.0 * k_B * temperature() / omega) * std::imag(chi(omega));
  }
};

struct HarmonicOscillator final : MechanicalResponse {
  double mass = 1e-6;     // kg
  double omega_m = 1e7;   // rad/s
  double q = 1e6;
  Damping damping = Damping::viscous;
  double temp = 0.0;      // K

  HarmonicOscillator() = default;
  HarmonicOscillator(double m, double om, double qf, Damping d = Damping::viscous, double t = 0.0)
      : mass(m), omega_m(om), q(qf), damping(d), temp(t) {
    require(mass > 0.0 && omega_m > 0.0 && q > 0.0, "oscillator mass, frequency and Q must be positive");
    require(temp >= 0.0, "temperature must be non-negative");
  }

  double phi(double omega) const { return loss_angle(damping, omega, omega_m, q); }

  cplx chi(double omega) const override {
    // the loss angle has to vanish at zero frequency, whatever model holds elsewhere
    if (omega == 0.0) return chi0();
    const double w = std::abs(omega);
    cplx r = 1.0 / (mass * cplx(omega_m * omega_m - w * w, -omega_m * omega_m * phi(w)));
    return omega < 0.0 ? std::conj(r) : r;
  }
  double chi0() const override { return 1.0 / (mass * omega_m * omega_m); }
  double temperature() const override { return temp; }

  double force_spectrum(double omega) const override {
    if (omega == 0.0) {
      if (damping == Damping::constant_phi)
        throw DomainError("constant loss-angle force spectrum is singular at omega = 0");
      return 2.0 * k_B * temp * mass * omega_m / q;
    }
    require(omega > 0.0, "force spectrum needs omega >= 0");
    return 2.0 * k_B * temp * mass * omega_m * omega_m * phi(omega) / omega;
  }
};

inline cplx susceptibility(const HarmonicOscillator& osc, double omega) { return osc.chi(omega); }
inline double langevin_spectrum(const HarmonicOscillator& osc, double omega) { return osc.force_spectrum(omega); }

// |chi|^2 S_T; the FDT form (2 k_B T / Omega) Im chi is MechanicalResponse::displacement_spectrum.
inline double thermal_displacement_spectrum(const HarmonicOscillator& osc, double omega) {
  return std::norm(osc.chi(omega)) * osc.force_spectrum(omega);
}

inline double phonon_number(double omega_m, double temperature) {
  require(omega_m > 0.0, "resonance frequency must be positive");
  require(temperature >= 0.0, "temperature must be non-negative");
  return k_B * temperature / (hbar * omega_m);
}

}  // namespace optomech
