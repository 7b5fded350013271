#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "optomech/cavity.hpp"
#include "optomech/constants.hpp"
#include "optomech/mechanics.hpp"

namespace optomech {

struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FluctuationCoefficients {
  cplx c1, c2, cT, delta;
};

// Linear input-output coefficients of the reflected field at frequency omega (may be negative).
// cT multiplies the Langevin force, so its contribution to a spectrum is |cT|^2 S_T.
inline FluctuationCoefficients fluctuation_coefficients(const CavityParams& cav, const OperatingPoint& op,
                                                        cplx chi_bar, double chi0, double omega) {
  require(op.stable, "operating point must be on a stable branch");
  const double g = cav.gamma();
  const double wt = omega * cav.tau();
  const double pb = op.psi_bar, pn = op.psi_nl;
  const cplx i(0.0, 1.0);
  FluctuationCoefficients f;
  f.delta = (g - i * wt) * (g - i * wt) + pb * pb + 2.0 * pb * pn * chi_bar;
  if (std::abs(f.delta) < 1e-30) throw SingularityError("fluctuation denominator vanishes: operating point on the instability boundary");
  f.c1 = (wt * wt + (g + i * pb) * (g + i * pb + 2.0 * i * pn * chi_bar)) / f.delta;
  f.c2 = 2.0 * i * g * pn * chi_bar / f.delta;
  f.cT = (2.0 * i / f.delta) * std::sqrt(2.0 * g) * (g + i * pb - i * wt) * chi_bar *
         std::sqrt(pn * chi0 / (4.0 * hbar));
  return f;
}

struct QuadratureForm {
  double A;  // theta-independent part
  cplx Z;    // S_theta = A + Re(Z exp(-2 i theta))
  double at(double theta) const { return A + std::real(Z * std::exp(cplx(0.0, -2.0 * theta))); }
  double minimum() const { return A - std::abs(Z); }
  double argmin() const { return 0.5 * (std::arg(Z) - pi); }
};

struct OptimalSpectrum {
  double value;
  double theta;
};

// Reflected-field noise of a cavity with one movable mirror, coherent input.
class QuantumNoiseModel {
 public:
  QuantumNoiseModel(const CavityParams& cav, const OperatingPoint& op, const MechanicalResponse& mech)
      : cav_(cav), op_(op), mech_(&mech) {
    require(op.stable, "operating point must be on a stable branch");
  }

  const CavityParams& cavity() const { return cav_; }
  const OperatingPoint& operating_point() const { return op_; }

  FluctuationCoefficients coefficients(double omega) const {
    return fluctuation_coefficients(cav_, op_, mech_->chi_bar(omega), mech_->chi0(), omega);
  }

  QuadratureForm quadrature_form(double omega) const {
    require(omega > 0.0, "spectra need omega > 0");
    const auto p = coefficients(omega);
    const auto m = coefficients(-omega);
    const double st = mech_->temperature() > 0.0 ? mech_->force_spectrum(omega) : 0.0;
    QuadratureForm q;
    q.A = 0.5 * (std::norm(p.c1) + std::norm(m.c2) + std::norm(m.c1) + std::norm(p.c2)) +
          (std::norm(p.cT) + std::norm(m.cT)) * st;
    q.Z = p.c1 * m.c2 + m.c1 * p.c2 + 2.0 * p.cT * m.cT * st;
    return q;
  }

  double quadrature_spectrum(double theta, double omega) const { return quadrature_form(omega).at(theta); }

  OptimalSpectrum optimal_spectrum(double omega) const {
    const auto q = quadrature_form(omega);
    return {q.minimum(), q.argmin()};
  }

  // Intensity noise normalized to shot noise, 1 + S + T, in closed form.
  double intensity_relative(double omega) const {
    const double st = mech_->temperature() > 0.0 ? mech_->force_spectrum(omega) : 0.0;
    return 1.0 + signal_term(omega) + thermal_term(omega, mech_->chi0() * st / hbar);
  }

  // Thermal term for an oscillator in equilibrium with viscous damping.
  double intensity_relative_equilibrium(double omega, double n_thermal, double q) const {
    return 1.0 + signal_term(omega) + thermal_term(omega, 2.0 * n_thermal / q);
  }

  double output_flux(double input_flux) const {
    return std::norm(mean_reflection(cav_.gamma1, cav_.gamma2, op_.psi_bar)) * input_flux;
  }

  double intensity_spectrum(double omega, double input_flux) const {
    return output_flux(input_flux) * intensity_relative(omega);
  }

  // Amplitude quadrature of the reflected beam.
  double amplitude_angle() const { return output_mean_phase(cav_.gamma(), op_.psi_bar); }

  double signal_term(double omega) const {
    const double g = cav_.gamma(), pb = op_.psi_bar, pn = op_.psi_nl;
    const double wt = omega * cav_.tau();
    const cplx cb = mech_->chi_bar(omega);
    const double d2 = std::norm(coefficients(omega).delta);
    return 8.0 * g * g * pb * wt / d2 * (pn / g) * (cb.imag() + g * wt / (g * g + pb * pb) * cb.real());
  }

  // w = chi0 S_T / hbar (dimensionless rate ratio)
  double thermal_term(double omega, double w) const {
    const double g = cav_.gamma(), pb = op_.psi_bar, pn = op_.psi_nl;
    const double wt = omega * cav_.tau();
    const double d2 = std::norm(coefficients(omega).delta);
    const double num = g * pb * wt;
    return 8.0 * num * num / ((g * g + pb * pb) * d2) * (pn / g) * std::norm(mech_->chi_bar(omega)) * w;
  }

 private:
  CavityParams cav_;
  OperatingPoint op_;
  const MechanicalResponse* mech_;
};

inline double cavity_filter(double omega, double omega_cav) { return 1.0 / (1.0 + std::pow(omega / omega_cav, 2)); }

// Phase noise of the reflected beam at resonance for a displacement spectrum S_x, shot-noise units.
inline double resonant_phase_spectrum(double s_x, const CavityParams& cav, const OpticalField& field, double omega,
                                      double s_q_in = 1.0) {
  const double F = cav.finesse();
  const double eff = cav.gamma1 / cav.gamma();
  return s_q_in + 256.0 * cavity_filter(omega, cav.omega_cav()) * F * F * field.flux /
                      (field.lambda * field.lambda) * eff * eff * s_x;
}

// Thermal phase noise written through the normalized response:
// 1 + 16 filt (Psi/gamma) (k_B T / hbar Omega) Im chi_bar. Works for any response.
inline double thermal_phase_spectrum(const MechanicalResponse& mech, double psi_nl, double gamma, double omega_cav,
                                     double omega) {
  require(omega > 0.0, "spectrum needs omega > 0");
  return 1.0 + 16.0 * cavity_filter(omega, omega_cav) * (psi_nl / gamma) *
                   (k_B * mech.temperature() / (hbar * omega)) * mech.chi_bar(omega).imag();
}

// Single-oscillator form with the loss-angle ratio and n_T/Q made explicit.
inline double thermal_phase_spectrum_oscillator(const HarmonicOscillator& osc, double psi_nl, double gamma,
                                                double omega_cav, double omega) {
  require(omega > 0.0, "spectrum needs omega > 0");
  const double ratio = (osc.phi(omega) / omega) / (osc.phi(osc.omega_m) / osc.omega_m);
  const double nt = phonon_number(osc.omega_m, osc.temp);
  return 1.0 + 16.0 * std::norm(osc.chi_bar(omega)) * cavity_filter(omega, omega_cav) * (psi_nl / gamma) * ratio *
                   nt / osc.q;
}

// Nonlinear phase of a resonant, lossless cavity driven by `field`.
inline double resonant_nonlinear_phase(const CavityParams& cav, const OpticalField& field, double chi0) {
  const double k = field.k();
  return 8.0 * hbar * k * k * chi0 * field.flux / cav.gamma();
}

// Smallest detectable displacement, m/sqrt(Hz), including coupler/loss ratio.
inline double displacement_sensitivity(const CavityParams& cav, const OpticalField& field, double omega) {
  if (!(cav.gamma1 > 0.0)) throw DomainError("coupler transmission must be positive");
  require(field.flux > 0.0, "incident flux must be positive");
  return field.lambda / (16.0 * cav.finesse() * std::sqrt(field.flux)) *
         std::sqrt(1.0 + std::pow(omega / cav.omega_cav(), 2)) * (cav.gamma() / cav.gamma1);
}

// Lossless low-frequency limit.
inline double displacement_sensitivity_ideal(double finesse, const OpticalField& field) {
  return field.lambda / (16.0 * finesse * std::sqrt(field.flux));
}

}  // namespace optomech
