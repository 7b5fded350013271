#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "optomech/cavity.hpp"
#include "optomech/constants.hpp"
#include "optomech/mechanics.hpp"

namespace optomech {

struct ConvergenceError : std::runtime_error {
  double tail_estimate;
  double partial_sum;
  ConvergenceError(double tail, double sum)
      : std::runtime_error("mode sum not converged: tail bound " + std::to_string(tail) + " vs partial sum " +
                           std::to_string(sum) + " (raise p_max/q_max)"),
        tail_estimate(tail),
        partial_sum(sum) {}
};

struct PlanoConvexResonator {
  double h0 = 1.5e-3;      // center thickness, m
  double radius = 0.15;    // convex face curvature, m
  double density = 2200.0; // kg/m^3
  double sound_speed = 5970.0;  // longitudinal, m/s
  double q = 1e6;
  Damping damping = Damping::viscous;
  double temp = 300.0;
  int p_max = 200;
  int q_max = 200;

  void validate() const {
    require(h0 > 0.0 && radius > 0.0, "resonator thickness and curvature must be positive");
    require(density > 0.0 && sound_speed > 0.0, "material constants must be positive");
    require(q > 0.0 && temp >= 0.0, "Q must be positive and temperature non-negative");
    require(radius / h0 >= 20.0, "paraxial resonator needs R/h0 >= 20");
    require(p_max >= 1 && q_max >= 0, "truncation orders must satisfy p_max >= 1, q_max >= 0");
  }
  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (radius / h0 < 50.0) w.push_back("R/h0 below 50: paraxial mode formulas are approximate");
    return w;
  }

  double omega_m() const { return pi * sound_speed / h0; }
  // (2/pi) sqrt(h0/R), the transverse frequency shift parameter
  double epsilon() const { return (2.0 / pi) * std::sqrt(h0 / radius); }
};

inline double mode_waist(const PlanoConvexResonator& r, int p) {
  require(p >= 1, "mode order p must be >= 1");
  return std::sqrt((2.0 * r.h0 / (p * pi)) * std::sqrt(r.radius * r.h0));
}

inline double mode_frequency(const PlanoConvexResonator& r, int p, int q) {
  require(p >= 1 && q >= 0, "mode orders must satisfy p >= 1, q >= 0");
  const double pp = p;
  return r.omega_m() * std::sqrt(pp * pp + (2.0 * q + 1.0) * pp * r.epsilon());
}

inline double mode_mass(const PlanoConvexResonator& r, int p) {
  const double w = mode_waist(r, p);
  return (pi / 4.0) * r.density * r.h0 * w * w;
}

inline double overlap(double w_p, double w0, int q) {
  require(w_p > 0.0 && w0 > 0.0, "waists must be positive");
  require(q >= 0, "q must be >= 0");
  const double x = (w_p / w0) * (w_p / w0);
  double ratio = (x - 0.5) / (x + 0.5);
  // w0 = sqrt(2) w_p up to rounding is the matched waist; its transverse overlaps vanish identically
  if (std::abs(ratio) < 8.0 * std::numeric_limits<double>::epsilon()) ratio = 0.0;
  return (x / (x + 0.5)) * (q == 0 ? 1.0 : std::pow(ratio, q));
}

struct AcousticMode {
  int p, q;
  double omega;    // rad/s
  double waist;    // m
  double mass;     // kg
  double overlap;  // with the optical intensity profile
  double weight() const { return overlap * overlap; }
  double chi0() const { return 1.0 / (mass * omega * omega); }
};

struct StaticSum {
  double inv_mass_eff;  // 1/M_eff, 1/kg
  double tail_bound;    // bound on the neglected part of 1/M_eff
};

// Immutable table of the (p, q) modes retained by the truncation, for one optical waist.
class ModeTable final : public MechanicalResponse {
 public:
  // enforce_convergence=false keeps deliberately truncated tables (single-mode limits).
  ModeTable(const PlanoConvexResonator& res, double w0, bool enforce_convergence = true) : res_(res), w0_(w0) {
    res.validate();
    require(w0 > 0.0, "optical waist must be positive");
    modes_.reserve(static_cast<size_t>(res.p_max) * (res.q_max + 1));
    for (int p = 1; p <= res.p_max; ++p) {
      const double wp = mode_waist(res, p);
      const double mp = mode_mass(res, p);
      for (int q = 0; q <= res.q_max; ++q)
        modes_.push_back({p, q, mode_frequency(res, p, q), wp, mp, optomech::overlap(wp, w0, q)});
    }
    stat_ = static_sum();
    if (enforce_convergence && stat_.tail_bound > 0.01 * stat_.inv_mass_eff)
      throw ConvergenceError(stat_.tail_bound, stat_.inv_mass_eff);
    chi0_ = stat_.inv_mass_eff / (res_.omega_m() * res_.omega_m());
  }

  const std::vector<AcousticMode>& modes() const { return modes_; }
  const PlanoConvexResonator& resonator() const { return res_; }
  double waist() const { return w0_; }
  double tail_bound() const { return stat_.tail_bound; }
  double relative_tail() const { return stat_.tail_bound / stat_.inv_mass_eff; }

  double effective_mass() const { return 1.0 / stat_.inv_mass_eff; }
  double optical_mass() const { return optical_mass_for(res_, w0_); }
  static double optical_mass_for(const PlanoConvexResonator& r, double w0) {
    return (12.0 / (pi * pi)) * (pi / 4.0) * r.density * r.h0 * w0 * w0;
  }

  double phi(double omega) const { return loss_angle(res_.damping, omega, res_.omega_m(), res_.q); }

  cplx mode_chi(const AcousticMode& m, double omega) const {
    const double w = std::abs(omega);
    cplx r = 1.0 / (m.mass * cplx(m.omega * m.omega - w * w, -m.omega * m.omega * phi(w)));
    return omega < 0.0 ? std::conj(r) : r;
  }

  cplx chi(double omega) const override {
    if (omega == 0.0) return chi0_;
    cplx s = 0.0;
    for (const auto& m : modes_)
      if (m.overlap != 0.0) s += m.weight() * mode_chi(m, omega);
    return s;
  }
  double chi0() const override { return chi0_; }
  double temperature() const override { return res_.temp; }

  // Sum over modes of weight * (chi_pq[0]/chi_eff[0]) * |chi_bar_pq|^2.
  double weighted_response(double omega) const {
    double s = 0.0;
    for (const auto& m : modes_) {
      if (m.overlap == 0.0) continue;
      const double c0 = m.chi0();
      s += m.weight() * (c0 / chi0_) * std::norm(mode_chi(m, omega) / c0);
    }
    return s;
  }

 private:
  StaticSum static_sum() const {
    const double M1 = mode_mass(res_, 1);
    const double eps = res_.epsilon();
    const double r2 = std::pow(mode_waist(res_, 1) / w0_, 2);
    const double a = 2.0 * r2;
    double sum = 0.0, q_tail = 0.0;
    for (const auto& m : modes_) sum += m.weight() / (m.p + eps * (2.0 * m.q + 1.0));
    for (int p = 1; p <= res_.p_max; ++p) {
      const double rho = (a - p) / (a + p);
      const double o = optomech::overlap(mode_waist(res_, p), w0_, res_.q_max + 1);
      const double next = o * o / (p + eps * (2.0 * (res_.q_max + 1) + 1.0));
      q_tail += next / (1.0 - rho * rho);
    }
    const double p_tail = r2 / (2.0 * res_.p_max);
    return {sum / M1, (q_tail + p_tail) / M1};
  }

  PlanoConvexResonator res_;
  double w0_;
  std::vector<AcousticMode> modes_;
  StaticSum stat_{};
  double chi0_ = 0.0;
};

inline cplx effective_susceptibility(const ModeTable& t, double omega) { return t.chi(omega); }
inline double effective_mass(const ModeTable& t) { return t.effective_mass(); }
inline double optical_mass(const PlanoConvexResonator& r, double w0) { return ModeTable::optical_mass_for(r, w0); }
inline double effective_langevin_spectrum(const ModeTable& t, double omega) { return t.force_spectrum(omega); }

// Multimode phase-noise spectrum of the reflected beam at resonance, shot-noise units.
// psi_hat is the nonlinear phase built on chi_eff[0].
inline double multimode_thermal_phase_spectrum(const ModeTable& t, double gamma, double omega_cav, double psi_hat,
                                               double omega) {
  require(omega > 0.0, "spectrum needs omega > 0");
  const auto& r = t.resonator();
  const double filt = 1.0 / (1.0 + std::pow(omega / omega_cav, 2));
  const double om = r.omega_m();
  const double phi_ratio = (t.phi(omega) / omega) / (t.phi(om) / om);
  const double nt = phonon_number(om, r.temp);
  return 1.0 + 16.0 * filt * (psi_hat / gamma) * phi_ratio * (nt / r.q) * t.weighted_response(omega);
}

// Same, with psi_hat derived from the incident beam on a resonant cavity.
inline double multimode_thermal_phase_spectrum(const ModeTable& t, const CavityParams& cav,
                                               const OpticalField& field, double omega) {
  const double g = cav.gamma();
  const double intracavity = 2.0 * cav.gamma1 * field.flux / (g * g);
  const double psi_hat = 4.0 * hbar * field.k() * field.k() * intracavity * t.chi0();
  return multimode_thermal_phase_spectrum(t, g, cav.omega_cav(), psi_hat, omega);
}

}  // namespace optomech
