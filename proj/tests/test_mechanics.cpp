#include "catch_amalgamated.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "optomech/mechanics.hpp"

using namespace optomech;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("susceptibility at rest and at resonance") {
  for (auto d : {Damping::viscous, Damping::constant_phi}) {
    HarmonicOscillator o(1e-6, 1e7, 1e6, d, 300.0);
    auto c0 = o.chi(0.0);
    CHECK(c0.imag() == 0.0);
    CHECK_THAT(c0.real(), WithinRel(1.0 / (1e-6 * 1e14), 1e-14));
    CHECK_THAT(std::abs(o.chi(1e7)), WithinRel(1e6 / (1e-6 * 1e14), 1e-12));
    CHECK_THAT(o.phi(o.omega_m), WithinRel(1e-6, 1e-14));
  }
}

TEST_CASE("viscous susceptibility is the damped Lorentzian") {
  HarmonicOscillator o(2e-4, 3e5, 40.0);
  for (double w = 1e3; w < 1e8; w *= 1.3) {
    const cplx ref = 1.0 / (o.mass * cplx(o.omega_m * o.omega_m - w * w, -w * o.omega_m / o.q));
    CHECK_THAT(std::abs(o.chi(w) - ref) / std::abs(ref), WithinAbs(0.0, 1e-14));
  }
}

TEST_CASE("passivity and conjugate symmetry") {
  for (auto d : {Damping::viscous, Damping::constant_phi}) {
    HarmonicOscillator o(1e-6, 1e7, 1e3, d, 1.0);
    for (double w = 1e2; w < 1e10; w *= 1.5) {
      CHECK(o.chi(w).imag() > 0.0);
      CHECK(o.chi(-w) == std::conj(o.chi(w)));
    }
  }
}

TEST_CASE("Langevin force spectrum") {
  HarmonicOscillator v(1e-6, 1e7, 1e6, Damping::viscous, 300.0);
  HarmonicOscillator c(1e-6, 1e7, 1e6, Damping::constant_phi, 300.0);
  const double flat = 2.0 * k_B * 300.0 * 1e-6 * 1e7 / 1e6;
  for (double w : {1e3, 1e6, 1e7, 3e9}) CHECK_THAT(langevin_spectrum(v, w), WithinRel(flat, 1e-12));
  CHECK_THAT(v.force_spectrum(0.0), WithinRel(flat, 1e-15));
  CHECK_THROWS_AS(c.force_spectrum(0.0), DomainError);
  CHECK_THAT(c.force_spectrum(1e7), WithinRel(v.force_spectrum(1e7), 1e-12));
  // the generic FDT path from Im(1/chi)
  for (double w : {1e5, 1e7, 1e8}) {
    CHECK_THAT(v.MechanicalResponse::force_spectrum(w), WithinRel(v.force_spectrum(w), 1e-9));
    CHECK_THAT(c.MechanicalResponse::force_spectrum(w), WithinRel(c.force_spectrum(w), 1e-9));
  }
  HarmonicOscillator cold(1e-6, 1e7, 1e6);
  CHECK(cold.force_spectrum(1e7) == 0.0);
  CHECK_THROWS_AS(v.force_spectrum(-1.0), DomainError);
}

TEST_CASE("thermal displacement spectrum: two forms and the resonance peak") {
  for (auto d : {Damping::viscous, Damping::constant_phi}) {
    HarmonicOscillator o(1e-6, 1e7, 1e4, d, 300.0);
    for (double w = 1e5; w < 1e9; w *= 1.21)
      CHECK_THAT(thermal_displacement_spectrum(o, w), WithinRel(o.displacement_spectrum(w), 1e-10));
  }
  HarmonicOscillator o(1e-6, 1e7, 1e6, Damping::viscous, 300.0);
  CHECK_THAT(thermal_displacement_spectrum(o, 1e7), WithinRel(2.0 * k_B * 300.0 * 1e6 / (1e-6 * 1e21), 1e-10));
  HarmonicOscillator cold(1e-6, 1e7, 1e6);
  for (double w : {1e5, 1e7, 1e9}) CHECK(thermal_displacement_spectrum(cold, w) == 0.0);
}

TEST_CASE("equipartition by quadrature") {
  using boost::math::quadrature::gauss_kronrod;
  for (double q : {10.0, 1e2, 1e4, 1e6}) {
    HarmonicOscillator o(1e-6, 1e7, q, Damping::viscous, 300.0);
    auto sx = [&](double w) { return thermal_displacement_spectrum(o, w); };
    // split at the resonance, with subintervals scaled to the linewidth
    const double wm = o.omega_m, hw = wm / q;
    double integral = 0.0;
    std::vector<double> edges{1e-6 * wm};
    for (double k : {-200.0, -20.0, -2.0, 0.0, 2.0, 20.0, 200.0}) {
      const double e = wm + k * hw;
      if (e > edges.back()) edges.push_back(e);
    }
    for (size_t i = 1; i < edges.size(); ++i)
      integral += gauss_kronrod<double, 61>::integrate(sx, edges[i - 1], edges[i], 15, 1e-12);
    boost::math::quadrature::exp_sinh<double> tail;
    integral += tail.integrate([&](double w) { return sx(w); }, edges.back(), INFINITY);
    // S_x is even, so the integral over all frequencies is twice the positive half
    const double variance = 2.0 * integral / (2.0 * pi);
    CHECK_THAT(variance / (k_B * 300.0 / (o.mass * wm * wm)), WithinRel(1.0, 0.01));
  }
}

TEST_CASE("phonon number") {
  CHECK_THAT(phonon_number(1e7, 1.0), WithinRel(1.309e4, 1e-3));
  CHECK_THAT(phonon_number(1.2e7, 300.0), WithinRel(3.27e6, 2e-3));
  CHECK(phonon_number(1e7, 0.0) == 0.0);
  CHECK_THROWS_AS(phonon_number(0.0, 1.0), DomainError);
}

TEST_CASE("oscillator rejects unphysical parameters") {
  CHECK_THROWS_AS(HarmonicOscillator(0.0, 1e7, 1e6), DomainError);
  CHECK_THROWS_AS(HarmonicOscillator(1e-6, -1.0, 1e6), DomainError);
  CHECK_THROWS_AS(HarmonicOscillator(1e-6, 1e7, 0.0), DomainError);
  CHECK_THROWS_AS(HarmonicOscillator(1e-6, 1e7, 1e6, Damping::viscous, -1.0), DomainError);
}
