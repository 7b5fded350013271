#include "catch_amalgamated.hpp"

#include "optomech/cavity.hpp"
#include "optomech/mechanics.hpp"

using namespace optomech;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double g = 1e-5;
const double lambda = 1e-6;
const HarmonicOscillator osc(1e-4, 1e5, 1e6);
const CavityParams cav = CavityParams::from_bandwidth(g, 0.0, 1e5 / 3.0);

double flux_for_drive(double d) {
  const double k = 2.0 * pi / lambda;
  return d * g * g / (2.0 * 4.0 * hbar * k * k * osc.chi0());
}
}  // namespace

TEST_CASE("optical field keeps power and flux consistent") {
  auto f = OpticalField::from_power(812e-9, 100e-6);
  CHECK_THAT(f.power(), WithinRel(100e-6, 1e-12));
  CHECK_THAT(f.k(), WithinRel(2.0 * pi / 812e-9, 1e-15));
  CHECK_THROWS_AS(OpticalField(-1.0, 1.0), DomainError);
  CHECK_THROWS_AS(OpticalField(1e-6, -1.0), DomainError);
}

TEST_CASE("cavity parameters tie finesse, bandwidth and free spectral range") {
  for (double L : {0.5e-3, 1.06e-3, 0.21}) {
    CavityParams c(20e-6, 30e-6, L);
    CHECK_THAT(c.finesse() * 2.0 * c.nu_bp(), WithinRel(c.nu_isl(), 1e-12));
    CHECK_THAT(c.tau(), WithinRel(2.0 * L / c_light, 1e-15));
  }
  CHECK_THAT(CavityParams(10e-6, 0.0, 0.5e-3).nu_isl(), WithinRel(299.792458e9, 1e-12));
  CHECK_THROWS_AS(CavityParams(0.0, 0.0, 1e-3), DomainError);
}

TEST_CASE("linear cavity has one Airy root") {
  OpticalField f(lambda, 1e15);
  auto r = steady_states(cav, f, 0.0, 0.0);
  REQUIRE(r.size() == 1);
  CHECK_THAT(r[0].intracavity, WithinRel(2.0 / g * 1e15, 1e-12));
  for (double psi0 : {-3 * g, -g, 0.5 * g, 4 * g}) {
    auto s = steady_states(cav, f, psi0, 0.0);
    REQUIRE(s.size() == 1);
    CHECK_THAT(s[0].intracavity, WithinRel(2.0 * g * 1e15 / (g * g + psi0 * psi0), 1e-12));
    CHECK(s[0].psi_nl == 0.0);
  }
}

TEST_CASE("steady states satisfy the state equation and the detuning identity") {
  const double k = 2.0 * pi / lambda;
  const double a = 4.0 * hbar * k * k * osc.chi0();
  for (double d : {0.5, 3.0, 4.0, 5.0, 7.0}) {
    OpticalField f(lambda, flux_for_drive(d));
    for (const auto& op : steady_states(cav, f, -3 * g, osc.chi0())) {
      const double psi = op.psi0 + a * op.intracavity;
      CHECK_THAT(op.intracavity * (g * g + psi * psi), WithinRel(2.0 * g * f.flux, 1e-10));
      CHECK(op.psi_bar == op.psi0 + op.psi_nl);
      CHECK(op.intracavity >= 0.0);
    }
  }
}

TEST_CASE("hysteresis window gives three roots with an unstable middle") {
  OpticalField f(lambda, flux_for_drive(4.0));
  auto r = steady_states(cav, f, -3 * g, osc.chi0());
  REQUIRE(r.size() == 3);
  CHECK(r[0].intracavity < r[1].intracavity);
  CHECK(r[1].intracavity < r[2].intracavity);
  CHECK(r[1].branch == Branch::middle);
  CHECK_FALSE(r[1].stable);
  CHECK(r[0].stable);
  CHECK(r[2].stable);
  CHECK(bistability_slope(r[0].psi0, r[0].psi_nl, g) > 0.0);
  CHECK(bistability_slope(r[1].psi0, r[1].psi_nl, g) < 0.0);
  CHECK(bistability_slope(r[2].psi0, r[2].psi_nl, g) > 0.0);
}

TEST_CASE("scan of the drive: every triple has slopes +,-,+ and single roots are stable") {
  int triples = 0;
  for (int i = 1; i < 400; ++i) {
    OpticalField f(lambda, flux_for_drive(8.0 * i / 400.0));
    auto r = steady_states(cav, f, -3 * g, osc.chi0());
    REQUIRE((r.size() == 1 || r.size() == 3));
    if (r.size() == 3) {
      ++triples;
      CHECK(bistability_slope(-3 * g, r[1].psi_nl, g) < 0.0);
      CHECK(bistability_slope(-3 * g, r[0].psi_nl, g) > 0.0);
      CHECK(bistability_slope(-3 * g, r[2].psi_nl, g) > 0.0);
    } else {
      CHECK(r[0].stable);
    }
  }
  CHECK(triples > 0);
}

TEST_CASE("branch labels of single roots") {
  auto low = steady_states(cav, OpticalField(lambda, flux_for_drive(1.0)), -3 * g, osc.chi0());
  auto high = steady_states(cav, OpticalField(lambda, flux_for_drive(7.0)), -3 * g, osc.chi0());
  REQUIRE(low.size() == 1);
  REQUIRE(high.size() == 1);
  CHECK(low[0].branch == Branch::lower);
  CHECK(high[0].branch == Branch::upper);
}

TEST_CASE("zero drive gives the empty cavity") {
  auto r = steady_states(cav, OpticalField(lambda, 0.0), -3 * g, osc.chi0());
  REQUIRE(r.size() == 1);
  CHECK(r[0].intracavity == 0.0);
}

TEST_CASE("steady states reject bad inputs") {
  OpticalField f(lambda, 1e15);
  CHECK_THROWS_AS(steady_states(cav, f, std::nan(""), 1e-9), DomainError);
  CHECK_THROWS_AS(steady_states(cav, f, 0.0, -1.0), DomainError);
  CHECK_THROWS_AS(steady_states(cav, f, 0.0, INFINITY), DomainError);
}

TEST_CASE("bistability slope values") {
  CHECK_THAT(bistability_slope(0.0, 0.0, g), WithinRel(g / 2.0, 1e-14));
  CHECK_THAT(bistability_slope(-3 * g, g, g), WithinRel(g / 2.0, 1e-14));
  CHECK_THAT(bistability_slope(-3 * g, (2.0 - std::sqrt(6.0) / 3.0) * g, g), WithinAbs(0.0, 1e-18));
  CHECK_THROWS_AS(bistability_slope(0.0, 0.0, 0.0), DomainError);
  auto tp = turning_points(-3 * g, g);
  REQUIRE(tp.size() == 2);
  CHECK_THAT(tp[0] / g, WithinRel(1.1835034, 1e-6));
  CHECK_THAT(tp[1] / g, WithinRel(2.8164966, 1e-6));
  CHECK(turning_points(-1.5 * g, g).empty());
}

TEST_CASE("required input flux inverts the nonlinear phase") {
  const double k = 2.0 * pi / lambda;
  const double flux = required_input_flux(cav, k, 1e-4, 1e5, -2 * g, g);
  CHECK_THAT(power_from_flux(flux, lambda), WithinRel(3e-3, 0.05));
  CHECK(required_input_flux(cav, k, 1e-4, 1e5, -2 * g, 0.0) == 0.0);
  const double heavy = required_input_flux(cav, k, 1e-6, 1e7, -2 * g, g);
  CHECK_THAT(power_from_flux(heavy, lambda), WithinRel(0.3, 0.05));
  CHECK_THROWS_AS(required_input_flux(cav, k, 1e-4, 1e5, -2 * g, -g), DomainError);
  // round trip through the steady-state solver on the lower branch
  auto r = steady_states(cav, OpticalField(lambda, flux), -3 * g, osc.chi0());
  CHECK_THAT(r.front().psi_nl, WithinRel(g, 1e-9));
}

TEST_CASE("mean reflection") {
  for (double psi : {-5 * g, -g, 0.0, 0.3 * g, 10 * g}) CHECK_THAT(std::abs(mean_reflection(g, 0.0, psi)), WithinRel(1.0, 1e-12));
  CHECK(std::abs(mean_reflection(g, g, 0.0)) < 1.0);
  CHECK_THAT(resonant_reflection(47000.0, 52e-6), WithinAbs(0.048, 0.002));
  CHECK_THAT(mode_matched_reflection(0.048, 0.98), WithinAbs(0.067, 0.001));
  // resonant intensity reflection matches |r(0)|^2 with F = pi/gamma
  const double g1 = 26e-6, g2 = 40e-6;
  CHECK_THAT(std::norm(mean_reflection(g1, g2, 0.0)), WithinRel(resonant_reflection(pi / (g1 + g2), 2 * g1), 1e-12));
}

TEST_CASE("cavity geometry") {
  auto geo = geometry(0.5e-3, 1.0, 812e-9);
  CHECK(geo.w0 >= 75e-6);
  CHECK(geo.w0 <= 90e-6);
  CHECK_THAT(geo.nu_isl, WithinRel(300e9, 0.001));
  CHECK_THAT(geo.transverse_spacing(1), WithinRel(2.1e9, 0.05));
  CHECK_THROWS_AS(geometry(1.0, 1.0, 812e-9), DomainError);
  CHECK_THROWS_AS(geometry(2.0, 1.0, 812e-9), DomainError);
}

TEST_CASE("two-port resonant transmission") {
  CHECK_THAT(two_port_resonant_transmission(100e-6, 100e-6, 0.0, 0.0), WithinRel(1.0, 1e-6));
  // 4 T^2/(2T + P1 + P2)^2 to leading order
  CHECK_THAT(two_port_resonant_transmission(2000e-6, 2000e-6, 30e-6, 30e-6), WithinAbs(0.9707, 0.001));
  const double t = two_port_resonant_transmission(50e-6, 5e-6, 0.0, 0.0);
  CHECK_THAT(t, WithinRel(4.0 * 50e-6 * 5e-6 / std::pow(55e-6, 2), 1e-3));
  CHECK_THAT(t, WithinAbs(0.33, 0.01));
  CHECK_THROWS_AS(two_port_resonant_transmission(0.0, 0.0, 0.0, 0.0), DomainError);
  CHECK_THROWS_AS(two_port_resonant_transmission(1.0, 0.1, 0.0, 0.0), DomainError);
}

TEST_CASE("intensity filter") {
  auto at = intensity_filter(1e6, 1e6, 0.4);
  CHECK_THAT(at.T, WithinRel(0.5, 1e-15));
  CHECK_THAT(to_db(at.T), WithinAbs(-3.0103, 1e-4));
  auto dc = intensity_filter(0.0, 1e6, 0.4);
  CHECK(dc.T == 1.0);
  CHECK(dc.q_out == 0.4);
  CHECK_THAT(to_db(intensity_filter(5e6, 1e6, 1.0).T), WithinAbs(-14.15, 0.01));
  for (double w = 1e3; w < 1e9; w *= 1.7) {
    auto f = intensity_filter(w, 2.3e6, 1.0);
    CHECK_THAT(f.T + f.R, WithinRel(1.0, 1e-15));
  }
  CHECK(attenuated_mandel(2.0, 0.25) == 0.5);
  CHECK_THROWS_AS(intensity_filter(1.0, 0.0, 1.0), DomainError);
}
