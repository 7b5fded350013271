#include "catch_amalgamated.hpp"

#include <filesystem>
#include <fstream>

#include "optomech/montecarlo.hpp"

using namespace optomech;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {
const double lambda = 1e-6;
const double om = 2.0 * pi * 1e3;
const HarmonicOscillator desk(1e-3, om, 10.0);
}  // namespace

TEST_CASE("photon stream basics") {
  const auto s = generate_stream(1e5, 2.0, 3);
  REQUIRE(!s.times.empty());
  for (size_t i = 1; i < s.times.size(); ++i) CHECK(s.times[i] > s.times[i - 1]);
  CHECK(s.times.front() >= 0.0);
  CHECK(s.times.back() < s.duration);
  const double n = s.times.size(), expected = 2e5;
  CHECK(std::abs(n - expected) < 5.0 * std::sqrt(expected));

  CHECK(generate_stream(0.0, 1.0, 1).times.empty());
  CHECK(generate_stream(1e6, 0.0, 1).times.empty());
  CHECK_THROWS_AS(generate_stream(10.0, 1.0, 1), DomainError);
  CHECK_THROWS_AS(generate_stream(1e10, 1.0, 1), ResourceError);
  CHECK_THROWS_AS(generate_stream(-1.0, 1.0, 1), DomainError);
}

TEST_CASE("stream is a deterministic function of the seed") {
  const auto a = generate_stream(1e4, 1.0, 42), b = generate_stream(1e4, 1.0, 42), c = generate_stream(1e4, 1.0, 43);
  CHECK(a.times == b.times);
  CHECK(a.times != c.times);
  // regression pin (mt19937_64 with the libstdc++ exponential distribution)
  CHECK(a.times.front() == 0.00014071320984121438);
  CHECK(a.times.size() == 10001);
}

TEST_CASE("Poisson counting statistics") {
  const auto s = generate_stream(1e6, 1.0, 11);
  const auto counts = window_counts(s, 1e-4);
  REQUIRE(counts.size() == 10000);
  double m = 0.0;
  for (double c : counts) m += c;
  m /= counts.size();
  CHECK_THAT(m, WithinRel(100.0, 0.05));
  CHECK_THAT(fano_factor(counts), WithinAbs(1.0, 0.05));
  // the comb has no counting noise at all
  CHECK(fano_factor(window_counts(comb_stream(1e-5, 1.0), 1e-4)) < 1e-3);
}

TEST_CASE("mirror trajectory: no light, no motion") {
  PhotonStream empty;
  empty.duration = 0.01;
  const auto tr = mirror_trajectory(empty, desk, lambda);
  REQUIRE(!tr.x.empty());
  for (double x : tr.x) CHECK(x == 0.0);
  CHECK_THROWS_AS(mirror_trajectory(empty, desk, lambda, 16), ConfigError);
  CHECK_THROWS_AS(mirror_trajectory(empty, HarmonicOscillator(1e-3, om, 0.4), lambda), DomainError);
}

TEST_CASE("impulse response matches the damped Green function") {
  for (double q : {10.0, 1e3}) {
    HarmonicOscillator osc(1e-3, om, q);
    PhotonStream one;
    one.duration = 10.0 * 2.0 * pi / om;
    one.times = {0.0};
    const auto tr = mirror_trajectory(one, osc, lambda, 64);
    const double beta = om / (2.0 * q), wd = om * std::sqrt(1.0 - 1.0 / (4.0 * q * q));
    const double amp = tr.kick / om;
    CHECK_THAT(tr.kick, WithinRel(2.0 * hbar * 2.0 * pi / lambda / osc.mass, 1e-15));
    for (size_t j = 1; j < tr.x.size(); ++j) {
      const double t = j * tr.dt;
      const double green = tr.kick / wd * std::exp(-beta * t) * std::sin(wd * t);
      CHECK_THAT(tr.x[j] - green, WithinAbs(0.0, 1e-6 * amp));
      if (q >= 1e3) {
        const double first_order = amp * std::exp(-om * t / (2.0 * q)) * std::sin(om * t);
        CHECK_THAT(tr.x[j] - first_order, WithinAbs(0.0, 1e-4 * amp));
      }
    }
  }
}

TEST_CASE("mean displacement equals the static recoil") {
  const double flux = 1e6;
  const auto s = generate_stream(flux, 2.0, 5);
  const auto tr = mirror_trajectory(s, desk, lambda);
  double m = 0.0;
  // skip the start-up transient (a few decay times 2Q/Omega_M)
  const size_t skip = static_cast<size_t>(10.0 * 2.0 * desk.q / desk.omega_m / tr.dt);
  for (size_t j = skip; j < tr.x.size(); ++j) m += tr.x[j];
  m /= (tr.x.size() - skip);
  const double recoil = 2.0 * hbar * (2.0 * pi / lambda) * flux * desk.chi0();
  CHECK_THAT(m, WithinRel(recoil, 0.05));
}

TEST_CASE("reflection conserves photons and is the identity without motion") {
  const auto s = generate_stream(1e5, 0.5, 9);
  const auto tr = mirror_trajectory(s, desk, lambda);
  const auto still = reflect_stream(s, tr, 0.0);
  CHECK(still.times == s.times);
  const double big = cancelling_amplification(1e5, desk, lambda);
  const auto moved = reflect_stream(s, tr, big);
  CHECK(moved.times.size() == s.times.size());
  CHECK(std::is_sorted(moved.times.begin(), moved.times.end()));
  CHECK(moved.times != s.times);
  PhotonStream other = s;
  other.times.pop_back();
  CHECK_THROWS_AS(reflect_stream(other, tr), DomainError);
}

TEST_CASE("linearized reflected noise") {
  const double flux = 1e6;
  const double a = cancelling_amplification(flux, desk, lambda);
  CHECK_THAT(reflected_noise_ratio(flux, desk, lambda, a, om), WithinAbs(0.0, 1e-20));
  CHECK(reflected_noise_ratio(flux, desk, lambda, 0.0, om) == 1.0);
  CHECK(reflected_noise_ratio(flux, desk, lambda, a, 0.2 * om) > 0.5);
}

TEST_CASE("binned spectrum of a Poisson stream is flat at the mean flux") {
  const double flux = 1e6;
  const auto s = generate_stream(flux, 4.0, 21);
  const auto sp = binned_spectrum(s, default_bin_width(om), 128);
  REQUIRE(sp.segments >= 64);
  CHECK(sp.spectrum.warnings.empty());
  CHECK(sp.spectrum.unit == SpectrumUnit::photons_per_s);
  const double top = sp.spectrum.omega.back();
  double mean = 0.0;
  for (double v : sp.spectrum.values) mean += v;
  mean /= sp.spectrum.values.size();
  CHECK_THAT(mean, WithinRel(flux, 0.1));
  for (int b = 0; b < 8; ++b) {
    const auto [m, e] = sp.band(top * b / 8.0, top * (b + 1) / 8.0);
    CHECK_THAT(m, WithinRel(flux, 0.1));
    CHECK(std::abs(m - flux) < 3.0 * e);
  }
}

TEST_CASE("binned spectrum structure checks") {
  // a comb puts its power at the harmonics of the bin-aliased repetition rate
  const double spacing = 8.0e-5, tau = 1e-5;
  const auto sp = binned_spectrum(comb_stream(spacing, 2.0), tau, 16);
  size_t kmax = 0;
  for (size_t k = 0; k < sp.spectrum.values.size(); ++k)
    if (sp.spectrum.values[k] > sp.spectrum.values[kmax]) kmax = k;
  CHECK_THAT(sp.spectrum.omega[kmax], WithinRel(2.0 * pi / spacing, 0.01));

  const auto few = binned_spectrum(generate_stream(1e5, 0.1, 1), 1e-4, 4);
  CHECK(!few.spectrum.warnings.empty());
  CHECK_THROWS_AS(binned_spectrum(generate_stream(1e5, 0.01, 1), 1e-4, 64), DomainError);

  const auto a = binned_spectrum(generate_stream(1e5, 0.5, 8), 1e-4, 16);
  const auto b = binned_spectrum(generate_stream(1e5, 0.5, 8), 1e-4, 16);
  CHECK(a.spectrum.values == b.spectrum.values);
}

TEST_CASE("coupled run: reflected noise dips below the incident flux at resonance") {
  const double flux = 1e6;
  const auto in = generate_stream(flux, 4.0, 42);
  const double x0 = 2.0 * hbar * (2.0 * pi / lambda) * flux * desk.chi0();
  const auto tr = mirror_trajectory(in, desk, lambda, 32, x0);
  const auto out = reflect_stream(in, tr, cancelling_amplification(flux, desk, lambda));
  const auto sp = binned_spectrum(out, default_bin_width(om), 256);
  const auto [at_res, e_res] = sp.band(0.9 * om, 1.1 * om);
  const auto [high, e_high] = sp.band(5.0 * om, 8.0 * om);
  CHECK(at_res < 0.5 * flux);
  CHECK(flux - at_res > 10.0 * e_res);
  CHECK_THAT(high, WithinRel(flux, 0.1));
}

TEST_CASE("order-of-magnitude estimates") {
  const auto e = order_of_magnitude(10.0, 1e-6, 100e-6, 1e5, 1e6);
  CHECK_THAT(e.delta_x_t, WithinRel(65e-6, 0.05));
  CHECK_THAT(e.mean_recoil / 1e-6, WithinRel(7e-8, 0.05));
  CHECK_THAT(e.delta_x / 1e-6, WithinRel(2e-12, 0.1));
  CHECK_THROWS_AS(order_of_magnitude(0.0, 1e-6, 1e-4, 1e5, 1e6), DomainError);
}

TEST_CASE("stream dump round trip") {
  const auto s = generate_stream(1e4, 1.0, 42);
  const auto path = (std::filesystem::temp_directory_path() / "optomech_stream_roundtrip.bin").string();
  write_stream(s, path);
  CHECK(std::filesystem::file_size(path) == 8 * (s.times.size() + 1));
  CHECK(read_stream(path) == s.times);
  std::filesystem::resize_file(path, 8 * 10);
  CHECK_THROWS(read_stream(path));
  std::filesystem::remove(path);
}
