#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "optomech/constants.hpp"
#include "optomech/mechanics.hpp"
#include "optomech/spectrum.hpp"

namespace optomech {

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PhotonStream {
  std::vector<double> times;  // s, sorted
  double duration = 0.0;      // s
  double flux = 0.0;          // nominal photons/s
};

// Poisson stream: i.i.d. exponential gaps from a seeded 64-bit Mersenne twister.
inline PhotonStream generate_stream(double flux, double duration, std::uint64_t seed) {
  require(flux >= 0.0 && duration >= 0.0, "flux and duration must be non-negative");
  PhotonStream s;
  s.duration = duration;
  s.flux = flux;
  const double expected = flux * duration;
  if (expected == 0.0) return s;
  require(expected >= 100.0, "expected photon count must be at least 100");
  if (expected > 1e9) throw ResourceError("expected photon count above 1e9");
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gap(flux);
  s.times.reserve(static_cast<size_t>(expected + 6.0 * std::sqrt(expected) + 16.0));
  double t = gap(rng);
  while (t < duration) {
    s.times.push_back(t);
    t += gap(rng);
  }
  return s;
}

// Equally spaced arrivals, useful as a noiseless reference.
inline PhotonStream comb_stream(double spacing, double duration) {
  require(spacing > 0.0 && duration > 0.0, "comb spacing and duration must be positive");
  PhotonStream s;
  s.duration = duration;
  s.flux = 1.0 / spacing;
  for (double t = 0.5 * spacing; t < duration; t += spacing) s.times.push_back(t);
  return s;
}

struct MirrorTrajectory {
  double dt = 0.0;                   // sampling step, s
  std::vector<double> x;             // x(j dt), m
  std::vector<double> x_at_photons;  // x(t_n) just before each kick, m
  HarmonicOscillator osc;
  double kick = 0.0;                 // velocity step per photon, m/s
};

// Viscously damped oscillator kicked by 2 hbar k per photon; exact propagation between events.
inline MirrorTrajectory mirror_trajectory(const PhotonStream& s, const HarmonicOscillator& osc, double lambda,
                                          int points_per_period = 32, double x0 = 0.0, double v0 = 0.0) {
  require(osc.q > 0.5, "oscillator must be underdamped (Q > 1/2)");
  require(lambda > 0.0, "wavelength must be positive");
  if (points_per_period < 20)
    throw ConfigError("trajectory sampling below 20 points per mechanical period (Nyquist margin)");
  MirrorTrajectory tr;
  tr.osc = osc;
  tr.dt = 2.0 * pi / (osc.omega_m * points_per_period);
  tr.kick = 2.0 * hbar * (2.0 * pi / lambda) / osc.mass;

  const double beta = osc.omega_m / (2.0 * osc.q);
  const double wd = osc.omega_m * std::sqrt(1.0 - 1.0 / (4.0 * osc.q * osc.q));
  double x = x0, v = v0, t = 0.0;
  auto advance = [&](double t_new) {
    const double h = t_new - t;
    if (h <= 0.0) return;
    const double e = std::exp(-beta * h), c = std::cos(wd * h), sn = std::sin(wd * h);
    const double b = (v + beta * x) / wd;
    const double xn = e * (x * c + b * sn);
    const double vn = e * (v * c - (beta * b + wd * x) * sn);
    x = xn;
    v = vn;
    t = t_new;
  };

  const size_t n_samples = static_cast<size_t>(std::floor(s.duration / tr.dt)) + 1;
  tr.x.reserve(n_samples);
  tr.x_at_photons.reserve(s.times.size());
  size_t j = 0;
  for (double tp : s.times) {
    while (j < n_samples && j * tr.dt <= tp) {
      advance(j * tr.dt);
      tr.x.push_back(x);
      ++j;
    }
    advance(tp);
    tr.x_at_photons.push_back(x);
    v += tr.kick;
  }
  for (; j < n_samples; ++j) {
    advance(j * tr.dt);
    tr.x.push_back(x);
  }
  return tr;
}

// Photon n leaves the mirror at t_n + amplification * 2 x(t_n) / c.
inline PhotonStream reflect_stream(const PhotonStream& s, const MirrorTrajectory& tr, double amplification = 1.0) {
  require(tr.x_at_photons.size() == s.times.size(), "trajectory does not cover the stream");
  PhotonStream out = s;
  for (size_t n = 0; n < out.times.size(); ++n) out.times[n] += amplification * 2.0 * tr.x_at_photons[n] / c_light;
  std::sort(out.times.begin(), out.times.end());
  return out;
}

// Amplification making the linear response cancel the incident noise exactly at Omega_M.
inline double cancelling_amplification(double flux, const HarmonicOscillator& osc, double lambda) {
  const double k = 2.0 * pi / lambda;
  return osc.mass * osc.omega_m * c_light / (osc.q * flux * 4.0 * hbar * k);
}

// Linearized reflected/incident spectrum ratio |1 + i Omega g chi|^2 with g = 4 A hbar k I / c.
inline double reflected_noise_ratio(double flux, const HarmonicOscillator& osc, double lambda, double amplification,
                                    double omega) {
  const double g = 4.0 * amplification * hbar * (2.0 * pi / lambda) * flux / c_light;
  return std::norm(1.0 + cplx(0.0, omega * g) * osc.chi(omega));
}

struct BinnedSpectrum {
  NoiseSpectrum spectrum;          // S_I in photons/s
  std::vector<double> std_error;   // per bin, from the segment scatter
  double tau_c = 0.0;
  size_t segment_bins = 0;
  size_t segments = 0;
  std::vector<std::vector<double>> periodograms;  // per segment, same grid as spectrum

  // Band average over [lo, hi] rad/s and its standard error across segments.
  std::pair<double, double> band(double lo, double hi) const {
    std::vector<double> per;
    for (const auto& row : periodograms) {
      double acc = 0.0;
      size_t n = 0;
      for (size_t i = 0; i < row.size(); ++i)
        if (spectrum.omega[i] >= lo && spectrum.omega[i] <= hi) acc += row[i], ++n;
      require(n > 0, "empty frequency band");
      per.push_back(acc / n);
    }
    return mean_and_error(per);
  }

  // Hann windows at 50% overlap: adjacent-segment periodogram correlation inflates the variance by ~1.056.
  static std::pair<double, double> mean_and_error(const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m += a;
    m /= v.size();
    double s2 = 0.0;
    for (double a : v) s2 += (a - m) * (a - m);
    s2 /= (v.size() - 1);
    return {m, std::sqrt(s2 * 1.056 / v.size())};
  }
};

// Welch estimate of the intensity noise of a stream, binned at tau_c, normalized so Poisson gives S = I.
inline BinnedSpectrum binned_spectrum(const PhotonStream& s, double tau_c, size_t n_segments) {
  require(tau_c > 0.0, "bin width must be positive");
  require(n_segments >= 2, "need at least two segments");
  const size_t nbins = static_cast<size_t>(std::floor(s.duration / tau_c));
  // longest power-of-two segment that still yields n_segments at 50% overlap
  const size_t target = 2 * nbins / (n_segments + 1);
  size_t L = 1;
  while (L * 2 <= target) L *= 2;
  require(L >= 8, "segments too short: fewer than 8 bins each");
  std::vector<double> counts(nbins, 0.0);
  for (double t : s.times) {
    if (t < 0.0) continue;
    const auto b = static_cast<size_t>(t / tau_c);
    if (b < nbins) counts[b] += 1.0;
  }
  std::vector<double> w(L);
  double w2 = 0.0;
  for (size_t i = 0; i < L; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * pi * i / L);
    w2 += w[i] * w[i];
  }
  BinnedSpectrum out;
  out.tau_c = tau_c;
  out.segment_bins = L;
  const size_t half = L / 2;
  for (size_t k = 1; k <= half; ++k) out.spectrum.omega.push_back(2.0 * pi * k / (L * tau_c));
  Eigen::FFT<double> fft;
  std::vector<double> seg(L);
  std::vector<std::complex<double>> spec;
  for (size_t start = 0; start + L <= nbins; start += half) {
    double mean = 0.0;
    for (size_t i = 0; i < L; ++i) mean += counts[start + i];
    mean /= L;
    for (size_t i = 0; i < L; ++i) seg[i] = w[i] * (counts[start + i] - mean);
    fft.fwd(spec, seg);
    std::vector<double> row(half);
    for (size_t k = 1; k <= half; ++k) row[k - 1] = std::norm(spec[k]) / (tau_c * w2);
    out.periodograms.push_back(std::move(row));
  }
  out.segments = out.periodograms.size();
  out.spectrum.unit = SpectrumUnit::photons_per_s;
  out.spectrum.values.assign(half, 0.0);
  out.std_error.assign(half, 0.0);
  std::vector<double> col(out.segments);
  for (size_t k = 0; k < half; ++k) {
    for (size_t j = 0; j < out.segments; ++j) col[j] = out.periodograms[j][k];
    auto [m, e] = BinnedSpectrum::mean_and_error(col);
    out.spectrum.values[k] = m;
    out.std_error[k] = e;
  }
  if (out.segments < 8) out.spectrum.warnings.push_back("fewer than 8 segments: spectrum statistics are poor");
  return out;
}

inline double default_bin_width(double omega_m) { return 2.0 * pi / (32.0 * omega_m); }

// Counts in consecutive windows of length T.
inline std::vector<double> window_counts(const PhotonStream& s, double window) {
  require(window > 0.0, "window must be positive");
  const auto n = static_cast<size_t>(std::floor(s.duration / window));
  std::vector<double> c(n, 0.0);
  for (double t : s.times) {
    if (t < 0.0) continue;
    const auto b = static_cast<size_t>(t / window);
    if (b < n) c[b] += 1.0;
  }
  return c;
}

inline double fano_factor(const std::vector<double>& counts) {
  require(counts.size() >= 2, "need at least two windows");
  double m = 0.0;
  for (double c : counts) m += c;
  m /= counts.size();
  double v = 0.0;
  for (double c : counts) v += (c - m) * (c - m);
  v /= (counts.size() - 1);
  return v / m;
}

struct MagnitudeEstimate {
  double flux;           // photons/s
  double delta_x_t;      // position resolution from time of flight, m
  double mean_recoil;    // static displacement, m
  double delta_x;        // radiation-pressure fluctuations, m
};

inline MagnitudeEstimate order_of_magnitude(double power, double lambda, double mass, double omega_m, double q) {
  require(power > 0.0 && lambda > 0.0 && mass > 0.0 && omega_m > 0.0 && q > 0.0, "all inputs must be positive");
  MagnitudeEstimate e;
  e.flux = flux_from_power(power, lambda);
  const double k = 2.0 * pi / lambda;
  e.delta_x_t = c_light / (2.0 * std::sqrt(e.flux * omega_m));
  e.mean_recoil = 2.0 * hbar * k * e.flux / (mass * omega_m * omega_m);
  e.delta_x = e.mean_recoil * std::sqrt(omega_m * q / (2.0 * e.flux));
  return e;
}

// Binary dump: little-endian u64 count, then little-endian f64 arrival times.
inline void write_stream(const PhotonStream& s, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  auto put = [&](std::uint64_t u) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
  };
  put(s.times.size());
  for (double t : s.times) put(std::bit_cast<std::uint64_t>(t));
}

inline std::vector<double> read_stream(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  auto get = [&]() {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    if (!f) throw std::runtime_error("truncated stream file " + path);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= std::uint64_t(b[i]) << (8 * i);
    return u;
  };
  const auto n = get();
  std::vector<double> t(n);
  for (auto& v : t) v = std::bit_cast<double>(get());
  return t;
}

}  // namespace optomech
