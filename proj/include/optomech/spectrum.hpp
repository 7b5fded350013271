#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "optomech/constants.hpp"

namespace optomech {

enum class SpectrumUnit { shot_relative, m2_per_hz, n2_per_hz, photons_per_s };

inline const char* unit_label(SpectrumUnit u) {
  switch (u) {
    case SpectrumUnit::shot_relative: return "shot_noise_units";
    case SpectrumUnit::m2_per_hz: return "m^2/Hz";
    case SpectrumUnit::n2_per_hz: return "N^2/Hz";
    case SpectrumUnit::photons_per_s: return "photons/s";
  }
  return "?";
}

struct NoiseSpectrum {
  std::vector<double> omega;   // rad/s, strictly increasing, > 0
  std::vector<double> values;
  SpectrumUnit unit = SpectrumUnit::shot_relative;
  std::vector<std::string> warnings;

  void validate() const {
    require(omega.size() == values.size(), "spectrum grid and values differ in length");
    for (size_t i = 0; i < omega.size(); ++i) {
      require(omega[i] > 0.0, "spectrum grid must be positive");
      require(i == 0 || omega[i] > omega[i - 1], "spectrum grid must be strictly increasing");
      require(std::isfinite(values[i]) && values[i] >= 0.0, "spectrum values must be finite and non-negative");
    }
  }
};

inline std::vector<double> log_grid(double lo, double hi, size_t n) {
  require(lo > 0.0 && hi > lo && n >= 2, "log grid needs 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (size_t i = 0; i < n; ++i) g[i] = std::exp(a + (b - a) * double(i) / double(n - 1));
  return g;
}

inline std::vector<double> linear_grid(double lo, double hi, size_t n) {
  require(hi > lo && n >= 2, "linear grid needs lo < hi and n >= 2");
  std::vector<double> g(n);
  for (size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * double(i) / double(n - 1);
  return g;
}

}  // namespace optomech
