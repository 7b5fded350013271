#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace optomech {

inline constexpr double pi = std::numbers::pi;
inline constexpr double k_B = 1.380649e-23;   // J/K
inline constexpr double hbar = 1.054572e-34;  // J s
inline constexpr double c_light = 2.99792458e8;  // m/s

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw DomainError(std::string(name) + " is not finite");
}

inline double ppm(double v) { return v * 1e-6; }

// Photon energy hbar*k*c with k = 2 pi / lambda.
inline double photon_energy(double lambda) { return hbar * (2.0 * pi / lambda) * c_light; }

inline double flux_from_power(double power, double lambda) { return power / photon_energy(lambda); }
inline double power_from_flux(double flux, double lambda) { return flux * photon_energy(lambda); }

inline double to_db(double linear) { return 10.0 * std::log10(linear); }

}  // namespace optomech
