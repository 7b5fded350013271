#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "optomech/constants.hpp"

namespace optomech {

struct FitError : std::runtime_error {
  std::vector<double> residual_trace;
  FitError(const std::string& what, std::vector<double> trace)
      : std::runtime_error(what), residual_trace(std::move(trace)) {}
};

struct IdentifiabilityError : std::runtime_error {
  std::map<std::string, double> null_direction;
  IdentifiabilityError(const std::string& what, std::map<std::string, double> dir)
      : std::runtime_error(what), null_direction(std::move(dir)) {}
};

struct LorentzianFit {
  double center;
  double half_width;
  double amplitude;
  double offset;
  double residual_rms;
  int iterations;
  double quality_factor() const { return center / (2.0 * half_width); }
};

namespace detail {

// Residuals of offset + A / (1 + ((x - x0)/w)^2) in centred, scaled coordinates.
struct LorentzFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const std::vector<double>& u;
  const std::vector<double>& v;
  int inputs() const { return 4; }
  int values() const { return static_cast<int>(u.size()); }

  int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
    for (size_t i = 0; i < u.size(); ++i) {
      const double z = (u[i] - p[0]) / p[1];
      r[i] = p[3] + p[2] / (1.0 + z * z) - v[i];
    }
    return 0;
  }
  int df(const Eigen::VectorXd& p, Eigen::MatrixXd& J) const {
    for (size_t i = 0; i < u.size(); ++i) {
      const double z = (u[i] - p[0]) / p[1];
      const double d = 1.0 + z * z;
      const double l = 1.0 / d;
      J(i, 0) = p[2] * 2.0 * z / (p[1] * d * d);
      J(i, 1) = p[2] * 2.0 * z * z / (p[1] * d * d);
      J(i, 2) = l;
      J(i, 3) = 1.0;
    }
    return 0;
  }
};

}  // namespace detail

// Least-squares Lorentzian; Levenberg-Marquardt started from the peak sample and half-maximum crossings.
inline LorentzianFit lorentzian_fit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size(), "x and y differ in length");
  require(x.size() >= 8, "Lorentzian fit needs at least 8 samples");
  const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
  const double xc = 0.5 * (*xmin_it + *xmax_it);
  const double xs = 0.5 * (*xmax_it - *xmin_it);
  require(xs > 0.0, "samples must span a frequency range");
  const auto [ymin_it, ymax_it] = std::minmax_element(y.begin(), y.end());
  const double ys = std::max(std::abs(*ymax_it - *ymin_it), 1e-300);
  std::vector<double> u(x.size()), v(y.size());
  for (size_t i = 0; i < x.size(); ++i) u[i] = (x[i] - xc) / xs, v[i] = (y[i] - *ymin_it) / ys;

  // initial guess in scaled units
  const size_t ipk = static_cast<size_t>(ymax_it - y.begin());
  std::vector<size_t> order(x.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return u[a] < u[b]; });
  const double peak = v[ipk], base = 0.0, halfv = 0.5 * (peak + base);
  double left = u[ipk], right = u[ipk];
  bool have_left = false, have_right = false;
  for (size_t k = 0; k < order.size(); ++k) {
    const size_t i = order[k];
    if (u[i] < u[ipk] && v[i] <= halfv) left = u[i], have_left = true;
    if (u[i] > u[ipk] && v[i] <= halfv && !have_right) right = u[i], have_right = true;
  }
  double w0 = 0.0;
  if (have_left && have_right) w0 = 0.5 * (right - left);
  else if (have_left) w0 = u[ipk] - left;
  else if (have_right) w0 = right - u[ipk];
  else w0 = 0.5;
  w0 = std::max(w0, 1e-6);

  Eigen::VectorXd p(4);
  p << u[ipk], w0, peak - base, base;
  detail::LorentzFunctor f{u, v};
  Eigen::LevenbergMarquardt<detail::LorentzFunctor> lm(f);
  lm.parameters.xtol = 1e-9;
  lm.parameters.ftol = 1e-15;
  lm.parameters.maxfev = 200 * 5;
  std::vector<double> trace;
  Eigen::LevenbergMarquardtSpace::Status status = lm.minimizeInit(p);
  int iters = 0;
  for (; iters < 200; ++iters) {
    status = lm.minimizeOneStep(p);
    trace.push_back(lm.fnorm);
    if (status != Eigen::LevenbergMarquardtSpace::Running) break;
  }
  const bool ok = status == Eigen::LevenbergMarquardtSpace::RelativeReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::RelativeErrorAndReductionTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::CosinusTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::XtolTooSmall ||
                  status == Eigen::LevenbergMarquardtSpace::FtolTooSmall;
  if (!ok || !p.allFinite()) throw FitError("Lorentzian fit did not converge", trace);

  LorentzianFit r;
  r.center = xc + xs * p[0];
  r.half_width = std::abs(p[1]) * xs;
  r.amplitude = p[2] * ys;
  r.offset = *ymin_it + p[3] * ys;
  r.iterations = iters + 1;
  double ss = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - r.center) / r.half_width;
    const double e = r.offset + r.amplitude / (1.0 + z * z) - y[i];
    ss += e * e;
  }
  r.residual_rms = std::sqrt(ss / x.size());
  return r;
}

inline double finesse_from_bandwidth(double nu_isl, double nu_bp) {
  require(nu_bp > 0.0 && nu_bp < 0.5 * nu_isl, "bandwidth must satisfy 0 < nu_BP < nu_ISL/2");
  return nu_isl / (2.0 * nu_bp);
}

// Input coupler transmission from the measured resonant reflection.
inline double coupler_transmission(double r_measured, double eta, double finesse, bool overcoupled = false) {
  require(r_measured >= 0.0 && r_measured <= 1.0, "measured reflection must lie in [0, 1]");
  require(eta > 0.0 && eta <= 1.0, "mode matching must lie in (0, 1]");
  require(finesse > 0.0, "finesse must be positive");
  const double r0 = 1.0 - (1.0 - r_measured) / eta;
  if (r0 < 0.0) throw DomainError("inconsistent measurement: corrected resonant reflection is negative");
  const double s = std::sqrt(r0);
  return (pi / finesse) * (overcoupled ? 1.0 + s : 1.0 - s);
}

// One cavity built from a front (input) and rear mirror; total_sum = 2 gamma - T_front, i.e. all
// losses except the front transmission.
struct LossMeasurement {
  std::string front;
  std::string rear;
  double total_sum;
};

struct MirrorLoss {
  std::optional<double> T;      // transmission
  std::optional<double> P;      // other losses
  std::optional<double> total;  // T + P when only the sum is identifiable
};

struct LossSolution {
  std::map<std::string, MirrorLoss> mirrors;
  double residual_rms;
};

// Least squares for the mirror losses. Mirrors with a known transmission contribute T + P with P unknown;
// mirrors only ever used as rear with unknown T are solved for the lumped T + P.
inline LossSolution solve_mirror_losses(const std::vector<LossMeasurement>& meas,
                                        const std::map<std::string, double>& known_T) {
  require(!meas.empty(), "no loss measurements");
  std::set<std::string> fronts;
  for (const auto& m : meas) fronts.insert(m.front);
  std::vector<std::string> names;
  std::map<std::string, int> col;
  auto unknown = [&](const std::string& n) {
    if (!col.count(n)) col[n] = static_cast<int>(names.size()), names.push_back(n);
    return col[n];
  };
  struct Row { std::vector<int> cols; double rhs; };
  std::vector<Row> rows;
  for (const auto& m : meas) {
    Row r{{unknown("P:" + m.front)}, m.total_sum};
    if (known_T.count(m.rear)) {
      r.cols.push_back(unknown("P:" + m.rear));
      r.rhs -= known_T.at(m.rear);
    } else if (fronts.count(m.rear)) {
      r.cols.push_back(unknown("T:" + m.rear));
      r.cols.push_back(unknown("P:" + m.rear));
    } else {
      r.cols.push_back(unknown("TP:" + m.rear));
    }
    rows.push_back(r);
  }
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows.size(), names.size());
  Eigen::VectorXd b(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int c : rows[i].cols) A(i, c) += 1.0;
    b[i] = rows[i].rhs;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (lu.rank() < static_cast<long>(names.size())) {
    Eigen::MatrixXd ker = lu.kernel();
    std::map<std::string, double> dir;
    std::ostringstream msg;
    msg << "loss unknowns not identifiable (rank " << lu.rank() << " < " << names.size() << "); null direction:";
    for (size_t j = 0; j < names.size(); ++j) {
      dir[names[j]] = ker(j, 0);
      if (std::abs(ker(j, 0)) > 1e-12) msg << ' ' << names[j] << '=' << ker(j, 0);
    }
    throw IdentifiabilityError(msg.str(), dir);
  }
  Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
  LossSolution sol;
  sol.residual_rms = std::sqrt((A * x - b).squaredNorm() / rows.size());
  for (size_t j = 0; j < names.size(); ++j) {
    const auto& n = names[j];
    const auto sep = n.find(':');
    const std::string kind = n.substr(0, sep), mirror = n.substr(sep + 1);
    auto& ml = sol.mirrors[mirror];
    if (kind == "P") ml.P = x[j];
    else if (kind == "T") ml.T = x[j];
    else ml.total = x[j];
  }
  for (auto& [name, ml] : sol.mirrors) {
    if (known_T.count(name)) ml.T = known_T.at(name);
    if (ml.T && ml.P) ml.total = *ml.T + *ml.P;
  }
  return sol;
}

// Pound-Drever-Hall dispersion signal, up to the modulation scale factor.
inline double pdh_error_signal(double psi_bar, double gamma, double T1, double scale = 1.0) {
  require(gamma > 0.0, "gamma must be positive");
  return scale * psi_bar * T1 / (gamma * gamma + psi_bar * psi_bar);
}

// Balanced homodyne with local oscillator OL; gamma_ov is the spatial overlap.
struct HomodyneSetup {
  double i_ol = 0.0;
  double i_cav = 0.0;
  double phi = 0.0;
  double overlap = 1.0;
  double imbalance = 1.0;

  bool lo_too_weak() const { return i_cav > 0.0 && i_ol / i_cav < 10.0; }
  double mean_difference() const { return imbalance * overlap * 2.0 * std::sqrt(i_cav * i_ol) * std::cos(phi); }
  double mean_sum() const { return i_cav + i_ol; }
  // Difference-current noise for a cavity-beam quadrature spectrum s_phi_cav (shot-noise units).
  double difference_spectrum(double s_phi_cav) const { return i_ol * (i_cav > 0.0 ? s_phi_cav : 1.0); }
};

inline double overlap_from_fringes(double v_pp, double v_cav, double v_ol) {
  require(v_cav > 0.0 && v_ol > 0.0, "beam levels must be positive");
  return v_pp / (4.0 * std::sqrt(v_cav * v_ol));
}

// Phase between the beams that cancels an offset kappa (I_cav + I_OL) in the difference current.
inline double homodyne_lock_phase(double i_cav, double i_ol, double kappa) {
  const double c = kappa * (i_cav + i_ol) / (2.0 * std::sqrt(i_cav * i_ol));
  require(std::abs(c) <= 1.0, "offset too large to be cancelled by the relative phase");
  return std::acos(c);
}

inline double dbm_from_volts(double v_rms) { return 10.0 * std::log10(20.0 * v_rms * v_rms); }
inline double volts_from_dbm(double dbm) { return std::sqrt(std::pow(10.0, dbm / 10.0) / 20.0); }

struct FmMeasurement {
  double depth;    // transmitted intensity modulation delta I / I
  double voltage;  // modulation voltage, V
};

// Laser frequency response p_nu (Hz/V) from the transmitted modulation of a reference cavity
// at mean detuning psi_bar/gamma = psi_ratio, modulation frequency omega_mod.
inline double fm_calibration(double omega_cav_ref, double psi_ratio, double omega_mod,
                             const std::vector<FmMeasurement>& m) {
  if (!(psi_ratio > 0.0)) throw DomainError("invalid operating point: reference cavity detuning must be positive");
  require(omega_cav_ref > 0.0, "reference bandwidth must be positive");
  require(!m.empty(), "no modulation measurements");
  const double mu = omega_mod / omega_cav_ref;
  const double a = 1.0 + psi_ratio * psi_ratio - mu * mu;
  const double shape = std::sqrt(a * a + 4.0 * mu * mu) / (2.0 * psi_ratio);
  double acc = 0.0;
  for (const auto& s : m) {
    require(s.voltage > 0.0, "modulation voltage must be positive");
    acc += omega_cav_ref / (2.0 * pi * s.voltage) * s.depth * shape;
  }
  return acc / m.size();
}

struct CalibrationChain {
  double p_nu;        // Hz/V
  double p_phi;       // V/V
  double length;      // m
  double lambda;      // m
  double v_phi_min;   // V/sqrt(Hz)
  double v_electronic = 0.0;  // additive electronic floor, V/sqrt(Hz)

  void validate() const {
    require(p_nu > 0.0 && p_phi > 0.0 && length > 0.0 && lambda > 0.0 && v_phi_min > 0.0,
            "calibration chain entries must be positive");
    require(v_electronic >= 0.0, "electronic floor must be non-negative");
  }
  double meters_per_volt() const { return (lambda * length / c_light) * (p_nu / p_phi); }
  double sensitivity() const { return meters_per_volt() * v_phi_min; }
  // Floor added in quadrature to the shot-noise level.
  double sensitivity_with_floor() const { return meters_per_volt() * std::hypot(v_phi_min, v_electronic); }
};

struct DisplacementCalibration {
  double meters_per_volt;
  double delta_x_min;
  double delta_x_with_floor;
};

inline DisplacementCalibration displacement_calibration(const CalibrationChain& c) {
  c.validate();
  return {c.meters_per_volt(), c.sensitivity(), c.sensitivity_with_floor()};
}

}  // namespace optomech
