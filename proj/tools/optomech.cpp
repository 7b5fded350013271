// optomech: config-driven front end for the optomech library.
//
// Exit status: 0 ok, 1 I/O or unexpected failure, 2 usage/config error,
// 3 violated physical precondition, 4 numerical failure (singular point,
// non-converged mode sum, fit or identifiability failure), 5 resource limit.

#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "cli_support.hpp"
#include "optomech/optomech.hpp"

using namespace optomech;
using cli::Config;
using cli::fmt_number;
using cli::ordered_json;
using cli::Plot;
using cli::Series;
using cli::Table;
using cli::UsageError;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out = "optomech_out";
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  bool plot = true;
};

// Collects one run's artifacts and writes them under <out>/<stem>.{csv,json,svg}.
struct Emitter {
  const Options& opt;
  std::string command;
  std::string stem;
  ordered_json derived = ordered_json::object();
  std::vector<std::string> warnings;

  void write(const Table& table, const std::optional<Plot>& plot, const Config* cfg) const {
    fs::create_directories(opt.out);
    const fs::path dir(opt.out);
    const std::string csv = table.render();
    cli::write_file(dir / (stem + ".csv"), csv);

    ordered_json j;
    j["command"] = command;
    j["inputs"] = cfg ? cfg->to_json() : ordered_json::object();
    if (cfg) {
      j["config_path"] = cfg->path();
      j["scenario"] = {{"name", cfg->word("scenario", "name", "")}, {"note", cfg->word("scenario", "note", "")}};
    }
    j["derived"] = derived;
    auto warn = warnings;
    if (cfg)
      for (const auto& k : cfg->unused()) warn.push_back("config key " + k + " is not used by '" + command + "'");
    j["warnings"] = warn;
    j["columns"] = table.header;
    j["rows"] = table.rows.size();
    j["artifacts"]["csv"] = {{"file", stem + ".csv"}, {"crc32", cli::crc32_hex(csv)}, {"bytes", csv.size()}};
    if (plot && opt.plot) {
      const std::string svg = plot->render();
      cli::write_file(dir / (stem + ".svg"), svg);
      j["artifacts"]["svg"] = {{"file", stem + ".svg"}, {"crc32", cli::crc32_hex(svg)}};
    }
    cli::write_file(dir / (stem + ".json"), j.dump(2) + "\n");
    for (const auto& w : warn) std::cerr << "warning: " << w << "\n";
    std::cout << (dir / (stem + ".csv")).string() << "\n";
  }
};

std::string num(double v) { return fmt_number(v); }
double deg(double rad) { return rad * 180.0 / pi; }
double rad(double deg) { return deg * pi / 180.0; }
std::string theta_label(double d) { return "S_theta=" + fmt_number(d) + "deg [shot]"; }

// ---- scenario builders ------------------------------------------------------

Damping damping_of(const Config& c, const std::string& sec) {
  const auto d = c.word(sec, "damping", "viscous");
  if (d == "viscous") return Damping::viscous;
  if (d == "constant_phi") return Damping::constant_phi;
  throw UsageError("[" + sec + "] damping must be viscous or constant_phi, got '" + d + "'");
}

CavityParams cavity_of(const Config& c) {
  const std::string s = "cavity_core";
  if (!c.has_section(s)) throw UsageError("missing [cavity_core] section");
  const double g2 = c.number(s, "gamma2", 0.0);
  if (c.has(s, "finesse")) return CavityParams::from_finesse(c.number(s, "finesse"), c.number(s, "bandwidth_rad_s"), g2);
  const double g1 = c.number(s, "gamma1");
  if (c.has(s, "bandwidth_rad_s")) return CavityParams::from_bandwidth(g1, g2, c.number(s, "bandwidth_rad_s"));
  if (!c.has(s, "length_m"))
    throw UsageError("[cavity_core] needs finesse + bandwidth_rad_s, gamma1 + bandwidth_rad_s, or gamma1 + length_m");
  return CavityParams(g1, g2, c.number(s, "length_m"));
}

std::optional<OpticalField> field_of(const Config& c, const std::string& s = "cavity_core") {
  const bool p = c.has(s, "power_w"), f = c.has(s, "flux_per_s");
  if (p && f) throw UsageError("[" + s + "] give power_w or flux_per_s, not both");
  if (!p && !f) return std::nullopt;
  const double lambda = c.number(s, "wavelength_m");
  return p ? OpticalField::from_power(lambda, c.number(s, "power_w")) : OpticalField(lambda, c.number(s, "flux_per_s"));
}

HarmonicOscillator oscillator_of(const Config& c) {
  const std::string s = "mechanics";
  if (!c.has_section(s)) throw UsageError("missing [mechanics] section");
  return HarmonicOscillator(c.number(s, "mass_kg"), c.number(s, "omega_m_rad_s"), c.number(s, "q"), damping_of(c, s),
                            c.number(s, "temperature_k", 0.0));
}

PlanoConvexResonator resonator_of(const Config& c) {
  const std::string s = "resonator_modes";
  if (!c.has_section(s)) throw UsageError("missing [resonator_modes] section");
  PlanoConvexResonator r;
  r.h0 = c.number(s, "h0_m", r.h0);
  r.radius = c.number(s, "radius_m", r.radius);
  r.density = c.number(s, "density_kg_m3", r.density);
  r.sound_speed = c.number(s, "sound_speed_m_s", r.sound_speed);
  r.q = c.number(s, "q", r.q);
  r.damping = damping_of(c, s);
  r.temp = c.number(s, "temperature_k", r.temp);
  r.p_max = static_cast<int>(c.integer(s, "p_max", r.p_max));
  r.q_max = static_cast<int>(c.integer(s, "q_max", r.q_max));
  r.validate();
  return r;
}

// Operating point from two of psi0, psi_nl, psi_bar (units of gamma); stability from the slope sign.
OperatingPoint operating_point_of(const Config& c, double g) {
  const std::string s = "cavity_core";
  const bool h0 = c.has(s, "psi0_over_gamma"), hn = c.has(s, "psi_nl_over_gamma"), hb = c.has(s, "psi_bar_over_gamma");
  if (h0 + hn + hb != 2) throw UsageError("[cavity_core] give exactly two of psi0_over_gamma, psi_nl_over_gamma, psi_bar_over_gamma");
  double p0, pn;
  if (!hb) p0 = c.number(s, "psi0_over_gamma"), pn = c.number(s, "psi_nl_over_gamma");
  else if (!hn) p0 = c.number(s, "psi0_over_gamma"), pn = c.number(s, "psi_bar_over_gamma") - p0;
  else pn = c.number(s, "psi_nl_over_gamma"), p0 = c.number(s, "psi_bar_over_gamma") - pn;
  require(pn >= 0.0, "nonlinear phase psi_nl must be non-negative");
  auto op = OperatingPoint::make(p0 * g, pn * g);
  op.stable = bistability_slope(op.psi0, op.psi_nl, g) > 0.0;
  const auto tp = turning_points(op.psi0, g);
  if (!op.stable) op.branch = Branch::middle;
  else if (tp.size() == 2 && op.psi_nl >= tp[1]) op.branch = Branch::upper;
  return op;
}

std::vector<double> grid_of(const Config& c, const ModeTable* modes = nullptr) {
  const std::string s = "grid";
  if (!c.has_section(s)) throw UsageError("missing [grid] section");
  const double lo = c.number(s, "omega_min_rad_s"), hi = c.number(s, "omega_max_rad_s");
  const long n = c.integer(s, "points", 400);
  if (n < 2) throw UsageError("[grid] points must be at least 2");
  const auto scale = c.word(s, "scale", "log");
  std::vector<double> g;
  if (scale == "log") g = log_grid(lo, hi, n);
  else if (scale == "linear") g = linear_grid(lo, hi, n);
  else throw UsageError("[grid] scale must be log or linear");
  require(g.front() > 0.0, "spectra are evaluated only for omega > 0");
  if (modes && c.flag(s, "include_mode_frequencies", false))
    for (const auto& m : modes->modes())
      if (m.overlap != 0.0 && m.omega > lo && m.omega < hi) g.push_back(m.omega);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

// ---- subcommands ------------------------------------------------------------

void cmd_steady(const Config& c, const Options& o) {
  Emitter e{o, "steady", "steady"};
  const auto cav = cavity_of(c);
  const auto osc = oscillator_of(c);
  const std::string s = "cavity_core";
  const double lambda = c.number(s, "wavelength_m");
  const double g = cav.gamma();
  const double psi0 = c.number(s, "psi0_over_gamma") * g;
  const double pmin = c.number(s, "power_min_w", 0.0), pmax = c.number(s, "power_max_w");
  const long n = c.integer(s, "power_points", 200);
  require(pmax > pmin && pmin >= 0.0, "power sweep needs 0 <= power_min_w < power_max_w");
  if (n < 2) throw UsageError("[cavity_core] power_points must be at least 2");
  const auto powers = linear_grid(pmin, pmax, n);

  std::vector<std::vector<OperatingPoint>> roots(powers.size());
  cli::parallel_for(powers.size(), o.threads, [&](size_t i) {
    roots[i] = steady_states(cav, OpticalField::from_power(lambda, powers[i]), psi0, osc.chi0());
  });

  Table t{{"power [W]", "flux [photons/s]", "root", "branch", "stable", "psi_nl/gamma", "psi_bar/gamma",
           "intracavity [photons/s]", "slope/gamma"}};
  Plot p{"Steady states", "incident power [W]", "psi_NL / gamma"};
  Series st{"stable", {}, true}, un{"unstable", {}, true};
  for (size_t i = 0; i < powers.size(); ++i)
    for (size_t r = 0; r < roots[i].size(); ++r) {
      const auto& op = roots[i][r];
      t.add({num(powers[i]), num(flux_from_power(powers[i], lambda)), std::to_string(r), to_string(op.branch),
             op.stable ? "true" : "false", num(op.psi_nl / g), num(op.psi_bar / g), num(op.intracavity),
             num(bistability_slope(op.psi0, op.psi_nl, g) / g)});
      p.x.push_back(powers[i]);
      st.y.push_back(op.stable ? op.psi_nl / g : NAN);
      un.y.push_back(op.stable ? NAN : op.psi_nl / g);
    }
  p.series = {st, un};

  const double k = 2.0 * pi / lambda;
  ordered_json tps = ordered_json::array();
  for (double tp : turning_points(psi0, g))
    tps.push_back({{"psi_nl_over_gamma", tp / g},
                   {"power_w", power_from_flux(required_input_flux(cav, k, osc.mass, osc.omega_m, psi0 + tp, tp), lambda)}});
  e.derived = {{"gamma", g}, {"finesse", cav.finesse()}, {"omega_cav_rad_s", cav.omega_cav()},
               {"chi0_m_per_n", osc.chi0()}, {"turning_points", tps}};
  if (tps.empty()) e.warnings.push_back("psi0 > -sqrt(3) gamma: no bistability, a single branch");
  e.write(t, p, &c);
}

void cmd_spectrum(const Config& c, const Options& o) {
  Emitter e{o, "spectrum", "spectrum"};
  const auto cav = cavity_of(c);
  const auto osc = oscillator_of(c);
  const auto op = operating_point_of(c, cav.gamma());
  const QuantumNoiseModel m(cav, op, osc);
  const auto grid = grid_of(c);
  const auto thetas = c.numbers("quantum_noise", "theta_deg");
  const auto field = field_of(c);

  struct Row { double si, sopt, th; std::vector<double> sq; };
  std::vector<Row> rows(grid.size());
  cli::parallel_for(grid.size(), o.threads, [&](size_t i) {
    const auto q = m.quadrature_form(grid[i]);
    Row r{m.intensity_relative(grid[i]), q.minimum(), q.argmin(), {}};
    for (double d : thetas) r.sq.push_back(q.at(rad(d)));
    rows[i] = std::move(r);
  });

  Table t{{"omega [rad/s]", "omega/omega_M", "S_I [shot]", "S_I [dB]", "S_opt [shot]", "S_opt [dB]",
           "theta_opt [deg]"}};
  for (double d : thetas) t.header.push_back(theta_label(d));
  if (field) t.header.push_back("S_I [photons/s]");
  Plot p{"Reflected-field noise", "omega / omega_M", "shot-noise units"};
  Series si{"S_I"}, so{"S_opt"};
  double best = INFINITY, best_w = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& r = rows[i];
    double th = std::fmod(deg(r.th), 180.0);
    if (th < 0.0) th += 180.0;
    std::vector<std::string> row{num(grid[i]), num(grid[i] / osc.omega_m), num(r.si), num(to_db(r.si)),
                                 num(r.sopt), num(to_db(r.sopt)), num(th)};
    for (double v : r.sq) row.push_back(num(v));
    if (field) row.push_back(num(m.intensity_spectrum(grid[i], field->flux)));
    t.add(std::move(row));
    p.x.push_back(grid[i] / osc.omega_m);
    si.y.push_back(r.si);
    so.y.push_back(r.sopt);
    if (r.sopt < best) best = r.sopt, best_w = grid[i];
  }
  p.series = {si, so};
  p.logx = c.word("grid", "scale", "log") == "log";
  e.derived = {{"gamma", cav.gamma()},
               {"omega_cav_rad_s", cav.omega_cav()},
               {"psi0_over_gamma", op.psi0 / cav.gamma()},
               {"psi_nl_over_gamma", op.psi_nl / cav.gamma()},
               {"psi_bar_over_gamma", op.psi_bar / cav.gamma()},
               {"branch", to_string(op.branch)},
               {"amplitude_angle_deg", deg(m.amplitude_angle())},
               {"min_S_opt", best},
               {"min_S_opt_dB", to_db(best)},
               {"min_S_opt_omega_rad_s", best_w}};
  e.write(t, p, &c);
}

void cmd_thermal(const Config& c, const Options& o) {
  Emitter e{o, "thermal", "thermal"};
  const auto cav = cavity_of(c);
  const double g = cav.gamma();
  const bool single = c.has_section("mechanics"), multi = c.has_section("resonator_modes");
  if (!single && !multi) throw UsageError("thermal needs [mechanics] and/or [resonator_modes]");
  std::optional<HarmonicOscillator> osc;
  std::optional<ModeTable> table;
  if (single) osc = oscillator_of(c);
  if (multi) {
    const auto r = resonator_of(c);
    table.emplace(r, c.number("resonator_modes", "waist_m"));
    for (const auto& w : r.warnings()) e.warnings.push_back(w);
  }
  const double omega_m = table ? table->resonator().omega_m() : osc->omega_m;
  // psi_hat given directly, or built from the incident beam on the resonant cavity
  const auto field = field_of(c);
  std::optional<double> psi_fixed;
  if (c.has("quantum_noise", "psi_hat_over_gamma")) psi_fixed = c.number("quantum_noise", "psi_hat_over_gamma") * g;
  else if (!field) throw UsageError("thermal needs [quantum_noise] psi_hat_over_gamma or an incident power/flux");
  auto psi_for = [&](const MechanicalResponse& mr) {
    return psi_fixed ? *psi_fixed : resonant_nonlinear_phase(cav, *field, mr.chi0());
  };
  const auto grid = grid_of(c, table ? &*table : nullptr);

  std::vector<double> s1(grid.size(), NAN), sm(grid.size(), NAN);
  cli::parallel_for(grid.size(), o.threads, [&](size_t i) {
    if (osc) s1[i] = thermal_phase_spectrum_oscillator(*osc, psi_for(*osc), g, cav.omega_cav(), grid[i]);
    if (table) sm[i] = multimode_thermal_phase_spectrum(*table, g, cav.omega_cav(), psi_for(*table), grid[i]);
  });

  Table t{{"omega [rad/s]", "omega/omega_M"}};
  if (osc) t.header.insert(t.header.end(), {"S_phi single [shot]", "S_phi single [dB]"});
  if (table) t.header.insert(t.header.end(), {"S_phi multimode [shot]", "S_phi multimode [dB]"});
  Plot p{"Thermal phase noise", "omega / omega_M", "shot-noise units"};
  p.logy = true;
  Series a{"single mode"}, b{"multimode"};
  for (size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row{num(grid[i]), num(grid[i] / omega_m)};
    if (osc) row.insert(row.end(), {num(s1[i]), num(to_db(s1[i]))});
    if (table) row.insert(row.end(), {num(sm[i]), num(to_db(sm[i]))});
    t.add(std::move(row));
    p.x.push_back(grid[i] / omega_m);
    a.y.push_back(s1[i]);
    b.y.push_back(sm[i]);
  }
  if (osc) p.series.push_back(a);
  if (table) p.series.push_back(b);
  e.derived = {{"gamma", g}, {"omega_cav_rad_s", cav.omega_cav()}, {"omega_m_rad_s", omega_m}};
  if (osc) e.derived["psi_hat_single_over_gamma"] = psi_for(*osc) / g;
  if (table) {
    e.derived["psi_hat_multimode_over_gamma"] = psi_for(*table) / g;
    e.derived["effective_mass_kg"] = table->effective_mass();
    e.derived["mode_sum_relative_tail"] = table->relative_tail();
  }
  e.write(t, p, &c);
}

void cmd_qnd(const Config& c, const Options& o) {
  Emitter e{o, "qnd", "qnd"};
  const auto cav = cavity_of(c);
  const auto osc = oscillator_of(c);
  const double g = cav.gamma();
  const std::string s = "qnd_correlations";
  if (!c.has_section(s)) throw UsageError("missing [qnd_correlations] section");
  TwoBeamSetup setup{cav, &osc, c.number(s, "psi_s_over_gamma") * g, c.number(s, "psi_m_over_gamma") * g,
                     c.number(s, "psi_bar_over_gamma", 0.0) * g};
  setup.validate();
  const bool detuned = setup.psi_bar != 0.0;
  const auto thetas = c.numbers(s, "theta_deg");
  TwoBeamSetup resonant = setup;
  resonant.psi_bar = 0.0;
  if (detuned) {
    const auto mp = meter_operating_point(setup);
    e.derived["meter_branch"] = to_string(mp.op.branch);
    e.derived["meter_turning_distance_over_gamma"] = mp.turning_distance;
    if (mp.near_turning_point)
      e.warnings.push_back("meter operating point lies within 0.25 gamma of a turning point");
  }
  const auto grid = grid_of(c);

  struct Row { SignalNoise r; OptimalCorrelation d{0.0, 0.0}; std::vector<double> at; };
  std::vector<Row> rows(grid.size());
  cli::parallel_for(grid.size(), o.threads, [&](size_t i) {
    Row r{resonant_signal_noise(resonant, grid[i]), {}, {}};
    if (detuned) {
      r.d = detuned_optimal_correlation(setup, grid[i]);
      const auto sp = detuned_spectra(setup, grid[i]);
      for (double d : thetas) r.at.push_back(sp.correlation(rad(d)));
    }
    rows[i] = std::move(r);
  });

  Table t{{"omega [rad/s]", "omega/omega_M", "signal [shot]", "noise [shot]", "C2 resonant"}};
  if (detuned) {
    t.header.insert(t.header.end(), {"C2 detuned optimal", "theta_opt [deg]"});
    for (double d : thetas) t.header.push_back("C2 theta=" + fmt_number(d) + "deg");
  }
  Plot p{"Signal-meter correlation", "omega / omega_M", "|C_sm|^2"};
  Series a{"resonant"}, b{"detuned, optimal quadrature"};
  double peak = 0.0;
  for (size_t i = 0; i < grid.size(); ++i) {
    const auto& r = rows[i];
    std::vector<std::string> row{num(grid[i]), num(grid[i] / osc.omega_m), num(r.r.signal), num(r.r.noise),
                                 num(r.r.correlation())};
    if (detuned) {
      double th = std::fmod(deg(r.d.theta), 180.0);
      if (th < 0.0) th += 180.0;
      row.insert(row.end(), {num(r.d.correlation), num(th)});
      for (double v : r.at) row.push_back(num(v));
    }
    t.add(std::move(row));
    p.x.push_back(grid[i] / osc.omega_m);
    a.y.push_back(r.r.correlation());
    b.y.push_back(r.d.correlation);
    peak = std::max(peak, r.r.correlation());
  }
  p.series = {a};
  if (detuned) p.series.push_back(b);
  p.logx = c.word("grid", "scale", "log") == "log";
  e.derived["gamma"] = g;
  e.derived["omega_cav_rad_s"] = cav.omega_cav();
  e.derived["max_C2_resonant"] = peak;
  e.write(t, p, &c);
}

// One coupled Monte-Carlo run: incident and reflected binned spectra.
struct McResult {
  BinnedSpectrum in, out;
  size_t photons = 0;
};

struct McSetup {
  double flux, duration, lambda;
  HarmonicOscillator osc;
  double amplification;
  size_t segments;
  int points_per_period;
  double tau_c;
  bool start_at_recoil;

  McResult run(std::uint64_t seed, PhotonStream* keep = nullptr) const {
    const auto s = generate_stream(flux, duration, seed);
    const double x0 = start_at_recoil ? 2.0 * hbar * (2.0 * pi / lambda) * flux * osc.chi0() : 0.0;
    const auto tr = mirror_trajectory(s, osc, lambda, points_per_period, x0);
    const auto r = reflect_stream(s, tr, amplification);
    McResult m{binned_spectrum(s, tau_c, segments), binned_spectrum(r, tau_c, segments), s.times.size()};
    if (keep) *keep = s;
    return m;
  }
};

McSetup mc_setup_of(const Config& c) {
  const std::string s = "photon_montecarlo";
  if (!c.has_section(s)) throw UsageError("missing [photon_montecarlo] section");
  McSetup m{c.number(s, "flux_per_s"),
            c.number(s, "duration_s"),
            c.number(s, "wavelength_m", 1e-6),
            HarmonicOscillator(c.number(s, "mass_kg"), c.number(s, "omega_m_rad_s"), c.number(s, "q")),
            0.0,
            static_cast<size_t>(c.integer(s, "segments", 256)),
            static_cast<int>(c.integer(s, "points_per_period", 32)),
            0.0,
            true};
  const auto a = c.word(s, "amplification", "cancel");
  if (a == "cancel") m.amplification = cancelling_amplification(m.flux, m.osc, m.lambda);
  else {
    try {
      m.amplification = std::stod(a);
    } catch (const std::exception&) {
      throw UsageError("[photon_montecarlo] amplification must be a number or 'cancel'");
    }
    require(m.amplification >= 0.0, "amplification must be non-negative");
  }
  m.tau_c = c.number(s, "bin_width_s", default_bin_width(m.osc.omega_m));
  const auto start = c.word(s, "start", "recoil");
  if (start != "recoil" && start != "rest") throw UsageError("[photon_montecarlo] start must be recoil or rest");
  m.start_at_recoil = start == "recoil";
  return m;
}

void emit_mc(Emitter& e, const McSetup& m, const std::vector<McResult>& runs, const Config* cfg,
             std::uint64_t seed) {
  const auto& grid = runs.front().in.spectrum.omega;
  const double n = static_cast<double>(runs.size());
  Table t{{"omega [rad/s]", "omega/omega_M", "S_in [photons/s]", "err_in [photons/s]", "S_out [photons/s]",
           "err_out [photons/s]", "S_out/flux", "S_out/flux [dB]", "linear theory S_out/flux"}};
  Plot p{"Photon-counting spectra", "omega / omega_M", "S / mean flux"};
  Series si{"incident", {}, true}, so{"reflected", {}, true}, th{"linear theory"};
  for (size_t k = 0; k < grid.size(); ++k) {
    double a = 0.0, ea = 0.0, b = 0.0, eb = 0.0;
    for (const auto& r : runs) {
      a += r.in.spectrum.values[k];
      b += r.out.spectrum.values[k];
      ea += std::pow(r.in.std_error[k], 2);
      eb += std::pow(r.out.std_error[k], 2);
    }
    a /= n, b /= n, ea = std::sqrt(ea) / n, eb = std::sqrt(eb) / n;
    const double theory = reflected_noise_ratio(m.flux, m.osc, m.lambda, m.amplification, grid[k]);
    t.add({num(grid[k]), num(grid[k] / m.osc.omega_m), num(a), num(ea), num(b), num(eb), num(b / m.flux),
           num(to_db(b / m.flux)), num(theory)});
    p.x.push_back(grid[k] / m.osc.omega_m);
    si.y.push_back(a / m.flux);
    so.y.push_back(b / m.flux);
    th.y.push_back(theory);
  }
  p.series = {si, so, th};
  ordered_json bands = ordered_json::array();
  for (const auto& r : runs) {
    const auto [at, err] = r.out.band(0.9 * m.osc.omega_m, 1.1 * m.osc.omega_m);
    const auto [hi, herr] = r.out.band(5.0 * m.osc.omega_m, 8.0 * m.osc.omega_m);
    bands.push_back({{"resonance_over_flux", at / m.flux}, {"resonance_err", err / m.flux},
                     {"high_band_over_flux", hi / m.flux}, {"high_band_err", herr / m.flux}, {"photons", r.photons}});
  }
  e.derived = {{"seed", seed},
               {"runs", runs.size()},
               {"amplification", m.amplification},
               {"cancelling_amplification", cancelling_amplification(m.flux, m.osc, m.lambda)},
               {"bin_width_s", runs.front().in.tau_c},
               {"segment_bins", runs.front().in.segment_bins},
               {"segments", runs.front().in.segments},
               {"static_recoil_m", 2.0 * hbar * (2.0 * pi / m.lambda) * m.flux * m.osc.chi0()},
               {"per_run", bands}};
  for (const auto& w : runs.front().out.spectrum.warnings) e.warnings.push_back(w);
  e.write(t, p, cfg);
}

std::uint64_t seed_of(const Config* c, const Options& o) {
  if (o.seed) return *o.seed;
  if (c && c->has("scenario", "seed")) {
    const long s = c->integer("scenario", "seed", 42);
    if (s < 0) throw UsageError("[scenario] seed must be non-negative");
    return static_cast<std::uint64_t>(s);
  }
  return 42;
}

void cmd_mc(const Config& c, const Options& o) {
  Emitter e{o, "mc", "mc"};
  const auto m = mc_setup_of(c);
  const long nruns = c.integer("photon_montecarlo", "runs", 1);
  if (nruns < 1) throw UsageError("[photon_montecarlo] runs must be at least 1");
  const auto seed = seed_of(&c, o);
  const bool dump = c.flag("photon_montecarlo", "dump_stream", false);
  std::vector<McResult> runs(nruns);
  PhotonStream first;
  cli::parallel_for(runs.size(), o.threads, [&](size_t i) { runs[i] = m.run(seed + i, i == 0 && dump ? &first : nullptr); });
  if (dump) {
    fs::create_directories(o.out);
    write_stream(first, (fs::path(o.out) / "mc_stream.bin").string());
  }
  emit_mc(e, m, runs, &c, seed);
}

void cmd_calibrate(const Config& c, const Options& o) {
  Emitter e{o, "calibrate", "calibrate"};
  const std::string s = "characterization";
  if (!c.has_section(s)) throw UsageError("missing [characterization] section");
  double p_nu;
  const auto depth = c.numbers(s, "fm_depth"), volts = c.numbers(s, "fm_voltage_v");
  if (!depth.empty()) {
    if (depth.size() != volts.size()) throw UsageError("[characterization] fm_depth and fm_voltage_v differ in length");
    std::vector<FmMeasurement> ms;
    for (size_t i = 0; i < depth.size(); ++i) ms.push_back({depth[i], volts[i]});
    p_nu = fm_calibration(c.number(s, "ref_bandwidth_rad_s"), c.number(s, "ref_detuning_over_gamma"),
                          c.number(s, "mod_omega_rad_s", 0.0), ms);
    e.derived["p_nu_from_fm_hz_per_v"] = p_nu;
  } else {
    p_nu = c.number(s, "p_nu_hz_per_v");
  }
  const CalibrationChain chain{p_nu, c.number(s, "p_phi"), c.number(s, "length_m"), c.number(s, "wavelength_m"),
                               c.number(s, "v_phi_min_v_rthz"), c.number(s, "v_electronic_v_rthz", 0.0)};
  const auto r = displacement_calibration(chain);
  Table t{{"p_nu [Hz/V]", "p_phi [V/V]", "meters_per_volt [m/V]", "delta_x_min [m/rtHz]",
           "delta_x_with_floor [m/rtHz]"}};
  t.add({num(p_nu), num(chain.p_phi), num(r.meters_per_volt), num(r.delta_x_min), num(r.delta_x_with_floor)});
  e.derived["meters_per_volt"] = r.meters_per_volt;
  e.derived["delta_x_min_m_rthz"] = r.delta_x_min;
  e.derived["delta_x_with_floor_m_rthz"] = r.delta_x_with_floor;
  e.write(t, std::nullopt, &c);
}

void cmd_fit(const Config& c, const Options& o) {
  Emitter e{o, "fit", "fit"};
  const std::string s = "characterization";
  auto path = fs::path(c.word(s, "data_csv", ""));
  if (path.empty()) throw UsageError("missing required key [characterization] data_csv");
  if (path.is_relative()) path = c.directory() / path;
  auto [header, rows] = cli::read_csv(path);
  auto column = [&, &header = header](const std::string& key, size_t fallback) {
    const auto name = c.word(s, key, "");
    if (name.empty()) {
      if (fallback >= header.size()) throw UsageError("data file has fewer than two columns");
      return fallback;
    }
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UsageError("data file has no column '" + name + "'");
    return static_cast<size_t>(it - header.begin());
  };
  const size_t ix = column("x_column", 0), iy = column("y_column", 1);
  std::vector<double> x, y;
  for (size_t r = 0; r < rows.size(); ++r) {
    try {
      x.push_back(std::stod(rows[r].at(ix)));
      y.push_back(std::stod(rows[r].at(iy)));
    } catch (const std::exception&) {
      throw UsageError("data row " + std::to_string(r + 2) + " is not numeric");
    }
  }
  const auto f = lorentzian_fit(x, y);
  Table t{{header[ix], header[iy], "model", "residual"}};
  Plot p{"Lorentzian fit", header[ix], header[iy]};
  Series d{"data", {}, true}, mdl{"fit"};
  for (size_t i = 0; i < x.size(); ++i) {
    const double z = (x[i] - f.center) / f.half_width;
    const double v = f.offset + f.amplitude / (1.0 + z * z);
    t.add({num(x[i]), num(y[i]), num(v), num(y[i] - v)});
    p.x.push_back(x[i]);
    d.y.push_back(y[i]);
    mdl.y.push_back(v);
  }
  p.series = {d, mdl};
  e.derived = {{"center", f.center},     {"half_width", f.half_width},     {"amplitude", f.amplitude},
               {"offset", f.offset},     {"quality_factor", f.quality_factor()}, {"residual_rms", f.residual_rms},
               {"iterations", f.iterations}, {"data_file", path.string()}};
  e.write(t, p, &c);
}

void cmd_modes(const Config& c, const Options& o) {
  Emitter e{o, "modes", "modes"};
  const auto r = resonator_of(c);
  for (const auto& w : r.warnings()) e.warnings.push_back(w);
  const double w0 = c.number("resonator_modes", "waist_m");
  const ModeTable table(r, w0);
  Table t{{"p", "q", "omega [rad/s]", "omega/omega_M", "waist [m]", "mass [kg]", "overlap", "overlap^2"}};
  Plot p{"Acoustic modes coupled to the optical waist", "omega_pq / omega_M", "overlap^2"};
  p.logy = true;
  Series wts{"overlap^2", {}, true};
  for (const auto& m : table.modes()) {
    t.add({std::to_string(m.p), std::to_string(m.q), num(m.omega), num(m.omega / r.omega_m()), num(m.waist),
           num(m.mass), num(m.overlap), num(m.weight())});
    p.x.push_back(m.omega / r.omega_m());
    wts.y.push_back(m.weight());
  }
  p.series = {wts};
  e.derived = {{"omega_m_rad_s", r.omega_m()},
               {"w1_m", mode_waist(r, 1)},
               {"m1_kg", mode_mass(r, 1)},
               {"optical_waist_m", w0},
               {"effective_mass_kg", table.effective_mass()},
               {"optical_mass_kg", table.optical_mass()},
               {"chi_eff0_m_per_n", table.chi0()},
               {"mode_sum_relative_tail", table.relative_tail()},
               {"modes", table.modes().size()}};
  e.write(t, p, &c);
}

// ---- figures with built-in parameters ---------------------------------------

void figure_intensity(const Options& o, const std::string& id) {
  Emitter e{o, "figure " + id, "fig_" + id};
  const double g = 1e-5, om = 1e5;
  const auto cav = CavityParams::from_bandwidth(g, 0.0, om / 3.0);
  const auto op = OperatingPoint::make(-3.0 * g, g);
  const auto ratio = linear_grid(0.005, 2.5, 500);
  std::vector<double> temps = id == "2int_opt" ? std::vector<double>{0.0} : std::vector<double>{0.0, 0.1, 1.0};
  std::vector<std::vector<double>> si(temps.size(), std::vector<double>(ratio.size()));
  std::vector<double> sopt(ratio.size());
  std::vector<HarmonicOscillator> oscs;
  for (double T : temps) oscs.emplace_back(1e-4, om, 1e6, Damping::viscous, T);
  cli::parallel_for(ratio.size(), o.threads, [&](size_t i) {
    for (size_t k = 0; k < temps.size(); ++k) {
      const QuantumNoiseModel m(cav, op, oscs[k]);
      si[k][i] = m.intensity_relative(ratio[i] * om);
      if (k == 0) sopt[i] = m.optimal_spectrum(ratio[i] * om).value;
    }
  });
  Table t{{"omega/omega_M"}};
  Plot p{id == "2int_opt" ? "Intensity and optimal quadrature spectra" : "Intensity spectra vs temperature",
         "omega / omega_M", "shot-noise units"};
  p.x = ratio;
  if (id == "2int_opt") {
    t.header.insert(t.header.end(), {"S_I [shot]", "S_opt [shot]", "S_I [dB]", "S_opt [dB]"});
    for (size_t i = 0; i < ratio.size(); ++i)
      t.add({num(ratio[i]), num(si[0][i]), num(sopt[i]), num(to_db(si[0][i])), num(to_db(sopt[i]))});
    p.series = {{"S_I", si[0]}, {"S_opt", sopt}};
    e.derived["min_S_opt"] = *std::min_element(sopt.begin(), sopt.end());
    e.derived["min_S_I"] = *std::min_element(si[0].begin(), si[0].end());
  } else {
    for (double T : temps) t.header.push_back("S_I T=" + fmt_number(T) + "K [shot]");
    for (double T : temps) t.header.push_back("S_I T=" + fmt_number(T) + "K [dB]");
    for (size_t i = 0; i < ratio.size(); ++i) {
      std::vector<std::string> row{num(ratio[i])};
      for (size_t k = 0; k < temps.size(); ++k) row.push_back(num(si[k][i]));
      for (size_t k = 0; k < temps.size(); ++k) row.push_back(num(to_db(si[k][i])));
      t.add(std::move(row));
    }
    for (size_t k = 0; k < temps.size(); ++k) p.series.push_back({"T = " + fmt_number(temps[k]) + " K", si[k]});
    p.logy = true;
  }
  e.derived["parameters"] = {{"gamma", g}, {"omega_cav_rad_s", om / 3.0}, {"mass_kg", 1e-4}, {"omega_m_rad_s", om},
                             {"q", 1e6}, {"psi_nl_over_gamma", 1.0}, {"psi_bar_over_gamma", -2.0},
                             {"temperatures_k", temps}};
  e.write(t, p, nullptr);
}

void figure_correlation(const Options& o) {
  Emitter e{o, "figure 2csmint", "fig_2csmint"};
  const HarmonicOscillator osc(1e-6, 1e7, 1e6, Damping::viscous, 1.0);
  const auto cav = CavityParams::from_finesse(3e5, 2e7);
  const double g = cav.gamma();
  const TwoBeamSetup s{cav, &osc, g, g / 100.0, 0.0};
  const auto ratio = linear_grid(0.8, 1.2, 801);
  std::vector<SignalNoise> sn(ratio.size());
  cli::parallel_for(ratio.size(), o.threads, [&](size_t i) { sn[i] = resonant_signal_noise(s, ratio[i] * osc.omega_m); });
  Table t{{"omega/omega_M", "C2", "signal [shot]", "noise [shot]"}};
  Plot p{"Signal-meter correlation", "omega / omega_M", "|C_sm|^2"};
  p.x = ratio;
  Series c2{"|C_sm|^2"};
  for (size_t i = 0; i < ratio.size(); ++i) {
    t.add({num(ratio[i]), num(sn[i].correlation()), num(sn[i].signal), num(sn[i].noise)});
    c2.y.push_back(sn[i].correlation());
  }
  p.series = {c2};
  e.derived["parameters"] = {{"mass_kg", 1e-6}, {"omega_m_rad_s", 1e7}, {"q", 1e6}, {"finesse", 3e5},
                             {"omega_cav_rad_s", 2e7}, {"temperature_k", 1.0}, {"psi_s_over_gamma", 1.0},
                             {"psi_m_over_gamma", 0.01}};
  e.derived["C2_at_omega_m"] = resonant_signal_noise(s, osc.omega_m).correlation();
  e.write(t, p, nullptr);
}

void figure_multimode(const Options& o, const std::string& id) {
  Emitter e{o, "figure " + id, "fig_" + id};
  PlanoConvexResonator r;
  const double w1 = mode_waist(r, 1);
  const double w0 = id == "3brthew1" ? std::sqrt(2.0) * w1 : 0.5 * w1;
  const ModeTable table(r, w0, false);
  const double om = r.omega_m();
  const auto cav = CavityParams::from_finesse(3e5, 2.0 * om);
  const double g = cav.gamma(), psi = g / 20.0;
  // a linear grid misses peaks one mechanical linewidth wide, so the coupled mode frequencies are added
  auto grid = linear_grid(0.9 * om, 2.3 * om, 2000);
  for (const auto& m : table.modes())
    if (m.overlap != 0.0 && m.omega > grid.front() && m.omega < grid.back())
      for (double d : {-2.0, 0.0, 2.0}) grid.push_back(m.omega * (1.0 + d / r.q));
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> sp(grid.size());
  cli::parallel_for(grid.size(), o.threads, [&](size_t i) {
    sp[i] = multimode_thermal_phase_spectrum(table, g, cav.omega_cav(), psi, grid[i]);
  });
  Table t{{"omega/omega_M", "S_phi [shot]", "S_phi [dB]"}};
  Plot p{"Thermal phase noise, w0 = " + fmt_number(w0 * 1e3) + " mm", "omega / omega_M", "shot-noise units"};
  p.logy = true;
  Series s{"S_phi"};
  for (size_t i = 0; i < grid.size(); ++i) {
    t.add({num(grid[i] / om), num(sp[i]), num(to_db(sp[i]))});
    p.x.push_back(grid[i] / om);
    s.y.push_back(sp[i]);
  }
  p.series = {s};
  e.derived["parameters"] = {{"psi_hat_over_gamma", 0.05}, {"finesse", 3e5}, {"omega_cav_rad_s", 2.0 * om},
                             {"temperature_k", r.temp}, {"waist_m", w0}, {"w1_m", w1}, {"q", r.q},
                             {"p_max", r.p_max}, {"q_max", r.q_max}};
  e.derived["effective_mass_kg"] = table.effective_mass();
  e.write(t, p, nullptr);
}

void figure_mc(const Options& o) {
  Emitter e{o, "figure 1mir-sp", "fig_1mir-sp"};
  const HarmonicOscillator osc(1e-3, 2.0 * pi * 1e3, 10.0);
  const McSetup m{1e6, 4.0, 1e-6, osc, cancelling_amplification(1e6, osc, 1e-6), 256, 32, default_bin_width(osc.omega_m),
                  true};
  const auto seed = seed_of(nullptr, o);
  std::vector<McResult> runs{m.run(seed)};
  emit_mc(e, m, runs, nullptr, seed);
}

void cmd_figure(const std::string& id, const Options& o) {
  if (!o.config.empty()) throw UsageError("figure uses built-in parameters and takes no --config");
  if (id == "2int_opt" || id == "2specint") figure_intensity(o, id);
  else if (id == "2csmint") figure_correlation(o);
  else if (id == "3brthew1" || id == "3brthew2") figure_multimode(o, id);
  else if (id == "1mir-sp") figure_mc(o);
  else throw UsageError("unknown figure id " + id);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radiation-pressure optomechanics: spectra, mode tables, Monte-Carlo, calibration"};
  app.fallthrough();
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config, "scenario file (INI)");
  app.add_option("--out", opt.out, "output directory")->capture_default_str();
  app.add_option("--seed", opt.seed, "override the Monte-Carlo seed");
  app.add_option("--threads", opt.threads, "worker threads for sweeps")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--plot,!--no-plot", opt.plot, "write an SVG plot next to the CSV");

  const std::vector<std::pair<std::string, std::string>> cmds{
      {"steady", "bistability curves over an incident-power sweep"},
      {"spectrum", "intensity, optimal and fixed-quadrature noise spectra"},
      {"thermal", "single- and multi-mode thermal phase-noise spectra"},
      {"qnd", "signal-meter correlation spectra"},
      {"mc", "photon Monte-Carlo of a mirror in a light beam"},
      {"calibrate", "displacement calibration chain"},
      {"fit", "Lorentzian fit of a CSV data file"},
      {"modes", "acoustic mode table of a plano-convex resonator"}};
  std::map<std::string, CLI::App*> sub;
  for (const auto& [name, help] : cmds) sub[name] = app.add_subcommand(name, help);
  std::string fig_id;
  auto* fig = app.add_subcommand("figure", "reproduce a reference figure with built-in parameters");
  fig->add_option("id", fig_id, "figure id")
      ->required()
      ->check(CLI::IsMember({"2int_opt", "2specint", "3brthew1", "3brthew2", "2csmint", "1mir-sp"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fig->parsed()) {
      cmd_figure(fig_id, opt);
      return 0;
    }
    if (opt.config.empty()) throw UsageError("--config is required for this subcommand");
    const auto cfg = Config::load(opt.config);
    static const std::map<std::string, void (*)(const Config&, const Options&)> run{
        {"steady", cmd_steady}, {"spectrum", cmd_spectrum}, {"thermal", cmd_thermal}, {"qnd", cmd_qnd},
        {"mc", cmd_mc},         {"calibrate", cmd_calibrate}, {"fit", cmd_fit},    {"modes", cmd_modes}};
    for (const auto& [name, s] : sub)
      if (s->parsed()) run.at(name)(cfg, opt);
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const optomech::ConfigError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 3;
  } catch (const SingularityError& e) {
    std::cerr << "singular operating point: " << e.what() << "\n";
    return 4;
  } catch (const ConvergenceError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const FitError& e) {
    std::cerr << "fit failed: " << e.what() << "\n";
    return 4;
  } catch (const IdentifiabilityError& e) {
    std::cerr << "not identifiable: " << e.what() << "\n";
    return 4;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
