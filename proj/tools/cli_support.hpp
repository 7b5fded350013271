#pragma once

// Plumbing for the optomech front end: typed INI access, CSV/JSON/SVG emission, a sweep pool.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <boost/crc.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <boost/tokenizer.hpp>

#include "json.hpp"

namespace cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;
using nlohmann::ordered_json;

// Bad invocation or malformed config; maps to exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Allowed keys per section. Anything else in a config file is rejected.
inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"scenario", {"name", "note", "seed"}},
      {"cavity_core",
       {"wavelength_m", "power_w", "flux_per_s", "gamma1", "gamma2", "length_m", "bandwidth_rad_s", "finesse",
        "psi0_over_gamma", "psi_nl_over_gamma", "psi_bar_over_gamma", "power_min_w", "power_max_w",
        "power_points"}},
      {"mechanics", {"mass_kg", "omega_m_rad_s", "q", "damping", "temperature_k"}},
      {"resonator_modes",
       {"h0_m", "radius_m", "density_kg_m3", "sound_speed_m_s", "q", "damping", "temperature_k", "p_max", "q_max",
        "waist_m"}},
      {"quantum_noise", {"theta_deg", "psi_hat_over_gamma"}},
      {"grid", {"omega_min_rad_s", "omega_max_rad_s", "points", "scale", "include_mode_frequencies"}},
      {"qnd_correlations", {"psi_s_over_gamma", "psi_m_over_gamma", "psi_bar_over_gamma", "theta_deg"}},
      {"photon_montecarlo",
       {"flux_per_s", "duration_s", "wavelength_m", "mass_kg", "omega_m_rad_s", "q", "amplification", "segments",
        "points_per_period", "bin_width_s", "runs", "start", "dump_stream"}},
      {"characterization",
       {"p_nu_hz_per_v", "p_phi", "length_m", "wavelength_m", "v_phi_min_v_rthz", "v_electronic_v_rthz",
        "ref_bandwidth_rad_s", "ref_detuning_over_gamma", "mod_omega_rad_s", "fm_depth", "fm_voltage_v", "data_csv",
        "x_column", "y_column"}},
  };
  return s;
}

class Config {
 public:
  Config() = default;

  static Config load(const std::string& path) {
    Config c;
    c.path_ = path;
    if (!fs::exists(path)) throw UsageError("config file not found: " + path);
    try {
      pt::read_ini(path, c.tree_);
    } catch (const pt::ini_parser_error& e) {
      throw UsageError(std::string("config parse error: ") + e.what());
    }
    if (c.tree_.empty()) throw UsageError("config " + path + " is empty; nothing to run");
    const auto& sch = schema();
    for (const auto& [sec, body] : c.tree_) {
      if (body.empty() && !body.data().empty())
        throw UsageError("config key '" + sec + "' must sit inside a [section]");
      auto it = sch.find(sec);
      if (it == sch.end()) throw UsageError("unknown config section [" + sec + "]");
      for (const auto& [key, v] : body)
        if (!it->second.count(key)) throw UsageError("unknown config key [" + sec + "] " + key);
    }
    return c;
  }

  const std::string& path() const { return path_; }
  fs::path directory() const { return fs::path(path_).parent_path(); }

  bool has_section(const std::string& sec) const { return tree_.get_child_optional(sec).has_value(); }
  bool has(const std::string& sec, const std::string& key) const {
    auto s = tree_.get_child_optional(sec);
    return s && s->get_child_optional(key).has_value();
  }

  std::optional<std::string> text(const std::string& sec, const std::string& key) const {
    if (!has(sec, key)) return std::nullopt;
    used_.insert(sec + "." + key);
    return tree_.get_child(sec).get_child(key).data();
  }

  double number(const std::string& sec, const std::string& key) const {
    auto t = text(sec, key);
    if (!t) throw UsageError("missing required key [" + sec + "] " + key);
    return parse_number(*t, sec, key);
  }
  double number(const std::string& sec, const std::string& key, double fallback) const {
    return has(sec, key) ? number(sec, key) : fallback;
  }
  long integer(const std::string& sec, const std::string& key, long fallback) const {
    if (!has(sec, key)) return fallback;
    const double v = number(sec, key);
    if (v != std::floor(v)) throw UsageError("[" + sec + "] " + key + " must be an integer");
    return static_cast<long>(v);
  }
  bool flag(const std::string& sec, const std::string& key, bool fallback) const {
    auto t = text(sec, key);
    if (!t) return fallback;
    if (*t == "true" || *t == "1" || *t == "yes") return true;
    if (*t == "false" || *t == "0" || *t == "no") return false;
    throw UsageError("[" + sec + "] " + key + " must be true or false");
  }
  std::string word(const std::string& sec, const std::string& key, const std::string& fallback) const {
    auto t = text(sec, key);
    return t ? *t : fallback;
  }
  // Comma-separated list of numbers.
  std::vector<double> numbers(const std::string& sec, const std::string& key) const {
    std::vector<double> out;
    auto t = text(sec, key);
    if (!t) return out;
    std::stringstream ss(*t);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number(item, sec, key));
    return out;
  }

  // Keys present in the file that the subcommand never read.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [sec, body] : tree_)
      for (const auto& [key, v] : body)
        if (!used_.count(sec + "." + key)) out.push_back(sec + "." + key);
    return out;
  }

  ordered_json to_json() const {
    ordered_json j = ordered_json::object();
    for (const auto& [sec, body] : tree_)
      for (const auto& [key, v] : body) j[sec][key] = v.data();
    return j;
  }

 private:
  static double parse_number(std::string s, const std::string& sec, const std::string& key) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size() || !std::isfinite(v))
      throw UsageError("[" + sec + "] " + key + " is not a finite number: '" + s + "'");
    return v;
  }

  std::string path_;
  pt::ptree tree_;
  mutable std::set<std::string> used_;
};

inline std::string fmt_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string crc32_hex(const std::string& bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", crc.checksum());
  return buf;
}

// Column-oriented table written as RFC 4180 CSV (CRLF, quoted where needed).
struct Table {
  std::vector<std::string> header;  // names carry the unit, e.g. "omega [rad/s]"
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

  static std::string field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }

  std::string render() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& r) {
      for (size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + field(r[i]);
      out += "\r\n";
    };
    line(header);
    for (const auto& r : rows) {
      if (r.size() != header.size()) throw std::logic_error("csv row width differs from header");
      line(r);
    }
    return out;
  }
};

inline void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << bytes;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

// Reads a CSV with a header row; quoted fields per RFC 4180.
inline std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>> read_csv(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw UsageError("cannot open data file " + p.string());
  using Tok = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Tok tok(line, boost::escaped_list_separator<char>('\\', ',', '"'));
    rows.emplace_back(tok.begin(), tok.end());
  }
  if (rows.empty()) throw UsageError("data file " + p.string() + " is empty");
  auto header = rows.front();
  rows.erase(rows.begin());
  return {header, rows};
}

// Hand-written SVG line chart.
struct Series {
  std::string name;
  std::vector<double> y;
  bool markers = false;
};

struct Plot {
  std::string title, xlabel, ylabel;
  std::vector<double> x;
  std::vector<Series> series;
  bool logx = false, logy = false;

  std::string render() const {
    const double W = 720, H = 480, L = 80, R = 170, T = 40, B = 60;
    auto tx = [&](double v) { return logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return logy ? std::log10(v) : v; };
    auto ok = [&](double xv, double yv) {
      return std::isfinite(xv) && std::isfinite(yv) && (!logx || xv > 0) && (!logy || yv > 0);
    };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
      for (size_t i = 0; i < x.size() && i < s.y.size(); ++i)
        if (ok(x[i], s.y[i])) {
          x0 = std::min(x0, tx(x[i])), x1 = std::max(x1, tx(x[i]));
          y0 = std::min(y0, ty(s.y[i])), y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.04 * (y1 - y0);
    y0 -= pad, y1 += pad;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
      const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
      const double gx = L + (W - L - R) * k / 4.0, gy = H - B - (H - T - B) * k / 4.0;
      o << "<text x=\"" << gx << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << fmt_tick(logx ? std::pow(10.0, fx) : fx) << "</text>\n";
      o << "<text x=\"" << L - 6 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
        << fmt_tick(logy ? std::pow(10.0, fy) : fy) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(xlabel) << "</text>\n";
    o << "<text transform=\"translate(18," << (T + H - B) / 2
      << ") rotate(-90)\" text-anchor=\"middle\" font-size=\"13\">" << escape(ylabel) << "</text>\n";
    for (size_t s = 0; s < series.size(); ++s) {
      const auto& se = series[s];
      const char* c = colors[s % 6];
      if (se.markers) {
        for (size_t i = 0; i < x.size() && i < se.y.size(); ++i)
          if (ok(x[i], se.y[i]))
            o << "<circle cx=\"" << px(x[i]) << "\" cy=\"" << py(se.y[i]) << "\" r=\"1.6\" fill=\"" << c << "\"/>\n";
      } else {
        o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.3\" points=\"";
        for (size_t i = 0; i < x.size() && i < se.y.size(); ++i)
          if (ok(x[i], se.y[i])) o << px(x[i]) << "," << py(se.y[i]) << " ";
        o << "\"/>\n";
      }
      const double ly = T + 16 + 18 * s;
      o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 30 << "\" y2=\"" << ly
        << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
      o << "<text x=\"" << W - R + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << escape(se.name)
        << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
  }

 private:
  static std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
  }
  static std::string escape(const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '&') o += "&amp;";
      else o += c;
    }
    return o;
  }
};

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index writes its own slot,
// so results do not depend on scheduling. The first exception is rethrown.
template <class F>
void parallel_for(size_t n, unsigned threads, F&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<size_t>(n, 1))));
  std::atomic<size_t> next{0};
  std::exception_ptr err;
  std::mutex m;
  auto work = [&] {
    for (size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lk(m);
        if (!err) err = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace cli
