/*
 * config.hh
 *
 * scenario configuration: one value object covering the plant, the
 * abstraction, the incident scenario, the requirement bands, and the
 * robustness batch, plus a strict INI-style parser and a stable content
 * hash that artifact files embed so stale inputs are refused on load
 */

#pragma once

#include <freqsynth/abstraction.hh>
#include <freqsynth/grid_model.hh>
#include <freqsynth/spec_monitor.hh>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqsynth {

struct ScenarioConfig {
  GridParams grid;                  /* plant and baseline-controller parameters */
  GridSpec region;                  /* working region and cell spacing */
  double tau = 0.25;                /* sampling period [s] */
  std::size_t input_levels = 21;    /* uniform participation levels over [0, 1] */
  double w_lo = std::nan("");       /* abstraction disturbance range; NaN = derive */
  double w_hi = std::nan("");       /*   from the scenario loss as [0.95 w, w] */
  std::string mode = "bi";          /* charging mode: uni or bi */
  double loss_mw = 2000.0;          /* generation loss driving the incident */
  double s_base_mw = 62500.0 / 3.0; /* power base tying MW to the Hz-scaled w */
  double horizon_s = 120.0;         /* closed-loop simulation length [s] */
  StateVec x0{};                    /* initial plant state (Hz-scaled) */
  SpecConfig spec;                  /* requirement bands and thresholds */
  double delta_max = 0.1;           /* robustness batch: actuation error half-width */
  std::size_t n_seeds = 100;        /* robustness batch: number of seeded runs */
  std::uint64_t base_seed = 1;      /* robustness batch: seed of the first run */
  std::string out_dir = "out";      /* artifact directory */

  /* Hz-scaled disturbance equivalent of the configured loss */
  double w() const { return loss_mw / s_base_mw * grid.f_nom; }

  double abstraction_w_lo() const { return std::isnan(w_lo) ? 0.95 * w() : w_lo; }
  double abstraction_w_hi() const { return std::isnan(w_hi) ? w() : w_hi; }

  void validate() const {
    auto bad = [](const std::string& msg) {
      throw std::invalid_argument("ScenarioConfig: " + msg);
    };
    grid.validate();
    GridSpec chk = region;
    if (!chk.finalized())
      chk.finalize(); /* throws when eta does not tile the region */
    if (!(tau > 0.0))
      bad("tau must be > 0");
    if (input_levels < 2 || input_levels > 253)
      bad("input_levels must lie in [2, 253]");
    if (mode != "uni" && mode != "bi")
      bad("mode must be uni or bi");
    if (!(loss_mw > 0.0) || !(s_base_mw > 0.0))
      bad("loss_mw and s_base_mw must be > 0");
    if (!(horizon_s >= tau))
      bad("horizon_s must be at least one sampling period");
    if (std::isnan(w_lo) != std::isnan(w_hi))
      bad("w_lo and w_hi must be set together");
    if (!std::isnan(w_lo) && !(w_hi >= w_lo))
      bad("need w_hi >= w_lo");
    if (delta_max < 0.0 || delta_max > 1.0)
      bad("delta_max must lie in [0, 1]");
    if (n_seeds < 1)
      bad("n_seeds must be >= 1");
    if (out_dir.empty())
      bad("out_dir must not be empty");
    spec.validate();
  }
};

/* mode-consistent defaults: the aggregation gain and band pair follow the
 * charging mode unless the configuration overrides them explicitly */
inline ScenarioConfig default_config(const std::string& mode) {
  ScenarioConfig c;
  c.mode = mode;
  c.grid.k_ev = SpecConfig::default_k_ev(mode);
  c.spec = SpecConfig::for_mode(mode);
  return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a])))
    a++;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1])))
    b--;
  return s.substr(a, b - a);
}

struct IniEntry {
  std::string section, key, value;
  std::size_t line = 0;
};

/* sections with key = value pairs; '#' and ';' start comments; keys and
 * sections must be non-empty; values keep interior spacing */
inline std::vector<IniEntry> parse_ini(const std::string& text) {
  std::vector<IniEntry> entries;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    line_no++;
    std::string line = raw;
    std::size_t cut = line.find_first_of("#;");
    if (cut != std::string::npos)
      line = line.substr(0, cut);
    line = trim(line);
    if (line.empty())
      continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (section.empty() || key.empty() || value.empty())
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty section, key, or value");
    entries.push_back({section, key, value, line_no});
  }
  return entries;
}

inline double parse_double(const IniEntry& e) {
  try {
    std::size_t used = 0;
    double v = std::stod(e.value, &used);
    if (used != e.value.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config line " + std::to_string(e.line) + ": '" + e.value +
                                "' is not a number for " + e.section + "." + e.key);
  }
}

inline std::uint64_t parse_u64(const IniEntry& e) {
  try {
    if (e.value.find('-') != std::string::npos)
      throw std::invalid_argument("negative"); /* stoull silently wraps negatives */
    std::size_t used = 0;
    unsigned long long v = std::stoull(e.value, &used);
    if (used != e.value.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("config line " + std::to_string(e.line) + ": '" + e.value +
                                "' is not a non-negative integer for " + e.section + "." + e.key);
  }
}

/* four whitespace-separated numbers */
inline std::array<double, 4> parse_vec4(const IniEntry& e) {
  std::istringstream in(e.value);
  std::array<double, 4> v{};
  for (int d = 0; d < 4; d++)
    if (!(in >> v[d]))
      throw std::invalid_argument("config line " + std::to_string(e.line) + ": " + e.section +
                                  "." + e.key + " needs four numbers");
  std::string rest;
  if (in >> rest)
    throw std::invalid_argument("config line " + std::to_string(e.line) + ": " + e.section + "." +
                                e.key + " needs exactly four numbers");
  return v;
}

}  // namespace detail

/* strict configuration reader: every entry must name a known field, and
 * mode-dependent defaults (gain, band pair) are resolved before explicit
 * overrides are applied, so override order never matters */
inline ScenarioConfig parse_config(const std::string& text) {
  using detail::IniEntry;
  std::vector<IniEntry> entries = detail::parse_ini(text);

  std::string mode = "bi";
  for (const auto& e : entries)
    if (e.section == "scenario" && e.key == "mode")
      mode = e.value;
  if (mode != "uni" && mode != "bi")
    throw std::invalid_argument("config: scenario.mode must be uni or bi");

  ScenarioConfig cfg = default_config(mode);
  for (const auto& e : entries) {
    auto num = [&] { return detail::parse_double(e); };
    auto unknown = [&] {
      throw std::invalid_argument("config line " + std::to_string(e.line) + ": unknown key " +
                                  e.section + "." + e.key);
    };
    if (e.section == "grid") {
      if (e.key == "h") cfg.grid.h = num();
      else if (e.key == "d") cfg.grid.d = num();
      else if (e.key == "f_nom") cfg.grid.f_nom = num();
      else unknown();
    } else if (e.section == "ev") {
      if (e.key == "k_ev") cfg.grid.k_ev = num();
      else if (e.key == "t_ev") cfg.grid.t_ev = num();
      else if (e.key == "r_ev") cfg.grid.r_ev = num();
      else if (e.key == "deadband_hz") cfg.grid.deadband_hz = num();
      else unknown();
    } else if (e.section == "scenario") {
      if (e.key == "mode") { /* consumed in the first pass */ }
      else if (e.key == "loss_mw") cfg.loss_mw = num();
      else if (e.key == "s_base_mw") cfg.s_base_mw = num();
      else if (e.key == "horizon_s") cfg.horizon_s = num();
      else if (e.key == "x0") {
        auto v = detail::parse_vec4(e);
        cfg.x0 = {v[0], v[1], v[2], v[3]};
      } else unknown();
    } else if (e.section == "abstraction") {
      if (e.key == "region_lb") cfg.region.lb = detail::parse_vec4(e);
      else if (e.key == "region_ub") cfg.region.ub = detail::parse_vec4(e);
      else if (e.key == "eta") cfg.region.eta = detail::parse_vec4(e);
      else if (e.key == "tau") cfg.tau = num();
      else if (e.key == "input_levels") cfg.input_levels = static_cast<std::size_t>(detail::parse_u64(e));
      else if (e.key == "w_lo") cfg.w_lo = num();
      else if (e.key == "w_hi") cfg.w_hi = num();
      else unknown();
    } else if (e.section == "spec") {
      if (e.key == "containment_floor_hz") cfg.spec.containment_floor_hz = num();
      else if (e.key == "static_lo_hz") cfg.spec.static_lo_hz = num();
      else if (e.key == "static_hi_hz") cfg.spec.static_hi_hz = num();
      else if (e.key == "normal_loss_mw") cfg.spec.normal_loss_mw = num();
      else if (e.key == "incident_loss_mw") cfg.spec.incident_loss_mw = num();
      else if (e.key == "recovery_window_s") cfg.spec.recovery_window_s = num();
      else if (e.key == "i1_lo_hz") cfg.spec.i1_lo_hz = num();
      else if (e.key == "i1_hi_hz") cfg.spec.i1_hi_hz = num();
      else if (e.key == "i2_lo_hz") cfg.spec.i2_lo_hz = num();
      else if (e.key == "i2_hi_hz") cfg.spec.i2_hi_hz = num();
      else unknown();
    } else if (e.section == "robustness") {
      if (e.key == "delta_max") cfg.delta_max = num();
      else if (e.key == "n_seeds") cfg.n_seeds = static_cast<std::size_t>(detail::parse_u64(e));
      else if (e.key == "base_seed") cfg.base_seed = detail::parse_u64(e);
      else unknown();
    } else if (e.section == "output") {
      if (e.key == "dir") cfg.out_dir = e.value;
      else unknown();
    } else {
      throw std::invalid_argument("config line " + std::to_string(e.line) +
                                  ": unknown section [" + e.section + "]");
    }
  }
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

/* canonical text rendering: every field, fixed order, shortest exact
 * doubles — a complete record for reports and diffing */
inline std::string canonical_config(const ScenarioConfig& c) {
  std::ostringstream out;
  auto num = [&](const char* key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << '=' << buf << '\n';
  };
  auto vec = [&](const char* key, const std::array<double, 4>& v) {
    out << key << '=';
    for (int d = 0; d < 4; d++) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v[d]);
      out << (d ? " " : "") << buf;
    }
    out << '\n';
  };
  num("grid.h", c.grid.h);
  num("grid.d", c.grid.d);
  num("grid.f_nom", c.grid.f_nom);
  num("ev.k_ev", c.grid.k_ev);
  num("ev.t_ev", c.grid.t_ev);
  num("ev.r_ev", c.grid.r_ev);
  num("ev.deadband_hz", c.grid.deadband_hz);
  out << "scenario.mode=" << c.mode << '\n';
  num("scenario.loss_mw", c.loss_mw);
  num("scenario.s_base_mw", c.s_base_mw);
  num("scenario.horizon_s", c.horizon_s);
  vec("scenario.x0", {c.x0.f, c.x0.g, c.x0.l, c.x0.p});
  vec("abstraction.region_lb", c.region.lb);
  vec("abstraction.region_ub", c.region.ub);
  vec("abstraction.eta", c.region.eta);
  num("abstraction.tau", c.tau);
  out << "abstraction.input_levels=" << c.input_levels << '\n';
  num("abstraction.w_lo", c.abstraction_w_lo());
  num("abstraction.w_hi", c.abstraction_w_hi());
  num("spec.containment_floor_hz", c.spec.containment_floor_hz);
  num("spec.static_lo_hz", c.spec.static_lo_hz);
  num("spec.static_hi_hz", c.spec.static_hi_hz);
  num("spec.normal_loss_mw", c.spec.normal_loss_mw);
  num("spec.incident_loss_mw", c.spec.incident_loss_mw);
  num("spec.recovery_window_s", c.spec.recovery_window_s);
  num("spec.i1_lo_hz", c.spec.i1_lo_hz);
  num("spec.i1_hi_hz", c.spec.i1_hi_hz);
  num("spec.i2_lo_hz", c.spec.i2_lo_hz);
  num("spec.i2_hi_hz", c.spec.i2_hi_hz);
  num("robustness.delta_max", c.delta_max);
  out << "robustness.n_seeds=" << c.n_seeds << '\n';
  out << "robustness.base_seed=" << c.base_seed << '\n';
  return out.str();
}

/* the slice of the configuration that determines persisted artifact bytes:
 * the plant matrices, the abstraction lattice and disturbance range, and
 * the bands the controllers are synthesized against.  Run-only parameters
 * (initial state, horizon, seeds, robustness batch, monitoring thresholds,
 * output directory) are deliberately absent so that re-running a scenario
 * with a different seed or a longer horizon reuses the stored model */
inline std::string artifact_config(const ScenarioConfig& c) {
  std::ostringstream out;
  auto num = [&](const char* key, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << '=' << buf << '\n';
  };
  auto vec = [&](const char* key, const std::array<double, 4>& v) {
    out << key << '=';
    for (int d = 0; d < 4; d++) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v[d]);
      out << (d ? " " : "") << buf;
    }
    out << '\n';
  };
  num("grid.h", c.grid.h);
  num("grid.d", c.grid.d);
  num("grid.f_nom", c.grid.f_nom);
  num("ev.k_ev", c.grid.k_ev);
  vec("abstraction.region_lb", c.region.lb);
  vec("abstraction.region_ub", c.region.ub);
  vec("abstraction.eta", c.region.eta);
  num("abstraction.tau", c.tau);
  out << "abstraction.input_levels=" << c.input_levels << '\n';
  num("abstraction.w_lo", c.abstraction_w_lo());
  num("abstraction.w_hi", c.abstraction_w_hi());
  num("spec.containment_floor_hz", c.spec.containment_floor_hz);
  num("spec.i1_lo_hz", c.spec.i1_lo_hz);
  num("spec.i1_hi_hz", c.spec.i1_hi_hz);
  num("spec.i2_lo_hz", c.spec.i2_lo_hz);
  num("spec.i2_hi_hz", c.spec.i2_hi_hz);
  return out.str();
}

/* FNV-1a over the artifact-determining slice */
inline std::uint64_t config_hash(const ScenarioConfig& c) {
  std::string s = artifact_config(c);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace freqsynth
