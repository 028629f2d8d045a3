/*
 * io.hh
 *
 * text artifacts: trace and sweep CSVs (with exact round-trip floats),
 * controller CSV export, a dependency-free SVG chart of a closed-loop
 * trace, and the atomic file writer all artifact emitters share
 */

#pragma once

#include <freqsynth/ev_baseline.hh>
#include <freqsynth/grid_model.hh>
#include <freqsynth/spec_monitor.hh>
#include <freqsynth/synthesis.hh>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqsynth {

/* temp-then-rename so readers never observe a half-written artifact */
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw std::runtime_error("write_file_atomic: cannot open " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out)
      throw std::runtime_error("write_file_atomic: short write to " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw std::runtime_error("write_file_atomic: cannot rename " + tmp + " to " + path);
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("read_file: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace detail {

inline std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double csv_num(const std::string& field, std::size_t line, const std::string& what) {
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size())
      throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trace CSV line " + std::to_string(line) + ": bad " + what + " '" +
                             field + "'");
  }
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); i++)
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

}  // namespace detail

inline constexpr const char* kTraceHeader = "t,f_hz,g,l,p,u,w,phase";

/* absolute frequency in the file; floats printed exactly so a read-back
 * trace reproduces the original verdicts bit-for-bit */
inline std::string trace_csv(const Trace& tr) {
  std::ostringstream out;
  out << kTraceHeader << '\n';
  for (const auto& s : tr.samples)
    out << detail::exact(s.t) << ',' << detail::exact(s.f + tr.f_nom) << ','
        << detail::exact(s.g) << ',' << detail::exact(s.l) << ',' << detail::exact(s.p) << ','
        << detail::exact(s.u) << ',' << detail::exact(s.w) << ',' << phase_name(s.phase) << '\n';
  return out.str();
}

inline void write_trace_csv(const std::string& path, const Trace& tr) {
  write_file_atomic(path, trace_csv(tr));
}

inline Trace parse_trace_csv(const std::string& text, double f_nom = 50.0) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw std::runtime_error("trace CSV: missing or unexpected header");
  Trace tr;
  tr.f_nom = f_nom;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    line_no++;
    if (line.empty())
      continue;
    auto f = detail::split_csv(line);
    if (f.size() != 8)
      throw std::runtime_error("trace CSV line " + std::to_string(line_no) +
                               ": expected 8 fields");
    TraceSample s;
    s.t = detail::csv_num(f[0], line_no, "t");
    s.f = detail::csv_num(f[1], line_no, "f_hz") - f_nom;
    s.g = detail::csv_num(f[2], line_no, "g");
    s.l = detail::csv_num(f[3], line_no, "l");
    s.p = detail::csv_num(f[4], line_no, "p");
    s.u = detail::csv_num(f[5], line_no, "u");
    s.w = detail::csv_num(f[6], line_no, "w");
    s.phase = phase_from_name(f[7]);
    tr.samples.push_back(s);
  }
  if (tr.samples.size() >= 2)
    tr.tau = tr.samples[1].t - tr.samples[0].t;
  return tr;
}

inline Trace read_trace_csv(const std::string& path, double f_nom = 50.0) {
  return parse_trace_csv(read_file(path), f_nom);
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "half_width_hz,mode,steady_f_hz,settled\n";
  for (const auto& r : rows)
    out << detail::exact(r.half_width_hz) << ',' << r.mode << ','
        << detail::exact(r.steady_f_hz) << ',' << (r.settled ? 1 : 0) << '\n';
  return out.str();
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  write_file_atomic(path, sweep_csv(rows));
}

/* winning cells with their cell boxes and commands; cells inside the
 * target carry no command and are written with u = -1 */
inline std::string controller_csv(const Controller& c) {
  std::ostringstream out;
  out << "cell_index,f_lo,f_hi,g_lo,g_hi,l_lo,l_hi,p_lo,p_hi,u\n";
  for (std::size_t i = 0; i < c.grid.n_cells(); i++) {
    if (!c.wins(i))
      continue;
    Idx4 idx = c.grid.decompose(i);
    out << i;
    for (int d = 0; d < 4; d++) {
      double lo = c.grid.lb[d] + static_cast<double>(idx[d]) * c.grid.eta[d];
      out << ',' << detail::exact(lo) << ',' << detail::exact(lo + c.grid.eta[d]);
    }
    out << ',' << (c.is_hold(i) ? std::string("-1") : detail::exact(c.u_at(i))) << '\n';
  }
  return out.str();
}

inline void write_controller_csv(const std::string& path, const Controller& c) {
  write_file_atomic(path, controller_csv(c));
}

/* self-contained SVG of the frequency trace: shaded requirement bands,
 * the trace coloured by supervisor phase, and simple axes — no external
 * plotting dependency */
inline std::string trace_svg(const Trace& tr, const SpecConfig& cfg,
                             const std::string& title = "closed-loop frequency") {
  if (tr.samples.empty())
    throw std::invalid_argument("trace_svg: empty trace");
  const double W = 900.0, H = 420.0, ml = 70.0, mr = 160.0, mt = 40.0, mb = 50.0;
  const double pw = W - ml - mr, ph = H - mt - mb;

  double t_hi = tr.samples.back().t;
  if (!(t_hi > 0.0))
    t_hi = 1.0;
  double f_min = tr.min_f_abs(), f_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : tr.samples)
    f_max = std::max(f_max, s.f + tr.f_nom);
  double y_lo = std::min(cfg.containment_floor_hz - 0.15, f_min - 0.05);
  double y_hi = std::max(cfg.i2_hi_hz + 0.15, f_max + 0.05);

  auto X = [&](double t) { return ml + t / t_hi * pw; };
  auto Y = [&](double f) { return mt + (y_hi - f) / (y_hi - y_lo) * ph; };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << ml << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">"
      << title << "</text>\n";

  /* requirement bands, deepest first so overlaps stack naturally */
  auto band = [&](double lo, double hi, const char* color, const char* label) {
    double yl = Y(std::min(hi, y_hi)), yh = Y(std::max(lo, y_lo));
    if (yh <= yl)
      return;
    out << "<rect x=\"" << ml << "\" y=\"" << yl << "\" width=\"" << pw << "\" height=\""
        << (yh - yl) << "\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << ml + pw + 6 << "\" y=\"" << (yl + yh) / 2 + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555\">" << label
        << "</text>\n";
  };
  band(y_lo, cfg.containment_floor_hz, "#fdd9d7", "below containment");
  band(cfg.i1_lo_hz, cfg.i1_hi_hz, "#fff3c4", "primary band");
  band(cfg.i2_lo_hz, cfg.i2_hi_hz, "#d5ecd4", "refined band");
  out << "<line x1=\"" << ml << "\" y1=\"" << Y(cfg.containment_floor_hz) << "\" x2=\""
      << ml + pw << "\" y2=\"" << Y(cfg.containment_floor_hz)
      << "\" stroke=\"#c0392b\" stroke-dasharray=\"5,3\"/>\n";

  /* axes and ticks */
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  double t_tick = t_hi > 60.0 ? 20.0 : 5.0;
  for (double t = 0.0; t <= t_hi + 1e-9; t += t_tick) {
    out << "<line x1=\"" << X(t) << "\" y1=\"" << mt + ph << "\" x2=\"" << X(t) << "\" y2=\""
        << mt + ph + 5 << "\" stroke=\"#333\"/>\n"
        << "<text x=\"" << X(t) << "\" y=\"" << mt + ph + 20
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt(t)
        << "</text>\n";
  }
  for (double f = std::ceil(y_lo / 0.2) * 0.2; f <= y_hi + 1e-9; f += 0.2) {
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << Y(f) << "\" x2=\"" << ml << "\" y2=\""
        << Y(f) << "\" stroke=\"#333\"/>\n"
        << "<text x=\"" << ml - 9 << "\" y=\"" << Y(f) + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(f)
        << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">time [s]"
      << "</text>\n"
      << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
      << mt + ph / 2 << ")\" text-anchor=\"middle\">frequency [Hz]</text>\n";

  /* trace coloured by the active phase, one polyline per phase run */
  auto color_of = [](Phase p) {
    switch (p) {
      case Phase::c1: return "#d62728";
      case Phase::c2: return "#1f77b4";
      case Phase::fixed: return "#2ca02c";
      default: return "#7f7f7f";
    }
  };
  std::size_t k = 0;
  while (k + 1 < tr.samples.size()) {
    std::size_t e = k;
    while (e + 1 < tr.samples.size() && tr.samples[e + 1].phase == tr.samples[k].phase)
      e++;
    std::size_t last = std::min(e + 1, tr.samples.size() - 1);
    out << "<polyline fill=\"none\" stroke=\"" << color_of(tr.samples[k].phase)
        << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = k; i <= last; i++)
      out << X(tr.samples[i].t) << ',' << Y(tr.f_abs(i)) << ' ';
    out << "\"/>\n";
    k = e + 1;
  }

  /* phase legend */
  const Phase phases[4] = {Phase::none, Phase::c1, Phase::c2, Phase::fixed};
  for (int i = 0; i < 4; i++) {
    double yl = mt + 12 + 18.0 * i;
    out << "<line x1=\"" << ml + pw + 6 << "\" y1=\"" << yl << "\" x2=\"" << ml + pw + 30
        << "\" y2=\"" << yl << "\" stroke=\"" << color_of(phases[i])
        << "\" stroke-width=\"3\"/>\n"
        << "<text x=\"" << ml + pw + 36 << "\" y=\"" << yl + 4
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << phase_name(phases[i])
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

inline void write_trace_svg(const std::string& path, const Trace& tr, const SpecConfig& cfg,
                            const std::string& title = "closed-loop frequency") {
  write_file_atomic(path, trace_svg(tr, cfg, title));
}

}  // namespace freqsynth
