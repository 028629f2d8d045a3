/*
 * ev_baseline.hh
 *
 * reference EV aggregation controller (deadband -> droop -> first-order
 * lag -> saturation) and the deadband sweep used for steady-state tables
 */

#pragma once

#include <freqsynth/grid_model.hh>

#include <cmath>
#include <vector>

namespace freqsynth {

/* shifted deadband: zero inside the band, remainder beyond it */
inline double deadband(double df_hz, double half_width) {
  if (half_width < 0.0)
    throw std::invalid_argument("deadband: half_width must be >= 0");
  if (std::abs(df_hz) <= half_width)
    return 0.0;
  return df_hz - (df_hz > 0.0 ? half_width : -half_width);
}

/* internal state of the 1/(s T_ev + D) block, in participation units */
struct BaselineState {
  double lag = 0.0;
};

/* one controller update over dt: droop demand -deadband(df)/R_ev drives the
 * lag exactly (inputs held constant over dt), output clamped to [0,1] */
inline std::pair<BaselineState, double> baseline_step(const BaselineState& s, double df_hz,
                                                      const GridParams& prm, double dt) {
  if (!(dt > 0.0))
    throw std::invalid_argument("baseline_step: dt must be > 0");
  double demand = -deadband(df_hz, prm.deadband_hz) / prm.r_ev;
  /* d(lag)/dt = (demand - D lag)/T_ev has the exact held-input solution */
  double decay = std::exp(-prm.d * dt / prm.t_ev);
  BaselineState next;
  next.lag = s.lag * decay + (demand / prm.d) * (1.0 - decay);
  double u = std::min(1.0, std::max(0.0, next.lag));
  return {next, u};
}

struct SweepRow {
  double half_width_hz = 0.0;
  std::string mode;
  double steady_f_hz = 0.0;
  bool settled = false;
};

/* closed-loop deadband sweep: plant + baseline controller integrated at a
 * fine inner step until settling; reports the final absolute frequency */
inline std::vector<SweepRow> sweep_deadband(const std::vector<double>& half_widths,
                                            const std::string& mode, const GridParams& base,
                                            double w, double horizon = 200.0,
                                            double dt = 0.01) {
  std::vector<SweepRow> rows;
  rows.reserve(half_widths.size());
  for (double hw : half_widths) {
    GridParams prm = base;
    prm.deadband_hz = hw;
    SystemMatrices m = build_matrices(prm);
    Discretization disc(m, dt);
    StateVec x{};
    BaselineState bs;
    std::size_t n = static_cast<std::size_t>(std::floor(horizon / dt));
    std::size_t tail = static_cast<std::size_t>(std::floor(10.0 / dt));
    double tail_min = std::numeric_limits<double>::infinity();
    double tail_max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; k++) {
      auto [nbs, u] = baseline_step(bs, x.f, prm, dt);
      bs = nbs;
      x = disc.step(x, m, u, w);
      if (k + tail >= n) {
        tail_min = std::min(tail_min, x.f);
        tail_max = std::max(tail_max, x.f);
      }
    }
    SweepRow row;
    row.half_width_hz = hw;
    row.mode = mode;
    row.steady_f_hz = x.f + prm.f_nom;
    row.settled = (tail_max - tail_min) <= 1e-4;
    rows.push_back(row);
  }
  return rows;
}

/* default sweep grid {0, 0.05, ..., 0.35} */
inline std::vector<double> default_sweep_half_widths() {
  std::vector<double> hws;
  for (int i = 0; i <= 7; i++)
    hws.push_back(i * 0.05);
  return hws;
}

}  // namespace freqsynth
