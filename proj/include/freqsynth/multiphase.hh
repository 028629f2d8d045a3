/*
 * multiphase.hh
 *
 * four-phase supervisor composing three synthesized controllers: no
 * control while the frequency has never left the primary band, the
 * primary-band controller while outside it, the refined-band controller
 * inside the primary band, and the refined-hold invariance policy once the
 * refined band is reached.  The active phase follows the current frequency
 * position, so a disturbed loop re-engages the matching controller
 * whenever the frequency slips back out of a band.
 *
 * The hold phase is an invariance strategy rather than a literally frozen
 * command: each refined-band cell carries the lowest participation level
 * whose successors stay wholly inside the band's controlled-invariant
 * core.  A frozen command cannot work here — the per-step progress the
 * abstraction must certify on the way down to the band needs more drive
 * than any in-band equilibrium admits, so the command that completes the
 * recovery always overshoots when held.  With quantized participation
 * levels the issued command may alternate between the two levels
 * bracketing the band's true equilibrium input
 */

#pragma once

#include <freqsynth/grid_model.hh>
#include <freqsynth/spec_monitor.hh>
#include <freqsynth/synthesis.hh>

#include <functional>
#include <random>
#include <string>
#include <utility>

namespace freqsynth {

struct SupervisorState {
  Phase phase = Phase::none;
  bool engaged = false; /* becomes true at the first sample outside the primary band */
};

/* actuation-side fleet error: the issued command lands scaled by (1 + delta) */
inline double perturb_participation(double u, double delta) {
  return std::min(1.0, std::max(0.0, u * (1.0 + delta)));
}

/* the staged recovery strategy: two reach-avoid drivers plus the
 * invariance policy that keeps the loop parked in the refined band */
struct StagedControllers {
  Controller c1;   /* from anywhere recoverable back into the primary band */
  Controller c2;   /* from the primary band into the refined band's invariant core */
  Controller hold; /* per-cell band-keeping commands inside the refined band */
};

struct SupervisorDecision {
  SupervisorState state;
  double u = 0.0;
};

inline SupervisorDecision supervise(SupervisorState s, const StateVec& x,
                                    const StagedControllers& sc, const SpecConfig& cfg,
                                    double f_nom) {
  double fa = x.f + f_nom;
  bool in_primary = fa >= cfg.i1_lo_hz && fa <= cfg.i1_hi_hz;
  bool in_refined = fa >= cfg.i2_lo_hz && fa <= cfg.i2_hi_hz;

  double u = 0.0;
  if (!s.engaged && in_primary) {
    s.phase = Phase::none; /* pre-disturbance: no participation required */
  } else {
    s.engaged = true;
    const Controller& active = in_refined ? sc.hold : in_primary ? sc.c2 : sc.c1;
    auto cell = active.grid.cell_of(x);
    if (!cell)
      throw std::runtime_error("supervise: state left the working region in the " + active.kind +
                               " phase");
    if (in_refined) {
      s.phase = Phase::fixed;
      if (sc.hold.wins(*cell)) {
        u = sc.hold.u_at(*cell);
      } else if (sc.c2.wins(*cell) && !sc.c2.is_hold(*cell)) {
        /* cell straddles the band edge: steer back toward the core */
        u = sc.c2.u_at(*cell);
      } else {
        throw std::runtime_error("supervise: cell " + std::to_string(*cell) + " is outside the " +
                                 sc.hold.kind + " winning set");
      }
    } else {
      const Controller& c = in_primary ? sc.c2 : sc.c1;
      if (!c.wins(*cell))
        throw std::runtime_error("supervise: cell " + std::to_string(*cell) + " is outside the " +
                                 c.kind + " winning set");
      u = c.u_at(*cell);
      s.phase = in_primary ? Phase::c2 : Phase::c1;
    }
  }
  return {s, u};
}

/* staged synthesis: the hold stage is the safety fixed point over the
 * cells wholly inside the refined band, the refined-band stage drives into
 * that invariant core, and the primary-band stage drives into the primary
 * band restricted to where the refined-band stage can take over.  The
 * obstacle for both reach stages is every cell dipping below the
 * containment floor */
inline StagedControllers synthesize_two_stage(const SymbolicModel& model, const SpecConfig& cfg,
                                              double f_nom) {
  cfg.validate();
  CellSet avoid = cells_f_below(model.grid, cfg.containment_floor_hz - f_nom);
  CellSet t2 = cells_f_contained(model.grid, cfg.i2_lo_hz - f_nom, cfg.i2_hi_hz - f_nom);
  CellSet t1 = cells_f_contained(model.grid, cfg.i1_lo_hz - f_nom, cfg.i1_hi_hz - f_nom);
  if (!t1.any() || !t2.any())
    throw std::invalid_argument("synthesize_two_stage: no grid cell fits inside a target band");

  GridTS ts(model);
  SynthesisResult inv = solve_safety(ts, t2);
  if (!inv.winning.any())
    throw std::runtime_error("synthesize_two_stage: the refined band has no invariant core");
  SynthesisResult r2 = solve_reach_avoid(ts, inv.winning, avoid);
  for (std::size_t w = 0; w < t1.words().size(); w++)
    t1.words()[w] &= r2.winning.words()[w]; /* primary-band cells the next stage can serve */
  if (!t1.any())
    throw std::runtime_error(
        "synthesize_two_stage: no primary-band cell connects to the refined band");
  SynthesisResult r1 = solve_reach_avoid(ts, t1, avoid);

  StagedControllers sc{make_controller(model, std::move(r1), "primary-band"),
                       make_controller(model, std::move(r2), "refined-band"),
                       make_controller(model, std::move(inv), "refined-hold")};
  return sc;
}

struct ClosedLoopOptions {
  double horizon_s = 120.0;
  double tau = 0.25;
  double participation_jitter = 0.0; /* half-width of the relative actuation error */
  std::uint64_t seed = 0;
};

/* sampled-data loop under the supervisor; the trace records the issued
 * command and active phase, while the plant sees the perturbed command */
inline Trace run_closed_loop(const StateVec& x0, const GridParams& prm,
                             const StagedControllers& sc, const SpecConfig& cfg,
                             const std::function<double(double)>& w_profile,
                             const ClosedLoopOptions& opt) {
  if (!(opt.tau > 0.0) || opt.horizon_s < opt.tau)
    throw std::invalid_argument("run_closed_loop: need horizon >= tau > 0");
  if (opt.participation_jitter < 0.0 || opt.participation_jitter > 1.0)
    throw std::invalid_argument("run_closed_loop: jitter must lie in [0, 1]");
  cfg.validate();
  SystemMatrices m = build_matrices(prm);
  Discretization disc(m, opt.tau);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> jitter(-opt.participation_jitter,
                                                opt.participation_jitter);

  std::size_t n = static_cast<std::size_t>(std::floor(opt.horizon_s / opt.tau));
  Trace tr;
  tr.tau = opt.tau;
  tr.f_nom = prm.f_nom;
  tr.samples.reserve(n + 1);

  StateVec x = x0;
  SupervisorState s;
  for (std::size_t k = 0; k <= n; k++) {
    double t = static_cast<double>(k) * opt.tau;
    double w = w_profile(t);
    SupervisorDecision d = supervise(s, x, sc, cfg, prm.f_nom);
    s = d.state;
    tr.samples.push_back({t, x.f, x.g, x.l, x.p, d.u, w, s.phase});
    if (k < n) {
      double u_act =
          opt.participation_jitter > 0.0 ? perturb_participation(d.u, jitter(rng)) : d.u;
      x = disc.step(x, m, u_act, w);
    }
  }
  return tr;
}

/* true when every phase change along the trace is one the supervisor can
 * legitimately make: forward progress through the stages, or a fall-back
 * by exactly one stage under disturbance */
inline bool phase_word_admissible(const Trace& tr) {
  auto idx = [](Phase p) {
    switch (p) {
      case Phase::none: return 0;
      case Phase::c1: return 1;
      case Phase::c2: return 2;
      default: return 3;
    }
  };
  for (std::size_t k = 0; k + 1 < tr.size(); k++) {
    int a = idx(tr.samples[k].phase);
    int b = idx(tr.samples[k + 1].phase);
    if (b == 0 && a != 0)
      return false; /* no way back to the pre-disturbance phase */
    if (a == 0 && b > 1)
      return false; /* engagement always starts with the primary-band phase */
    if (b < a && a - b != 1)
      return false; /* fall-backs move one stage at a time */
  }
  return true;
}

}  // namespace freqsynth
