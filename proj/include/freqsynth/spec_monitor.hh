/*
 * spec_monitor.hh
 *
 * frequency-quality requirements expressed as finite-trace LTL over a
 * simulated trajectory, plus per-clause reports with the first violating
 * sample for diagnostics
 */

#pragma once

#include <freqsynth/grid_model.hh>
#include <freqsynth/ltl.hh>

#include <json.hpp>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

namespace freqsynth {

struct SpecConfig {
  double containment_floor_hz = 49.2;
  double static_lo_hz = 49.5;
  double static_hi_hz = 50.5;
  double normal_loss_mw = 1320.0;
  double incident_loss_mw = 1800.0;
  double recovery_window_s = 60.0;
  /* nested recovery bands; defaults are the bidirectional pair */
  double i1_lo_hz = 49.70;
  double i1_hi_hz = 50.0;
  double i2_lo_hz = 49.85;
  double i2_hi_hz = 50.0;

  void validate() const {
    auto bad = [](const char* msg) { throw std::invalid_argument(std::string("SpecConfig: ") + msg); };
    if (!(static_lo_hz < static_hi_hz))
      bad("static band is empty");
    if (!(containment_floor_hz < static_lo_hz))
      bad("containment floor must sit below the static band");
    if (!(normal_loss_mw > 0.0) || !(incident_loss_mw > normal_loss_mw))
      bad("loss thresholds must satisfy 0 < normal < incident");
    if (!(recovery_window_s > 0.0))
      bad("recovery window must be positive");
    if (!(i1_lo_hz < i1_hi_hz) || !(i2_lo_hz < i2_hi_hz))
      bad("recovery bands are empty");
    if (i2_lo_hz < i1_lo_hz || i2_hi_hz > i1_hi_hz)
      bad("refined band must be nested in the primary band");
  }

  static SpecConfig for_mode(const std::string& mode) {
    SpecConfig c;
    if (mode == "uni") {
      c.i1_lo_hz = 49.55;
      c.i2_lo_hz = 49.75;
    } else if (mode == "bi") {
      c.i1_lo_hz = 49.70;
      c.i2_lo_hz = 49.85;
    } else {
      throw std::invalid_argument("SpecConfig::for_mode: mode must be uni or bi");
    }
    c.validate();
    return c;
  }

  /* default aggregation gain per mode, sized so that (a) some participation
   * level has its equilibrium inside the mode's refined band and (b) the
   * abstraction can certify one-cell-per-step progress from the deepest
   * frequency the loop visits before the supervisor engages.  The
   * unidirectional band pair sits lower, so engagement happens deeper and
   * needs proportionally more drive than halving the bidirectional gain
   * would leave */
  static double default_k_ev(const std::string& mode) {
    if (mode == "uni")
      return 7.2;
    if (mode == "bi")
      return 9.6;
    throw std::invalid_argument("SpecConfig::default_k_ev: mode must be uni or bi");
  }
};

/* snapshot of the absolute-frequency series so atoms own their data */
inline std::shared_ptr<const std::vector<double>> f_abs_series(const Trace& tr) {
  auto v = std::make_shared<std::vector<double>>();
  v->reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); i++)
    v->push_back(tr.f_abs(i));
  return v;
}

inline ltl::FormulaPtr f_at_least(std::shared_ptr<const std::vector<double>> f, double lo,
                                  std::string label) {
  return ltl::atom(std::move(label), [f = std::move(f), lo](std::size_t p) { return (*f)[p] >= lo; });
}

inline ltl::FormulaPtr f_in_band(std::shared_ptr<const std::vector<double>> f, double lo, double hi,
                                 std::string label) {
  return ltl::atom(std::move(label),
                   [f = std::move(f), lo, hi](std::size_t p) { return (*f)[p] >= lo && (*f)[p] <= hi; });
}

/* a named per-position obligation, checked as ALWAYS(obligation) */
struct Clause {
  std::string name;
  ltl::FormulaPtr obligation;
};

struct ClauseReport {
  std::string name;
  bool satisfied = false;
  std::ptrdiff_t violation_pos = -1;
  double violation_t = std::numeric_limits<double>::quiet_NaN();
  double violation_f_hz = std::numeric_limits<double>::quiet_NaN();
};

inline ClauseReport check_clause(const Trace& tr, const Clause& clause) {
  ClauseReport rep;
  rep.name = clause.name;
  rep.satisfied = true;
  for (std::size_t p = 0; p < tr.size(); p++) {
    if (!ltl::eval(clause.obligation, p, tr.size())) {
      rep.satisfied = false;
      rep.violation_pos = static_cast<std::ptrdiff_t>(p);
      rep.violation_t = tr.samples[p].t;
      rep.violation_f_hz = tr.f_abs(p);
      break;
    }
  }
  return rep;
}

inline std::size_t window_steps(const Trace& tr, double window_s) {
  return static_cast<std::size_t>(std::floor(window_s / tr.tau + 1e-9));
}

/* frequency-quality requirements for a given generation-loss size:
 *  - containment: the frequency never leaves the containment zone
 *  - quasi_steady (losses up to the normal threshold): the frequency
 *    stays inside the static limits throughout
 *  - restoration (losses at or above the incident threshold): whenever
 *    the frequency is outside the static limits it returns to them
 *    within the recovery window */
struct RequirementReport {
  std::string name;
  bool applicable = false;
  ClauseReport clause;
};

inline std::vector<RequirementReport> check_requirements(const Trace& tr, double loss_mw,
                                                         const SpecConfig& cfg) {
  cfg.validate();
  auto f = f_abs_series(tr);
  auto in_static = f_in_band(f, cfg.static_lo_hz, cfg.static_hi_hz, "f_in_static_band");

  std::vector<RequirementReport> out;
  {
    RequirementReport r;
    r.name = "containment";
    r.applicable = true;
    r.clause = check_clause(tr, {"containment", f_at_least(f, cfg.containment_floor_hz, "f_above_floor")});
    out.push_back(std::move(r));
  }
  {
    RequirementReport r;
    r.name = "quasi_steady";
    r.applicable = loss_mw <= cfg.normal_loss_mw;
    r.clause = check_clause(tr, {"quasi_steady", in_static});
    if (!r.applicable) { /* vacuously satisfied */
      r.clause.satisfied = true;
      r.clause.violation_pos = -1;
    }
    out.push_back(std::move(r));
  }
  {
    RequirementReport r;
    r.name = "restoration";
    r.applicable = loss_mw >= cfg.incident_loss_mw;
    auto recover = ltl::implies(ltl::neg(in_static),
                                ltl::eventually_within(in_static, window_steps(tr, cfg.recovery_window_s)));
    r.clause = check_clause(tr, {"restoration", recover});
    if (!r.applicable) {
      r.clause.satisfied = true;
      r.clause.violation_pos = -1;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline bool all_satisfied(const std::vector<RequirementReport>& reps) {
  for (const auto& r : reps)
    if (r.applicable && !r.clause.satisfied)
      return false;
  return true;
}

/* staged-recovery property for the supervised closed loop: stay above the
 * containment floor, from outside the primary band eventually reach it,
 * and from the primary band eventually reach the refined band */
struct TwoStageReport {
  bool satisfied = false;
  std::vector<ClauseReport> clauses;
};

inline TwoStageReport check_two_stage(const Trace& tr, const SpecConfig& cfg) {
  cfg.validate();
  auto f = f_abs_series(tr);
  auto in_i1 = f_in_band(f, cfg.i1_lo_hz, cfg.i1_hi_hz, "f_in_primary_band");
  auto in_i2 = f_in_band(f, cfg.i2_lo_hz, cfg.i2_hi_hz, "f_in_refined_band");

  std::vector<Clause> clauses;
  clauses.push_back({"containment", f_at_least(f, cfg.containment_floor_hz, "f_above_floor")});
  clauses.push_back({"reach_primary", ltl::implies(ltl::neg(in_i1), ltl::eventually(in_i1))});
  clauses.push_back({"reach_refined",
                     ltl::implies(ltl::conj(in_i1, ltl::neg(in_i2)), ltl::eventually(in_i2))});

  TwoStageReport rep;
  rep.satisfied = true;
  for (const auto& c : clauses) {
    rep.clauses.push_back(check_clause(tr, c));
    rep.satisfied = rep.satisfied && rep.clauses.back().satisfied;
  }
  return rep;
}

inline nlohmann::json to_json(const ClauseReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["satisfied"] = r.satisfied;
  if (!r.satisfied) {
    j["violation_pos"] = r.violation_pos;
    j["violation_t"] = r.violation_t;
    j["violation_f_hz"] = r.violation_f_hz;
  }
  return j;
}

inline nlohmann::json to_json(const std::vector<RequirementReport>& reps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reps) {
    nlohmann::json j = to_json(r.clause);
    j["name"] = r.name;
    j["applicable"] = r.applicable;
    arr.push_back(std::move(j));
  }
  return arr;
}

inline nlohmann::json to_json(const TwoStageReport& rep) {
  nlohmann::json j;
  j["satisfied"] = rep.satisfied;
  j["clauses"] = nlohmann::json::array();
  for (const auto& c : rep.clauses)
    j["clauses"].push_back(to_json(c));
  return j;
}

}  // namespace freqsynth
