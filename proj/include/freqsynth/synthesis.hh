/*
 * synthesis.hh
 *
 * backward fixed-point solvers over nondeterministic transition systems:
 * reach / reach-avoid via counter-based frontier propagation and safety
 * via the dual removal cascade.  Works on two system types: GridTS wraps
 * a packed SymbolicModel and enumerates predecessor candidates
 * geometrically (the one-period map is affine, so preimages of successor
 * boxes are boxes again), ExplicitTS stores edge lists and is meant for
 * small hand-built or randomly generated systems.
 *
 * determinization: commands take the smallest participation level that
 * preserves the guarantee.  The reach fixed point admits input levels
 * through a rising cap, so a cell's command is the lowest level under
 * which the cell can win at all — not the level that wins fastest —
 * with same-wave ties broken toward the lower level index
 */

#pragma once

#include <freqsynth/abstraction.hh>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace freqsynth {

constexpr std::uint8_t kPolicyHold = 0xfe; /* target cell: no command needed */
constexpr std::uint8_t kPolicyNone = 0xff;
constexpr std::uint32_t kRankNone = 0xffffffffu;
constexpr std::uint16_t kPairDead = 0xffff;

struct SynthesisResult {
  CellSet winning;
  std::vector<std::uint8_t> policy;
  std::vector<std::uint32_t> rank;
};

/* 4-d summed-area table over a cell set; box populations come out of 16
 * corner lookups */
class PrefixSum4D {
 public:
  PrefixSum4D(const GridSpec& g, const CellSet& s) : n_{g.counts} {
    for (int d = 0; d < 4; d++)
      stride_[d] = 1;
    stride_[2] = n_[3] + 1;
    stride_[1] = stride_[2] * (n_[2] + 1);
    stride_[0] = stride_[1] * (n_[1] + 1);
    stride_[3] = 1;
    p_.assign(stride_[0] * (n_[0] + 1), 0);
    for (std::size_t idx = 0; idx < g.n_cells(); idx++)
      if (s.test(idx)) {
        Idx4 i = g.decompose(idx);
        p_[at(i[0] + 1, i[1] + 1, i[2] + 1, i[3] + 1)] = 1;
      }
    /* running sums along each axis in turn */
    for (std::size_t a = 1; a <= n_[0]; a++)
      for (std::size_t b = 0; b <= n_[1]; b++)
        for (std::size_t c = 0; c <= n_[2]; c++)
          for (std::size_t d = 0; d <= n_[3]; d++)
            p_[at(a, b, c, d)] += p_[at(a - 1, b, c, d)];
    for (std::size_t a = 0; a <= n_[0]; a++)
      for (std::size_t b = 1; b <= n_[1]; b++)
        for (std::size_t c = 0; c <= n_[2]; c++)
          for (std::size_t d = 0; d <= n_[3]; d++)
            p_[at(a, b, c, d)] += p_[at(a, b - 1, c, d)];
    for (std::size_t a = 0; a <= n_[0]; a++)
      for (std::size_t b = 0; b <= n_[1]; b++)
        for (std::size_t c = 1; c <= n_[2]; c++)
          for (std::size_t d = 0; d <= n_[3]; d++)
            p_[at(a, b, c, d)] += p_[at(a, b, c - 1, d)];
    for (std::size_t a = 0; a <= n_[0]; a++)
      for (std::size_t b = 0; b <= n_[1]; b++)
        for (std::size_t c = 0; c <= n_[2]; c++)
          for (std::size_t d = 1; d <= n_[3]; d++)
            p_[at(a, b, c, d)] += p_[at(a, b, c, d - 1)];
  }

  /* cells inside [lo, hi] (inclusive per dimension) that are in the set */
  std::uint32_t box_count(const std::uint8_t lo[4], const std::uint8_t hi[4]) const {
    std::uint32_t total = 0;
    for (int mask = 0; mask < 16; mask++) {
      std::size_t k[4];
      int bits = 0;
      for (int d = 0; d < 4; d++) {
        if (mask & (1 << d)) {
          k[d] = lo[d];
          bits++;
        } else {
          k[d] = static_cast<std::size_t>(hi[d]) + 1;
        }
      }
      std::uint32_t v = p_[at(k[0], k[1], k[2], k[3])];
      total += (bits & 1) ? -v : v;
    }
    return total;
  }

 private:
  std::size_t at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const {
    return ((a * stride_[0] + b * stride_[1]) + c * stride_[2]) + d;
  }
  std::array<std::size_t, 4> n_;
  std::size_t stride_[4];
  std::vector<std::uint32_t> p_;
};

/* explicit edge-list system; pairs with no successors count as blocked */
class ExplicitTS {
 public:
  ExplicitTS(std::size_t n_states, std::size_t n_inputs)
      : n_(n_states), m_(n_inputs), succ_(n_states * n_inputs), pred_(n_states * n_inputs) {}

  void add_edge(std::size_t i, std::size_t j, std::size_t q) {
    succ_.at(i * m_ + j).push_back(static_cast<std::uint32_t>(q));
    dirty_ = true;
  }

  void finalize() {
    for (auto& v : succ_) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    for (auto& v : pred_)
      v.clear();
    for (std::size_t i = 0; i < n_; i++)
      for (std::size_t j = 0; j < m_; j++)
        for (std::uint32_t q : succ_[i * m_ + j])
          pred_[q * m_ + j].push_back(static_cast<std::uint32_t>(i));
    dirty_ = false;
  }

  std::size_t n_states() const { return n_; }
  std::size_t n_inputs() const { return m_; }

  bool blocked(std::size_t i, std::size_t j) const { return succ_[i * m_ + j].empty(); }
  std::uint64_t volume(std::size_t i, std::size_t j) const { return succ_[i * m_ + j].size(); }
  const std::vector<std::uint32_t>& successors(std::size_t i, std::size_t j) const {
    return succ_[i * m_ + j];
  }

  using Ctx = const CellSet*;
  Ctx prepare(const CellSet& s) const { return &s; }

  std::uint32_t count_in(std::size_t i, std::size_t j, Ctx s) const {
    std::uint32_t c = 0;
    for (std::uint32_t q : succ_[i * m_ + j])
      c += s->test(q) ? 1 : 0;
    return c;
  }

  template <class F>
  void for_each_pred(std::size_t q, std::size_t j, F&& f) const {
    if (dirty_)
      throw std::logic_error("ExplicitTS: finalize() before solving");
    for (std::uint32_t i : pred_[q * m_ + j])
      f(i);
  }

 private:
  std::size_t n_, m_;
  std::vector<std::vector<std::uint32_t>> succ_, pred_;
  bool dirty_ = false;
};

/* packed-model view.  predecessor enumeration inverts the affine one-period
 * map row by row: a successor cell only bounds the image of the candidate
 * center to a box, so each state dimension in turn gets an exact interval
 * once the earlier dimensions are fixed, with the influence of the still
 * free dimensions bracketed over the whole working region.  Every candidate
 * is confirmed against the stored rectangle before it is reported, so the
 * enumeration is exact no matter how coarse the bracketing is */
class GridTS {
 public:
  explicit GridTS(const SymbolicModel& model) : m_(&model) {
    const Eigen::Matrix4d& E = m_->E;
    const GridSpec& g = m_->grid;
    for (int d = 0; d < 4; d++) {
      if (!(E(d, d) > 0.0))
        throw std::invalid_argument(
            "GridTS: diagonal of the one-period map must be positive");
      inv_diag_[d] = 1.0 / E(d, d);
      /* membership of a successor cell bounds the image of the candidate
       * center to within radius + half a cell (+ the build slack) of the
       * successor's center */
      pad_[d] = m_->radius[d] + 0.5 * g.eta[d] + g.eta[d] * 1e-9 + 1e-9;
      inv_eta_[d] = 1.0 / g.eta[d];
      /* widen intervals a hair before index conversion so round-off can
       * never drop a real predecessor */
      eps_[d] = 1e-7 * g.eta[d];
    }
    /* bracket the contribution of the not-yet-fixed dimensions e > d over
     * all cell centers of the working region */
    for (int d = 0; d < 4; d++) {
      rem_lo_[d] = 0.0;
      rem_hi_[d] = 0.0;
      for (int e = d + 1; e < 4; e++) {
        double c_lo = g.lb[e] + 0.5 * g.eta[e];
        double c_hi = g.ub[e] - 0.5 * g.eta[e];
        double a = E(d, e) * c_lo;
        double b = E(d, e) * c_hi;
        rem_lo_[d] += std::min(a, b);
        rem_hi_[d] += std::max(a, b);
      }
    }
  }

  std::size_t n_states() const { return m_->grid.n_cells(); }
  std::size_t n_inputs() const { return m_->inputs.size(); }

  bool blocked(std::size_t i, std::size_t j) const { return m_->blocked(i, j); }
  std::uint64_t volume(std::size_t i, std::size_t j) const { return m_->rect(i, j).volume(); }

  using Ctx = PrefixSum4D;
  Ctx prepare(const CellSet& s) const { return PrefixSum4D(m_->grid, s); }

  std::uint32_t count_in(std::size_t i, std::size_t j, const Ctx& ctx) const {
    PostRect r = m_->rect(i, j);
    return ctx.box_count(r.lo, r.hi);
  }

  template <class F>
  void for_each_pred(std::size_t q, std::size_t j, F&& f) const {
    const GridSpec& g = m_->grid;
    const Eigen::Matrix4d& E = m_->E;
    const Eigen::Vector4d& K = m_->K[j];
    StateVec cq = g.center(q);
    Idx4 qi4 = g.decompose(q);
    const std::uint8_t qi[4] = {static_cast<std::uint8_t>(qi4[0]), static_cast<std::uint8_t>(qi4[1]),
                                static_cast<std::uint8_t>(qi4[2]), static_cast<std::uint8_t>(qi4[3])};
    /* the candidate's image must land within pad of y, row by row */
    const double y[4] = {cq.f - K[0], cq.g - K[1], cq.l - K[2], cq.p - K[3]};

    const std::size_t n_in = m_->inputs.size();
    const std::uint8_t* base = m_->trans.data() + j * kRecBytes;

    long f_lo, f_hi;
    center_range(0, (y[0] - pad_[0] - rem_hi_[0]) * inv_diag_[0],
                 (y[0] + pad_[0] - rem_lo_[0]) * inv_diag_[0], f_lo, f_hi);
    for (long fi = f_lo; fi <= f_hi; fi++) {
      double cf = g.lb[0] + (static_cast<double>(fi) + 0.5) * g.eta[0];
      double part_g = E(1, 0) * cf;
      long g_lo, g_hi;
      center_range(1, (y[1] - pad_[1] - rem_hi_[1] - part_g) * inv_diag_[1],
                   (y[1] + pad_[1] - rem_lo_[1] - part_g) * inv_diag_[1], g_lo, g_hi);
      for (long gi = g_lo; gi <= g_hi; gi++) {
        double cg = g.lb[1] + (static_cast<double>(gi) + 0.5) * g.eta[1];
        double part_l = E(2, 0) * cf + E(2, 1) * cg;
        long l_lo, l_hi;
        center_range(2, (y[2] - pad_[2] - rem_hi_[2] - part_l) * inv_diag_[2],
                     (y[2] + pad_[2] - rem_lo_[2] - part_l) * inv_diag_[2], l_lo, l_hi);
        for (long li = l_lo; li <= l_hi; li++) {
          double cl = g.lb[2] + (static_cast<double>(li) + 0.5) * g.eta[2];
          double part_p = E(3, 0) * cf + E(3, 1) * cg + E(3, 2) * cl;
          long p_lo, p_hi;
          center_range(3, (y[3] - pad_[3] - part_p) * inv_diag_[3],
                       (y[3] + pad_[3] - part_p) * inv_diag_[3], p_lo, p_hi);
          if (p_lo > p_hi)
            continue;
          std::size_t row =
              g.counts[3] * (static_cast<std::size_t>(li) +
                             g.counts[2] * (static_cast<std::size_t>(gi) +
                                            g.counts[1] * static_cast<std::size_t>(fi)));
          const std::uint8_t* rec = base + kRecBytes * (row + static_cast<std::size_t>(p_lo)) * n_in;
          for (long pi = p_lo; pi <= p_hi; pi++, rec += kRecBytes * n_in) {
            /* confirm against the stored rectangle */
            if (qi[0] < rec[0] || qi[0] > rec[4] || qi[1] < rec[1] || qi[1] > rec[5] ||
                qi[2] < rec[2] || qi[2] > rec[6] || qi[3] < rec[3] || qi[3] > rec[7])
              continue;
            f(row + static_cast<std::size_t>(pi));
          }
        }
      }
    }
  }

 private:
  /* indices of cells whose center lies in [lo, hi], slightly widened */
  void center_range(int d, double lo, double hi, long& a, long& b) const {
    const GridSpec& g = m_->grid;
    a = static_cast<long>(std::ceil((lo - eps_[d] - g.lb[d]) * inv_eta_[d] - 0.5));
    b = static_cast<long>(std::floor((hi + eps_[d] - g.lb[d]) * inv_eta_[d] - 0.5));
    if (a < 0)
      a = 0;
    long top = static_cast<long>(g.counts[d]) - 1;
    if (b > top)
      b = top;
  }

  const SymbolicModel* m_;
  double inv_diag_[4];
  double pad_[4];
  double rem_lo_[4], rem_hi_[4];
  double inv_eta_[4];
  double eps_[4];
};

namespace detail {

inline std::vector<std::uint32_t> set_to_list(const CellSet& s) {
  std::vector<std::uint32_t> v;
  v.reserve(s.count());
  for (std::size_t i = 0; i < s.size(); i++)
    if (s.test(i))
      v.push_back(static_cast<std::uint32_t>(i));
  return v;
}

}  // namespace detail

/* largest set from which some input chain is guaranteed to enter `target`
 * while never touching `avoid`; targets hold.
 *
 * the fixed point runs under a participation cap that rises one level at
 * a time: pairs that become fully enabled above the cap are parked and
 * promoted to winners only once the cap reaches their level, so every
 * cell's command is the smallest level under which it can win.  waves are
 * counted globally across cap raises, hence ranks still decrease strictly
 * along every closed-loop step */
template <class TS>
SynthesisResult solve_reach_avoid(const TS& ts, const CellSet& target, const CellSet& avoid) {
  const std::size_t n = ts.n_states();
  const std::size_t m = ts.n_inputs();
  if (target.size() != n || avoid.size() != n)
    throw std::invalid_argument("solve_reach_avoid: set sizes do not match the system");
  if (m >= kPolicyHold)
    throw std::invalid_argument("solve_reach_avoid: too many input levels");
  for (std::size_t i = 0; i < n; i++)
    if (target.test(i) && avoid.test(i))
      throw std::invalid_argument("solve_reach_avoid: target and avoid overlap");

  SynthesisResult res;
  res.winning = target;
  res.policy.assign(n, kPolicyNone);
  res.rank.assign(n, kRankNone);

  const bool has_avoid = avoid.any();
  std::vector<std::uint16_t> cnt(n * m, kPairDead);
  {
    typename TS::Ctx actx = ts.prepare(avoid);
    for (std::size_t i = 0; i < n; i++) {
      for (std::size_t j = 0; j < m; j++) {
        if (ts.blocked(i, j))
          continue;
        std::uint64_t vol = ts.volume(i, j);
        if (vol >= kPairDead)
          throw std::runtime_error("solve_reach_avoid: successor set too large for counters");
        if (has_avoid && ts.count_in(i, j, actx) > 0)
          continue; /* may drift into the forbidden region: unusable */
        cnt[i * m + j] = static_cast<std::uint16_t>(vol);
      }
    }
  }

  std::vector<std::uint32_t> cur = detail::set_to_list(target);
  for (std::uint32_t q : cur) {
    res.policy[q] = kPolicyHold;
    res.rank[q] = 0;
  }

  std::vector<std::vector<std::uint32_t>> pending(m);
  std::vector<std::uint32_t> next;
  std::uint32_t layer = 0;
  std::size_t cap = 0;
  for (;;) {
    /* drain the frontier under the current participation cap */
    while (!cur.empty()) {
      next.clear();
      for (std::uint32_t q : cur) {
        for (std::size_t j = 0; j < m; j++) {
          ts.for_each_pred(q, j, [&](std::size_t i) {
            if (res.winning.test(i) && res.rank[i] <= layer)
              return; /* settled in an earlier wave */
            std::uint16_t& c = cnt[i * m + j];
            if (c == kPairDead)
              return;
            if (--c != 0)
              return;
            if (avoid.test(i)) { /* enabled, but the cell itself is forbidden */
              c = kPairDead;
              return;
            }
            if (j > cap) { /* enabled, but only above the cap: park it */
              if (!res.winning.test(i))
                pending[j].push_back(static_cast<std::uint32_t>(i));
              return;
            }
            if (!res.winning.test(i)) {
              res.winning.set(i);
              res.rank[i] = layer + 1;
              res.policy[i] = static_cast<std::uint8_t>(j);
              next.push_back(static_cast<std::uint32_t>(i));
            } else if (static_cast<std::uint8_t>(j) < res.policy[i]) {
              res.policy[i] = static_cast<std::uint8_t>(j); /* same wave, lower level */
            }
          });
        }
      }
      cur.swap(next);
      if (!cur.empty())
        layer++; /* a drained frontier does not open a new wave */
    }
    /* quiescent: raise the cap until a parked level yields new winners */
    while (cur.empty() && ++cap < m) {
      for (std::uint32_t i : pending[cap]) {
        if (res.winning.test(i))
          continue;
        res.winning.set(i);
        res.rank[i] = layer + 1;
        res.policy[i] = static_cast<std::uint8_t>(cap);
        cur.push_back(i);
      }
      std::vector<std::uint32_t>().swap(pending[cap]);
    }
    if (cur.empty())
      break; /* every level exhausted */
    layer++;
  }
  return res;
}

template <class TS>
SynthesisResult solve_reach(const TS& ts, const CellSet& target) {
  return solve_reach_avoid(ts, target, CellSet(ts.n_states()));
}

/* largest subset of `safe` the system can be held in forever; every member
 * keeps at least one input whose successors stay inside the set */
template <class TS>
SynthesisResult solve_safety(const TS& ts, const CellSet& safe) {
  const std::size_t n = ts.n_states();
  const std::size_t m = ts.n_inputs();
  if (safe.size() != n)
    throw std::invalid_argument("solve_safety: set size does not match the system");
  if (m >= kPolicyHold)
    throw std::invalid_argument("solve_safety: too many input levels");

  SynthesisResult res;
  res.winning = safe;
  res.policy.assign(n, kPolicyNone);
  res.rank.assign(n, kRankNone);

  /* counter = successors currently outside the candidate set */
  std::vector<std::uint16_t> cnt(n * m, kPairDead);
  std::vector<std::uint16_t> live(n, 0);
  std::vector<std::uint32_t> queue;
  {
    typename TS::Ctx sctx = ts.prepare(safe);
    for (std::size_t i = 0; i < n; i++) {
      if (!safe.test(i))
        continue;
      for (std::size_t j = 0; j < m; j++) {
        if (ts.blocked(i, j))
          continue;
        std::uint64_t vol = ts.volume(i, j);
        if (vol >= kPairDead)
          throw std::runtime_error("solve_safety: successor set too large for counters");
        std::uint64_t outside = vol - ts.count_in(i, j, sctx);
        cnt[i * m + j] = static_cast<std::uint16_t>(outside);
        if (outside == 0)
          live[i]++;
      }
      if (live[i] == 0) {
        res.winning.reset(i);
        queue.push_back(static_cast<std::uint32_t>(i));
      }
    }
  }

  while (!queue.empty()) {
    std::uint32_t q = queue.back();
    queue.pop_back();
    for (std::size_t j = 0; j < m; j++) {
      ts.for_each_pred(q, j, [&](std::size_t i) {
        if (!res.winning.test(i))
          return;
        std::uint16_t& c = cnt[i * m + j];
        if (c == kPairDead)
          return;
        if (c++ == 0) { /* this pair just lost its guarantee */
          if (--live[i] == 0) {
            res.winning.reset(i);
            queue.push_back(static_cast<std::uint32_t>(i));
          }
        }
      });
    }
  }

  for (std::size_t i = 0; i < n; i++) {
    if (!res.winning.test(i))
      continue;
    res.rank[i] = 0;
    for (std::size_t j = 0; j < m; j++) {
      if (cnt[i * m + j] == 0) {
        res.policy[i] = static_cast<std::uint8_t>(j);
        break; /* lowest level that keeps the set invariant */
      }
    }
  }
  return res;
}

/* synthesized feedback on the grid, self-contained for simulation */
struct Controller {
  GridSpec grid;
  InputGrid inputs;
  std::string kind;
  CellSet winning;
  std::vector<std::uint8_t> policy;
  std::vector<std::uint32_t> rank;
  std::uint64_t model_hash = 0;
  std::uint64_t controller_hash = 0;

  bool wins(std::size_t cell) const { return winning.test(cell); }
  bool is_hold(std::size_t cell) const { return policy[cell] == kPolicyHold; }

  double u_at(std::size_t cell) const {
    std::uint8_t p = policy[cell];
    if (p == kPolicyNone)
      throw std::logic_error("Controller: no command at a losing cell");
    if (p == kPolicyHold)
      throw std::logic_error("Controller: hold cells carry no command");
    return inputs.levels[p];
  }
};

inline Controller make_controller(const SymbolicModel& model, SynthesisResult&& r,
                                  std::string kind) {
  Controller c;
  c.grid = model.grid;
  c.inputs = model.inputs;
  c.kind = std::move(kind);
  c.winning = std::move(r.winning);
  c.policy = std::move(r.policy);
  c.rank = std::move(r.rank);
  return c;
}

}  // namespace freqsynth
