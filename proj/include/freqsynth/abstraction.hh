/*
 * abstraction.hh
 *
 * uniform grid over the 4-d working region, interval over-approximation of
 * one sampling period via a Metzler growth bound, and the packed symbolic
 * model: one 8-byte record per (cell, input) holding the per-dimension
 * index range of the successor rectangle (lo[0] = 0xff marks a pair whose
 * rectangle leaves the working region)
 */

#pragma once

#include <freqsynth/grid_model.hh>
#include <freqsynth/parallel.hh>

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <vector>

namespace freqsynth {

/* plain word-packed bit set over cell indices */
class CellSet {
 public:
  CellSet() = default;
  explicit CellSet(std::size_t n) : n_(n), w_((n + 63) / 64, 0) {}

  std::size_t size() const { return n_; }
  bool test(std::size_t i) const { return (w_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { w_[i >> 6] |= std::uint64_t(1) << (i & 63); }
  void reset(std::size_t i) { w_[i >> 6] &= ~(std::uint64_t(1) << (i & 63)); }
  bool any() const {
    for (auto w : w_)
      if (w)
        return true;
    return false;
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : w_)
      c += static_cast<std::size_t>(__builtin_popcountll(w));
    return c;
  }
  bool operator==(const CellSet& o) const { return n_ == o.n_ && w_ == o.w_; }
  bool operator!=(const CellSet& o) const { return !(*this == o); }

  std::vector<std::uint64_t>& words() { return w_; }
  const std::vector<std::uint64_t>& words() const { return w_; }

 private:
  std::size_t n_ = 0;
  std::vector<std::uint64_t> w_;
};

using Idx4 = std::array<std::size_t, 4>;

/* uniform grid: dimension d is split into counts[d] half-open cells
 * [lb + i eta, lb + (i+1) eta); the upper region boundary belongs to the
 * last cell */
struct GridSpec {
  std::array<double, 4> lb{-1.0, 0.0, 0.0, 0.0};
  std::array<double, 4> ub{0.1, 2.0, 2.0, 3.0};
  std::array<double, 4> eta{0.05, 0.05, 0.05, 0.05};
  std::array<std::size_t, 4> counts{0, 0, 0, 0};

  /* derive counts from the region and spacing; the spacing must tile the
   * region exactly */
  void finalize() {
    for (int d = 0; d < 4; d++) {
      if (!(eta[d] > 0.0) || !(ub[d] > lb[d]))
        throw std::invalid_argument("GridSpec: need ub > lb and eta > 0");
      double span = ub[d] - lb[d];
      double n = std::round(span / eta[d]);
      if (n < 1.0 || std::abs(n * eta[d] - span) > 1e-6 * std::max(1.0, span))
        throw std::invalid_argument("GridSpec: eta must tile the region exactly");
      if (n > 255.0)
        throw std::invalid_argument("GridSpec: more than 255 cells along one dimension");
      counts[d] = static_cast<std::size_t>(n);
    }
  }

  bool finalized() const { return counts[0] > 0; }

  std::size_t n_cells() const {
    return counts[0] * counts[1] * counts[2] * counts[3];
  }

  /* linearized with the last dimension fastest: predecessor scans iterate
   * that dimension innermost, so neighbouring probes stay close in memory */
  std::size_t compose(const Idx4& i) const {
    return i[3] + counts[3] * (i[2] + counts[2] * (i[1] + counts[1] * i[0]));
  }

  Idx4 decompose(std::size_t idx) const {
    Idx4 i;
    i[3] = idx % counts[3];
    idx /= counts[3];
    i[2] = idx % counts[2];
    idx /= counts[2];
    i[1] = idx % counts[1];
    i[0] = idx / counts[1];
    return i;
  }

  std::optional<std::size_t> cell_of(const StateVec& x) const {
    Idx4 i;
    const double v[4] = {x.f, x.g, x.l, x.p};
    for (int d = 0; d < 4; d++) {
      if (v[d] < lb[d] || v[d] > ub[d])
        return std::nullopt;
      std::size_t k = static_cast<std::size_t>((v[d] - lb[d]) / eta[d]);
      if (k >= counts[d])
        k = counts[d] - 1; /* upper boundary belongs to the last cell */
      i[d] = k;
    }
    return compose(i);
  }

  StateVec center(std::size_t idx) const {
    Idx4 i = decompose(idx);
    StateVec c;
    c.f = lb[0] + (static_cast<double>(i[0]) + 0.5) * eta[0];
    c.g = lb[1] + (static_cast<double>(i[1]) + 0.5) * eta[1];
    c.l = lb[2] + (static_cast<double>(i[2]) + 0.5) * eta[2];
    c.p = lb[3] + (static_cast<double>(i[3]) + 0.5) * eta[3];
    return c;
  }

  std::array<double, 4> cell_lo(std::size_t idx) const {
    Idx4 i = decompose(idx);
    return {lb[0] + static_cast<double>(i[0]) * eta[0], lb[1] + static_cast<double>(i[1]) * eta[1],
            lb[2] + static_cast<double>(i[2]) * eta[2], lb[3] + static_cast<double>(i[3]) * eta[3]};
  }

  std::array<double, 4> cell_hi(std::size_t idx) const {
    auto lo = cell_lo(idx);
    return {lo[0] + eta[0], lo[1] + eta[1], lo[2] + eta[2], lo[3] + eta[3]};
  }
};

/* cells along the frequency axis whose closed interval sits inside
 * [f_lo, f_hi]; the other dimensions are unconstrained */
inline CellSet cells_f_contained(const GridSpec& g, double f_lo, double f_hi) {
  CellSet s(g.n_cells());
  double tol = 1e-9 * g.eta[0];
  for (std::size_t i0 = 0; i0 < g.counts[0]; i0++) {
    double a = g.lb[0] + static_cast<double>(i0) * g.eta[0];
    double b = a + g.eta[0];
    if (a < f_lo - tol || b > f_hi + tol)
      continue;
    std::size_t base = g.compose({i0, 0, 0, 0});
    for (std::size_t k = 0; k < g.counts[1] * g.counts[2] * g.counts[3]; k++)
      s.set(base + k);
  }
  return s;
}

/* cells that intersect the open half-space f < f_thresh */
inline CellSet cells_f_below(const GridSpec& g, double f_thresh) {
  CellSet s(g.n_cells());
  for (std::size_t i0 = 0; i0 < g.counts[0]; i0++) {
    double a = g.lb[0] + static_cast<double>(i0) * g.eta[0];
    if (!(a < f_thresh - 1e-9 * g.eta[0]))
      continue;
    std::size_t base = g.compose({i0, 0, 0, 0});
    for (std::size_t k = 0; k < g.counts[1] * g.counts[2] * g.counts[3]; k++)
      s.set(base + k);
  }
  return s;
}

struct InputGrid {
  std::vector<double> levels;

  static InputGrid uniform(std::size_t n, double lo = 0.0, double hi = 1.0) {
    if (n < 1 || n > 253)
      throw std::invalid_argument("InputGrid: need between 1 and 253 levels");
    InputGrid g;
    g.levels.reserve(n);
    for (std::size_t j = 0; j < n; j++)
      g.levels.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1));
    return g;
  }

  void validate() const {
    if (levels.empty() || levels.size() > 253)
      throw std::invalid_argument("InputGrid: need between 1 and 253 levels");
    for (std::size_t j = 0; j < levels.size(); j++) {
      if (levels[j] < 0.0 || levels[j] > 1.0)
        throw std::invalid_argument("InputGrid: levels must lie in [0, 1]");
      if (j > 0 && !(levels[j] > levels[j - 1]))
        throw std::invalid_argument("InputGrid: levels must be strictly increasing");
    }
  }

  std::size_t size() const { return levels.size(); }
};

/* Metzler majorant of A: keep the diagonal, take magnitudes elsewhere */
inline Eigen::Matrix4d growth_matrix(const Eigen::Matrix4d& A) {
  Eigen::Matrix4d L;
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      L(i, j) = (i == j) ? A(i, j) : std::abs(A(i, j));
  return L;
}

/* componentwise bound on |x(tau) - z(tau)| for initial offsets up to eta/2
 * and disturbances within +/- w_half of the rectangle center:
 * r(tau) = e^{L tau} (eta/2) + (int_0^tau e^{L s} ds) |Bw| w_half */
inline Eigen::Vector4d growth_radius(const SystemMatrices& m, const std::array<double, 4>& eta,
                                     double tau, double w_half) {
  if (!(tau > 0.0) || w_half < 0.0)
    throw std::invalid_argument("growth_radius: need tau > 0 and w_half >= 0");
  Eigen::Matrix4d L = growth_matrix(m.A);
  Eigen::Matrix<double, 5, 5> M = Eigen::Matrix<double, 5, 5>::Zero();
  M.topLeftCorner<4, 4>() = L;
  M.topRightCorner<4, 1>() = m.Bw.cwiseAbs() * w_half;
  Eigen::Matrix<double, 5, 5> Em = (M * tau).exp();
  Eigen::Vector4d r0(eta[0] / 2.0, eta[1] / 2.0, eta[2] / 2.0, eta[3] / 2.0);
  return Em.topLeftCorner<4, 4>() * r0 + Em.topRightCorner<4, 1>();
}

struct PostRect {
  std::uint8_t lo[4];
  std::uint8_t hi[4];

  std::uint64_t volume() const {
    std::uint64_t v = 1;
    for (int d = 0; d < 4; d++)
      v *= static_cast<std::uint64_t>(hi[d] - lo[d] + 1);
    return v;
  }
  bool contains(const std::array<std::uint8_t, 4>& q) const {
    for (int d = 0; d < 4; d++)
      if (q[d] < lo[d] || q[d] > hi[d])
        return false;
    return true;
  }
};

constexpr std::size_t kRecBytes = 8;
constexpr std::uint8_t kBlockedMark = 0xff;

struct BuildOptions {
  std::size_t max_bytes = std::size_t(3500) * 1024 * 1024;
  std::size_t n_threads = 0; /* 0 = thread_budget() */
};

struct SymbolicModel {
  GridSpec grid;
  InputGrid inputs;
  double tau = 0.0;
  double w_lo = 0.0, w_hi = 0.0;
  Eigen::Matrix4d E;              /* one-period state map, tiny entries snapped to 0 */
  std::vector<Eigen::Vector4d> K; /* per-input constant drift (input + disturbance center) */
  Eigen::Vector4d radius;         /* rectangle half-widths */
  std::vector<std::uint8_t> trans;

  std::size_t n_pairs() const { return grid.n_cells() * inputs.size(); }

  const std::uint8_t* record(std::size_t cell, std::size_t j) const {
    return trans.data() + kRecBytes * (cell * inputs.size() + j);
  }

  bool blocked(std::size_t cell, std::size_t j) const { return record(cell, j)[0] == kBlockedMark; }

  PostRect rect(std::size_t cell, std::size_t j) const {
    PostRect r;
    std::memcpy(&r, record(cell, j), kRecBytes);
    return r;
  }

  /* nominal successor rectangle center for the cell center */
  Eigen::Vector4d post_center(std::size_t cell, std::size_t j) const {
    return E * grid.center(cell).vec() + K[j];
  }

  static std::size_t estimate_bytes(const GridSpec& g, const InputGrid& in) {
    return g.n_cells() * in.size() * kRecBytes;
  }
};

inline SymbolicModel build_symbolic_model(const GridSpec& grid_in, const InputGrid& inputs,
                                          const GridParams& prm, double tau, double w_lo,
                                          double w_hi, const BuildOptions& opt = {}) {
  GridSpec grid = grid_in;
  if (!grid.finalized())
    grid.finalize();
  inputs.validate();
  prm.validate();
  if (!(tau > 0.0))
    throw std::invalid_argument("build_symbolic_model: tau must be > 0");
  if (!(w_hi >= w_lo))
    throw std::invalid_argument("build_symbolic_model: need w_hi >= w_lo");
  std::size_t bytes = SymbolicModel::estimate_bytes(grid, inputs);
  if (bytes > opt.max_bytes)
    throw std::runtime_error("build_symbolic_model: transition table needs " +
                             std::to_string(bytes / (1024 * 1024)) + " MiB, budget is " +
                             std::to_string(opt.max_bytes / (1024 * 1024)) + " MiB");

  SystemMatrices m = build_matrices(prm);
  Discretization disc(m, tau);

  SymbolicModel model;
  model.grid = grid;
  model.inputs = inputs;
  model.tau = tau;
  model.w_lo = w_lo;
  model.w_hi = w_hi;
  model.E = disc.E;
  /* snap numerically-dead entries so stored models are reproducible */
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      if (std::abs(model.E(i, j)) < 1e-12)
        model.E(i, j) = 0.0;
  double w_c = 0.5 * (w_lo + w_hi);
  for (double u : inputs.levels)
    model.K.push_back(disc.S * (m.B * u + m.Bw * w_c));
  /* the small absolute pad absorbs round-off between the build-side and
   * simulation-side evaluations of the same affine map */
  model.radius = (growth_radius(m, grid.eta, tau, 0.5 * (w_hi - w_lo)).array() + 1e-9).matrix();

  std::size_t n_cells = grid.n_cells();
  std::size_t n_in = inputs.size();
  model.trans.assign(bytes, 0);

  const double r[4] = {model.radius[0], model.radius[1], model.radius[2], model.radius[3]};
  double inv_eta[4], slack[4];
  for (int d = 0; d < 4; d++) {
    inv_eta[d] = 1.0 / grid.eta[d];
    slack[d] = grid.eta[d] * 1e-9;
  }

  parallel_for(
      n_cells,
      [&](std::size_t lo_cell, std::size_t hi_cell) {
        for (std::size_t cell = lo_cell; cell < hi_cell; cell++) {
          Eigen::Vector4d Ec = model.E * grid.center(cell).vec();
          std::uint8_t* rec = model.trans.data() + kRecBytes * cell * n_in;
          for (std::size_t j = 0; j < n_in; j++, rec += kRecBytes) {
            bool ok = true;
            std::uint8_t lo8[4], hi8[4];
            for (int d = 0; d < 4; d++) {
              double z = Ec[d] + model.K[j][d];
              double zl = z - r[d];
              double zh = z + r[d];
              if (zl < grid.lb[d] - slack[d] || zh > grid.ub[d] + slack[d]) {
                ok = false;
                break;
              }
              double il = std::floor((zl - grid.lb[d]) * inv_eta[d]);
              double ih = std::floor((zh - grid.lb[d]) * inv_eta[d]);
              long li = static_cast<long>(il);
              long hi = static_cast<long>(ih);
              if (li < 0)
                li = 0;
              long top = static_cast<long>(grid.counts[d]) - 1;
              if (hi > top)
                hi = top;
              if (li > hi) { /* degenerate after clamping: give no guarantee */
                ok = false;
                break;
              }
              lo8[d] = static_cast<std::uint8_t>(li);
              hi8[d] = static_cast<std::uint8_t>(hi);
            }
            if (!ok) {
              rec[0] = kBlockedMark;
            } else {
              std::memcpy(rec, lo8, 4);
              std::memcpy(rec + 4, hi8, 4);
            }
          }
        }
      },
      opt.n_threads);

  return model;
}

}  // namespace freqsynth
