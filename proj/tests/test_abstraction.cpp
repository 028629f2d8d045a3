/* grid geometry, growth bound, and symbolic model soundness */

#include <catch2/catch_amalgamated.hpp>

#include <freqsynth/abstraction.hh>

#include <random>

using namespace freqsynth;

namespace {

GridSpec default_grid() {
  GridSpec g;
  g.finalize();
  return g;
}

GridSpec coarse_grid() {
  GridSpec g;
  g.eta = {0.1, 0.2, 0.2, 0.3};
  g.finalize();
  return g;
}

GridSpec quick_grid() { /* default region, coarser tail dimensions */
  GridSpec g;
  g.eta = {0.05, 0.1, 0.1, 0.1};
  g.finalize();
  return g;
}

}  // namespace

TEST_CASE("grid indexing round-trips and respects boundaries") {
  GridSpec g = default_grid();
  CHECK(g.counts == std::array<std::size_t, 4>{22, 40, 40, 60});
  CHECK(g.n_cells() == 2112000);

  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, g.n_cells() - 1);
  for (int t = 0; t < 200; t++) {
    std::size_t idx = pick(rng);
    CHECK(g.compose(g.decompose(idx)) == idx);
    auto back = g.cell_of(g.center(idx));
    REQUIRE(back.has_value());
    CHECK(*back == idx);
  }

  /* cells are half-open below, and the top boundary joins the last cell */
  StateVec x{-1.0, 0.0, 0.0, 0.0};
  CHECK(g.cell_of(x).value() == 0);
  StateVec top{0.1, 2.0, 2.0, 3.0};
  CHECK(g.cell_of(top).value() == g.n_cells() - 1);
  StateVec edge{-0.78, 0.0, 0.0, 0.0};
  CHECK(g.decompose(g.cell_of(edge).value())[0] == 4);
  CHECK_FALSE(g.cell_of(StateVec{-1.01, 0.0, 0.0, 0.0}).has_value());
  CHECK_FALSE(g.cell_of(StateVec{0.0, 2.1, 0.0, 0.0}).has_value());
  CHECK_FALSE(g.cell_of(StateVec{0.0, 0.0, -0.01, 0.0}).has_value());
  CHECK_FALSE(g.cell_of(StateVec{0.0, 0.0, 0.0, 3.2}).has_value());

  auto lo = g.cell_lo(0);
  auto hi = g.cell_hi(0);
  CHECK(lo[0] == Catch::Approx(-1.0));
  CHECK(hi[0] == Catch::Approx(-0.95));
}

TEST_CASE("grid validation rejects bad spacings") {
  GridSpec g;
  g.eta[0] = 0.07; /* does not tile 1.1 */
  CHECK_THROWS_AS(g.finalize(), std::invalid_argument);
  GridSpec tiny;
  tiny.eta = {0.004, 0.05, 0.05, 0.05}; /* 275 cells along f */
  CHECK_THROWS_AS(tiny.finalize(), std::invalid_argument);
  GridSpec inv;
  inv.ub[1] = -1.0;
  CHECK_THROWS_AS(inv.finalize(), std::invalid_argument);
}

TEST_CASE("frequency slabs select whole and partial cells correctly") {
  GridSpec g = default_grid();
  /* [49.70, 50.0] relative: cells 14..19 along f */
  CellSet target = cells_f_contained(g, -0.30, 0.0);
  CHECK(target.count() == 6u * 40 * 40 * 60);
  CHECK(target.test(g.compose({14, 0, 0, 0})));
  CHECK(target.test(g.compose({19, 39, 39, 59})));
  CHECK_FALSE(target.test(g.compose({13, 0, 0, 0})));
  CHECK_FALSE(target.test(g.compose({20, 0, 0, 0})));

  CellSet avoid = cells_f_below(g, -0.8);
  CHECK(avoid.count() == 4u * 40 * 40 * 60);
  CHECK(avoid.test(g.compose({3, 0, 0, 0})));
  CHECK_FALSE(avoid.test(g.compose({4, 0, 0, 0}))); /* [-0.80,-0.75) touches only the edge */
}

TEST_CASE("input grid construction and validation") {
  InputGrid in = InputGrid::uniform(21);
  REQUIRE(in.size() == 21);
  CHECK(in.levels.front() == 0.0);
  CHECK(in.levels.back() == 1.0);
  CHECK(in.levels[9] == Catch::Approx(0.45));
  in.validate();

  CHECK_THROWS_AS(InputGrid::uniform(0), std::invalid_argument);
  InputGrid bad;
  bad.levels = {0.0, 0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  InputGrid oob;
  oob.levels = {0.0, 1.5};
  CHECK_THROWS_AS(oob.validate(), std::invalid_argument);
}

TEST_CASE("growth matrix keeps the diagonal and rectifies couplings") {
  SystemMatrices m = build_matrices(GridParams{});
  Eigen::Matrix4d L = growth_matrix(m.A);
  CHECK(L(0, 0) == Catch::Approx(-0.125));
  CHECK(L(0, 1) == 0.0);
  CHECK(L(0, 3) == Catch::Approx(0.125));
  CHECK(L(1, 0) == Catch::Approx(2.0));
  CHECK(L(1, 1) == Catch::Approx(-0.4));
  CHECK(L(2, 0) == Catch::Approx(1.0 / 3.0));
  CHECK(L(2, 1) == Catch::Approx(1.0 / 60.0));
  CHECK(L(2, 2) == Catch::Approx(-1.0 / 12.0));
  CHECK(L(3, 2) == Catch::Approx(2.0));
  CHECK(L(3, 3) == Catch::Approx(-2.0));
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      if (i != j)
        CHECK(L(i, j) >= 0.0);
}

TEST_CASE("the Metzler majorant dominates the true one-period map") {
  SystemMatrices m = build_matrices(GridParams{});
  Eigen::Matrix4d E = Eigen::Matrix4d(m.A * 0.25).exp();
  Eigen::Matrix4d G = Eigen::Matrix4d(growth_matrix(m.A) * 0.25).exp();
  for (int i = 0; i < 4; i++)
    for (int j = 0; j < 4; j++)
      CHECK(G(i, j) >= std::abs(E(i, j)) - 1e-12);
}

TEST_CASE("growth radius matches the frozen reference values") {
  SystemMatrices m = build_matrices(GridParams{});
  std::array<double, 4> eta{0.05, 0.05, 0.05, 0.05};
  double w_half = 0.5 * (4.8 - 4.56);

  Eigen::Vector4d r = growth_radius(m, eta, 0.25, w_half);
  CHECK(r[0] == Catch::Approx(0.028696015).margin(1e-6));
  CHECK(r[1] == Catch::Approx(0.035414320).margin(1e-6));
  CHECK(r[2] == Catch::Approx(0.026824343).margin(1e-6));
  CHECK(r[3] == Catch::Approx(0.025378468).margin(1e-6));

  Eigen::Vector4d rq = growth_radius(m, {0.05, 0.1, 0.1, 0.1}, 0.25, w_half);
  CHECK(rq[0] == Catch::Approx(0.029464267).margin(1e-6));
  CHECK(rq[1] == Catch::Approx(0.058222132).margin(1e-6));
  CHECK(rq[2] == Catch::Approx(0.051439217).margin(1e-6));
  CHECK(rq[3] == Catch::Approx(0.050294358).margin(1e-6));

  /* longer periods only widen the bound at these parameters */
  Eigen::Vector4d r2 = growth_radius(m, eta, 0.5, w_half);
  for (int d = 0; d < 4; d++)
    CHECK(r2[d] >= r[d]);

  /* without dynamics or disturbance the radius is the initial half-cell */
  SystemMatrices z;
  z.A.setZero();
  z.B.setZero();
  z.Bw.setZero();
  Eigen::Vector4d r0 = growth_radius(z, eta, 0.25, 0.0);
  for (int d = 0; d < 4; d++)
    CHECK(r0[d] == Catch::Approx(0.025).margin(1e-12));

  CHECK_THROWS_AS(growth_radius(m, eta, 0.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(growth_radius(m, eta, 0.25, -0.1), std::invalid_argument);
}

TEST_CASE("symbolic model: sampled successors always land in the stored rectangle") {
  GridSpec g = coarse_grid();
  InputGrid in = InputGrid::uniform(21);
  GridParams prm;
  double w_lo = 0.95 * 4.8, w_hi = 4.8;
  SymbolicModel model = build_symbolic_model(g, in, prm, 0.25, w_lo, w_hi);

  SystemMatrices m = build_matrices(prm);
  Discretization disc(m, 0.25);

  std::mt19937_64 rng(31337);
  std::uniform_int_distribution<std::size_t> cell_pick(0, g.n_cells() - 1);
  std::uniform_int_distribution<std::size_t> in_pick(0, in.size() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  int tested = 0;
  while (tested < 10000) {
    std::size_t cell = cell_pick(rng);
    std::size_t j = in_pick(rng);
    if (model.blocked(cell, j))
      continue;
    auto lo = g.cell_lo(cell);
    StateVec x;
    x.f = lo[0] + unit(rng) * g.eta[0];
    x.g = lo[1] + unit(rng) * g.eta[1];
    x.l = lo[2] + unit(rng) * g.eta[2];
    x.p = lo[3] + unit(rng) * g.eta[3];
    double w = w_lo + unit(rng) * (w_hi - w_lo);
    StateVec xn = disc.step(x, m, in.levels[j], w);
    auto q = g.cell_of(xn);
    REQUIRE(q.has_value());
    PostRect rect = model.rect(cell, j);
    Idx4 qi = g.decompose(*q);
    for (int d = 0; d < 4; d++) {
      CHECK(qi[d] >= rect.lo[d]);
      CHECK(qi[d] <= rect.hi[d]);
    }
    tested++;
  }
}

TEST_CASE("cell centers map into the interior of their own rectangle") {
  GridSpec g = coarse_grid();
  InputGrid in = InputGrid::uniform(11);
  GridParams prm;
  SymbolicModel model = build_symbolic_model(g, in, prm, 0.25, 0.95 * 4.8, 4.8);
  SystemMatrices m = build_matrices(prm);
  Discretization disc(m, 0.25);
  double w_c = 0.5 * (0.95 * 4.8 + 4.8);

  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> cell_pick(0, g.n_cells() - 1);
  std::uniform_int_distribution<std::size_t> in_pick(0, in.size() - 1);
  int tested = 0;
  while (tested < 500) {
    std::size_t cell = cell_pick(rng);
    std::size_t j = in_pick(rng);
    if (model.blocked(cell, j))
      continue;
    StateVec xn = disc.step(g.center(cell), m, in.levels[j], w_c);
    auto q = g.cell_of(xn);
    REQUIRE(q.has_value());
    CHECK(model.rect(cell, j).contains({static_cast<std::uint8_t>(g.decompose(*q)[0]),
                                        static_cast<std::uint8_t>(g.decompose(*q)[1]),
                                        static_cast<std::uint8_t>(g.decompose(*q)[2]),
                                        static_cast<std::uint8_t>(g.decompose(*q)[3])}));
    tested++;
  }
}

TEST_CASE("an in-region equilibrium cell stays near itself") {
  GridSpec g = quick_grid();
  InputGrid in = InputGrid::uniform(21);
  GridParams prm; /* k_ev 9.6 */
  SymbolicModel model = build_symbolic_model(g, in, prm, 0.25, 0.95 * 4.8, 4.8);

  /* steady state under u = 0.45 at the disturbance-interval center */
  double w_c = 0.5 * (0.95 * 4.8 + 4.8);
  SystemMatrices m = build_matrices(prm);
  StateVec xs = steady_state(m, 0.45, w_c);
  auto eq = g.cell_of(xs);
  REQUIRE(eq.has_value());

  std::size_t j45 = 9; /* u = 0.45 */
  REQUIRE(in.levels[j45] == Catch::Approx(0.45));
  REQUIRE_FALSE(model.blocked(*eq, j45));
  PostRect rect = model.rect(*eq, j45);
  Idx4 ei = g.decompose(*eq);
  CHECK(rect.contains(
      {static_cast<std::uint8_t>(ei[0]), static_cast<std::uint8_t>(ei[1]),
       static_cast<std::uint8_t>(ei[2]), static_cast<std::uint8_t>(ei[3])}));
  for (int d = 0; d < 4; d++)
    CHECK(rect.hi[d] - rect.lo[d] <= 2); /* each width is under two spacings */
  CHECK(rect.volume() <= 81);
}

TEST_CASE("rectangles that would leave the region are blocked") {
  GridSpec g = quick_grid();
  InputGrid in = InputGrid::uniform(21);
  SymbolicModel model = build_symbolic_model(g, in, GridParams{}, 0.25, 0.95 * 4.8, 4.8);

  /* positive frequency drives the governor output down through g = 0;
   * the input does not enter that dimension, so every level is blocked */
  std::size_t corner = g.compose({21, 0, 0, 0});
  for (std::size_t j = 0; j < in.size(); j++)
    CHECK(model.blocked(corner, j));

  /* an interior cell keeps at least one admissible input */
  std::size_t inner = g.cell_of(StateVec{-0.3, 0.5, 0.5, 0.5}).value();
  bool some_open = false;
  for (std::size_t j = 0; j < in.size(); j++)
    some_open = some_open || !model.blocked(inner, j);
  CHECK(some_open);
}

TEST_CASE("halving the spacing shrinks every successor rectangle") {
  GridSpec gc = coarse_grid();
  GridSpec gf;
  gf.eta = {0.05, 0.1, 0.1, 0.15};
  gf.finalize();
  InputGrid in = InputGrid::uniform(5);
  GridParams prm;
  SymbolicModel mc = build_symbolic_model(gc, in, prm, 0.25, 0.95 * 4.8, 4.8);
  SymbolicModel mf = build_symbolic_model(gf, in, prm, 0.25, 0.95 * 4.8, 4.8);

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> in_pick(0, in.size() - 1);
  for (int t = 0; t < 2000; t++) {
    StateVec x;
    x.f = gc.lb[0] + unit(rng) * (gc.ub[0] - gc.lb[0]);
    x.g = gc.lb[1] + unit(rng) * (gc.ub[1] - gc.lb[1]);
    x.l = gc.lb[2] + unit(rng) * (gc.ub[2] - gc.lb[2]);
    x.p = gc.lb[3] + unit(rng) * (gc.ub[3] - gc.lb[3]);
    std::size_t j = in_pick(rng);
    std::size_t cc = gc.cell_of(x).value();
    std::size_t cf = gf.cell_of(x).value();
    Eigen::Vector4d zc = mc.post_center(cc, j);
    Eigen::Vector4d zf = mf.post_center(cf, j);
    for (int d = 0; d < 4; d++) {
      CHECK(zf[d] - mf.radius[d] >= zc[d] - mc.radius[d] - 1e-9);
      CHECK(zf[d] + mf.radius[d] <= zc[d] + mc.radius[d] + 1e-9);
    }
  }
}

TEST_CASE("builds are identical whatever the thread split") {
  GridSpec g = coarse_grid();
  InputGrid in = InputGrid::uniform(7);
  GridParams prm;
  BuildOptions one;
  one.n_threads = 1;
  BuildOptions three;
  three.n_threads = 3;
  SymbolicModel a = build_symbolic_model(g, in, prm, 0.25, 0.95 * 4.8, 4.8, one);
  SymbolicModel b = build_symbolic_model(g, in, prm, 0.25, 0.95 * 4.8, 4.8, three);
  REQUIRE(a.trans.size() == b.trans.size());
  CHECK(std::memcmp(a.trans.data(), b.trans.data(), a.trans.size()) == 0);
}

TEST_CASE("the builder refuses tables beyond the memory budget") {
  GridSpec g = default_grid();
  InputGrid in = InputGrid::uniform(21);
  CHECK(SymbolicModel::estimate_bytes(g, in) == 2112000u * 21 * 8);
  BuildOptions opt;
  opt.max_bytes = 1024 * 1024;
  CHECK_THROWS_AS(build_symbolic_model(g, in, GridParams{}, 0.25, 4.56, 4.8, opt),
                  std::runtime_error);
}

TEST_CASE("cell set basics") {
  CellSet s(130);
  CHECK(s.size() == 130);
  CHECK_FALSE(s.any());
  s.set(0);
  s.set(64);
  s.set(129);
  CHECK(s.count() == 3);
  CHECK(s.test(64));
  s.reset(64);
  CHECK_FALSE(s.test(64));
  CHECK(s.count() == 2);
  CellSet t(130);
  t.set(0);
  t.set(129);
  CHECK(s == t);
  t.set(5);
  CHECK(s != t);
}
