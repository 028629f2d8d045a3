/* tests for the reference EV controller: deadband shape, lag exactness,
 * saturation, and steady-state sweep behaviour */

#include <catch2/catch_amalgamated.hpp>

#include <freqsynth/ev_baseline.hh>

#include <random>

using namespace freqsynth;

TEST_CASE("deadband maps the band to zero and shifts the remainder") {
  CHECK(deadband(-0.30, 0.15) == Catch::Approx(-0.15));
  CHECK(deadband(0.20, 0.15) == Catch::Approx(0.05));
  CHECK(deadband(0.10, 0.15) == 0.0);
  CHECK(deadband(-0.15, 0.15) == 0.0); /* boundary counts as inside */
  CHECK(deadband(-0.40, 0.0) == Catch::Approx(-0.40));
  CHECK_THROWS_AS(deadband(0.1, -0.01), std::invalid_argument);
}

TEST_CASE("lag update is exact: one coarse step equals many fine steps") {
  GridParams prm;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> df(-1.0, 0.5);
  for (int trial = 0; trial < 20; trial++) {
    double d = df(rng);
    BaselineState coarse{0.3};
    BaselineState fine{0.3};
    coarse = baseline_step(coarse, d, prm, 0.01).first;
    for (int k = 0; k < 100; k++)
      fine = baseline_step(fine, d, prm, 1e-4).first;
    CHECK(coarse.lag == Catch::Approx(fine.lag).margin(1e-12));
  }
}

TEST_CASE("constant deviation drives the output to demand/D") {
  GridParams prm; /* deadband 0.15, R_ev 0.5, D 1 */
  BaselineState s;
  double u = 0.0;
  /* df = -0.5 -> demand -(-0.35)/0.5 = 0.7; lag converges to 0.7 */
  for (int k = 0; k < 1000; k++)
    std::tie(s, u) = baseline_step(s, -0.5, prm, 1e-3);
  CHECK(u == Catch::Approx(0.70).margin(1e-9));
  CHECK(s.lag == Catch::Approx(0.70).margin(1e-9));
}

TEST_CASE("large deviations saturate the output at 1") {
  GridParams prm;
  BaselineState s;
  double u = 0.0;
  for (int k = 0; k < 1000; k++)
    std::tie(s, u) = baseline_step(s, -2.0, prm, 1e-3);
  CHECK(u == 1.0);
  CHECK(s.lag > 1.0); /* internal state keeps the unsaturated value */
  CHECK_THROWS_AS(baseline_step(s, 0.0, prm, 0.0), std::invalid_argument);
}

TEST_CASE("deadband sweep matches closed-loop fixed points") {
  /* fixed point of f = (k u - w)/6 with u = clip(-deadband(f)/0.5),
   * solved independently by bisection and frozen here */
  const double uni[8] = {49.692308, 49.661538, 49.630769, 49.600000,
                         49.569231, 49.538462, 49.507692, 49.476923};
  const double bi[8] = {49.809524, 49.771429, 49.733333, 49.695238,
                        49.657143, 49.619048, 49.580952, 49.542857};
  auto hws = default_sweep_half_widths();
  REQUIRE(hws.size() == 8);

  GridParams uprm;
  uprm.k_ev = 4.8;
  auto urows = sweep_deadband(hws, "uni", uprm, 4.8);
  GridParams bprm;
  bprm.k_ev = 9.6;
  auto brows = sweep_deadband(hws, "bi", bprm, 4.8);
  REQUIRE(urows.size() == 8);
  REQUIRE(brows.size() == 8);

  for (int i = 0; i < 8; i++) {
    CHECK(urows[i].settled);
    CHECK(brows[i].settled);
    CHECK(urows[i].steady_f_hz == Catch::Approx(uni[i]).margin(2e-3));
    CHECK(brows[i].steady_f_hz == Catch::Approx(bi[i]).margin(2e-3));
    CHECK(urows[i].half_width_hz == Catch::Approx(0.05 * i));
    CHECK(urows[i].mode == "uni");
    CHECK(brows[i].mode == "bi");
  }
  /* wider deadbands never raise the steady frequency */
  for (int i = 1; i < 8; i++) {
    CHECK(urows[i].steady_f_hz <= urows[i - 1].steady_f_hz + 1e-9);
    CHECK(brows[i].steady_f_hz <= brows[i - 1].steady_f_hz + 1e-9);
  }
  /* doubled authority holds frequency at least as high everywhere */
  for (int i = 0; i < 8; i++)
    CHECK(brows[i].steady_f_hz >= urows[i].steady_f_hz - 1e-9);
}

TEST_CASE("too-short horizons are reported as unsettled") {
  GridParams prm;
  auto rows = sweep_deadband({0.0}, "bi", prm, 4.8, /*horizon=*/1.0);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].settled);
}
