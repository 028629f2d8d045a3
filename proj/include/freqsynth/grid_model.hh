/*
 * grid_model.hh
 *
 * continuous-time LTI model of the simplified GB grid with aggregated EV
 * injection and power-loss disturbance: matrix construction, exact/rk4
 * stepping, steady-state analysis, sampled-data closed-loop simulation
 */

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqsynth {

/* physical and EV-aggregation constants; frequency-like states are kept in Hz
 * so the working region, containment limit and target intervals compare
 * directly against grid-code numbers */
struct GridParams {
  double r_eq_inv = -5.0;  /* 1/R_eq, dimensionless governor droop gain */
  double t_g = 2.5;        /* governor time constant [s] */
  double t_t = 0.5;        /* turbine time constant [s] */
  double t_1 = 2.0;        /* lead-lag zero time constant [s] */
  double t_2 = 12.0;       /* lead-lag pole time constant [s] */
  double d = 1.0;          /* load damping, dimensionless */
  double h = 4.0;          /* inertia constant [s] */
  double k_ev = 9.6;       /* aggregate EV gain, Hz-scaled full-participation power */
  double f_nom = 50.0;     /* nominal frequency [Hz] */
  double t_ev = 0.035;     /* EV response lag [s] */
  double r_ev = 0.5;       /* EV droop, dimensionless */
  double deadband_hz = 0.15; /* EV deadband half-width [Hz] */
  /* metadata only, recorded in reports; dynamics use k_ev directly */
  double p_av_mw = 0.056;  /* available power per vehicle [MW] */
  double n_ev = 25000.0;   /* fleet size */
  double s_base_mw = 20833.3333333333; /* system base [MW]; 2000 MW -> w = 4.8 */

  void validate() const {
    auto pos = [](double v, const char* name) {
      if (!(v > 0.0))
        throw std::invalid_argument(std::string("GridParams: ") + name + " must be > 0");
    };
    pos(t_g, "t_g"); pos(t_t, "t_t"); pos(t_1, "t_1"); pos(t_2, "t_2");
    pos(t_ev, "t_ev"); pos(h, "h"); pos(d, "d"); pos(f_nom, "f_nom");
    if (k_ev < 0.0)
      throw std::invalid_argument("GridParams: k_ev must be >= 0");
    if (deadband_hz < 0.0)
      throw std::invalid_argument("GridParams: deadband_hz must be >= 0");
    if (n_ev < 0.0)
      throw std::invalid_argument("GridParams: n_ev must be >= 0");
  }

  /* Hz-scaled disturbance magnitude for a loss given in MW */
  double loss_mw_to_w(double loss_mw) const { return loss_mw / s_base_mw * f_nom; }
};

/* deviation state [f,g,l,p]: frequency deviation from nominal, governor
 * state, lead-lag state, turbine power state (all Hz-scaled) */
struct StateVec {
  double f = 0.0;
  double g = 0.0;
  double l = 0.0;
  double p = 0.0;

  double& operator[](int i) { return (&f)[i]; }
  double operator[](int i) const { return (&f)[i]; }

  Eigen::Vector4d vec() const { return Eigen::Vector4d(f, g, l, p); }
  static StateVec from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }

  bool finite() const {
    return std::isfinite(f) && std::isfinite(g) && std::isfinite(l) && std::isfinite(p);
  }
};

inline double inf_norm(const StateVec& a, const StateVec& b) {
  double m = 0.0;
  for (int i = 0; i < 4; i++)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/* xdot = A x + B u + Bw w with u in [0,1] (EV participation) and w >= 0
 * (lost infeed); B and Bw act on the f-row only */
struct SystemMatrices {
  Eigen::Matrix4d A;
  Eigen::Vector4d B;
  Eigen::Vector4d Bw;
};

inline SystemMatrices build_matrices(const GridParams& prm) {
  prm.validate();
  SystemMatrices m;
  m.A.setZero();
  m.A(0, 0) = -prm.d / (2.0 * prm.h);
  m.A(0, 3) = 1.0 / (2.0 * prm.h);
  m.A(1, 0) = prm.r_eq_inv / prm.t_g;
  m.A(1, 1) = -1.0 / prm.t_g;
  m.A(2, 0) = prm.t_1 * prm.r_eq_inv / (prm.t_2 * prm.t_g);
  m.A(2, 1) = (prm.t_g - prm.t_1) / (prm.t_g * prm.t_2);
  m.A(2, 2) = -1.0 / prm.t_2;
  m.A(3, 2) = 1.0 / prm.t_t;
  m.A(3, 3) = -1.0 / prm.t_t;
  m.B.setZero();
  m.B(0) = prm.k_ev / (2.0 * prm.h);
  m.Bw.setZero();
  m.Bw(0) = -1.0 / (2.0 * prm.h);
  return m;
}

/* exact zero-order-hold discretization: x+ = E x + S (B u + Bw w) with
 * E = e^{A tau} and S = int_0^tau e^{A s} ds, both from one augmented
 * matrix exponential (valid for singular A as well) */
struct Discretization {
  Eigen::Matrix4d E;
  Eigen::Matrix4d S;
  double tau = 0.0;

  Discretization() = default;
  Discretization(const SystemMatrices& m, double tau_s) : tau(tau_s) {
    if (!(tau_s > 0.0))
      throw std::invalid_argument("Discretization: tau must be > 0");
    Eigen::Matrix<double, 8, 8> aug = Eigen::Matrix<double, 8, 8>::Zero();
    aug.topLeftCorner<4, 4>() = m.A;
    aug.topRightCorner<4, 4>() = Eigen::Matrix4d::Identity();
    Eigen::Matrix<double, 8, 8> ex = (aug * tau_s).exp();
    E = ex.topLeftCorner<4, 4>();
    S = ex.topRightCorner<4, 4>();
  }

  StateVec step(const StateVec& x, const SystemMatrices& m, double u, double w) const {
    Eigen::Vector4d nx = E * x.vec() + S * (m.B * u + m.Bw * w);
    return StateVec::from(nx);
  }
};

enum class StepMethod : std::uint8_t { exact, rk4 };

/* solution of xdot = A x + B u + Bw w at time tau, inputs held constant */
inline StateVec step(const StateVec& x, const SystemMatrices& m, double u, double w,
                     double tau, StepMethod method = StepMethod::exact) {
  if (!(tau > 0.0))
    throw std::invalid_argument("step: tau must be > 0");
  if (u < 0.0 || u > 1.0)
    throw std::invalid_argument("step: u must be in [0,1]");
  if (method == StepMethod::exact)
    return Discretization(m, tau).step(x, m, u, w);
  /* fixed-step rk4, substep <= tau/10 */
  int n = 10;
  double h = tau / n;
  Eigen::Vector4d c = m.B * u + m.Bw * w;
  Eigen::Vector4d y = x.vec();
  auto fdot = [&](const Eigen::Vector4d& v) { return (m.A * v + c).eval(); };
  for (int k = 0; k < n; k++) {
    Eigen::Vector4d k1 = fdot(y);
    Eigen::Vector4d k2 = fdot(y + 0.5 * h * k1);
    Eigen::Vector4d k3 = fdot(y + 0.5 * h * k2);
    Eigen::Vector4d k4 = fdot(y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return StateVec::from(y);
}

/* equilibrium x* solving A x* = -(B u + Bw w) */
inline StateVec steady_state(const SystemMatrices& m, double u, double w) {
  Eigen::FullPivLU<Eigen::Matrix4d> lu(m.A);
  if (!lu.isInvertible())
    throw std::runtime_error("steady_state: A is singular");
  Eigen::Vector4d x = lu.solve(-(m.B * u + m.Bw * w));
  return StateVec::from(x);
}

/* supervisor phase recorded per trace sample; none for open-loop and
 * baseline runs */
enum class Phase : std::uint8_t { none, c1, c2, fixed };

inline const char* phase_name(Phase ph) {
  switch (ph) {
    case Phase::c1: return "c1";
    case Phase::c2: return "c2";
    case Phase::fixed: return "fixed";
    default: return "none";
  }
}

inline Phase phase_from_name(const std::string& s) {
  if (s == "c1") return Phase::c1;
  if (s == "c2") return Phase::c2;
  if (s == "fixed") return Phase::fixed;
  if (s == "none") return Phase::none;
  throw std::invalid_argument("unknown phase name: " + s);
}

struct TraceSample {
  double t = 0.0;
  double f = 0.0;  /* Hz deviation; absolute frequency is f + f_nom */
  double g = 0.0;
  double l = 0.0;
  double p = 0.0;
  double u = 0.0;
  double w = 0.0;
  Phase phase = Phase::none;

  StateVec state() const { return {f, g, l, p}; }
};

struct Trace {
  double tau = 0.0;
  double f_nom = 50.0;
  std::vector<TraceSample> samples;

  std::size_t size() const { return samples.size(); }
  double f_abs(std::size_t i) const { return samples[i].f + f_nom; }
  double min_f_abs() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : samples)
      m = std::min(m, s.f + f_nom);
    return m;
  }
};

/* sampled-data closed loop: the controller is evaluated at each sampling
 * instant and its output held constant over the following interval; the
 * trace records the state seen by the controller and the command it issued */
inline Trace simulate(const StateVec& x0, const SystemMatrices& m, const GridParams& prm,
                      const std::function<double(const StateVec&, double)>& controller,
                      const std::function<double(double)>& w_profile,
                      double horizon, double tau) {
  if (!(tau > 0.0) || horizon < tau)
    throw std::invalid_argument("simulate: need horizon >= tau > 0");
  Discretization disc(m, tau);
  std::size_t n = static_cast<std::size_t>(std::floor(horizon / tau));
  Trace tr;
  tr.tau = tau;
  tr.f_nom = prm.f_nom;
  tr.samples.reserve(n + 1);
  StateVec x = x0;
  for (std::size_t k = 0; k <= n; k++) {
    double t = k * tau;
    double w = w_profile(t);
    double u = controller(x, t);
    if (!(u >= 0.0 && u <= 1.0))
      throw std::runtime_error("simulate: controller output outside [0,1] at t=" +
                               std::to_string(t));
    tr.samples.push_back({t, x.f, x.g, x.l, x.p, u, w, Phase::none});
    if (k < n)
      x = disc.step(x, m, u, w);
  }
  return tr;
}

}  // namespace freqsynth
