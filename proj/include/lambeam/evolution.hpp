#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "lambeam/assembly.hpp"
#include "lambeam/errors.hpp"

namespace lambeam {

struct TimeGrid {
  double T = 1.0;
  int nt = 1000;

  void validate() const {
    if (!(T > 0.0)) throw ValidationError("TimeGrid: T must be > 0");
    if (nt < 1) throw ValidationError("TimeGrid: nt must be >= 1");
  }
  double dt() const { return T / nt; }
  double time(int j) const { return j * dt(); }
};

enum class TraceKind { position, velocity };

/// Boundary time series at x=L for the three channels, sampled at t_0..t_nt.
struct TraceSignal {
  Eigen::VectorXd w, xi, s;
  TraceKind kind = TraceKind::position;

  int samples() const { return static_cast<int>(w.size()); }
};

struct ControlTriple {
  Eigen::VectorXd u1, u2, u3;

  static ControlTriple zero(int samples) {
    return {Eigen::VectorXd::Zero(samples), Eigen::VectorXd::Zero(samples),
            Eigen::VectorXd::Zero(samples)};
  }
  int samples() const { return static_cast<int>(u1.size()); }
  void check(const TimeGrid& tg) const {
    if (u1.size() != tg.nt + 1 || u2.size() != tg.nt + 1 || u3.size() != tg.nt + 1)
      throw ValidationError("ControlTriple: length does not match the time grid");
    if (!u1.allFinite() || !u2.allFinite() || !u3.allFinite())
      throw ValidationError("ControlTriple: controls must be finite");
  }
};

/// Nodal load added to the right-hand side M q'' + D q' + K q = B u + f(t).
using Forcing = std::function<Eigen::VectorXd(double)>;

struct Trajectory {
  TimeGrid tg;
  std::vector<State> states;  // t_0..t_nt
  Eigen::VectorXd energy;     // E(t_j)
  TraceSignal positions, velocities;

  const State& initial() const { return states.front(); }
  const State& final_state() const { return states.back(); }
};

/// One implicit-midpoint step of M v' = -K q - D v + B u + f, q' = v.
/// Unconditionally stable, time-symmetric, and exactly energy-conserving for
/// the homogeneous conservative system; with damping the discrete energy drops
/// by dt * v_mid' D v_mid per step. dt may be negative (backward flow).
class MidpointStepper {
 public:
  MidpointStepper(const DiscreteSystem& sys, double dt) : sys_(sys), dt_(dt) {
    Eigen::MatrixXd S = sys.M() + (dt * dt / 4.0) * sys.K();
    if (sys.params().beta != 0.0) S += (dt / 2.0) * sys.D_damp();
    llt_.compute(S);
    if (llt_.info() != Eigen::Success)
      throw InternalError("MidpointStepper: step matrix failed Cholesky (SPD by construction)");
  }

  double dt() const { return dt_; }

  /// Advance by dt using midpoint control values u_mid and optional midpoint
  /// forcing f_mid.
  void step(State& x, const Eigen::Vector3d& u_mid,
            const Eigen::VectorXd* f_mid = nullptr) const {
    Eigen::VectorXd rhs = sys_.M() * x.v - (dt_ / 2.0) * (sys_.K() * x.q);
    if (u_mid.squaredNorm() != 0.0) rhs += (dt_ / 2.0) * (sys_.B() * u_mid);
    if (f_mid) rhs += (dt_ / 2.0) * (*f_mid);
    const Eigen::VectorXd v_mid = llt_.solve(rhs);
    x.q += dt_ * v_mid;
    x.v = 2.0 * v_mid - x.v;
  }

 private:
  const DiscreteSystem& sys_;
  double dt_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

namespace detail {

inline Trajectory make_trajectory(const DiscreteSystem& sys, const TimeGrid& tg) {
  Trajectory tr;
  tr.tg = tg;
  tr.states.resize(tg.nt + 1, State::zero(sys.dofs()));
  tr.energy.resize(tg.nt + 1);
  for (TraceSignal* ts : {&tr.positions, &tr.velocities}) {
    ts->w.resize(tg.nt + 1);
    ts->xi.resize(tg.nt + 1);
    ts->s.resize(tg.nt + 1);
  }
  tr.positions.kind = TraceKind::position;
  tr.velocities.kind = TraceKind::velocity;
  return tr;
}

inline void record(Trajectory& tr, const DiscreteSystem& sys, int j, const State& x) {
  tr.states[j] = x;
  tr.energy(j) = sys.energy(x);
  const Eigen::Vector3d p = sys.boundary_positions(x);
  const Eigen::Vector3d v = sys.boundary_velocities(x);
  tr.positions.w(j) = p(0);
  tr.positions.xi(j) = p(1);
  tr.positions.s(j) = p(2);
  tr.velocities.w(j) = v(0);
  tr.velocities.xi(j) = v(1);
  tr.velocities.s(j) = v(2);
}

}  // namespace detail

/// Controlled/forced solve of M q'' + K q = B u(t) + f(t) from U0. Controls are
/// sampled on the grid nodes and averaged to half-steps, which preserves both
/// the second-order accuracy and the exact discrete duality identity.
inline Trajectory solve_controlled(const DiscreteSystem& sys, const State& U0,
                                   const ControlTriple& controls, const Forcing& sources,
                                   const TimeGrid& tg) {
  sys.params().require_conservative("solve_controlled");
  tg.validate();
  controls.check(tg);
  Trajectory tr = detail::make_trajectory(sys, tg);
  MidpointStepper stepper(sys, tg.dt());
  State x = U0;
  detail::record(tr, sys, 0, x);
  Eigen::VectorXd f_mid;
  for (int j = 0; j < tg.nt; ++j) {
    const Eigen::Vector3d u_mid(0.5 * (controls.u1(j) + controls.u1(j + 1)),
                                0.5 * (controls.u2(j) + controls.u2(j + 1)),
                                0.5 * (controls.u3(j) + controls.u3(j + 1)));
    const Eigen::VectorXd* fp = nullptr;
    if (sources) {
      f_mid = sources(tg.time(j) + 0.5 * tg.dt());
      if (f_mid.size() != sys.dofs())
        throw ValidationError("solve_controlled: forcing dimension mismatch");
      fp = &f_mid;
    }
    stepper.step(x, u_mid, fp);
    detail::record(tr, sys, j + 1, x);
  }
  return tr;
}

/// Homogeneous group trajectory; energy is constant along it.
inline Trajectory solve_homogeneous(const DiscreteSystem& sys, const State& U0,
                                    const TimeGrid& tg) {
  sys.params().require_conservative("solve_homogeneous");
  tg.validate();
  Trajectory tr = detail::make_trajectory(sys, tg);
  MidpointStepper stepper(sys, tg.dt());
  State x = U0;
  detail::record(tr, sys, 0, x);
  for (int j = 0; j < tg.nt; ++j) {
    stepper.step(x, Eigen::Vector3d::Zero());
    detail::record(tr, sys, j + 1, x);
  }
  return tr;
}

/// Backward flow of the same operator from data WT at t=T, indexed forward in
/// t. The adjoint system has identical equations and homogeneous boundary rows
/// because the generator is skew-adjoint; the backward midpoint step is the
/// exact inverse of the forward one.
inline Trajectory solve_adjoint(const DiscreteSystem& sys, const State& WT, const TimeGrid& tg) {
  sys.params().require_conservative("solve_adjoint");
  tg.validate();
  Trajectory tr = detail::make_trajectory(sys, tg);
  MidpointStepper stepper(sys, -tg.dt());
  State x = WT;
  detail::record(tr, sys, tg.nt, x);
  for (int j = tg.nt; j > 0; --j) {
    stepper.step(x, Eigen::Vector3d::Zero());
    detail::record(tr, sys, j - 1, x);
  }
  return tr;
}

/// Trajectory of the damped slip equation (beta > 0); the discrete energy is
/// non-increasing step to step.
inline Trajectory solve_damped(const DiscreteSystem& sys, const State& U0, const TimeGrid& tg) {
  if (!(sys.params().beta > 0.0))
    throw ValidationError("solve_damped: requires beta > 0");
  tg.validate();
  Trajectory tr = detail::make_trajectory(sys, tg);
  MidpointStepper stepper(sys, tg.dt());
  State x = U0;
  detail::record(tr, sys, 0, x);
  for (int j = 0; j < tg.nt; ++j) {
    stepper.step(x, Eigen::Vector3d::Zero());
    detail::record(tr, sys, j + 1, x);
  }
  return tr;
}

}  // namespace lambeam
