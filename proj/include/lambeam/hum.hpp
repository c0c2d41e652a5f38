#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lambeam/assembly.hpp"
#include "lambeam/errors.hpp"
#include "lambeam/evolution.hpp"
#include "lambeam/modal.hpp"
#include "lambeam/rng.hpp"

namespace lambeam {

/// Weights of the boundary quadratic form. The duality pairing carries
/// (3k, 3b, b); the unweighted variant is exposed for comparison and changes
/// only the inner product the minimization runs in, not the control set.
struct TraceWeights {
  double c1 = 1.0, c2 = 1.0, c3 = 1.0;

  static TraceWeights duality(const PhysicalParams& p) {
    return {3.0 * p.k, 3.0 * p.b, p.b};
  }
  static TraceWeights unweighted() { return {1.0, 1.0, 1.0}; }
  Eigen::Vector3d vec() const { return {c1, c2, c3}; }
};

/// Trapezoid rule for the weighted squared-trace integral; used for reporting.
inline double trace_integral_trapezoid(const TraceSignal& ts, const Eigen::Vector3d& c,
                                       double dt) {
  const int nt = ts.samples() - 1;
  double sum = 0.0;
  for (int j = 0; j <= nt; ++j) {
    const double f =
        c(0) * ts.w(j) * ts.w(j) + c(1) * ts.xi(j) * ts.xi(j) + c(2) * ts.s(j) * ts.s(j);
    sum += (j == 0 || j == nt) ? 0.5 * f : f;
  }
  return dt * sum;
}

/// Half-step-averaged quadrature matching the midpoint integrator: with it the
/// discrete duality identity, and hence the Gramian quadratic form, is exact.
inline double trace_integral_midpoint(const TraceSignal& ts, const Eigen::Vector3d& c,
                                      double dt) {
  const int nt = ts.samples() - 1;
  double sum = 0.0;
  for (int j = 0; j < nt; ++j) {
    const double wm = 0.5 * (ts.w(j) + ts.w(j + 1));
    const double xm = 0.5 * (ts.xi(j) + ts.xi(j + 1));
    const double sm = 0.5 * (ts.s(j) + ts.s(j + 1));
    sum += c(0) * wm * wm + c(1) * xm * xm + c(2) * sm * sm;
  }
  return dt * sum;
}

/// Matrix-free controllability Gramian. One application costs two PDE solves:
///   (1) backward homogeneous solve from data a at t=T, recording the position
///       traces at x=L;
///   (2) the traces (scaled per the weight convention) are fed back as controls
///       into a forward solve from rest;
///   (3) the terminal state is mapped by Xi(q, v) = (K^{-1}M v, -q) -- the
///       energy-Riesz representative of the conserved symplectic pairing --
///       and projected onto the filtered subspace.
/// The result is self-adjoint and positive semidefinite in the energy inner
/// product, with <Lambda a, a>_E equal to the weighted squared-trace integral
/// of the adjoint trajectory up to roundoff.
class GramianOperator {
 public:
  GramianOperator(const DiscreteSystem& sys, const ModalFilter& filter, const TimeGrid& tg,
                  TraceWeights weights, double tikhonov = 0.0)
      : sys_(sys), filter_(filter), tg_(tg), weights_(weights), tikhonov_(tikhonov) {
    sys.params().require_control_ready("GramianOperator");
    tg.validate();
  }
  GramianOperator(const GramianOperator&) = delete;
  GramianOperator& operator=(const GramianOperator&) = delete;

  const DiscreteSystem& system() const { return sys_; }
  const ModalFilter& filter() const { return filter_; }
  const TimeGrid& time_grid() const { return tg_; }
  TraceWeights weights() const { return weights_; }
  double tikhonov() const { return tikhonov_; }

  /// u_i = (c_i / d_i) * trace_i, with d = diag(3k, 3b, b) the duality weights.
  /// For the default (weighted) convention this is the identity: the controls
  /// are literally the adjoint position traces.
  ControlTriple controls_from_traces(const TraceSignal& traces) const {
    const Eigen::Vector3d d = sys_.duality_weights();
    const Eigen::Vector3d c = weights_.vec();
    return {(c(0) / d(0)) * traces.w, (c(1) / d(1)) * traces.xi, (c(2) / d(2)) * traces.s};
  }

  ControlTriple controls_from_adjoint_data(const State& a) const {
    const Trajectory adj = solve_adjoint(sys_, filter_.project(a), tg_);
    return controls_from_traces(adj.positions);
  }

  /// Xi(q, v) = (K^{-1} M v, -q): the state whose energy pairing against any z
  /// equals the symplectic pairing v'M z_q - q'M z_v of (q, v) against z.
  State riesz_of_terminal(const State& y) const {
    return {sys_.stiffness_cholesky().solve(sys_.M() * y.v), -y.q};
  }

  State apply(const State& a) const {
    const double drop = sys_.energy_norm(a - filter_.project(a));
    if (drop > 1e-8 * (sys_.energy_norm(a) + 1e-300)) ++unfiltered_warnings_;
    return apply_filtered(a);
  }

  /// Same operator without the unfiltered-input accounting; for callers whose
  /// iterates are filtered by construction (CG directions, Lanczos vectors)
  /// and only drift at roundoff level. The projection is still applied.
  State apply_filtered(const State& a) const {
    const State af = filter_.project(a);
    const Trajectory adj = solve_adjoint(sys_, af, tg_);
    const ControlTriple u = controls_from_traces(adj.positions);
    const Trajectory fwd =
        solve_controlled(sys_, State::zero(sys_.dofs()), u, Forcing(), tg_);
    State out = filter_.project(riesz_of_terminal(fwd.final_state()));
    if (tikhonov_ > 0.0) out = out + tikhonov_ * af;
    return out;
  }

  long unfiltered_warning_count() const { return unfiltered_warnings_.load(); }

 private:
  const DiscreteSystem& sys_;
  const ModalFilter& filter_;
  TimeGrid tg_;
  TraceWeights weights_;
  double tikhonov_;
  mutable std::atomic<long> unfiltered_warnings_{0};
};

/// All Ritz values of the filtered Gramian (ascending), by Lanczos in the
/// energy inner product with full reorthogonalization and random restarts on
/// breakdown. Run to the filtered dimension 2m this is an exact Rayleigh-Ritz
/// on the filtered subspace; max_steps below 2m yields the usual outer
/// approximations.
inline Eigen::VectorXd gramian_ritz_values(const GramianOperator& g, std::uint64_t seed,
                                           int max_steps = -1) {
  const ModalFilter& f = g.filter();
  const int dim = f.subspace_dim();
  const int steps = (max_steps < 0) ? dim : std::min(max_steps, dim);
  Eigen::MatrixXd V(dim, steps), W(dim, steps);
  CounterRng rng(seed, 0x4C414E43ULL);

  auto random_vec = [&]() {
    Eigen::VectorXd x(dim);
    for (int i = 0; i < dim; ++i) x(i) = rng.normal();
    return x;
  };
  // Modified Gram-Schmidt, two passes.
  auto orthonormalize = [&](Eigen::VectorXd& x, int k) {
    for (int pass = 0; pass < 2; ++pass)
      for (int j = 0; j < k; ++j) x -= V.col(j).dot(x) * V.col(j);
    const double nrm = x.norm();
    if (nrm < 1e-12) return false;
    x /= nrm;
    return true;
  };

  Eigen::VectorXd v = random_vec();
  int k = 0, draws = 0;
  while (k < steps) {
    if (!orthonormalize(v, k)) {
      if (++draws > 8 * dim)
        throw NonConvergenceError("gramian_ritz_values: Lanczos stalled after " +
                                  std::to_string(k) + " of " + std::to_string(steps) +
                                  " steps (repeated breakdown)");
      v = random_vec();
      continue;
    }
    V.col(k) = v;
    W.col(k) = f.coefficients(g.apply_filtered(f.from_coefficients(V.col(k))));
    v = W.col(k);
    ++k;
  }
  Eigen::MatrixXd H = V.transpose() * W;
  H = 0.5 * (H + H.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success)
    throw NonConvergenceError("gramian_ritz_values: Ritz eigensolve failed");
  return es.eigenvalues();
}

struct CgDiagnostics {
  int iterations = 0;
  std::vector<double> residual_history;  // relative energy-norm residuals
  bool converged = false;
};

struct HumSolution {
  State minimizer;  // adjoint data a* at t=T
  ControlTriple controls;
  CgDiagnostics cg;
  double initial_energy = 0.0;
  double final_energy_filtered = 0.0;
  double final_energy_unfiltered = 0.0;
  double control_norm_l2 = 0.0;        // plain L2(0,T)^3 norm
  double control_norm_weighted = 0.0;  // norm of the Gramian quadratic form
  double mu_min = std::numeric_limits<double>::quiet_NaN();
  double mu_max = std::numeric_limits<double>::quiet_NaN();
  double control_bound = std::numeric_limits<double>::quiet_NaN();  // |U0|_E / sqrt(mu_min)
};

namespace detail {

inline void fill_control_norms(HumSolution& sol, const GramianOperator& g) {
  const double dt = g.time_grid().dt();
  TraceSignal u{sol.controls.u1, sol.controls.u2, sol.controls.u3, TraceKind::position};
  sol.control_norm_l2 = std::sqrt(trace_integral_trapezoid(u, Eigen::Vector3d::Ones(), dt));
  sol.control_norm_weighted = std::sqrt(trace_integral_midpoint(u, g.weights().vec(), dt));
}

inline void simulate_and_fill_energies(HumSolution& sol, const GramianOperator& g,
                                       const State& U0, Trajectory* out_traj = nullptr) {
  const DiscreteSystem& sys = g.system();
  Trajectory tr = solve_controlled(sys, U0, sol.controls, Forcing(), g.time_grid());
  sol.initial_energy = sys.energy(U0);
  sol.final_energy_filtered = sys.energy(g.filter().project(tr.final_state()));
  sol.final_energy_unfiltered = sys.energy(tr.final_state());
  if (out_traj) *out_traj = std::move(tr);
}

}  // namespace detail

/// Conjugate gradients in the energy inner product on Lambda a = rhs with
/// rhs = -Xi(final state of the free trajectory from U0) = A^{-1} S_T U0.
/// At convergence the filtered final state of the controlled run vanishes;
/// the controls are the traces of the minimizing adjoint trajectory.
inline HumSolution minimize_gramian(const GramianOperator& g, const State& U0, double tol,
                                    int max_iter) {
  const DiscreteSystem& sys = g.system();
  const ModalFilter& filter = g.filter();
  sys.params().require_control_ready("minimize_J");
  if (!(tol > 0.0)) throw ValidationError("minimize_J: tol must be > 0");
  if (max_iter < 1) throw ValidationError("minimize_J: max_iter must be >= 1");

  HumSolution sol;
  const State U0f = filter.project(U0);
  sol.initial_energy = sys.energy(U0f);

  const Trajectory free_traj = solve_homogeneous(sys, U0f, g.time_grid());
  const State rhs = filter.project(sys.solve_static(free_traj.final_state()));
  const double rhs_norm = sys.energy_norm(rhs);

  State a = State::zero(sys.dofs());
  if (rhs_norm == 0.0) {
    sol.cg.converged = true;
    sol.cg.residual_history.push_back(0.0);
    sol.minimizer = a;
    sol.controls = ControlTriple::zero(g.time_grid().nt + 1);
    detail::fill_control_norms(sol, g);
    return sol;
  }

  State r = rhs;
  State d = r;
  double rho = sys.energy_inner(r, r);
  sol.cg.residual_history.push_back(1.0);
  for (int it = 1; it <= max_iter; ++it) {
    const State q = g.apply_filtered(d);
    const double dq = sys.energy_inner(d, q);
    if (!(dq > 0.0) || !std::isfinite(dq))
      throw ValidationError(
          "minimize_J: Gramian is not positive on the filtered subspace "
          "(ill-posed filter/horizon; mu_min ~ 0)");
    const double alpha = rho / dq;
    a = a + alpha * d;
    r = r - alpha * q;
    const double rho_new = sys.energy_inner(r, r);
    const double rel = std::sqrt(std::max(0.0, rho_new)) / rhs_norm;
    sol.cg.residual_history.push_back(rel);
    sol.cg.iterations = it;
    if (rel <= tol) {
      sol.cg.converged = true;
      break;
    }
    d = r + (rho_new / rho) * d;
    rho = rho_new;
  }

  sol.minimizer = a;
  sol.controls = g.controls_from_adjoint_data(a);
  detail::fill_control_norms(sol, g);
  detail::simulate_and_fill_energies(sol, g, U0f);
  return sol;
}

/// Relative residual of the discrete transposition identity: the conserved
/// pairing sigma(y, p) = y_v' M p_q - y_q' M p_v of the controlled solution
/// against an adjoint solution, evaluated at t=T minus t=0, versus the
/// weighted control-trace integral 3k int u1 chi(L) + 3b int u2 eta(L)
/// + b int u3 Theta(L). The point masses in M supply the R^3 boundary pairing
/// terms. For HUM controls and terminal state zero this is the discrete
/// controllability identity.
inline double verify_duality_identity(const DiscreteSystem& sys, const State& U0,
                                      const ControlTriple& controls, const State& WT,
                                      const TimeGrid& tg) {
  const Trajectory fwd = solve_controlled(sys, U0, controls, Forcing(), tg);
  const Trajectory adj = solve_adjoint(sys, WT, tg);

  auto sigma = [&](const State& y, const State& p) {
    return y.v.dot(sys.M() * p.q) - y.q.dot(sys.M() * p.v);
  };
  const double lhs =
      sigma(fwd.final_state(), adj.final_state()) - sigma(fwd.initial(), adj.initial());

  const Eigen::Vector3d d = sys.duality_weights();
  const double dt = tg.dt();
  double rhs = 0.0;
  for (int j = 0; j < tg.nt; ++j) {
    const double u1m = 0.5 * (controls.u1(j) + controls.u1(j + 1));
    const double u2m = 0.5 * (controls.u2(j) + controls.u2(j + 1));
    const double u3m = 0.5 * (controls.u3(j) + controls.u3(j + 1));
    const double cm = 0.5 * (adj.positions.w(j) + adj.positions.w(j + 1));
    const double em = 0.5 * (adj.positions.xi(j) + adj.positions.xi(j + 1));
    const double tm = 0.5 * (adj.positions.s(j) + adj.positions.s(j + 1));
    rhs += dt * (d(0) * u1m * cm + d(1) * u2m * em + d(2) * u3m * tm);
  }

  const double denom = std::abs(lhs) + std::abs(rhs);
  return denom == 0.0 ? 0.0 : std::abs(lhs - rhs) / denom;
}

/// Initial-data source for the pipeline: a single generalized mode (1-based,
/// unit-energy position direction), a random filtered draw, or an explicit
/// state.
struct InitialData {
  enum class Kind { mode, random, state };
  Kind kind = Kind::mode;
  int mode_index = 1;
  State explicit_state;

  static InitialData mode(int index) { return {Kind::mode, index, {}}; }
  static InitialData random() { return {Kind::random, 0, {}}; }
  static InitialData from_state(State s) { return {Kind::state, 0, std::move(s)}; }
};

inline State make_initial_state(const InitialData& init, const DiscreteSystem& sys,
                                const ModalFilter& filter, std::uint64_t seed,
                                std::uint64_t stream_base) {
  switch (init.kind) {
    case InitialData::Kind::mode: {
      if (init.mode_index < 1 || init.mode_index > filter.m())
        throw ValidationError("initial data: mode index out of the filtered range");
      return filter.basis_state(init.mode_index - 1);
    }
    case InitialData::Kind::random: {
      CounterRng rng(seed, (stream_base << 16) | 1u);
      return filter.random_state(rng);
    }
    case InitialData::Kind::state: {
      if (init.explicit_state.dofs() != sys.dofs())
        throw ValidationError("initial data: state dimension does not match the grid");
      return init.explicit_state;
    }
  }
  throw InternalError("make_initial_state: unreachable");
}

struct PipelineOptions {
  int n = 32;
  int m = 0;        // 0 -> n/3
  double T = 0.0;   // 0 -> four crossing times
  int nt = 2000;
  double tol = 1e-10;
  int max_iter = 200;
  bool unweighted_traces = false;
  MassModel mass = MassModel::consistent;
  double tikhonov = 0.0;       // explicit regularization; 0 = off
  bool auto_tikhonov = true;   // engage eps = 1e-12 if mu_min < 1e-12
  std::uint64_t seed = 1;
  std::uint64_t stream_base = 0;
};

struct PipelineResult {
  HumSolution hum;
  Trajectory controlled;  // re-simulation from the true (unfiltered) U0
  State initial_state;
  double T = 0.0;
  int n = 0, m = 0, nt = 0;
  long gramian_warnings = 0;
};

/// End-to-end null control: assemble, filter, minimize, re-simulate the
/// controlled system from the true initial state, and report both the filtered
/// and unfiltered final energies plus the spectral diagnostics.
inline PipelineResult null_control_pipeline(const PhysicalParams& params,
                                            const PipelineOptions& opt,
                                            const InitialData& init) {
  params.require_control_ready("null_control_pipeline");
  const Grid grid{opt.n, params.L};
  const DiscreteSystem sys = DiscreteSystem::assemble(params, grid, opt.mass);
  const int m = opt.m > 0 ? opt.m : default_filter_size(opt.n);
  const ModalFilter filter(sys, m);
  const TimeGrid tg{opt.T > 0.0 ? opt.T : default_horizon(params), opt.nt};
  const TraceWeights weights =
      opt.unweighted_traces ? TraceWeights::unweighted() : TraceWeights::duality(params);

  const State U0 = make_initial_state(init, sys, filter, opt.seed, opt.stream_base);

  const GramianOperator probe(sys, filter, tg, weights, 0.0);
  const Eigen::VectorXd ritz =
      gramian_ritz_values(probe, mix64(opt.seed ^ (opt.stream_base << 16 | 2u)));
  const double mu_min = ritz(0);
  const double mu_max = ritz(ritz.size() - 1);

  double eps = opt.tikhonov;
  if (eps == 0.0 && opt.auto_tikhonov && mu_min < 1e-12) eps = 1e-12;
  const GramianOperator g(sys, filter, tg, weights, eps);

  HumSolution sol = minimize_gramian(g, U0, opt.tol, opt.max_iter);
  sol.mu_min = mu_min;
  sol.mu_max = mu_max;
  sol.control_bound = sys.energy_norm(filter.project(U0)) / std::sqrt(mu_min);

  PipelineResult out;
  detail::simulate_and_fill_energies(sol, g, U0, &out.controlled);
  out.hum = std::move(sol);
  out.initial_state = U0;
  out.T = tg.T;
  out.n = opt.n;
  out.m = m;
  out.nt = opt.nt;
  out.gramian_warnings = probe.unfiltered_warning_count() + g.unfiltered_warning_count();
  return out;
}

}  // namespace lambeam
