#include <unsupported/Eigen/MatrixFunctions>

#include <catch2/catch_amalgamated.hpp>

#include "lambeam/io.hpp"
#include "test_support.hpp"

using namespace lambeam;
using namespace testsup;

namespace {
DiscreteSystem unit_system(int n) {
  PhysicalParams p;
  return DiscreteSystem::assemble(p, Grid{n, p.L});
}
ControlTriple sine_controls(const TimeGrid& tg) {
  ControlTriple u = ControlTriple::zero(tg.nt + 1);
  for (int j = 0; j <= tg.nt; ++j) {
    const double t = tg.time(j);
    u.u1(j) = std::sin(3.0 * t);
    u.u2(j) = std::cos(2.0 * t) - 1.0;
    u.u3(j) = 0.5 * std::sin(5.0 * t + 0.3);
  }
  return u;
}
}  // namespace

TEST_CASE("zero data stays zero") {
  const auto sys = unit_system(8);
  const TimeGrid tg{1.0, 50};
  const auto tr = solve_homogeneous(sys, State::zero(sys.dofs()), tg);
  CHECK(tr.energy.maxCoeff() == 0.0);
  CHECK(sys.energy_norm(tr.final_state()) == 0.0);
  const auto tra = solve_adjoint(sys, State::zero(sys.dofs()), tg);
  CHECK(sys.energy_norm(tra.initial()) == 0.0);

  PhysicalParams pd;
  pd.beta = 0.2;
  const auto sysd = DiscreteSystem::assemble(pd, Grid{8, pd.L});
  const auto trd = solve_damped(sysd, State::zero(sysd.dofs()), tg);
  CHECK(trd.energy.maxCoeff() == 0.0);
}

TEST_CASE("midpoint step conserves the energy exactly") {
  const auto sys = unit_system(12);
  CounterRng rng(7);
  State x = random_state(sys, rng);
  const double e0 = sys.energy(x);
  MidpointStepper stepper(sys, 0.01);
  for (int j = 0; j < 10; ++j) {
    stepper.step(x, Eigen::Vector3d::Zero());
    CHECK(std::abs(sys.energy(x) - e0) <= 1e-13 * e0);
  }
}

TEST_CASE("homogeneous drift stays below 1e-10 over thousands of steps") {
  const auto sys = unit_system(24);
  ModalFilter filter(sys, 8);
  CounterRng rng(11);
  const State u0 = filter.random_state(rng);
  const TimeGrid tg{4.0, 2000};
  const auto tr = solve_homogeneous(sys, u0, tg);
  const double e0 = tr.energy(0);
  double drift = 0.0;
  for (int j = 0; j <= tg.nt; ++j) drift = std::max(drift, std::abs(tr.energy(j) - e0) / e0);
  CHECK(drift <= 1e-10);
}

TEST_CASE("time reversal recovers the initial state") {
  const auto sys = unit_system(16);
  CounterRng rng(13);
  const State u0 = random_state(sys, rng);
  const TimeGrid tg{2.0, 500};
  const auto fwd = solve_homogeneous(sys, u0, tg);
  State flipped{fwd.final_state().q, -fwd.final_state().v};
  const auto back = solve_homogeneous(sys, flipped, tg);
  const State rec{back.final_state().q, -back.final_state().v};
  CHECK(sys.energy_norm(rec - u0) <= 1e-8 * sys.energy_norm(u0));
}

TEST_CASE("trajectory matches the dense matrix exponential at second order") {
  const auto sys = unit_system(4);
  const int nd = sys.dofs();
  const Eigen::MatrixXd J = dense_generator(sys);
  const State u0 = smooth_state(sys);
  const double scale = sys.energy_norm(u0);
  double errs[2];
  int idx = 0;
  for (int nt : {1000, 2000}) {
    const TimeGrid tg{1.0, nt};
    const auto tr = solve_homogeneous(sys, u0, tg);
    double maxrel = 0.0;
    for (int frac = 1; frac <= 4; ++frac) {
      const int j = tg.nt * frac / 4;
      const Eigen::MatrixXd E = (tg.time(j) * J).exp();
      Eigen::VectorXd x0(2 * nd);
      x0 << u0.q, u0.v;
      const Eigen::VectorXd xt = E * x0;
      const State ref{xt.head(nd), xt.tail(nd)};
      maxrel = std::max(maxrel, sys.energy_norm(tr.states[j] - ref) / scale);
    }
    errs[idx++] = maxrel;
  }
  CHECK(errs[0] <= 1e-4);
  CHECK(errs[0] / errs[1] > 3.0);  // one halving: ~4x
  CHECK(errs[0] / errs[1] < 5.0);
}

TEST_CASE("zero controls reproduce the homogeneous flow") {
  const auto sys = unit_system(10);
  CounterRng rng(17);
  const State u0 = random_state(sys, rng);
  const TimeGrid tg{1.5, 300};
  const auto a = solve_homogeneous(sys, u0, tg);
  const auto b = solve_controlled(sys, u0, ControlTriple::zero(tg.nt + 1), Forcing(), tg);
  CHECK(sys.energy_norm(a.final_state() - b.final_state()) <=
        1e-14 * sys.energy_norm(a.final_state()));
}

TEST_CASE("controlled response is linear in the controls") {
  const auto sys = unit_system(10);
  const TimeGrid tg{1.0, 200};
  const ControlTriple u = sine_controls(tg);
  ControlTriple v = ControlTriple::zero(tg.nt + 1);
  for (int j = 0; j <= tg.nt; ++j) {
    v.u1(j) = 0.3 * std::cos(4.0 * tg.time(j));
    v.u3(j) = -std::sin(tg.time(j));
  }
  ControlTriple sum{u.u1 + v.u1, u.u2 + v.u2, u.u3 + v.u3};
  const State z = State::zero(sys.dofs());
  const auto ru = solve_controlled(sys, z, u, Forcing(), tg);
  const auto rv = solve_controlled(sys, z, v, Forcing(), tg);
  const auto rs = solve_controlled(sys, z, sum, Forcing(), tg);
  const State lin = ru.final_state() + rv.final_state();
  CHECK(sys.energy_norm(rs.final_state() - lin) <= 1e-12 * sys.energy_norm(lin));
}

TEST_CASE("superposition over initial data and forcing") {
  const auto sys = unit_system(8);
  const TimeGrid tg{1.0, 150};
  CounterRng rng(19);
  const State u0 = random_state(sys, rng);
  const ControlTriple u = sine_controls(tg);
  Forcing f = [&](double t) {
    return Eigen::VectorXd::Constant(sys.dofs(), 0.1 * std::sin(t)).eval();
  };
  const auto full = solve_controlled(sys, u0, u, f, tg);
  const auto part1 = solve_homogeneous(sys, u0, tg);
  const auto part2 = solve_controlled(sys, State::zero(sys.dofs()), u, Forcing(), tg);
  const auto part3 =
      solve_controlled(sys, State::zero(sys.dofs()), ControlTriple::zero(tg.nt + 1), f, tg);
  const State lin = part1.final_state() + part2.final_state() + part3.final_state();
  CHECK(sys.energy_norm(full.final_state() - lin) <= 1e-12 * sys.energy_norm(lin));
}

TEST_CASE("constant control excites the boundary row it drives") {
  // u1 = 1 from rest: the first dynamic boundary row must hold against
  // one-sided trace recovery, with residual falling under refinement.
  PhysicalParams p;
  double maxres[2];
  int idx = 0;
  for (int n : {32, 64}) {
    const auto sys = DiscreteSystem::assemble(p, Grid{n, p.L});
    const TimeGrid tg{0.5, n * 16};
    ControlTriple u = ControlTriple::zero(tg.nt + 1);
    u.u1.setOnes();
    const auto tr = solve_controlled(sys, State::zero(sys.dofs()), u, Forcing(), tg);
    CHECK(tr.velocities.w(tg.nt) > 0.0);  // boundary velocity grows from rest
    double res = 0.0;
    const double dt = tg.dt();
    for (int j = 1; j < tg.nt; ++j) {
      const double wtt =
          (tr.velocities.w(j + 1) - tr.velocities.w(j - 1)) / (2.0 * dt);
      const BoundaryDerivatives d = sys.boundary_derivatives_one_sided(tr.states[j]);
      res = std::max(res, std::abs(wtt + d.shear - 1.0));
    }
    maxres[idx++] = res;
  }
  CHECK(maxres[0] < 0.1);
  CHECK(maxres[0] / maxres[1] > 1.8);
}

TEST_CASE("control length mismatch is rejected") {
  const auto sys = unit_system(6);
  const TimeGrid tg{1.0, 100};
  CHECK_THROWS_AS(
      solve_controlled(sys, State::zero(sys.dofs()), ControlTriple::zero(50), Forcing(), tg),
      ValidationError);
}

TEST_CASE("backward-then-forward adjoint round trip") {
  const auto sys = unit_system(14);
  CounterRng rng(29);
  const State wt = random_state(sys, rng);
  const TimeGrid tg{2.0, 400};
  const auto adj = solve_adjoint(sys, wt, tg);
  CHECK(sys.energy_norm(adj.final_state() - wt) == 0.0);
  const auto fwd = solve_homogeneous(sys, adj.initial(), tg);
  CHECK(sys.energy_norm(fwd.final_state() - wt) <= 1e-8 * sys.energy_norm(wt));
}

TEST_CASE("adjoint energy is constant") {
  const auto sys = unit_system(14);
  CounterRng rng(37);
  const State wt = random_state(sys, rng);
  const TimeGrid tg{2.0, 600};
  const auto adj = solve_adjoint(sys, wt, tg);
  const double e = adj.energy(tg.nt);
  for (int j = 0; j <= tg.nt; ++j) CHECK(std::abs(adj.energy(j) - e) <= 1e-11 * e);
}

TEST_CASE("damped flow dissipates monotonically") {
  PhysicalParams p;
  p.beta = 0.4;
  const auto sys = DiscreteSystem::assemble(p, Grid{12, p.L});
  CounterRng rng(41);
  State u0 = random_state(sys, rng);
  const TimeGrid tg{4.0, 2000};
  const auto tr = solve_damped(sys, u0, tg);
  for (int j = 1; j <= tg.nt; ++j)
    CHECK(tr.energy(j) <= tr.energy(j - 1) * (1.0 + 1e-12));
  CHECK(tr.energy(tg.nt) < tr.energy(0));  // strict decay with slip motion
}

TEST_CASE("damped solve validates beta") {
  const auto sys = unit_system(6);
  CHECK_THROWS_AS(solve_damped(sys, State::zero(sys.dofs()), TimeGrid{1.0, 10}),
                  ValidationError);
}

TEST_CASE("small damping perturbs the conservative flow at first order") {
  PhysicalParams p;
  const Grid g{12, p.L};
  const auto cons = DiscreteSystem::assemble(p, g);
  CounterRng rng(43);
  ModalFilter filter(cons, 4);
  const State u0 = filter.random_state(rng);
  const TimeGrid tg{2.0, 500};
  const auto ref = solve_homogeneous(cons, u0, tg);
  double diff[2];
  int idx = 0;
  for (double beta : {1e-6, 2e-6}) {
    PhysicalParams pd = p;
    pd.beta = beta;
    const auto sys = DiscreteSystem::assemble(pd, g);
    const auto tr = solve_damped(sys, u0, tg);
    diff[idx++] = cons.energy_norm(tr.final_state() - ref.final_state());
  }
  CHECK(diff[0] <= 1e-4 * cons.energy_norm(u0));
  CHECK(diff[1] / diff[0] == Catch::Approx(2.0).epsilon(0.25));  // O(beta)
}

TEST_CASE("trajectory CSV carries the documented columns") {
  const auto sys = unit_system(4);
  const TimeGrid tg{0.5, 10};
  const auto tr = solve_homogeneous(sys, smooth_state(sys), tg);
  const std::string csv = trajectory_csv(tr, "# header\n");
  CHECK(csv.rfind("# header\nt,E,w_L,xi_L,s_L,wt_L,xit_L,st_L\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + tg.nt + 1);
}

TEST_CASE("binary snapshots round trip") {
  const auto sys = unit_system(5);
  const TimeGrid tg{0.25, 8};
  const auto tr = solve_homogeneous(sys, smooth_state(sys), tg);
  const auto path = std::filesystem::temp_directory_path() / "lambeam_snap_test.bin";
  write_snapshots(path, tr, sys.n());
  const SnapshotFile f = read_snapshots(path);
  REQUIRE(f.n == sys.n());
  REQUIRE(f.nt == tg.nt);
  CHECK(f.dt == tg.dt());
  for (int j = 0; j <= tg.nt; ++j) {
    CHECK((f.states[j].q - tr.states[j].q).norm() == 0.0);
    CHECK((f.states[j].v - tr.states[j].v).norm() == 0.0);
  }
  std::filesystem::remove(path);
}
