#include <unsupported/Eigen/MatrixFunctions>

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace lambeam;
using namespace testsup;

namespace {
DiscreteSystem unit_system(int n) {
  PhysicalParams p;
  return DiscreteSystem::assemble(p, Grid{n, p.L});
}
}  // namespace

TEST_CASE("modal filter eigenpairs are M-orthonormal and ascending") {
  const auto sys = unit_system(12);
  ModalFilter f(sys, 9);
  const Eigen::MatrixXd gram = f.modes().transpose() * sys.M() * f.modes();
  CHECK((gram - Eigen::MatrixXd::Identity(9, 9)).norm() < 1e-10);
  for (int i = 1; i < 9; ++i) CHECK(f.eigenvalues()(i) >= f.eigenvalues()(i - 1));
  CHECK(f.eigenvalues()(0) > 0.0);
  CHECK_THROWS_AS(ModalFilter(sys, 0), ValidationError);
  CHECK_THROWS_AS(ModalFilter(sys, sys.dofs() + 1), ValidationError);
}

TEST_CASE("projection is idempotent, energy-orthogonal, flow-invariant") {
  const auto sys = unit_system(12);
  ModalFilter f(sys, 5);
  CounterRng rng(3);
  const State u = random_state(sys, rng);
  const State pu = f.project(u);
  CHECK(sys.energy_norm(f.project(pu) - pu) <= 1e-12 * sys.energy_norm(pu));
  // energy-orthogonality of the remainder
  CHECK(std::abs(sys.energy_inner(u - pu, pu)) <= 1e-10 * sys.energy_inner(u, u));
  // the filtered subspace is invariant under the generator
  const State apu = sys.apply_generator(pu);
  CHECK(sys.energy_norm(apu - f.project(apu)) <= 1e-10 * sys.energy_norm(apu));
  // and coefficients reproduce the energy norm
  CHECK(f.coefficients(pu).norm() == Catch::Approx(sys.energy_norm(pu)).epsilon(1e-12));
}

TEST_CASE("trace functionals vanish on the zero trajectory") {
  const auto sys = unit_system(8);
  const TimeGrid tg{1.0, 100};
  const auto tr = solve_homogeneous(sys, State::zero(sys.dofs()), tg);
  CHECK(velocity_trace_functional(tr) == 0.0);
  CHECK(position_trace_functional(tr) == 0.0);
}

TEST_CASE("trace functionals are quadratic forms") {
  const auto sys = unit_system(10);
  CounterRng rng(5);
  const State u0 = random_state(sys, rng);
  const TimeGrid tg{1.0, 200};
  const auto tr1 = solve_homogeneous(sys, u0, tg);
  const auto tr2 = solve_homogeneous(sys, 2.0 * u0, tg);
  CHECK(velocity_trace_functional(tr2) ==
        Catch::Approx(4.0 * velocity_trace_functional(tr1)).epsilon(1e-12));
  CHECK(position_trace_functional(tr2) ==
        Catch::Approx(4.0 * position_trace_functional(tr1)).epsilon(1e-12));
}

TEST_CASE("velocity trace functional matches the dense oracle") {
  const auto sys = unit_system(4);
  const State u0 = smooth_state(sys);
  const TimeGrid tg{1.0, 1000};
  const auto tr = solve_homogeneous(sys, u0, tg);
  const double direct = velocity_trace_functional(tr);

  // independent route: dense matrix exponential sampled on a finer grid
  const Eigen::MatrixXd J = dense_generator(sys);
  const int nd = sys.dofs();
  Eigen::VectorXd x0(2 * nd);
  x0 << u0.q, u0.v;
  const int fine = 2000;
  const Eigen::MatrixXd Estep = ((1.0 / fine) * J).exp();
  Eigen::VectorXd x = x0;
  double oracle = 0.0;
  auto sq = [&](const Eigen::VectorXd& y) {
    const double a = y(nd + sys.n() - 1), b = y(nd + 2 * sys.n() - 1),
                 c = y(nd + 3 * sys.n() - 1);
    return a * a + b * b + c * c;
  };
  for (int j = 0; j <= fine; ++j) {
    oracle += (j == 0 || j == fine ? 0.5 : 1.0) * sq(x);
    if (j < fine) x = Estep * x;
  }
  oracle /= fine;
  CHECK(direct == Catch::Approx(oracle).epsilon(1e-4));
}

TEST_CASE("static-solve trajectory swaps position and velocity traces") {
  const auto sys = unit_system(16);
  CounterRng rng(7);
  const State u0 = random_state(sys, rng);
  const State tilde0 = sys.solve_static(u0);
  const TimeGrid tg{2.0, 500};
  const auto tr = solve_homogeneous(sys, u0, tg);
  const auto trt = solve_homogeneous(sys, tilde0, tg);
  double scale = 0.0, err = 0.0;
  for (int j = 0; j <= tg.nt; ++j) {
    scale = std::max({scale, std::abs(tr.positions.w(j)), std::abs(tr.positions.xi(j)),
                      std::abs(tr.positions.s(j))});
    err = std::max({err, std::abs(trt.velocities.w(j) - tr.positions.w(j)),
                    std::abs(trt.velocities.xi(j) - tr.positions.xi(j)),
                    std::abs(trt.velocities.s(j) - tr.positions.s(j))});
  }
  CHECK(err <= 1e-8 * scale);
}

TEST_CASE("multiplier identity: zero data gives zero residual") {
  const auto sys = unit_system(8);
  CHECK(multiplier_identity_residual(sys, State::zero(sys.dofs()), TimeGrid{1.0, 50}) == 0.0);
}

TEST_CASE("multiplier identity residual is small and improves under refinement") {
  PhysicalParams p;
  double res[2];
  int idx = 0;
  for (int n : {16, 32}) {
    const auto sys = DiscreteSystem::assemble(p, Grid{n, p.L});
    res[idx++] = multiplier_identity_residual(sys, smooth_state(sys), TimeGrid{4.0, 2000});
  }
  CHECK(res[0] <= 5e-2);
  CHECK(res[0] / res[1] >= 2.0);
}

TEST_CASE("multiplier identity with one-sided trace recovery agrees") {
  const auto sys = unit_system(32);
  const double a = multiplier_identity_residual(sys, smooth_state(sys), TimeGrid{4.0, 1000},
                                                FluxRecovery::boundary_row);
  const double b = multiplier_identity_residual(sys, smooth_state(sys), TimeGrid{4.0, 1000},
                                                FluxRecovery::one_sided);
  CHECK(a <= 5e-2);
  CHECK(b <= 5e-2);
}

TEST_CASE("observability estimate: scalar filter consistency and positivity") {
  const auto sys = unit_system(16);
  ModalFilter filter(sys, 1);
  const TimeGrid tg{4.0, 800};
  const auto rep = estimate_observability_constant(sys, tg, filter, 64, 5,
                                                   TraceWeights::duality(sys.params()));
  CHECK(rep.mu_min > 0.0);
  CHECK(rep.mu_positive);
  CHECK(rep.scalar_consistency_checked);
  CHECK(rep.scalar_consistent);
  CHECK(rep.c_obs_mc * rep.mu_min == Catch::Approx(1.0).epsilon(0.05));
  CHECK(rep.c_obs_mc > 0.0);
  CHECK(std::isfinite(rep.c_obs_mc));
  CHECK(rep.sample_ratios.size() == 64);
}

TEST_CASE("observability estimate: filtered constant is bounded by the variational one") {
  const auto sys = unit_system(16);
  ModalFilter filter(sys, 5);
  const TimeGrid tg{4.0, 800};
  const auto rep = estimate_observability_constant(sys, tg, filter, 16, 9,
                                                   TraceWeights::duality(sys.params()));
  CHECK(rep.mu_min > 0.0);
  CHECK(rep.c_obs_mc <= rep.c_obs_variational * (1.0 + 1e-9));
  CHECK(rep.multiplier_residual <= 5e-2);
}

TEST_CASE("observability rejects the degenerate phase space") {
  PhysicalParams p;
  p.gamma = 0.0;
  const auto sys = DiscreteSystem::assemble(p, Grid{8, p.L});
  ModalFilter filter(sys, 2);
  CHECK_THROWS_AS(estimate_observability_constant(sys, TimeGrid{1.0, 50}, filter, 4, 1,
                                                  TraceWeights::duality(p)),
                  ValidationError);
}
