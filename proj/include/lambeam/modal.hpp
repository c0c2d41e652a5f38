#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "lambeam/assembly.hpp"
#include "lambeam/errors.hpp"
#include "lambeam/rng.hpp"

namespace lambeam {

/// Standard two-grid heuristic: retain n/3 of the generalized modes.
inline int default_filter_size(int n) { return std::max(1, n / 3); }

/// Projection onto the lowest m generalized eigenpairs of (K, M). Standard
/// remedy for the spurious high-frequency modes of the discretization, which
/// are not uniformly observable from the boundary. The filtered subspace
/// (positions and velocities both in the modal span) is invariant under the
/// flow and under the static solve, and the nodal M-orthogonal projection is
/// exactly the energy-orthogonal one.
class ModalFilter {
 public:
  ModalFilter(const DiscreteSystem& sys, int m) : dofs_(sys.dofs()), m_(m) {
    if (m < 1 || m > sys.dofs())
      throw ValidationError("ModalFilter: m must lie in [1, 3n]");
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sys.K(), sys.M());
    if (ges.info() != Eigen::Success)
      throw InternalError("ModalFilter: generalized eigensolve failed");
    lambda_ = ges.eigenvalues().head(m);
    phi_ = ges.eigenvectors().leftCols(m);  // M-orthonormal, ascending
    if (!(lambda_(0) > 0.0))
      throw ValidationError("ModalFilter: stiffness not definite (gamma = 0 phase space?)");
    MPhi_ = sys.M() * phi_;
  }

  int m() const { return m_; }
  int subspace_dim() const { return 2 * m_; }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const Eigen::MatrixXd& modes() const { return phi_; }

  State project(const State& u) const {
    return {phi_ * (MPhi_.transpose() * u.q), phi_ * (MPhi_.transpose() * u.v)};
  }

  double distance_to_subspace(const State& u, const DiscreteSystem& sys) const {
    const State p = project(u);
    return sys.energy_norm(u - p);
  }

  /// Coefficients of a filtered state in the energy-orthonormal basis
  /// {(phi_i/sqrt(lambda_i), 0)} u {(0, phi_i)}.
  Eigen::VectorXd coefficients(const State& u) const {
    Eigen::VectorXd c(2 * m_);
    const Eigen::VectorXd cq = MPhi_.transpose() * u.q;
    const Eigen::VectorXd cv = MPhi_.transpose() * u.v;
    for (int i = 0; i < m_; ++i) {
      c(i) = std::sqrt(lambda_(i)) * cq(i);
      c(m_ + i) = cv(i);
    }
    return c;
  }

  State from_coefficients(const Eigen::VectorXd& c) const {
    if (c.size() != 2 * m_)
      throw ValidationError("ModalFilter: coefficient vector must have length 2m");
    State u = State::zero(dofs_);
    for (int i = 0; i < m_; ++i) {
      u.q += (c(i) / std::sqrt(lambda_(i))) * phi_.col(i);
      u.v += c(m_ + i) * phi_.col(i);
    }
    return u;
  }

  /// Energy-orthonormal basis state: idx in [0, m) are position directions,
  /// [m, 2m) velocity directions.
  State basis_state(int idx) const {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(2 * m_);
    c(idx) = 1.0;
    return from_coefficients(c);
  }

  /// Random filtered state with unit-variance energy content per direction.
  State random_state(CounterRng& rng) const {
    Eigen::VectorXd c(2 * m_);
    for (int i = 0; i < 2 * m_; ++i) c(i) = rng.normal();
    return from_coefficients(c);
  }

 private:
  int dofs_, m_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd phi_, MPhi_;
};

}  // namespace lambeam
