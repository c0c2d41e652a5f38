#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "lambeam/errors.hpp"
#include "lambeam/params.hpp"

namespace lambeam {

/// Uniform mesh on [0, L]; node 0 carries the essential condition w=xi=s=0,
/// nodes 1..n are free. Each of the three fields owns n nodal unknowns.
struct Grid {
  int n = 32;
  double length = 1.0;

  void validate() const {
    if (n < 4) throw ValidationError("Grid: need at least 4 elements");
    if (!(length > 0.0)) throw ValidationError("Grid: length must be > 0");
  }
  double h() const { return length / n; }
  /// Coordinate of free node j (j = 0..n-1 maps to mesh nodes 1..n).
  double node(int j) const { return (j + 1) * h(); }
};

enum class MassModel { consistent, lumped };

/// Phase vector: q stacks the free nodal values of (w, xi, s), v their time
/// derivatives. The boundary velocities at x=L are the last nodal entries of
/// each v block; the point masses in M weight them.
struct State {
  Eigen::VectorXd q, v;

  static State zero(int dofs) {
    return {Eigen::VectorXd::Zero(dofs), Eigen::VectorXd::Zero(dofs)};
  }
  int dofs() const { return static_cast<int>(q.size()); }
};

inline State operator+(const State& a, const State& b) { return {a.q + b.q, a.v + b.v}; }
inline State operator-(const State& a, const State& b) { return {a.q - b.q, a.v - b.v}; }
inline State operator*(double c, const State& a) { return {c * a.q, c * a.v}; }

/// Boundary x-derivative traces at x=L, plus the shear combination
/// (w_x + xi + s)(L) that drives the first dynamic boundary row.
struct BoundaryDerivatives {
  double w_x = 0.0, xi_x = 0.0, s_x = 0.0, shear = 0.0;
};

/// Energy-exact spatial discretization of the three-field beam: generalized
/// mass matrix with the dynamic-boundary point masses, stiffness matrix of the
/// weighted bilinear form, control-injection and trace maps, damping block.
///
/// With q the stacked (w, xi, s) values and v = q_t, the semi-discrete system
///   M q'' + D q' + K q = B u(t)
/// reproduces the PDE system weakly; the three boundary rows
///   w_tt(L) + w_x(L) + xi(L) + s(L) = u1, xi_tt(L) + xi_x(L) = u2,
///   s_tt(L) + s_x(L) = u3
/// emerge from the point masses rather than separate equations. The phase-space
/// norm equals v'Mv + q'Kq on piecewise-linear interpolants exactly.
class DiscreteSystem {
 public:
  static DiscreteSystem assemble(const PhysicalParams& params, const Grid& grid,
                                 MassModel mass = MassModel::consistent) {
    params.validate();
    grid.validate();
    return DiscreteSystem(params, grid, mass);
  }

  const PhysicalParams& params() const { return params_; }
  const Grid& grid() const { return grid_; }
  int n() const { return grid_.n; }
  int dofs() const { return 3 * grid_.n; }

  const Eigen::MatrixXd& M() const { return M_; }
  const Eigen::MatrixXd& K() const { return K_; }
  const Eigen::MatrixXd& D_damp() const { return D_; }
  /// 3n x 3 control injection: columns 3k e_L, 3b e_L, b e_L per block.
  const Eigen::MatrixXd& B() const { return B_; }
  /// 3 x 3n trace map reading the nodal values at x=L.
  const Eigen::MatrixXd& C() const { return C_; }
  /// Duality weights diag(3k, 3b, b) tying B to C.
  Eigen::Vector3d duality_weights() const {
    return {3.0 * params_.k, 3.0 * params_.b, params_.b};
  }

  const Eigen::MatrixXd& scalar_mass() const { return Mvol_; }
  const Eigen::MatrixXd& scalar_stiffness() const { return Kscal_; }

  const Eigen::LLT<Eigen::MatrixXd>& mass_cholesky() const { return lltM_; }
  const Eigen::LLT<Eigen::MatrixXd>& stiffness_cholesky() const { return lltK_; }

  // --- phase-space metric ------------------------------------------------

  double energy_inner(const State& a, const State& b) const {
    check_dims(a, "energy_inner");
    check_dims(b, "energy_inner");
    return a.v.dot(M_ * b.v) + a.q.dot(K_ * b.q);
  }
  double energy_norm(const State& a) const { return std::sqrt(std::max(0.0, energy_inner(a, a))); }
  /// E = (v'Mv + q'Kq)/2; twice this is the squared phase-space norm.
  double energy(const State& a) const { return 0.5 * energy_inner(a, a); }

  // --- the conservative generator ----------------------------------------

  /// First-order generator (q, v) -> (v, -M^{-1} K q). The discrete boundary
  /// rows live inside M^{-1} through the point masses.
  State apply_generator(const State& u) const {
    params_.require_conservative("apply_generator");
    check_dims(u, "apply_generator");
    return {u.v, -lltM_.solve(K_ * u.q)};
  }

  /// Two-sided inverse of apply_generator: v copies the prescribed position
  /// slots of F, the positions solve K q = -M f_vel (the mass-weighted data;
  /// the point masses supply the 3k f7, 3b f8, b f9 boundary terms).
  State solve_static(const State& f) const {
    params_.require_conservative("solve_static");
    check_dims(f, "solve_static");
    return {-lltK_.solve(M_ * f.v), f.q};
  }

  /// Nodal accelerations -M^{-1}(K q + D v); on the last node of each block
  /// this is the flux-recovered dynamic boundary row.
  Eigen::VectorXd accelerations(const State& u) const {
    check_dims(u, "accelerations");
    Eigen::VectorXd r = K_ * u.q;
    if (params_.beta != 0.0) r += D_ * u.v;
    return -lltM_.solve(r);
  }

  Eigen::Vector3d boundary_positions(const State& u) const { return C_ * u.q; }
  Eigen::Vector3d boundary_velocities(const State& u) const { return C_ * u.v; }

  /// Boundary x-derivatives recovered from the discrete boundary rows:
  /// (w_x + xi + s)(L) = -w_tt(L), xi_x(L) = -xi_tt(L), s_x(L) = -s_tt(L).
  /// Superconvergent; valid for the homogeneous system.
  BoundaryDerivatives boundary_derivatives_flux(const State& u) const {
    const Eigen::VectorXd a = accelerations(u);
    const int n = grid_.n;
    BoundaryDerivatives d;
    d.shear = -a(n - 1);
    d.xi_x = -a(2 * n - 1);
    d.s_x = -a(3 * n - 1);
    d.w_x = d.shear - u.q(2 * n - 1) - u.q(3 * n - 1);
    return d;
  }

  /// Fallback: second-order one-sided differences at x=L.
  BoundaryDerivatives boundary_derivatives_one_sided(const State& u) const {
    check_dims(u, "boundary_derivatives_one_sided");
    const int n = grid_.n;
    const double h = grid_.h();
    auto dx = [&](int block) {
      const int off = block * n;
      return (3.0 * u.q(off + n - 1) - 4.0 * u.q(off + n - 2) + u.q(off + n - 3)) / (2.0 * h);
    };
    BoundaryDerivatives d;
    d.w_x = dx(0);
    d.xi_x = dx(1);
    d.s_x = dx(2);
    d.shear = d.w_x + u.q(2 * n - 1) + u.q(3 * n - 1);
    return d;
  }

  // --- fractional Sobolev norm --------------------------------------------

  /// Spectral H^sigma norm of the stacked position vector: each field is
  /// expanded in the clamped-left scalar (K, M) eigenbasis and mode m is
  /// weighted by (1 + lambda_m)^sigma. sigma must lie in (1/2, 1).
  double fractional_norm(const Eigen::VectorXd& q, double sigma) const {
    if (!(sigma > 0.5 && sigma < 1.0))
      throw ValidationError("fractional_norm: sigma must lie in (1/2, 1)");
    if (q.size() != dofs()) throw ValidationError("fractional_norm: dimension mismatch");
    const int n = grid_.n;
    double sum = 0.0;
    for (int blk = 0; blk < 3; ++blk) {
      const Eigen::VectorXd c =
          scalar_modes_.transpose() * (Mvol_ * q.segment(blk * n, n));
      for (int m = 0; m < n; ++m)
        sum += std::pow(1.0 + scalar_eigs_(m), sigma) * c(m) * c(m);
    }
    return std::sqrt(sum);
  }

  const Eigen::VectorXd& scalar_eigenvalues() const { return scalar_eigs_; }
  const Eigen::MatrixXd& scalar_modes() const { return scalar_modes_; }

 private:
  DiscreteSystem(const PhysicalParams& params, const Grid& grid, MassModel mass)
      : params_(params), grid_(grid) {
    const int n = grid.n;
    const double h = grid.h();

    // Scalar volume mass and clamped-left stiffness on the free nodes.
    Mvol_ = Eigen::MatrixXd::Zero(n, n);
    Kscal_ = Eigen::MatrixXd::Zero(n, n);
    for (int e = 0; e < n; ++e) {
      const int l = e - 1;  // free index of the element's left node; -1 = clamped
      const int r = e;
      if (mass == MassModel::consistent) {
        if (l >= 0) {
          Mvol_(l, l) += h / 3.0;
          Mvol_(l, r) += h / 6.0;
          Mvol_(r, l) += h / 6.0;
        }
        Mvol_(r, r) += h / 3.0;
      } else {
        if (l >= 0) Mvol_(l, l) += h / 2.0;
        Mvol_(r, r) += h / 2.0;
      }
      if (l >= 0) {
        Kscal_(l, l) += 1.0 / h;
        Kscal_(l, r) -= 1.0 / h;
        Kscal_(r, l) -= 1.0 / h;
      }
      Kscal_(r, r) += 1.0 / h;
    }

    const int nd = 3 * n;
    const double k = params.k, b = params.b, g = params.gamma;

    M_ = Eigen::MatrixXd::Zero(nd, nd);
    M_.block(0, 0, n, n) = 3.0 * params.rho1 * Mvol_;
    M_.block(n, n, n, n) = 3.0 * params.rho2 * Mvol_;
    M_.block(2 * n, 2 * n, n, n) = params.rho2 * Mvol_;
    M_(n - 1, n - 1) += 3.0 * k;          // point mass of the w boundary row
    M_(2 * n - 1, 2 * n - 1) += 3.0 * b;  // xi boundary row
    M_(3 * n - 1, 3 * n - 1) += b;        // s boundary row

    // Stiffness from 3b<xi_x,xi_x*> + b<s_x,s_x*> + g<s,s*> + 3k<Phi,Phi*>,
    // Phi = w_x + xi + s. Two-point Gauss is exact for these quadratics.
    K_ = Eigen::MatrixXd::Zero(nd, nd);
    const double gp[2] = {0.5 * (1.0 - 1.0 / std::sqrt(3.0)), 0.5 * (1.0 + 1.0 / std::sqrt(3.0))};
    for (int e = 0; e < n; ++e) {
      const int l = e - 1;
      const int r = e;
      // Local dof order: [w_l, w_r, xi_l, xi_r, s_l, s_r]; l may be clamped.
      int idx[6] = {l, r, (l >= 0 ? n + l : -1), n + r, (l >= 0 ? 2 * n + l : -1), 2 * n + r};
      Eigen::Matrix<double, 6, 6> ke = Eigen::Matrix<double, 6, 6>::Zero();
      for (double t : gp) {
        const double wq = 0.5 * h;
        const double Nl = 1.0 - t, Nr = t;
        const double dNl = -1.0 / h, dNr = 1.0 / h;
        Eigen::Matrix<double, 6, 1> a_xix, a_sx, a_s, a_phi;
        a_xix << 0, 0, dNl, dNr, 0, 0;
        a_sx << 0, 0, 0, 0, dNl, dNr;
        a_s << 0, 0, 0, 0, Nl, Nr;
        a_phi << dNl, dNr, Nl, Nr, Nl, Nr;
        ke += wq * (3.0 * b * a_xix * a_xix.transpose() + b * a_sx * a_sx.transpose() +
                    g * a_s * a_s.transpose() + 3.0 * k * a_phi * a_phi.transpose());
      }
      for (int i = 0; i < 6; ++i) {
        if (idx[i] < 0) continue;
        for (int j = 0; j < 6; ++j) {
          if (idx[j] < 0) continue;
          K_(idx[i], idx[j]) += ke(i, j);
        }
      }
    }

    D_ = Eigen::MatrixXd::Zero(nd, nd);
    if (params.beta != 0.0)
      D_.block(2 * n, 2 * n, n, n) = params.beta * Mvol_;

    B_ = Eigen::MatrixXd::Zero(nd, 3);
    B_(n - 1, 0) = 3.0 * k;
    B_(2 * n - 1, 1) = 3.0 * b;
    B_(3 * n - 1, 2) = b;

    C_ = Eigen::MatrixXd::Zero(3, nd);
    C_(0, n - 1) = 1.0;
    C_(1, 2 * n - 1) = 1.0;
    C_(2, 3 * n - 1) = 1.0;

    lltM_.compute(M_);
    if (lltM_.info() != Eigen::Success)
      throw InternalError("assemble: mass matrix failed Cholesky (should be SPD)");
    lltK_.compute(K_);
    if (lltK_.info() != Eigen::Success)
      throw InternalError("assemble: stiffness matrix failed Cholesky on the constrained space");

    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Kscal_, Mvol_);
    if (ges.info() != Eigen::Success)
      throw InternalError("assemble: scalar eigenbasis computation failed");
    scalar_eigs_ = ges.eigenvalues();
    scalar_modes_ = ges.eigenvectors();  // Mvol-orthonormal columns
  }

  void check_dims(const State& u, const std::string& where) const {
    if (u.q.size() != dofs() || u.v.size() != dofs())
      throw ValidationError(where + ": state dimension mismatch");
  }

  PhysicalParams params_;
  Grid grid_;
  Eigen::MatrixXd M_, K_, D_, B_, C_, Mvol_, Kscal_;
  Eigen::LLT<Eigen::MatrixXd> lltM_, lltK_;
  Eigen::VectorXd scalar_eigs_;
  Eigen::MatrixXd scalar_modes_;
};

}  // namespace lambeam
