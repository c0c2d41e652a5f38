#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "lambeam/errors.hpp"

namespace lambeam {

/// Two-layer beam constants in the raw (displacement/rotation/slip-rate) form:
/// density, mass moment of inertia, shear stiffness, flexural rigidity, and the
/// adhesive layer's stiffness and structural damping.
struct HansenSpiesParams {
  double rho = 1.0;
  double I_rho = 1.0;
  double G = 1.0;
  double D = 1.0;
  double delta0 = 0.0;
  double gamma0 = 0.0;
  double L = 1.0;

  void validate() const {
    if (!(rho > 0.0)) throw ValidationError("HansenSpiesParams: rho must be > 0");
    if (!(I_rho > 0.0)) throw ValidationError("HansenSpiesParams: I_rho must be > 0");
    if (!(G > 0.0)) throw ValidationError("HansenSpiesParams: G must be > 0");
    if (!(D > 0.0)) throw ValidationError("HansenSpiesParams: D must be > 0");
    if (!(delta0 >= 0.0)) throw ValidationError("HansenSpiesParams: delta0 must be >= 0");
    if (!(gamma0 >= 0.0)) throw ValidationError("HansenSpiesParams: gamma0 must be >= 0");
    if (!(L > 0.0)) throw ValidationError("HansenSpiesParams: L must be > 0");
  }
};

/// Constants of the transformed three-field system. beta = 0 is required by
/// every conservative/controllability path; beta > 0 selects the damped
/// slip equation. All quantities are dimensionless, L defaults to 1.
struct PhysicalParams {
  double rho1 = 1.0;
  double rho2 = 1.0;
  double k = 1.0;
  double b = 1.0;
  double gamma = 1.0;
  double beta = 0.0;
  double L = 1.0;

  void validate() const {
    if (!(rho1 > 0.0)) throw ValidationError("PhysicalParams: rho1 must be > 0");
    if (!(rho2 > 0.0)) throw ValidationError("PhysicalParams: rho2 must be > 0");
    if (!(k > 0.0)) throw ValidationError("PhysicalParams: k must be > 0");
    if (!(b > 0.0)) throw ValidationError("PhysicalParams: b must be > 0");
    if (!(gamma >= 0.0)) throw ValidationError("PhysicalParams: gamma must be >= 0");
    if (!(beta >= 0.0)) throw ValidationError("PhysicalParams: beta must be >= 0");
    if (!(L > 0.0)) throw ValidationError("PhysicalParams: L must be > 0");
  }

  void require_conservative(const std::string& where) const {
    validate();
    if (beta != 0.0)
      throw ValidationError(where + ": requires beta = 0 (conservative system)");
  }

  /// gamma > 0 keeps the slip field's L2 term in the energy metric; the
  /// observability/control pipelines reject the degenerate phase space.
  void require_control_ready(const std::string& where) const {
    require_conservative(where);
    if (!(gamma > 0.0))
      throw ValidationError(where + ": requires gamma > 0 (phase-space norm degenerates)");
  }
};

/// Parameter map into the three-field form: rho1=rho, rho2=I_rho, k=G, b=D,
/// 3*gamma = 4*delta0, 3*beta = 4*gamma0.
inline PhysicalParams from_hansen_spies(const HansenSpiesParams& p) {
  p.validate();
  PhysicalParams out;
  out.rho1 = p.rho;
  out.rho2 = p.I_rho;
  out.k = p.G;
  out.b = p.D;
  out.gamma = 4.0 * p.delta0 / 3.0;
  out.beta = 4.0 * p.gamma0 / 3.0;
  out.L = p.L;
  return out;
}

/// Exact inverse of from_hansen_spies.
inline HansenSpiesParams to_hansen_spies(const PhysicalParams& p) {
  p.validate();
  HansenSpiesParams out;
  out.rho = p.rho1;
  out.I_rho = p.rho2;
  out.G = p.k;
  out.D = p.b;
  out.delta0 = 3.0 * p.gamma / 4.0;
  out.gamma0 = 3.0 * p.beta / 4.0;
  out.L = p.L;
  return out;
}

struct FieldTriple {
  Eigen::VectorXd w, xi, s;
};

struct RawFieldTriple {
  Eigen::VectorXd w, psi, S;
};

/// Pointwise change of variables xi = 3S - psi, s = -3S (w unchanged).
inline FieldTriple transform_state(const Eigen::VectorXd& w, const Eigen::VectorXd& psi,
                                   const Eigen::VectorXd& S) {
  if (psi.size() != w.size() || S.size() != w.size())
    throw ValidationError("transform_state: fields must share one grid");
  return {w, 3.0 * S - psi, -3.0 * S};
}

/// Inverse map psi = -xi - s, S = -s/3.
inline RawFieldTriple inverse_transform_state(const Eigen::VectorXd& w,
                                              const Eigen::VectorXd& xi,
                                              const Eigen::VectorXd& s) {
  if (xi.size() != w.size() || s.size() != w.size())
    throw ValidationError("inverse_transform_state: fields must share one grid");
  return {w, -xi - s, -s / 3.0};
}

/// Coefficient matrix of the (w, psi, S) -> (w, xi, s) change of variables.
inline Eigen::Matrix3d state_transform_matrix() {
  Eigen::Matrix3d t;
  t << 1.0, 0.0, 0.0,  //
      0.0, -1.0, 3.0,  //
      0.0, 0.0, -3.0;
  return t;
}

/// Slowest characteristic needs L*max(sqrt(rho1/k), sqrt(rho2/b)) to cross the
/// beam; four crossings is the default control/observation horizon.
inline double crossing_time(const PhysicalParams& p) {
  return p.L * std::max(std::sqrt(p.rho1 / p.k), std::sqrt(p.rho2 / p.b));
}

inline double default_horizon(const PhysicalParams& p) { return 4.0 * crossing_time(p); }

}  // namespace lambeam
