#pragma once

// Closed-form controller satisfying a single SOCC. The cone is lifted to
// v = Qu + r, a scalar-style universal formula picks v_s along the lifted
// direction b~ = b (Q^T Q)^{-1} Q^T, and u_s maps v_s back through the
// pseudoinverse. Valid when Q^T Q is invertible and v_s - r lies in Im(Q).

#include "safesocp/socp.hpp"

namespace safesocp {

struct SingularQError : DomainError {
  explicit SingularQError(const std::string& what) : DomainError(what) {}
};
struct ImageConditionError : DomainError {
  explicit ImageConditionError(const std::string& what) : DomainError(what) {}
};
struct NotStrictlyFeasibleError : DomainError {
  explicit NotStrictlyFeasibleError(const std::string& what) : DomainError(what) {}
};

template <typename Scalar>
struct UniversalIntermediates {
  RowVector<Scalar> tilde_b;  // 1 x (m+1)
  Scalar tilde_c = Scalar(0);
  Scalar bar_b = Scalar(0);   // (||tilde_b|| - 1) ||tilde_b||
  Vector<Scalar> v_s;         // m+1
  Vector<Scalar> u_s;         // m
  Scalar im_residual = Scalar(0);
};

namespace detail {

// Scalar switching function: 0 for alpha <= 0, else (-c + sqrt(c^2 + alpha^2))/alpha.
template <typename Scalar>
Scalar universal_phi(Scalar c, Scalar alpha) {
  if (alpha <= Scalar(0)) return Scalar(0);
  return (-c + std::sqrt(c * c + alpha * alpha)) / alpha;
}

template <typename Scalar>
UniversalIntermediates<Scalar> universal_core(const Socc<Scalar>& s, Scalar cond_guard) {
  const int m = s.input_dim();
  const auto svd = s.Q.jacobiSvd(Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const Scalar smax = sv(0);
  const Scalar smin = sv(sv.size() - 1);
  if (!(smin > Scalar(0)) || (smax / smin) * (smax / smin) > cond_guard)
    throw SingularQError("universal_control: Q^T Q is singular or badly conditioned");

  Eigen::LDLT<Matrix<Scalar>> qtq(Matrix<Scalar>(s.Q.transpose() * s.Q));
  auto pinv_apply = [&](const Vector<Scalar>& w) -> Vector<Scalar> {
    return qtq.solve(s.Q.transpose() * w);
  };

  UniversalIntermediates<Scalar> out;
  out.tilde_b = (s.Q * qtq.solve(s.b.transpose())).transpose();
  out.tilde_c = s.c - out.tilde_b.dot(s.r);
  const Scalar nb = out.tilde_b.norm();
  out.bar_b = (nb - Scalar(1)) * nb;
  if (nb <= Scalar(1)) {
    out.v_s = Vector<Scalar>::Zero(m + 1);
  } else {
    out.v_s = universal_phi(out.tilde_c, out.bar_b) * out.tilde_b.transpose();
  }
  out.u_s = pinv_apply(out.v_s - s.r);
  out.im_residual = ((out.v_s - s.r) - s.Q * out.u_s).norm();
  return out;
}

}  // namespace detail

/// Image-condition diagnostic: distance of v_s - r to Im(Q).
template <typename Scalar>
Scalar check_image_condition(const Socc<Scalar>& s, Scalar cond_guard = Scalar(1e12)) {
  return detail::universal_core(s, cond_guard).im_residual;
}

/// Universal controller for one SOCC. Throws SingularQError when the
/// condition-number guard trips (the a = 0 worst-case embedding always
/// does; use universal_control_affine for that branch), ImageConditionError
/// when v_s - r is farther than im_tol from Im(Q), and, when
/// check_strict_feasibility is set, NotStrictlyFeasibleError if the cone's
/// phase-I value is not strictly negative. On success the residual of the
/// returned control is bounded by im_tol * (1 + ||tilde_b||).
template <typename Scalar>
std::pair<Vector<Scalar>, UniversalIntermediates<Scalar>> universal_control(
    const Socc<Scalar>& s, Scalar im_tol = Scalar(1e-9), bool check_strict_feasibility = false,
    const SolverConfig<Scalar>& cfg = {}, Scalar cond_guard = Scalar(1e12)) {
  if (!(im_tol > Scalar(0))) throw DomainError("universal_control: im_tol must be > 0");
  if (check_strict_feasibility) {
    const SoccProgram<Scalar> prog({s}, s.input_dim());
    const Phase1Result<Scalar> ph = phase1(prog, cfg);
    if (!(ph.t_star < -cfg.tol_strict))
      throw NotStrictlyFeasibleError("universal_control: SOCC is not strictly feasible");
  }
  UniversalIntermediates<Scalar> out = detail::universal_core(s, cond_guard);
  if (out.im_residual > im_tol)
    throw ImageConditionError("universal_control: v_s - r is not within tolerance of Im(Q)");
  return {out.u_s, std::move(out)};
}

/// Shortcut for the worst-case form a||u|| <= bu + c with a > 0: the lift
/// is the identity block scaled by a, so everything stays in R^m.
template <typename Scalar>
Vector<Scalar> universal_control_worstcase(Scalar a, const RowVector<Scalar>& b, Scalar c) {
  if (!(a > Scalar(0))) throw DomainError("universal_control_worstcase: requires a > 0");
  const RowVector<Scalar> tb = b / a;
  const Scalar nb = tb.norm();
  if (nb <= Scalar(1)) return Vector<Scalar>::Zero(b.size());
  const Scalar bar = (nb - Scalar(1)) * nb;
  return detail::universal_phi(c, bar) * tb.transpose() / a;
}

/// Affine branch (a = 0, i.e. 0 <= bu + c): the min-norm satisfier is 0
/// when c >= 0 and the half-space projection otherwise.
template <typename Scalar>
Vector<Scalar> universal_control_affine(const RowVector<Scalar>& b, Scalar c) {
  if (c >= Scalar(0)) return Vector<Scalar>::Zero(b.size());
  const Scalar bn2 = b.squaredNorm();
  if (bn2 <= Scalar(0))
    throw NotStrictlyFeasibleError("universal_control_affine: 0 <= c is violated and b = 0");
  return (-c / bn2) * b.transpose();
}

}  // namespace safesocp
