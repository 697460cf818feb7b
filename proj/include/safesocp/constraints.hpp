#pragma once

// Second-order cone constraints at a state, built either from worst-case
// error bounds or from GP-form mean/variance terms, plus the embedding of
// the worst-case form into the general ||Qu+r|| <= bu+c shape.

#include "safesocp/core.hpp"

namespace safesocp {

/// One second-order cone constraint ||Q u + r|| <= b u + c in the input u.
/// Q is (m+1) x m, r in R^{m+1}, b a row vector, c a scalar.
template <typename Scalar>
struct Socc {
  Matrix<Scalar> Q;
  Vector<Scalar> r;
  RowVector<Scalar> b;
  Scalar c = Scalar(0);

  Socc() = default;
  Socc(Matrix<Scalar> Q_, Vector<Scalar> r_, RowVector<Scalar> b_, Scalar c_)
      : Q(std::move(Q_)), r(std::move(r_)), b(std::move(b_)), c(c_) {
    const Eigen::Index m = Q.cols();
    if (Q.rows() != m + 1) throw DimensionError("Socc: Q must be (m+1) x m");
    if (r.size() != m + 1) throw DimensionError("Socc: r must have length m+1");
    if (b.size() != m) throw DimensionError("Socc: b must have length m");
    if (!Q.allFinite() || !r.allFinite() || !b.allFinite() || !std::isfinite(static_cast<double>(c)))
      throw DomainError("Socc: entries must be finite");
  }

  int input_dim() const { return static_cast<int>(Q.cols()); }
};

using SoccD = Socc<double>;

/// ||Q u + r|| - (b u + c); the constraint holds at u iff this is <= 0.
template <typename Scalar>
Scalar socc_residual(const Socc<Scalar>& s, const Vector<Scalar>& u) {
  if (u.size() != s.Q.cols()) throw DimensionError("socc_residual: u dimension mismatch");
  return (s.Q * u + s.r).norm() - (s.b.dot(u) + s.c);
}

/// Pointwise estimates of the dynamics and barrier data together with
/// certified error-radius functions. Spectral norm is used wherever a
/// matrix norm enters (consistent with the Lie-derivative bounds).
template <typename Scalar>
struct WorstCaseModel {
  using StateFn = std::function<Vector<Scalar>(const Vector<Scalar>&)>;
  using MatFn = std::function<Matrix<Scalar>(const Vector<Scalar>&)>;
  using ScalarFn = std::function<Scalar(const Vector<Scalar>&)>;

  SystemDims dims;
  StateFn fhat;
  MatFn ghat;
  ScalarFn hhat;
  StateFn gradh_hat;
  ScalarFn e_f;
  ScalarFn e_g;
  ScalarFn e_h;
  ScalarFn e_gradh;
};

/// GP-prediction terms for the two constraint residuals: affine mean
/// gamma^T [1; u] and variance ||G [1; u]||^2, plus the scaling beta(delta).
/// These are inputs; nothing here fits a GP.
template <typename Scalar>
struct GpTerms {
  using VecFn = std::function<Vector<Scalar>(const Vector<Scalar>&)>;
  using MatFn = std::function<Matrix<Scalar>(const Vector<Scalar>&)>;

  VecFn gamma_V;  // length m+1
  MatFn G_V;      // (m+1) x (m+1)
  VecFn gamma_h;
  MatFn G_h;
  Scalar beta_delta = Scalar(1);
  Scalar delta = Scalar(0.05);

  void validate() const {
    if (!(beta_delta > Scalar(0))) throw DomainError("GpTerms: beta_delta must be > 0");
    if (!(delta > Scalar(0) && delta < Scalar(1))) throw DomainError("GpTerms: delta must lie in (0,1)");
  }
};

/// Coefficients (a, b, c) of the worst-case cone a||u|| <= bu + c at a state.
template <typename Scalar>
struct WorstCaseCoeffs {
  Scalar a = Scalar(0);
  RowVector<Scalar> b;
  Scalar c = Scalar(0);
};

namespace detail {
template <typename Scalar>
Scalar spectral_norm(const Matrix<Scalar>& A) {
  if (A.size() == 0) return Scalar(0);
  return A.jacobiSvd().singularValues()(0);
}

template <typename Scalar>
void require_state(const Vector<Scalar>& x, int n, const char* where) {
  if (x.size() != n) throw DimensionError(std::string(where) + ": state dimension mismatch");
  if (!x.allFinite()) throw DomainError(std::string(where) + ": state must be finite");
}
}  // namespace detail

/// Stability-side worst-case coefficients:
///   a_V = ||gradV|| e_g,  b_V = -gradV^T ghat,
///   c_V = -||gradV|| e_f - gradV^T fhat - W.
template <typename Scalar>
WorstCaseCoeffs<Scalar> worstcase_clf_coeffs(const WorstCaseModel<Scalar>& model,
                                             const ClfSpec<Scalar>& clf,
                                             const Vector<Scalar>& x) {
  detail::require_state(x, model.dims.n, "worstcase_clf_coeffs");
  if (clf.n != model.dims.n) throw DimensionError("worstcase_clf_coeffs: clf dimension mismatch");
  const Vector<Scalar> grad = clf.gradV(x);
  const Scalar grad_norm = grad.norm();
  WorstCaseCoeffs<Scalar> out;
  out.a = grad_norm * model.e_g(x);
  out.b = -(grad.transpose() * model.ghat(x));
  out.c = -grad_norm * model.e_f(x) - grad.dot(model.fhat(x)) - clf.W(x);
  return out;
}

/// Safety-side worst-case coefficients, including the alpha(hhat - e_h)
/// term in c_h.
template <typename Scalar>
WorstCaseCoeffs<Scalar> worstcase_cbf_coeffs(const WorstCaseModel<Scalar>& model,
                                             const CbfSpec<Scalar>& cbf,
                                             const Vector<Scalar>& x) {
  detail::require_state(x, model.dims.n, "worstcase_cbf_coeffs");
  const Vector<Scalar> gradh = model.gradh_hat(x);
  const Scalar gradh_norm = gradh.norm();
  const Vector<Scalar> fhat = model.fhat(x);
  const Matrix<Scalar> ghat = model.ghat(x);
  const Scalar e_f = model.e_f(x);
  const Scalar e_g = model.e_g(x);
  const Scalar e_dh = model.e_gradh(x);
  const Scalar ghat_norm = detail::spectral_norm(ghat);
  WorstCaseCoeffs<Scalar> out;
  out.a = e_dh * e_g + e_dh * ghat_norm + gradh_norm * e_g;
  out.b = gradh.transpose() * ghat;
  out.c = -e_dh * e_f - e_dh * fhat.norm() - gradh_norm * e_f + gradh.dot(fhat) +
          cbf.alpha(model.hhat(x) - model.e_h(x));
  return out;
}

/// Embed a||u|| <= bu + c into the general form: Q = a [I_m; 0^T], r = 0.
template <typename Scalar>
Socc<Scalar> embed_worstcase(Scalar a, const RowVector<Scalar>& b, Scalar c, int m) {
  if (a < Scalar(0)) throw DomainError("embed_worstcase: a must be >= 0");
  if (b.size() != m) throw DimensionError("embed_worstcase: b must have length m");
  Matrix<Scalar> Q = Matrix<Scalar>::Zero(m + 1, m);
  Q.topRows(m) = a * Matrix<Scalar>::Identity(m, m);
  return Socc<Scalar>(std::move(Q), Vector<Scalar>::Zero(m + 1), b, c);
}

template <typename Scalar>
Socc<Scalar> embed_worstcase(const WorstCaseCoeffs<Scalar>& k, int m) {
  return embed_worstcase(k.a, k.b, k.c, m);
}

/// GP-form stability cone: Q = beta * G_{V,2:(m+1)}, r = beta * G_{V,1},
/// b = -L_ghat V - gamma_{V,2:(m+1)}^T, c = -L_fhat V - W - gamma_{V,1}.
template <typename Scalar>
Socc<Scalar> gp_clf_socc(const GpTerms<Scalar>& terms, const ClfSpec<Scalar>& clf,
                         const WorstCaseModel<Scalar>& model, const Vector<Scalar>& x) {
  terms.validate();
  detail::require_state(x, model.dims.n, "gp_clf_socc");
  const int m = model.dims.m;
  const Matrix<Scalar> G = terms.G_V(x);
  if (G.rows() != m + 1 || G.cols() != m + 1) throw DimensionError("gp_clf_socc: G_V must be (m+1)x(m+1)");
  const Vector<Scalar> gamma = terms.gamma_V(x);
  if (gamma.size() != m + 1) throw DimensionError("gp_clf_socc: gamma_V must have length m+1");
  const Vector<Scalar> grad = clf.gradV(x);
  Matrix<Scalar> Q = terms.beta_delta * G.rightCols(m);
  Vector<Scalar> r = terms.beta_delta * G.col(0);
  RowVector<Scalar> b = -(grad.transpose() * model.ghat(x)) - gamma.tail(m).transpose();
  const Scalar c = -grad.dot(model.fhat(x)) - clf.W(x) - gamma(0);
  return Socc<Scalar>(std::move(Q), std::move(r), std::move(b), c);
}

/// GP-form safety cone: b = gradh_hat^T ghat + gamma_{h,2:(m+1)}^T,
/// c = gradh_hat^T fhat + gamma_{h,1} + alpha(hhat).
template <typename Scalar>
Socc<Scalar> gp_cbf_socc(const GpTerms<Scalar>& terms, const CbfSpec<Scalar>& cbf,
                         const WorstCaseModel<Scalar>& model, const Vector<Scalar>& x) {
  terms.validate();
  detail::require_state(x, model.dims.n, "gp_cbf_socc");
  const int m = model.dims.m;
  const Matrix<Scalar> G = terms.G_h(x);
  if (G.rows() != m + 1 || G.cols() != m + 1) throw DimensionError("gp_cbf_socc: G_h must be (m+1)x(m+1)");
  const Vector<Scalar> gamma = terms.gamma_h(x);
  if (gamma.size() != m + 1) throw DimensionError("gp_cbf_socc: gamma_h must have length m+1");
  const Vector<Scalar> gradh = model.gradh_hat(x);
  Matrix<Scalar> Q = terms.beta_delta * G.rightCols(m);
  Vector<Scalar> r = terms.beta_delta * G.col(0);
  RowVector<Scalar> b = gradh.transpose() * model.ghat(x) + gamma.tail(m).transpose();
  const Scalar c = gradh.dot(model.fhat(x)) + gamma(0) + cbf.alpha(model.hhat(x));
  return Socc<Scalar>(std::move(Q), std::move(r), std::move(b), c);
}

}  // namespace safesocp
