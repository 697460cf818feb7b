#pragma once

// Min-norm control under p second-order cone constraints, solved with a
// primal log-barrier on the squared cone form (d_i = (b_i u + c_i)^2 -
// ||Q_i u + r_i||^2 > 0), Newton steps with backtracking, a phase-I
// problem deciding strict feasibility, and an active-set KKT polish.
// Problem sizes here are tiny (m <= 3, p <= 4 in every scenario), so the
// implementation favors robustness over scalability.

#include "safesocp/constraints.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace safesocp {

template <typename Scalar>
struct SoccProgram {
  std::vector<Socc<Scalar>> constraints;
  int m = 0;

  SoccProgram() = default;
  SoccProgram(std::vector<Socc<Scalar>> constraints_, int m_)
      : constraints(std::move(constraints_)), m(m_) {
    if (constraints.empty()) throw DomainError("SoccProgram: need at least one constraint");
    for (const auto& s : constraints)
      if (s.input_dim() != m) throw DimensionError("SoccProgram: mixed input dimensions");
  }

  int p() const { return static_cast<int>(constraints.size()); }

  Scalar max_residual(const Vector<Scalar>& u) const {
    Scalar worst = -std::numeric_limits<Scalar>::infinity();
    for (const auto& s : constraints) worst = std::max(worst, socc_residual(s, u));
    return worst;
  }
};

template <typename Scalar>
struct SolverConfig {
  Scalar tol_feas = Scalar(1e-8);
  Scalar tol_kkt = Scalar(1e-8);
  Scalar tol_strict = Scalar(1e-9);
  // Newton iteration cap per barrier stage.
  int max_iterations = 200;
  Scalar barrier_t0 = Scalar(1);
  Scalar barrier_scale = Scalar(10);
  Scalar armijo = Scalar(0.25);
  Scalar backtrack = Scalar(0.5);
  Scalar t_cap = Scalar(1e6);       // phase-1 objective floor
  Scalar box_radius = Scalar(1e6);  // phase-1 auxiliary bound on ||u||

  void validate() const {
    if (!(tol_feas > Scalar(0) && tol_kkt > Scalar(0) && tol_strict > Scalar(0)))
      throw DomainError("SolverConfig: tolerances must be positive");
    if (max_iterations < 1) throw DomainError("SolverConfig: max_iterations must be >= 1");
  }
};

enum class SolveStatus { Feasible, Infeasible, MaxIterations };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Feasible: return "Feasible";
    case SolveStatus::Infeasible: return "Infeasible";
    default: return "MaxIterations";
  }
}

template <typename Scalar>
struct Phase1Result {
  Scalar t_star = std::numeric_limits<Scalar>::quiet_NaN();
  Vector<Scalar> u_witness;  // attains residuals <= t_star + tol_feas
  // Strictly feasible point of moderate norm when t_star < 0; preferred
  // warm start for the min-norm solve.
  Vector<Scalar> u_interior;
  bool converged = false;
};

template <typename Scalar>
struct SolveResult {
  SolveStatus status = SolveStatus::MaxIterations;
  Vector<Scalar> u_star;       // populated when Feasible
  Vector<Scalar> multipliers;  // one per constraint, >= 0, when Feasible
  Scalar kkt_residual = std::numeric_limits<Scalar>::infinity();
  Scalar phase1_value = std::numeric_limits<Scalar>::quiet_NaN();
  bool marginal = false;  // |t*| <= tol_strict
};

/// Squared reformulation of one cone at a point:
///   g1 = u^T (Q^T Q - b^T b) u + ||r||^2 + 2 (Q^T r - c b^T)^T u - c^2
///   g2 = -b u - c
/// (g1 <= 0 and g2 <= 0) holds iff the cone residual is <= 0.
template <typename Scalar>
std::pair<Scalar, Scalar> squared_constraints(const Socc<Scalar>& s, const Vector<Scalar>& u) {
  if (u.size() != s.Q.cols()) throw DimensionError("squared_constraints: u dimension mismatch");
  const Matrix<Scalar> M = s.Q.transpose() * s.Q - s.b.transpose() * s.b;
  const Vector<Scalar> w = s.Q.transpose() * s.r - s.c * s.b.transpose();
  const Scalar g1 = u.dot(M * u) + s.r.squaredNorm() + Scalar(2) * w.dot(u) - s.c * s.c;
  const Scalar g2 = -s.b.dot(u) - s.c;
  return {g1, g2};
}

namespace detail {

// Generalized internal cone ||A z + r|| <= b z + c (A may have any row count).
template <typename Scalar>
struct Cone {
  Matrix<Scalar> A;
  Vector<Scalar> r;
  RowVector<Scalar> b;
  Scalar c;
};

template <typename Scalar>
bool cone_interior(const Cone<Scalar>& k, const Vector<Scalar>& z) {
  const Scalar s = k.b.dot(z) + k.c;
  if (!(s > Scalar(0))) return false;
  return (k.A * z + k.r).squaredNorm() < s * s;
}

template <typename Scalar>
struct BarrierEval {
  Scalar value;
  Vector<Scalar> grad;
  Matrix<Scalar> hess;
  bool in_domain;
};

template <typename Scalar>
BarrierEval<Scalar> eval_barrier(const std::vector<Cone<Scalar>>& cones, const Vector<Scalar>& z,
                                 bool need_derivatives) {
  const int d = static_cast<int>(z.size());
  BarrierEval<Scalar> out{Scalar(0), Vector<Scalar>::Zero(d), Matrix<Scalar>::Zero(d, d), true};
  for (const auto& k : cones) {
    const Scalar s = k.b.dot(z) + k.c;
    const Vector<Scalar> v = k.A * z + k.r;
    const Scalar di = s * s - v.squaredNorm();
    if (!(s > Scalar(0)) || !(di > Scalar(0))) {
      out.in_domain = false;
      return out;
    }
    out.value -= std::log(di);
    if (need_derivatives) {
      const Vector<Scalar> grad_d = Scalar(2) * s * k.b.transpose() - Scalar(2) * k.A.transpose() * v;
      out.grad -= grad_d / di;
      out.hess += (Scalar(2) * k.A.transpose() * k.A - Scalar(2) * k.b.transpose() * k.b) / di +
                  grad_d * grad_d.transpose() / (di * di);
    }
  }
  return out;
}

// Minimize t_path * f0(z) + barrier(z) by damped Newton from a strictly
// feasible start. f0 is 0.5||z||^2 when quadratic, q^T z otherwise.
// Returns false if the per-stage iteration cap was exhausted before the
// Newton decrement dropped below tolerance.
template <typename Scalar>
bool newton_stage(const std::vector<Cone<Scalar>>& cones, bool quadratic, const Vector<Scalar>& q,
                  Scalar t_path, Vector<Scalar>& z, const SolverConfig<Scalar>& cfg) {
  const int d = static_cast<int>(z.size());
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    BarrierEval<Scalar> be = eval_barrier(cones, z, true);
    if (!be.in_domain) return false;
    Scalar f0 = quadratic ? Scalar(0.5) * z.squaredNorm() : q.dot(z);
    Scalar phi = t_path * f0 + be.value;
    Vector<Scalar> g = be.grad + (quadratic ? Vector<Scalar>(t_path * z) : Vector<Scalar>(t_path * q));
    Matrix<Scalar> H = be.hess;
    if (quadratic) H += t_path * Matrix<Scalar>::Identity(d, d);

    Vector<Scalar> dz;
    Scalar reg = Scalar(0);
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::LDLT<Matrix<Scalar>> ldlt(H + reg * Matrix<Scalar>::Identity(d, d));
      if (ldlt.info() == Eigen::Success) {
        dz = ldlt.solve(-g);
        if (dz.allFinite() && g.dot(dz) < Scalar(0)) break;
      }
      reg = (reg == Scalar(0)) ? Scalar(1e-10) * (Scalar(1) + H.norm()) : reg * Scalar(100);
      dz.setZero();
    }
    if (dz.size() == 0 || dz.isZero(Scalar(0)) ) {
      // gradient may already be (numerically) zero
      return g.norm() <= Scalar(1e-12) * (Scalar(1) + std::abs(phi));
    }

    const Scalar decrement2 = -g.dot(dz);
    if (decrement2 * Scalar(0.5) <= Scalar(1e-12) * (Scalar(1) + std::abs(phi))) return true;

    Scalar step = Scalar(1);
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      Vector<Scalar> z_new = z + step * dz;
      BarrierEval<Scalar> be_new = eval_barrier(cones, z_new, false);
      if (be_new.in_domain) {
        const Scalar f0_new =
            quadratic ? Scalar(0.5) * z_new.squaredNorm() : q.dot(z_new);
        const Scalar phi_new = t_path * f0_new + be_new.value;
        if (phi_new <= phi + cfg.armijo * step * g.dot(dz)) {
          z = z_new;
          accepted = true;
          break;
        }
      }
      step *= cfg.backtrack;
    }
    if (!accepted) return true;  // no acceptable step left: at numerical stationarity
  }
  return false;
}

// Path-following outer loop; gap_target bounds the final suboptimality
// (each cone contributes barrier parameter 2).
template <typename Scalar>
bool barrier_minimize(const std::vector<Cone<Scalar>>& cones, bool quadratic,
                      const Vector<Scalar>& q, Vector<Scalar>& z, const SolverConfig<Scalar>& cfg,
                      Scalar gap_target) {
  const Scalar nu = Scalar(2) * static_cast<Scalar>(cones.size());
  Scalar t_path = cfg.barrier_t0;
  bool ok = true;
  for (int stage = 0; stage < 64; ++stage) {
    ok = newton_stage(cones, quadratic, q, t_path, z, cfg);
    if (!ok) return false;
    if (nu / t_path <= gap_target) return true;
    t_path *= cfg.barrier_scale;
  }
  return ok;
}

// Gradient of the (nonsquared) residual ||Qu+r|| - bu - c; at cone points
// with ||Qu+r|| ~ 0 the squared-form surrogate applies and the gradient
// reduces to the affine part -b^T.
template <typename Scalar>
Vector<Scalar> residual_gradient(const Socc<Scalar>& s, const Vector<Scalar>& u) {
  const Vector<Scalar> v = s.Q * u + s.r;
  const Scalar nv = v.norm();
  if (nv > Scalar(1e-12)) return s.Q.transpose() * v / nv - s.b.transpose();
  return -s.b.transpose();
}

template <typename Scalar>
Matrix<Scalar> residual_hessian(const Socc<Scalar>& s, const Vector<Scalar>& u) {
  const int m = s.input_dim();
  const Vector<Scalar> v = s.Q * u + s.r;
  const Scalar nv = v.norm();
  if (nv <= Scalar(1e-12)) return Matrix<Scalar>::Zero(m, m);
  const Vector<Scalar> qv = s.Q.transpose() * v;
  return (s.Q.transpose() * s.Q - qv * qv.transpose() / (nv * nv)) / nv;
}

// Best nonnegative-multiplier stationarity fit over subsets of candidate
// active constraints; p <= 4 in practice so enumeration is exact.
template <typename Scalar>
void fit_multipliers(const SoccProgram<Scalar>& prog, const Vector<Scalar>& u,
                     const std::vector<int>& candidates, Vector<Scalar>& lambda_out,
                     Scalar& kkt_out, std::vector<int>& active_out) {
  const int m = prog.m;
  std::vector<Vector<Scalar>> grads(prog.p());
  for (int i : candidates) grads[i] = residual_gradient(prog.constraints[i], u);

  Scalar best = u.norm();
  Vector<Scalar> best_lambda = Vector<Scalar>::Zero(prog.p());
  std::vector<int> best_active;

  const int nc = static_cast<int>(candidates.size());
  for (int mask = 1; mask < (1 << nc); ++mask) {
    std::vector<int> subset;
    for (int j = 0; j < nc; ++j)
      if (mask & (1 << j)) subset.push_back(candidates[j]);
    Matrix<Scalar> D(m, subset.size());
    for (std::size_t j = 0; j < subset.size(); ++j) D.col(j) = grads[subset[j]];
    // minimize ||u + D lambda|| via least squares, then require lambda >= 0
    Vector<Scalar> lam = D.colPivHouseholderQr().solve(-u);
    bool nonneg = true;
    for (Eigen::Index j = 0; j < lam.size(); ++j) {
      if (lam[j] < -Scalar(1e-9)) nonneg = false;
      lam[j] = std::max(lam[j], Scalar(0));
    }
    if (!nonneg) continue;
    const Scalar res = (u + D * lam).norm();
    if (res < best) {
      best = res;
      best_lambda.setZero();
      for (std::size_t j = 0; j < subset.size(); ++j) best_lambda[subset[j]] = lam[j];
      best_active = subset;
    }
  }
  lambda_out = best_lambda;
  kkt_out = best;
  active_out = best_active;
}

// Newton refinement of the KKT system with a fixed active set:
//   u + sum_i lambda_i grad(res_i)(u) = 0,   res_i(u) = 0 for i active.
template <typename Scalar>
bool polish_active_set(const SoccProgram<Scalar>& prog, const std::vector<int>& active,
                       Vector<Scalar>& u, Vector<Scalar>& lambda) {
  const int m = prog.m;
  const int na = static_cast<int>(active.size());
  if (na == 0) {
    u.setZero();
    lambda.setZero();
    return prog.max_residual(u) <= Scalar(0);
  }
  Vector<Scalar> uw = u;
  Vector<Scalar> lw(na);
  for (int j = 0; j < na; ++j) lw[j] = lambda[active[j]];

  auto assemble = [&](const Vector<Scalar>& uu, const Vector<Scalar>& ll, Vector<Scalar>& F) {
    Matrix<Scalar> D(m, na);
    for (int j = 0; j < na; ++j) D.col(j) = residual_gradient(prog.constraints[active[j]], uu);
    F.resize(m + na);
    F.head(m) = uu + D * ll;
    for (int j = 0; j < na; ++j) F[m + j] = socc_residual(prog.constraints[active[j]], uu);
    return D;
  };

  Vector<Scalar> F;
  Matrix<Scalar> D = assemble(uw, lw, F);
  Scalar fnorm = F.norm();
  for (int iter = 0; iter < 25 && fnorm > Scalar(1e-14); ++iter) {
    Matrix<Scalar> J = Matrix<Scalar>::Zero(m + na, m + na);
    Matrix<Scalar> Huu = Matrix<Scalar>::Identity(m, m);
    for (int j = 0; j < na; ++j)
      Huu += lw[j] * residual_hessian(prog.constraints[active[j]], uw);
    J.topLeftCorner(m, m) = Huu;
    J.block(0, m, m, na) = D;
    J.block(m, 0, na, m) = D.transpose();
    Eigen::FullPivLU<Matrix<Scalar>> lu(J);
    if (!lu.isInvertible()) return false;
    const Vector<Scalar> dz = lu.solve(-F);
    Scalar step = Scalar(1);
    bool improved = false;
    for (int ls = 0; ls < 12; ++ls) {
      Vector<Scalar> u_new = uw + step * dz.head(m);
      Vector<Scalar> l_new = lw + step * dz.tail(na);
      Vector<Scalar> F_new;
      Matrix<Scalar> D_new = assemble(u_new, l_new, F_new);
      if (F_new.allFinite() && F_new.norm() < fnorm) {
        uw = u_new;
        lw = l_new;
        F = F_new;
        D = D_new;
        fnorm = F.norm();
        improved = true;
        break;
      }
      step *= Scalar(0.5);
    }
    if (!improved) break;
  }
  for (int j = 0; j < na; ++j)
    if (lw[j] < -Scalar(1e-8)) return false;

  Vector<Scalar> lam_full = Vector<Scalar>::Zero(prog.p());
  for (int j = 0; j < na; ++j) lam_full[active[j]] = std::max(lw[j], Scalar(0));
  u = uw;
  lambda = lam_full;
  return true;
}

}  // namespace detail

namespace detail {

// Assemble the z = (u, t) cones of the capped phase-I problem:
// residual_i(u) <= t, t >= -cap, ||u|| <= box.
template <typename Scalar>
std::vector<Cone<Scalar>> phase1_cones(const SoccProgram<Scalar>& prog, Scalar cap, Scalar box) {
  const int m = prog.m;
  const int d = m + 1;
  std::vector<Cone<Scalar>> cones;
  cones.reserve(prog.p() + 2);
  for (const auto& s : prog.constraints) {
    Cone<Scalar> k;
    k.A = Matrix<Scalar>::Zero(s.Q.rows(), d);
    k.A.leftCols(m) = s.Q;
    k.r = s.r;
    k.b = RowVector<Scalar>::Zero(d);
    k.b.head(m) = s.b;
    k.b[m] = Scalar(1);
    k.c = s.c;
    cones.push_back(std::move(k));
  }
  Cone<Scalar> capc;  // 0 <= t + cap
  capc.A = Matrix<Scalar>::Zero(1, d);
  capc.r = Vector<Scalar>::Zero(1);
  capc.b = RowVector<Scalar>::Zero(d);
  capc.b[m] = Scalar(1);
  capc.c = cap;
  cones.push_back(std::move(capc));
  Cone<Scalar> boxc;  // ||u|| <= box
  boxc.A = Matrix<Scalar>::Zero(m, d);
  boxc.A.leftCols(m) = Matrix<Scalar>::Identity(m, m);
  boxc.r = Vector<Scalar>::Zero(m);
  boxc.b = RowVector<Scalar>::Zero(d);
  boxc.c = box;
  cones.push_back(std::move(boxc));
  return cones;
}

// Strict recession direction of the residual system: d with ||d|| <= 1 and
// ||Q_i d|| - b_i d < 0 for every cone (each cone normalized by its
// coefficient scale). Along such a d every residual decreases at least
// linearly, so the phase-I optimum is -infinity. Returns the normalized
// optimum (negative iff a strict direction exists) and the direction.
template <typename Scalar>
std::pair<Scalar, Vector<Scalar>> recession_direction(const SoccProgram<Scalar>& prog,
                                                      const SolverConfig<Scalar>& cfg) {
  const int m = prog.m;
  const int d = m + 1;  // z = (dir, s)
  std::vector<Cone<Scalar>> cones;
  cones.reserve(prog.p() + 2);
  for (const auto& s : prog.constraints) {
    const Scalar w = std::max(s.Q.norm() + s.b.norm(), Scalar(1e-12));
    Cone<Scalar> k;
    k.A = Matrix<Scalar>::Zero(s.Q.rows(), d);
    k.A.leftCols(m) = s.Q / w;
    k.r = Vector<Scalar>::Zero(s.Q.rows());
    k.b = RowVector<Scalar>::Zero(d);
    k.b.head(m) = s.b / w;
    k.b[m] = Scalar(1);
    k.c = Scalar(0);
    cones.push_back(std::move(k));
  }
  Cone<Scalar> capc;  // s >= -4 (slopes are normalized, so |s*| <= 2)
  capc.A = Matrix<Scalar>::Zero(1, d);
  capc.r = Vector<Scalar>::Zero(1);
  capc.b = RowVector<Scalar>::Zero(d);
  capc.b[m] = Scalar(1);
  capc.c = Scalar(4);
  cones.push_back(std::move(capc));
  Cone<Scalar> ball;  // ||dir|| <= 1
  ball.A = Matrix<Scalar>::Zero(m, d);
  ball.A.leftCols(m) = Matrix<Scalar>::Identity(m, m);
  ball.r = Vector<Scalar>::Zero(m);
  ball.b = RowVector<Scalar>::Zero(d);
  ball.c = Scalar(1);
  cones.push_back(std::move(ball));

  Vector<Scalar> z = Vector<Scalar>::Zero(d);
  z[m] = Scalar(1);  // residual slopes at dir = 0 are all 0
  Vector<Scalar> q = Vector<Scalar>::Zero(d);
  q[m] = Scalar(1);
  barrier_minimize(cones, false, q, z, cfg, Scalar(1e-11));
  return {z[m], z.head(m)};
}

}  // namespace detail

/// Phase-I problem: minimize t subject to residual_i(u) <= t for all i.
/// Strict compatibility of the program holds iff t* < 0. When the optimum
/// is unbounded below (a strict recession direction exists) the value is
/// truncated and reported as -t_cap, with a witness constructed along the
/// ray. Values of magnitude <= 1 are resolved to the barrier gap; deeper
/// attained values are refined with warm-started larger caps and carry
/// floating-point-relative accuracy instead of absolute.
template <typename Scalar>
Phase1Result<Scalar> phase1(const SoccProgram<Scalar>& prog, const SolverConfig<Scalar>& cfg = {}) {
  cfg.validate();
  const int m = prog.m;

  Vector<Scalar> q = Vector<Scalar>::Zero(m + 1);
  q[m] = Scalar(1);
  const Scalar gap = std::min(cfg.tol_kkt, cfg.tol_strict) * Scalar(0.1);

  Vector<Scalar> z = Vector<Scalar>::Zero(m + 1);
  z[m] = prog.max_residual(Vector<Scalar>::Zero(m)) + Scalar(1);

  // Bounded pass at unit cap; the ball on u escalates only if it binds
  // while the cap does not (optimum attained at large ||u||).
  Phase1Result<Scalar> out;
  bool cap_active = false;
  for (Scalar box : {Scalar(10), Scalar(1e3), Scalar(10) * cfg.t_cap}) {
    out.converged = detail::barrier_minimize(detail::phase1_cones(prog, Scalar(1), box), false, q,
                                             z, cfg, gap);
    cap_active = z[m] <= Scalar(-0.95);
    const bool box_active = z.head(m).norm() >= Scalar(0.95) * box;
    if (cap_active || !box_active || box >= Scalar(10) * cfg.t_cap) break;
  }
  out.u_interior = z.head(m);
  out.u_witness = z.head(m);
  out.t_star = z[m];
  if (!cap_active) return out;

  // Deep regime. A strict recession direction settles it without travel.
  auto [slope, dir] = detail::recession_direction(prog, cfg);
  if (slope < Scalar(-1e-7)) {
    Scalar tau_req = Scalar(0);
    bool rates_ok = true;
    for (const auto& s : prog.constraints) {
      const Scalar rate = s.b.dot(dir) - (s.Q * dir).norm();  // residual slope is -rate
      if (!(rate > Scalar(0))) {
        rates_ok = false;
        break;
      }
      const Scalar res0 = socc_residual(s, out.u_interior);
      tau_req = std::max(tau_req, (res0 + cfg.t_cap) / rate);
    }
    if (rates_ok) {
      out.u_witness = out.u_interior + tau_req * dir;
      out.t_star = std::max(prog.max_residual(out.u_witness), -cfg.t_cap);
      if (out.t_star <= -cfg.t_cap * (Scalar(1) - Scalar(1e-6))) out.t_star = -cfg.t_cap;
      return out;
    }
  }

  // Attained deep value: warm-started escalation of the cap.
  for (Scalar cap : {Scalar(1e3), cfg.t_cap}) {
    if (cap > cfg.t_cap) break;
    z[m] = std::max(z[m], -cap * Scalar(0.5));
    detail::barrier_minimize(detail::phase1_cones(prog, cap, Scalar(10) * cfg.t_cap), false, q, z,
                             cfg, gap);
    if (z[m] > -Scalar(0.95) * cap) break;
  }
  out.u_witness = z.head(m);
  out.t_star = z[m];
  if (out.t_star <= -cfg.t_cap * (Scalar(1) - Scalar(1e-3))) out.t_star = -cfg.t_cap;
  return out;
}

/// Min-norm program: u* = argmin 0.5||u||^2 subject to the cones. Runs
/// phase-I first; strict feasibility (t* < -tol_strict) is required before
/// the barrier + polish path runs. Marginal programs (|t*| <= tol_strict)
/// are reported Infeasible with the marginal flag set.
template <typename Scalar>
SolveResult<Scalar> solve_min_norm(const SoccProgram<Scalar>& prog,
                                   const SolverConfig<Scalar>& cfg = {}) {
  cfg.validate();
  SolveResult<Scalar> out;

  const Phase1Result<Scalar> ph = phase1(prog, cfg);
  out.phase1_value = ph.t_star;
  out.marginal = std::abs(ph.t_star) <= cfg.tol_strict;
  if (!ph.converged) {
    out.status = SolveStatus::MaxIterations;
    return out;
  }
  if (!(ph.t_star < -cfg.tol_strict)) {
    out.status = SolveStatus::Infeasible;
    return out;
  }

  const int m = prog.m;
  std::vector<detail::Cone<Scalar>> cones;
  cones.reserve(prog.p());
  for (const auto& s : prog.constraints) cones.push_back({s.Q, s.r, s.b, s.c});

  Vector<Scalar> u = ph.u_interior.size() == m ? ph.u_interior : ph.u_witness;
  const Vector<Scalar> q = Vector<Scalar>::Zero(m);
  const Scalar gap = std::min(cfg.tol_kkt * Scalar(0.01), Scalar(1e-10));
  if (!detail::barrier_minimize(cones, true, q, u, cfg, gap)) {
    out.status = SolveStatus::MaxIterations;
    return out;
  }

  // Multiplier fit + polish. Candidates: constraints whose barrier
  // multiplier estimate 1/(t |res|) is non-negligible, i.e. small |res|.
  std::vector<int> candidates;
  for (int i = 0; i < prog.p(); ++i) {
    const Scalar res = socc_residual(prog.constraints[i], u);
    if (res > -Scalar(1e-4) * (Scalar(1) + u.norm())) candidates.push_back(i);
  }
  Vector<Scalar> lambda;
  Scalar kkt = u.norm();
  std::vector<int> active;
  detail::fit_multipliers(prog, u, candidates, lambda, kkt, active);

  Vector<Scalar> u_polished = u;
  Vector<Scalar> lambda_polished = lambda;
  if (detail::polish_active_set(prog, active, u_polished, lambda_polished)) {
    const Scalar feas = prog.max_residual(u_polished);
    if (feas <= cfg.tol_feas) {
      Vector<Scalar> lam2;
      Scalar kkt2;
      std::vector<int> act2;
      detail::fit_multipliers(prog, u_polished, active.empty() ? candidates : active, lam2, kkt2,
                              act2);
      if (kkt2 <= kkt || active.empty()) {
        u = u_polished;
        lambda = lam2;
        kkt = kkt2;
      }
    }
  }

  out.status = SolveStatus::Feasible;
  out.u_star = u;
  out.multipliers = lambda;
  out.kkt_residual = kkt;
  return out;
}

struct EmptyFeasibleGrid : DomainError {
  explicit EmptyFeasibleGrid(const std::string& what) : DomainError(what) {}
};

/// Test oracle: exhaustive grid search for the min-norm feasible point over
/// an axis-aligned box. Guarded to m <= 3; subtree pruning on the partial
/// squared norm keeps it usable at fine resolutions. A 1e-12 slop absorbs
/// grid-coordinate roundoff in the feasibility test.
template <typename Scalar>
Vector<Scalar> brute_force_min_norm(const SoccProgram<Scalar>& prog, Scalar box_halfwidth,
                                    Scalar resolution, const Vector<Scalar>& center) {
  const int m = prog.m;
  if (m > 3) throw DomainError("brute_force_min_norm: m must be <= 3");
  if (!(box_halfwidth > Scalar(0)) || !(resolution > Scalar(0)))
    throw DomainError("brute_force_min_norm: halfwidth and resolution must be > 0");
  if (center.size() != m) throw DimensionError("brute_force_min_norm: bad center size");

  const int steps = static_cast<int>(std::floor(Scalar(2) * box_halfwidth / resolution + Scalar(0.5)));
  const int count = steps + 1;
  const int p = prog.p();

  // Per-axis contribution caches: v-part (rows of Q_i) and s-part (b_i).
  struct AxisCache {
    std::vector<std::array<Scalar, 4>> v;  // [cone][row] contribution at a grid value
    std::vector<Scalar> s;
  };
  std::vector<std::vector<AxisCache>> axis(m);  // axis[j][k]
  std::vector<Scalar> coords(count);
  for (int j = 0; j < m; ++j) axis[j].resize(count);

  const int rows = m + 1;
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < count; ++k) {
      const Scalar x = center[j] - box_halfwidth + Scalar(k) * resolution;
      if (j == 0) coords[k] = x;
      AxisCache& ac = axis[j][k];
      ac.v.resize(p);
      ac.s.resize(p);
      for (int i = 0; i < p; ++i) {
        const auto& s = prog.constraints[i];
        for (int rr = 0; rr < rows; ++rr) ac.v[i][rr] = s.Q(rr, j) * x;
        ac.s[i] = s.b[j] * x;
      }
    }
  }

  struct Acc {
    std::vector<std::array<Scalar, 4>> v;
    std::vector<Scalar> s;
    Scalar n2;
  };
  std::vector<Acc> acc(m + 1);
  for (int dpt = 0; dpt <= m; ++dpt) {
    acc[dpt].v.resize(p);
    acc[dpt].s.resize(p);
  }
  for (int i = 0; i < p; ++i) {
    const auto& s = prog.constraints[i];
    for (int rr = 0; rr < rows; ++rr) acc[0].v[i][rr] = s.r[rr];
    acc[0].s[i] = s.c;
  }
  acc[0].n2 = Scalar(0);

  Scalar best_n2 = std::numeric_limits<Scalar>::infinity();
  std::array<int, 3> best_idx{0, 0, 0};
  std::array<int, 3> idx{0, 0, 0};
  const Scalar slop = Scalar(1e-12);

  // Depth-first walk over the tensor grid with preallocated accumulators.
  auto walk = [&](auto&& self, int depth) -> void {
    const Acc& prev = acc[depth];
    Acc& cur = acc[depth + 1];
    for (int k = 0; k < count; ++k) {
      const Scalar x = center[depth] - box_halfwidth + Scalar(k) * resolution;
      const Scalar n2 = prev.n2 + x * x;
      if (n2 >= best_n2) continue;
      const AxisCache& ac = axis[depth][k];
      if (depth + 1 == m) {
        bool feasible = true;
        for (int i = 0; i < p && feasible; ++i) {
          Scalar vnorm2 = Scalar(0);
          for (int rr = 0; rr < rows; ++rr) {
            const Scalar vr = prev.v[i][rr] + ac.v[i][rr];
            vnorm2 += vr * vr;
          }
          const Scalar rhs = prev.s[i] + ac.s[i];
          feasible = std::sqrt(vnorm2) - rhs <= slop;
        }
        if (feasible) {
          best_n2 = n2;
          idx[depth] = k;
          best_idx = idx;
        }
      } else {
        for (int i = 0; i < p; ++i) {
          for (int rr = 0; rr < rows; ++rr) cur.v[i][rr] = prev.v[i][rr] + ac.v[i][rr];
          cur.s[i] = prev.s[i] + ac.s[i];
        }
        cur.n2 = n2;
        idx[depth] = k;
        self(self, depth + 1);
      }
    }
  };
  walk(walk, 0);

  if (!std::isfinite(static_cast<double>(best_n2)))
    throw EmptyFeasibleGrid("brute_force_min_norm: no feasible grid point");
  Vector<Scalar> u(m);
  for (int j = 0; j < m; ++j) u[j] = center[j] - box_halfwidth + Scalar(best_idx[j]) * resolution;
  return u;
}

template <typename Scalar>
Vector<Scalar> brute_force_min_norm(const SoccProgram<Scalar>& prog, Scalar box_halfwidth,
                                    Scalar resolution) {
  const Vector<Scalar> origin = Vector<Scalar>::Zero(prog.m);
  return brute_force_min_norm(prog, box_halfwidth, resolution, origin);
}

}  // namespace safesocp
