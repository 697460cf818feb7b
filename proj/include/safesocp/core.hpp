#pragma once

// Domain types shared by every other header: control-affine dynamics,
// certificate functions (CLF/CBF), class-K functions and sampling helpers.
// All dense math is Eigen; everything numeric is templated on the scalar.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace safesocp {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using VectorD = Vector<double>;
using MatrixD = Matrix<double>;

struct DimensionError : std::invalid_argument {
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

struct DomainError : std::invalid_argument {
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// State/input dimensions of a control-affine system.
struct SystemDims {
  int n = 0;  // state dimension
  int m = 0;  // input dimension

  SystemDims() = default;
  SystemDims(int n_, int m_) : n(n_), m(m_) {
    if (n < 1 || m < 1) throw DimensionError("SystemDims: n and m must be >= 1");
  }
};

/// Deterministic RNG. Uniform/normal variates are derived from raw
/// mt19937_64 output so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  /// Standard normal via Box-Muller (cached second variate).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 1e-300);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Axis-aligned box, used as sampling region and workspace bound.
template <typename Scalar>
struct Box {
  Vector<Scalar> lo;
  Vector<Scalar> hi;

  Box() = default;
  Box(Vector<Scalar> lo_, Vector<Scalar> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
    if (lo.size() != hi.size()) throw DimensionError("Box: lo/hi size mismatch");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo[i] <= hi[i])) throw DomainError("Box: lo > hi on axis " + std::to_string(i));
  }

  static Box cube(int dim, Scalar lo_, Scalar hi_) {
    return Box(Vector<Scalar>::Constant(dim, lo_), Vector<Scalar>::Constant(dim, hi_));
  }

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vector<Scalar>& x) const {
    if (x.size() != lo.size()) return false;
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }

  Vector<Scalar> sample(Rng& rng) const {
    Vector<Scalar> x(lo.size());
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      x[i] = static_cast<Scalar>(rng.uniform(static_cast<double>(lo[i]), static_cast<double>(hi[i])));
    return x;
  }

  /// Rejection-sample a point with ||x|| > excluded_radius.
  Vector<Scalar> sample_outside_ball(Rng& rng, Scalar excluded_radius) const {
    for (int attempt = 0; attempt < 10000; ++attempt) {
      Vector<Scalar> x = sample(rng);
      if (x.norm() > excluded_radius) return x;
    }
    throw DomainError("Box::sample_outside_ball: region appears to lie inside the excluded ball");
  }
};

/// Control-affine vector field pair: xdot = f(x) + g(x) u.
/// f(0) = 0 is checked at construction (within 1e-12).
template <typename Scalar>
struct AffineDynamics {
  using StateFn = std::function<Vector<Scalar>(const Vector<Scalar>&)>;
  using InputMapFn = std::function<Matrix<Scalar>(const Vector<Scalar>&)>;

  SystemDims dims;
  StateFn f;
  InputMapFn g;

  AffineDynamics() = default;
  AffineDynamics(SystemDims dims_, StateFn f_, InputMapFn g_)
      : dims(dims_), f(std::move(f_)), g(std::move(g_)) {
    const Vector<Scalar> origin = Vector<Scalar>::Zero(dims.n);
    const Vector<Scalar> f0 = f(origin);
    if (f0.size() != dims.n) throw DimensionError("AffineDynamics: f(x) has wrong size");
    if (f0.template lpNorm<Eigen::Infinity>() > Scalar(1e-12))
      throw DomainError("AffineDynamics: f(0) != 0");
    const Matrix<Scalar> g0 = g(origin);
    if (g0.rows() != dims.n || g0.cols() != dims.m)
      throw DimensionError("AffineDynamics: g(x) has wrong shape");
  }

  Vector<Scalar> drift(const Vector<Scalar>& x, const Vector<Scalar>& u) const {
    return f(x) + g(x) * u;
  }
};

/// Class-K function: zero at zero, strictly increasing. Either linear with a
/// positive slope or user-supplied with a declared Lipschitz constant on a
/// stated interval. Monotonicity is checked on a >=100-point grid.
template <typename Scalar>
class ClassK {
 public:
  using Fn = std::function<Scalar(Scalar)>;

  static ClassK linear(Scalar slope) {
    if (!(slope > Scalar(0))) throw DomainError("ClassK::linear: slope must be > 0");
    ClassK k;
    k.linear_slope_ = slope;
    return k;
  }

  static ClassK user(Fn fn, Scalar lipschitz, Scalar domain_lo, Scalar domain_hi,
                     int grid_points = 128) {
    if (!(lipschitz > Scalar(0))) throw DomainError("ClassK::user: Lipschitz constant must be > 0");
    if (!(domain_lo <= Scalar(0) && Scalar(0) <= domain_hi))
      throw DomainError("ClassK::user: domain must contain 0");
    if (grid_points < 100) grid_points = 100;
    if (std::abs(static_cast<double>(fn(Scalar(0)))) > 1e-12)
      throw DomainError("ClassK::user: alpha(0) != 0");
    Scalar prev = fn(domain_lo);
    for (int i = 1; i < grid_points; ++i) {
      const Scalar s = domain_lo + (domain_hi - domain_lo) * Scalar(i) / Scalar(grid_points - 1);
      const Scalar v = fn(s);
      if (!(v > prev)) throw DomainError("ClassK::user: not strictly increasing on sampled grid");
      prev = v;
    }
    ClassK k;
    k.fn_ = std::move(fn);
    k.user_lipschitz_ = lipschitz;
    k.domain_lo_ = domain_lo;
    k.domain_hi_ = domain_hi;
    return k;
  }

  Scalar operator()(Scalar s) const { return fn_ ? fn_(s) : linear_slope_ * s; }

  bool is_linear() const { return !fn_; }
  Scalar slope() const { return linear_slope_; }

  /// Lipschitz constant over [lo, hi]. Linear: the slope. User-supplied:
  /// max sampled difference quotient on the requested interval, floored by
  /// nothing and capped by nothing; the declared constant is returned when
  /// the interval degenerates to a point.
  Scalar lipschitz_on(Scalar lo, Scalar hi, int grid_points = 512) const {
    if (!fn_) return linear_slope_;
    if (!(hi > lo)) return user_lipschitz_;
    Scalar best = Scalar(0);
    Scalar prev_s = lo, prev_v = fn_(lo);
    for (int i = 1; i < grid_points; ++i) {
      const Scalar s = lo + (hi - lo) * Scalar(i) / Scalar(grid_points - 1);
      const Scalar v = fn_(s);
      best = std::max(best, std::abs(v - prev_v) / std::max(s - prev_s, Scalar(1e-300)));
      prev_s = s;
      prev_v = v;
    }
    return std::max(best, Scalar(0));
  }

 private:
  ClassK() = default;
  Fn fn_;  // empty => linear
  Scalar linear_slope_ = Scalar(1);
  Scalar user_lipschitz_ = Scalar(1);
  Scalar domain_lo_ = Scalar(-1);
  Scalar domain_hi_ = Scalar(1);
};

/// CLF data: V with explicit gradient, the enforced decay rate W and the
/// feasibility slack S. from_decay_rate() applies the standard halving
/// construction: given a decay rate W0 valid for the plain inequality, store
/// W = W0/2 and S = W0/2 so the slack form stays compatible.
template <typename Scalar>
struct ClfSpec {
  using ScalarFn = std::function<Scalar(const Vector<Scalar>&)>;
  using GradFn = std::function<Vector<Scalar>(const Vector<Scalar>&)>;

  int n = 0;
  ScalarFn V;
  GradFn gradV;
  ScalarFn W;  // decay rate enforced in the constraints
  ScalarFn S;  // slack margin used by the feasibility conditions

  ClfSpec() = default;
  ClfSpec(int n_, ScalarFn V_, GradFn gradV_, ScalarFn W_, ScalarFn S_)
      : n(n_), V(std::move(V_)), gradV(std::move(gradV_)), W(std::move(W_)), S(std::move(S_)) {
    const Vector<Scalar> origin = Vector<Scalar>::Zero(n);
    if (std::abs(static_cast<double>(V(origin))) > 1e-12)
      throw DomainError("ClfSpec: V(0) != 0");
    if (gradV(origin).size() != n) throw DimensionError("ClfSpec: gradV has wrong size");
  }

  static ClfSpec from_decay_rate(int n, ScalarFn V, GradFn gradV, ScalarFn W0) {
    auto half = [W0](const Vector<Scalar>& x) { return Scalar(0.5) * W0(x); };
    return ClfSpec(n, std::move(V), std::move(gradV), half, half);
  }
};

/// CBF-side certificate data: the class-K alpha, the robustness margin
/// eta_h, and the slack zeta (absent means identically zero, the always
/// valid lower bound).
template <typename Scalar>
struct CbfSpec {
  ClassK<Scalar> alpha = ClassK<Scalar>::linear(Scalar(1));
  Scalar eta_h = Scalar(0);
  std::optional<ClassK<Scalar>> zeta;  // nullopt => zeta == 0

  CbfSpec() = default;
  CbfSpec(ClassK<Scalar> alpha_, Scalar eta_h_, std::optional<ClassK<Scalar>> zeta_ = std::nullopt)
      : alpha(std::move(alpha_)), eta_h(eta_h_), zeta(std::move(zeta_)) {
    if (eta_h < Scalar(0)) throw DomainError("CbfSpec: eta_h must be >= 0");
  }

  Scalar zeta_value(Scalar s) const { return zeta ? (*zeta)(s) : Scalar(0); }
};

/// True barrier function with gradient; used where oracle access to h is
/// declared (analysis-mode bounds, the simulator's diagnostics).
template <typename Scalar>
struct BarrierData {
  std::function<Scalar(const Vector<Scalar>&)> h;
  std::function<Vector<Scalar>(const Vector<Scalar>&)> gradh;
};

struct GradientCheckReport {
  double max_rel_error = 0.0;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct ClfSampleReport {
  double fraction_feasible = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  int samples = 0;
};

/// Decide, exactly, feasibility of L_fV(x) + L_gV(x) u <= -W(x) at sampled
/// states: feasible iff L_gV(x) != 0 or L_fV(x) <= -W(x). The reported
/// margin is -W - L_fV at uncontrollable samples and +infinity otherwise.
template <typename Scalar>
ClfSampleReport verify_clf_sampled(const ClfSpec<Scalar>& clf, const AffineDynamics<Scalar>& dyn,
                                   const Box<Scalar>& region, int n_samples,
                                   std::uint64_t seed = 0) {
  if (clf.n != dyn.dims.n) throw DimensionError("verify_clf_sampled: clf/dyn dimension mismatch");
  if (region.dim() != dyn.dims.n)
    throw DimensionError("verify_clf_sampled: region dimension mismatch");
  Rng rng(seed);
  int feasible = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    const Vector<Scalar> x = region.sample_outside_ball(rng, Scalar(1e-6));
    const Vector<Scalar> grad = clf.gradV(x);
    const Scalar lf = grad.dot(dyn.f(x));
    const RowVector<Scalar> lg = grad.transpose() * dyn.g(x);
    if (lg.norm() > Scalar(0)) {
      ++feasible;
    } else {
      const double margin = static_cast<double>(-clf.W(x) - lf);
      worst = std::min(worst, margin);
      if (margin >= 0.0) ++feasible;
    }
  }
  return {static_cast<double>(feasible) / static_cast<double>(n_samples), worst, n_samples};
}

/// Compare the supplied gradient against central finite differences of V
/// over >= 100 sampled states. Relative error is measured against the
/// finite-difference value.
template <typename Scalar>
GradientCheckReport check_gradient(const ClfSpec<Scalar>& clf, const Box<Scalar>& region,
                                   Scalar step, std::uint64_t seed = 0, int n_samples = 128) {
  if (!(step > Scalar(0) && step <= Scalar(1e-2)))
    throw DomainError("check_gradient: step must lie in (0, 1e-2]");
  if (n_samples < 100) n_samples = 100;
  Rng rng(seed);
  double worst = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const Vector<Scalar> x = region.sample(rng);
    Vector<Scalar> fd(clf.n);
    for (int i = 0; i < clf.n; ++i) {
      Vector<Scalar> xp = x, xm = x;
      xp[i] += step;
      xm[i] -= step;
      fd[i] = (clf.V(xp) - clf.V(xm)) / (Scalar(2) * step);
    }
    const double denom = std::max(static_cast<double>(fd.norm()), 1e-12);
    const double err = static_cast<double>((clf.gradV(x) - fd).norm()) / denom;
    worst = std::max(worst, err);
  }
  return {worst, n_samples, seed};
}

}  // namespace safesocp
