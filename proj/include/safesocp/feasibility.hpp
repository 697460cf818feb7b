#pragma once

// Explicit margin tests for joint feasibility of the stability/safety cone
// pair: worst-case error bounds against the slack S(x) and eta_h + zeta(h),
// and the GP form against sigma_max of the variance factors. Also the
// analysis-mode construction of the control-norm bound B from the slack
// inequalities under oracle access, and dense grid evaluation.

#include "safesocp/socp.hpp"

#include <memory>
#include <thread>

namespace safesocp {

struct InfeasibleSlackError : DomainError {
  explicit InfeasibleSlackError(const std::string& what) : DomainError(what) {}
};

template <typename Scalar>
struct CompatMargins {
  Scalar clf_margin = Scalar(0);
  Scalar cbf_margin = Scalar(0);
  bool holds_clf = false;
  bool holds_cbf = false;
  Scalar confidence_label = Scalar(1);  // 1 worst-case, 1 - 2 delta GP

  bool holds() const { return holds_clf && holds_cbf; }
};

/// What to do at states where the slack inequalities admit no control: the
/// margin tests have no valid premise there. Throw is the strict contract;
/// MarkUnbounded records B = +inf so the conditions report "does not hold".
enum class SlackInfeasiblePolicy { Throw, MarkUnbounded };

/// The two slack inequalities at a state, as a 2-cone program in u:
///   gradV^T (f + g u) + W + S <= 0
///   gradh^T (f + g u) + alpha(h) - eta_h - zeta(h) >= 0
/// evaluated with the supplied (typically true) dynamics and barrier.
template <typename Scalar>
SoccProgram<Scalar> slack_program(const AffineDynamics<Scalar>& dyn, const ClfSpec<Scalar>& clf,
                                  const CbfSpec<Scalar>& cbf, const BarrierData<Scalar>& barrier,
                                  const Vector<Scalar>& x) {
  const int m = dyn.dims.m;
  const Vector<Scalar> f = dyn.f(x);
  const Matrix<Scalar> g = dyn.g(x);
  const Vector<Scalar> gradV = clf.gradV(x);
  const Scalar h = barrier.h(x);
  const Vector<Scalar> gradh = barrier.gradh(x);

  RowVector<Scalar> b_clf = -(gradV.transpose() * g);
  const Scalar c_clf = -gradV.dot(f) - clf.W(x) - clf.S(x);
  RowVector<Scalar> b_cbf = gradh.transpose() * g;
  const Scalar c_cbf = gradh.dot(f) + cbf.alpha(h) - cbf.eta_h - cbf.zeta_value(h);

  std::vector<Socc<Scalar>> cones;
  cones.push_back(embed_worstcase<Scalar>(Scalar(0), b_clf, c_clf, m));
  cones.push_back(embed_worstcase<Scalar>(Scalar(0), b_cbf, c_cbf, m));
  return SoccProgram<Scalar>(std::move(cones), m);
}

/// factor * ||min-norm control satisfying the slack inequalities at x||.
/// Returns +inf (MarkUnbounded) or throws (Throw) when none exists.
template <typename Scalar>
Scalar slack_norm_bound(const AffineDynamics<Scalar>& dyn, const ClfSpec<Scalar>& clf,
                        const CbfSpec<Scalar>& cbf, const BarrierData<Scalar>& barrier,
                        const Vector<Scalar>& x, Scalar factor,
                        const SolverConfig<Scalar>& cfg = {},
                        SlackInfeasiblePolicy policy = SlackInfeasiblePolicy::Throw) {
  const SolveResult<Scalar> res = solve_min_norm(slack_program(dyn, clf, cbf, barrier, x), cfg);
  if (res.status != SolveStatus::Feasible) {
    if (policy == SlackInfeasiblePolicy::Throw) {
      std::string loc = "(";
      for (Eigen::Index i = 0; i < x.size(); ++i)
        loc += std::to_string(static_cast<double>(x[i])) + (i + 1 < x.size() ? ", " : ")");
      throw InfeasibleSlackError("slack inequalities infeasible at " + loc);
    }
    return std::numeric_limits<Scalar>::infinity();
  }
  return factor * res.u_star.norm();
}

/// Rectangular node grid (counts[i] nodes per axis, endpoints included).
template <typename Scalar>
struct GridSpec {
  Box<Scalar> box;
  std::vector<int> counts;

  GridSpec() = default;
  GridSpec(Box<Scalar> box_, std::vector<int> counts_)
      : box(std::move(box_)), counts(std::move(counts_)) {
    if (static_cast<int>(counts.size()) != box.dim())
      throw DimensionError("GridSpec: counts/box dimension mismatch");
    for (int c : counts)
      if (c < 2) throw DomainError("GridSpec: need >= 2 nodes per axis");
  }

  int dim() const { return box.dim(); }

  long total() const {
    long t = 1;
    for (int c : counts) t *= c;
    return t;
  }

  Scalar coord(int axis, int i) const {
    return box.lo[axis] +
           (box.hi[axis] - box.lo[axis]) * Scalar(i) / Scalar(counts[axis] - 1);
  }

  Vector<Scalar> node(long flat) const {
    Vector<Scalar> x(dim());
    for (int a = dim() - 1; a >= 0; --a) {
      x[a] = coord(a, static_cast<int>(flat % counts[a]));
      flat /= counts[a];
    }
    return x;
  }
};

/// Grid-backed values of the analysis bound (factor already applied; +inf
/// marks slack-infeasible nodes). Queries at a node return the node value;
/// queries inside the hull return the max over the containing cell's
/// corners; queries outside return the global maximum.
template <typename Scalar>
struct AnalysisBoundField {
  GridSpec<Scalar> grid;
  std::vector<Scalar> values;

  Scalar global_max() const {
    Scalar m = Scalar(0);
    for (Scalar v : values) m = std::max(m, v);
    return m;
  }

  Scalar evaluate(const Vector<Scalar>& x) const {
    const int d = grid.dim();
    if (!grid.box.contains(x)) return global_max();
    std::vector<int> i0(d);
    bool on_node = true;
    for (int a = 0; a < d; ++a) {
      const Scalar span = grid.box.hi[a] - grid.box.lo[a];
      const Scalar t = (x[a] - grid.box.lo[a]) / span * Scalar(grid.counts[a] - 1);
      const Scalar rounded = std::round(static_cast<double>(t));
      if (std::abs(t - rounded) > Scalar(1e-9)) on_node = false;
      i0[a] = std::min(static_cast<int>(std::floor(static_cast<double>(t))), grid.counts[a] - 2);
      i0[a] = std::max(i0[a], 0);
    }
    if (on_node) {
      long flat = 0;
      for (int a = 0; a < d; ++a) {
        const Scalar t = (x[a] - grid.box.lo[a]) / (grid.box.hi[a] - grid.box.lo[a]) *
                         Scalar(grid.counts[a] - 1);
        flat = flat * grid.counts[a] + static_cast<long>(std::round(static_cast<double>(t)));
      }
      return values[flat];
    }
    Scalar best = Scalar(0);
    const int corners = 1 << d;
    for (int mask = 0; mask < corners; ++mask) {
      long flat = 0;
      for (int a = 0; a < d; ++a) flat = flat * grid.counts[a] + i0[a] + ((mask >> a) & 1);
      best = std::max(best, values[flat]);
    }
    return best;
  }
};

/// Upper bound on the norm of a control satisfying both slack inequalities:
/// either a constant, or the analysis-mode construction (pointwise solve or
/// a precomputed grid field).
template <typename Scalar>
class BoundB {
 public:
  enum class Mode { Constant, Analysis };

  static BoundB constant(Scalar value) {
    if (!(value >= Scalar(0))) throw DomainError("BoundB: constant must be >= 0");
    BoundB b;
    b.mode_ = Mode::Constant;
    b.constant_ = value;
    b.eval_ = [value](const Vector<Scalar>&) { return value; };
    return b;
  }

  /// Solve the slack program at every query point (oracle access required).
  static BoundB analysis_pointwise(AffineDynamics<Scalar> truth, ClfSpec<Scalar> clf,
                                   CbfSpec<Scalar> cbf, BarrierData<Scalar> barrier, Scalar factor,
                                   SolverConfig<Scalar> cfg = {},
                                   SlackInfeasiblePolicy policy = SlackInfeasiblePolicy::MarkUnbounded) {
    if (!(factor >= Scalar(1))) throw DomainError("BoundB: analysis factor must be >= 1");
    BoundB b;
    b.mode_ = Mode::Analysis;
    b.factor_ = factor;
    b.eval_ = [truth = std::move(truth), clf = std::move(clf), cbf = std::move(cbf),
               barrier = std::move(barrier), factor, cfg, policy](const Vector<Scalar>& x) {
      return slack_norm_bound(truth, clf, cbf, barrier, x, factor, cfg, policy);
    };
    return b;
  }

  static BoundB analysis_field(std::shared_ptr<const AnalysisBoundField<Scalar>> field,
                               Scalar factor) {
    BoundB b;
    b.mode_ = Mode::Analysis;
    b.factor_ = factor;
    b.field_ = field;
    b.eval_ = [field](const Vector<Scalar>& x) { return field->evaluate(x); };
    return b;
  }

  Scalar operator()(const Vector<Scalar>& x) const { return eval_(x); }
  Mode mode() const { return mode_; }
  Scalar factor() const { return factor_; }
  const AnalysisBoundField<Scalar>* field() const { return field_.get(); }

 private:
  BoundB() = default;
  Mode mode_ = Mode::Constant;
  Scalar constant_ = Scalar(0);
  Scalar factor_ = Scalar(1);
  std::shared_ptr<const AnalysisBoundField<Scalar>> field_;
  std::function<Scalar(const Vector<Scalar>&)> eval_;
};

/// Analysis-mode bound on a grid: solve the slack program at every node and
/// store factor * ||u_slack||. The Throw policy reports the first
/// infeasible node's location; MarkUnbounded stores +inf there.
template <typename Scalar>
BoundB<Scalar> compute_bound_B_analysis(const AffineDynamics<Scalar>& truth,
                                        const ClfSpec<Scalar>& clf, const CbfSpec<Scalar>& cbf,
                                        const BarrierData<Scalar>& barrier,
                                        const GridSpec<Scalar>& grid, Scalar factor,
                                        const SolverConfig<Scalar>& cfg = {},
                                        SlackInfeasiblePolicy policy = SlackInfeasiblePolicy::Throw) {
  if (!(factor >= Scalar(1))) throw DomainError("compute_bound_B_analysis: factor must be >= 1");
  auto field = std::make_shared<AnalysisBoundField<Scalar>>();
  field->grid = grid;
  field->values.resize(grid.total());
  for (long i = 0; i < grid.total(); ++i) {
    const Vector<Scalar> x = grid.node(i);
    field->values[i] = slack_norm_bound(truth, clf, cbf, barrier, x, factor, cfg, policy);
  }
  return BoundB<Scalar>::analysis_field(field, factor);
}

/// Worst-case margin test at x:
///   clf: S/2 - ||gradV|| (e_f + e_g B)
///   cbf: (eta_h + zeta(h_lb))/2 - [(e_gradh + ||gradh_hat||)(e_f + e_g B)
///        + K_alpha e_h + e_gradh (||fhat|| + ||ghat|| B)]
/// Both must be strictly positive for the cone pair to be certified
/// strictly compatible at x. A non-finite B marks a failed premise.
template <typename Scalar>
CompatMargins<Scalar> check_worstcase_compat(const WorstCaseModel<Scalar>& model,
                                             const ClfSpec<Scalar>& clf, const CbfSpec<Scalar>& cbf,
                                             const std::function<Scalar(const Vector<Scalar>&)>& h_lb,
                                             const BoundB<Scalar>& B, const Vector<Scalar>& x,
                                             std::optional<Scalar> k_alpha_override = std::nullopt) {
  if (x.norm() == Scalar(0)) throw DomainError("check_worstcase_compat: x must be nonzero");
  CompatMargins<Scalar> out;
  out.confidence_label = Scalar(1);
  const Scalar Bx = B(x);
  if (!std::isfinite(static_cast<double>(Bx))) {
    out.clf_margin = -std::numeric_limits<Scalar>::infinity();
    out.cbf_margin = -std::numeric_limits<Scalar>::infinity();
    return out;
  }
  const Scalar e_f = model.e_f(x);
  const Scalar e_g = model.e_g(x);
  const Scalar e_h = model.e_h(x);
  const Scalar e_dh = model.e_gradh(x);
  const Vector<Scalar> gradV = clf.gradV(x);
  const Vector<Scalar> gradh = model.gradh_hat(x);
  const Scalar lb = h_lb(x);

  out.clf_margin = Scalar(0.5) * clf.S(x) - gradV.norm() * (e_f + e_g * Bx);

  const Scalar k_alpha =
      k_alpha_override ? *k_alpha_override
                       : cbf.alpha.lipschitz_on(lb, model.hhat(x) + e_h);
  const Scalar lhs = (e_dh + gradh.norm()) * (e_f + e_g * Bx) + k_alpha * e_h +
                     e_dh * (model.fhat(x).norm() + detail::spectral_norm(model.ghat(x)) * Bx);
  out.cbf_margin = Scalar(0.5) * (cbf.eta_h + cbf.zeta_value(lb)) - lhs;

  out.holds_clf = out.clf_margin > Scalar(0);
  out.holds_cbf = out.cbf_margin > Scalar(0);
  return out;
}

/// Default certified lower bound for the true h: hhat - e_h.
template <typename Scalar>
CompatMargins<Scalar> check_worstcase_compat(const WorstCaseModel<Scalar>& model,
                                             const ClfSpec<Scalar>& clf, const CbfSpec<Scalar>& cbf,
                                             const BoundB<Scalar>& B, const Vector<Scalar>& x) {
  auto h_lb = [&model](const Vector<Scalar>& y) { return model.hhat(y) - model.e_h(y); };
  return check_worstcase_compat<Scalar>(model, clf, cbf, h_lb, B, x);
}

/// GP-form margin test at x: sigma_max(G_V) < S / (2 beta sqrt(1 + B^2))
/// and sigma_max(G_h) < (eta_h + zeta(h_lb)) / (2 beta sqrt(1 + B^2)).
/// Results carry the 1 - 2 delta confidence label.
template <typename Scalar>
CompatMargins<Scalar> check_gp_compat(const GpTerms<Scalar>& terms, const ClfSpec<Scalar>& clf,
                                      const CbfSpec<Scalar>& cbf,
                                      const std::function<Scalar(const Vector<Scalar>&)>& h_lb,
                                      const BoundB<Scalar>& B, const Vector<Scalar>& x) {
  if (x.norm() == Scalar(0)) throw DomainError("check_gp_compat: x must be nonzero");
  terms.validate();
  CompatMargins<Scalar> out;
  out.confidence_label = Scalar(1) - Scalar(2) * terms.delta;
  const Scalar Bx = B(x);
  if (!std::isfinite(static_cast<double>(Bx))) {
    out.clf_margin = -std::numeric_limits<Scalar>::infinity();
    out.cbf_margin = -std::numeric_limits<Scalar>::infinity();
    return out;
  }
  const Scalar denom = Scalar(2) * terms.beta_delta * std::sqrt(Scalar(1) + Bx * Bx);
  out.clf_margin = clf.S(x) / denom - detail::spectral_norm<Scalar>(terms.G_V(x));
  out.cbf_margin =
      (cbf.eta_h + cbf.zeta_value(h_lb(x))) / denom - detail::spectral_norm<Scalar>(terms.G_h(x));
  out.holds_clf = out.clf_margin > Scalar(0);
  out.holds_cbf = out.cbf_margin > Scalar(0);
  return out;
}

template <typename Scalar>
struct FeasMapCell {
  Vector<Scalar> x;
  CompatMargins<Scalar> margins;
  Scalar phase1_t = std::numeric_limits<Scalar>::quiet_NaN();
};

/// Dense evaluation of a margin checker over a grid, cross-evaluating the
/// phase-I value of the corresponding cone pair at every kept node. Nodes
/// inside the origin exclusion ball or rejected by the skip predicate are
/// omitted. Deterministic output order regardless of thread count.
template <typename Scalar>
std::vector<FeasMapCell<Scalar>> feasibility_map(
    const std::function<CompatMargins<Scalar>(const Vector<Scalar>&)>& margin_fn,
    const std::function<SoccProgram<Scalar>(const Vector<Scalar>&)>& pair_fn,
    const GridSpec<Scalar>& grid, Scalar origin_exclusion_radius,
    const std::function<bool(const Vector<Scalar>&)>& skip = nullptr,
    const SolverConfig<Scalar>& cfg = {}, int n_threads = 1) {
  std::vector<long> kept;
  kept.reserve(grid.total());
  for (long i = 0; i < grid.total(); ++i) {
    const Vector<Scalar> x = grid.node(i);
    if (x.norm() <= origin_exclusion_radius) continue;
    if (skip && skip(x)) continue;
    kept.push_back(i);
  }
  std::vector<FeasMapCell<Scalar>> cells(kept.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      const Vector<Scalar> x = grid.node(kept[j]);
      FeasMapCell<Scalar>& cell = cells[j];
      cell.x = x;
      cell.margins = margin_fn(x);
      cell.phase1_t = phase1(pair_fn(x), cfg).t_star;
    }
  };
  n_threads = std::max(1, n_threads);
  if (n_threads == 1 || kept.size() < 64) {
    work(0, kept.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (kept.size() + n_threads - 1) / n_threads;
    for (int t = 0; t < n_threads; ++t) {
      const std::size_t b = t * chunk;
      const std::size_t e = std::min(kept.size(), b + chunk);
      if (b < e) pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }
  return cells;
}

}  // namespace safesocp
