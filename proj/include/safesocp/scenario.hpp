#pragma once

// Ready-made planar benchmark: integrator-like linear drift f(x) = x with
// identity input map, a circular keep-out region encoded by
// h(x, y) = x^2 + (y - 4)^2 - 4, and the default quadratic certificates.

#include "safesocp/estimation.hpp"
#include "safesocp/feasibility.hpp"

namespace safesocp {

template <typename Scalar>
struct Scenario {
  SystemDims dims;
  AffineDynamics<Scalar> truth;
  BarrierData<Scalar> barrier;  // true h, gradh
  ClfSpec<Scalar> clf;
  CbfSpec<Scalar> cbf;
};

/// Quadratic default certificate: V = ||x||^2 / 2 with user decay rate
/// W0 = ||x||^2, stored halved per the slack construction.
template <typename Scalar>
ClfSpec<Scalar> default_quadratic_clf(int n) {
  return ClfSpec<Scalar>::from_decay_rate(
      n, [](const Vector<Scalar>& x) { return Scalar(0.5) * x.squaredNorm(); },
      [](const Vector<Scalar>& x) { return x; },
      [](const Vector<Scalar>& x) { return x.squaredNorm(); });
}

template <typename Scalar>
Scenario<Scalar> make_planar_scenario(Scalar eta_h = Scalar(0.1), Scalar alpha_slope = Scalar(1)) {
  Scenario<Scalar> sc;
  sc.dims = SystemDims(2, 2);
  sc.truth = AffineDynamics<Scalar>(
      sc.dims, [](const Vector<Scalar>& x) { return x; },
      [](const Vector<Scalar>& x) { return Matrix<Scalar>::Identity(x.size(), x.size()); });
  sc.barrier.h = [](const Vector<Scalar>& x) {
    return x[0] * x[0] + (x[1] - Scalar(4)) * (x[1] - Scalar(4)) - Scalar(4);
  };
  sc.barrier.gradh = [](const Vector<Scalar>& x) {
    Vector<Scalar> g(2);
    g << Scalar(2) * x[0], Scalar(2) * (x[1] - Scalar(4));
    return g;
  };
  sc.clf = default_quadratic_clf<Scalar>(2);
  sc.cbf = CbfSpec<Scalar>(ClassK<Scalar>::linear(alpha_slope), eta_h);
  return sc;
}

/// Keep-out disk of the planar scenario (center, radius); used by plots.
template <typename Scalar>
std::pair<Vector<Scalar>, Scalar> planar_unsafe_disk() {
  Vector<Scalar> c(2);
  c << Scalar(0), Scalar(4);
  return {c, Scalar(2)};
}

/// Linear system from user matrices: f(x) = A x, g(x) = B.
template <typename Scalar>
Scenario<Scalar> make_linear_scenario(const Matrix<Scalar>& A, const Matrix<Scalar>& B,
                                      std::function<Scalar(const Vector<Scalar>&)> h,
                                      std::function<Vector<Scalar>(const Vector<Scalar>&)> gradh,
                                      Scalar eta_h = Scalar(0.1), Scalar alpha_slope = Scalar(1)) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  if (A.cols() != n || B.rows() != n) throw DimensionError("make_linear_scenario: bad A/B shapes");
  Scenario<Scalar> sc;
  sc.dims = SystemDims(n, m);
  sc.truth = AffineDynamics<Scalar>(
      sc.dims, [A](const Vector<Scalar>& x) { return Vector<Scalar>(A * x); },
      [B](const Vector<Scalar>&) { return B; });
  sc.barrier.h = std::move(h);
  sc.barrier.gradh = std::move(gradh);
  sc.clf = default_quadratic_clf<Scalar>(n);
  sc.cbf = CbfSpec<Scalar>(ClassK<Scalar>::linear(alpha_slope), eta_h);
  return sc;
}

/// Exact-estimate worst-case model for a scenario (all error radii zero).
template <typename Scalar>
WorstCaseModel<Scalar> exact_model(const Scenario<Scalar>& sc) {
  return exact_worstcase_model<Scalar>(sc.truth, sc.barrier.h, sc.barrier.gradh);
}

/// Nearest-neighbor model for a scenario: estimated dynamics, exact barrier.
template <typename Scalar>
WorstCaseModel<Scalar> nn_model(const Scenario<Scalar>& sc, const Dataset<Scalar>& ds,
                                const LipschitzConstants<Scalar>& lip) {
  return build_worstcase_model<Scalar>(ds, lip, sc.barrier.h, sc.barrier.gradh);
}

}  // namespace safesocp
