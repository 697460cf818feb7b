#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "safesocp/scenario.hpp"

using namespace safesocp;

namespace {
Box<double> unit_box(double lo, double hi) { return Box<double>::cube(2, lo, hi); }
}  // namespace

TEST_CASE("SystemDims rejects nonpositive dimensions") {
  CHECK_THROWS_AS(SystemDims(0, 1), DimensionError);
  CHECK_THROWS_AS(SystemDims(2, -1), DimensionError);
  CHECK(SystemDims(2, 2).n == 2);
}

TEST_CASE("AffineDynamics enforces f(0) = 0") {
  CHECK_THROWS_AS(AffineDynamics<double>(
                      SystemDims(2, 2),
                      [](const VectorD& x) { return VectorD(x.array() + 1.0); },
                      [](const VectorD&) { return MatrixD::Identity(2, 2); }),
                  DomainError);
  const auto sc = make_planar_scenario<double>();
  CHECK(sc.truth.f(VectorD::Zero(2)).norm() == 0.0);
}

TEST_CASE("ClassK construction and Lipschitz constants") {
  CHECK_THROWS_AS(ClassK<double>::linear(0.0), DomainError);
  const auto lin = ClassK<double>::linear(2.0);
  CHECK(lin(3.0) == doctest::Approx(6.0));
  CHECK(lin.lipschitz_on(-1.0, 5.0) == 2.0);

  // alpha(0) != 0 rejected
  CHECK_THROWS_AS(ClassK<double>::user([](double s) { return s + 0.1; }, 1.0, -1.0, 1.0),
                  DomainError);
  // non-monotone rejected
  CHECK_THROWS_AS(ClassK<double>::user([](double s) { return -s; }, 1.0, -1.0, 1.0), DomainError);

  const auto cubicish = ClassK<double>::user([](double s) { return s * s * s + s; }, 13.0, -2.0,
                                             2.0);
  CHECK(cubicish(0.0) == 0.0);
  // empirical constant on [0, 2] close to 3*4+1
  CHECK(cubicish.lipschitz_on(0.0, 2.0) == doctest::Approx(13.0).epsilon(0.02));
}

TEST_CASE("ClassK monotonicity property on sampled pairs") {
  const auto k = ClassK<double>::user([](double s) { return std::tanh(s) + 0.5 * s; }, 1.5, -3.0,
                                      3.0);
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    double s1 = rng.uniform(-3.0, 3.0), s2 = rng.uniform(-3.0, 3.0);
    if (s1 > s2) std::swap(s1, s2);
    if (s2 - s1 < 1e-9) continue;
    CHECK(k(s1) < k(s2));
  }
}

TEST_CASE("ClfSpec invariants and the halving construction") {
  const auto clf = default_quadratic_clf<double>(2);
  VectorD x(2);
  x << 1.0, 0.0;
  CHECK(clf.V(x) == doctest::Approx(0.5));
  CHECK(clf.W(x) == doctest::Approx(0.5));  // half of ||x||^2
  CHECK(clf.S(x) == doctest::Approx(0.5));
  CHECK(clf.V(VectorD::Zero(2)) == 0.0);

  // positive definiteness on samples away from the origin
  Rng rng(3);
  const auto box = unit_box(-4.0, 4.0);
  for (int i = 0; i < 300; ++i) {
    const VectorD y = box.sample_outside_ball(rng, 1e-6);
    CHECK(clf.V(y) > 0.0);
    CHECK(clf.W(y) > 0.0);
    CHECK(clf.S(y) > 0.0);
  }

  CHECK_THROWS_AS(ClfSpec<double>(
                      2, [](const VectorD&) { return 1.0; },
                      [](const VectorD& y) { return y; }, [](const VectorD&) { return 1.0; },
                      [](const VectorD&) { return 1.0; }),
                  DomainError);
}

TEST_CASE("CbfSpec defaults") {
  const CbfSpec<double> cbf(ClassK<double>::linear(1.0), 0.1);
  CHECK(cbf.zeta_value(2.0) == 0.0);
  CHECK_THROWS_AS(CbfSpec<double>(ClassK<double>::linear(1.0), -0.1), DomainError);
}

TEST_CASE("verify_clf_sampled decides feasibility exactly") {
  const auto sc = make_planar_scenario<double>();
  ClfSpec<double> clf(2, [](const VectorD& x) { return 0.5 * x.squaredNorm(); },
                      [](const VectorD& x) { return x; },
                      [](const VectorD& x) { return x.squaredNorm(); },
                      [](const VectorD& x) { return 0.5 * x.squaredNorm(); });

  SUBCASE("controllable everywhere: every sample feasible") {
    const auto rep = verify_clf_sampled(clf, sc.truth, unit_box(-3.0, 3.0), 400, 11);
    CHECK(rep.fraction_feasible == 1.0);
  }

  SUBCASE("L_gV = 0 with L_fV = -W: feasible with margin 0") {
    // g == 0 makes L_gV vanish; f = -x gives L_fV = -||x||^2 = -W exactly
    const AffineDynamics<double> dyn(SystemDims(2, 2),
                                     [](const VectorD& x) { return VectorD(-x); },
                                     [](const VectorD&) { return MatrixD::Zero(2, 2); });
    const auto rep = verify_clf_sampled(clf, dyn, unit_box(-3.0, 3.0), 100, 5);
    CHECK(rep.fraction_feasible == 1.0);
    CHECK(rep.worst_margin == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("L_gV = 0 with L_fV > -W: infeasible") {
    const AffineDynamics<double> dyn(SystemDims(2, 2), [](const VectorD& x) { return x; },
                                     [](const VectorD&) { return MatrixD::Zero(2, 2); });
    const auto rep = verify_clf_sampled(clf, dyn, unit_box(-3.0, 3.0), 100, 5);
    CHECK(rep.fraction_feasible == 0.0);
    CHECK(rep.worst_margin < 0.0);
  }

  SUBCASE("dimension mismatch rejected") {
    const auto clf3 = default_quadratic_clf<double>(3);
    CHECK_THROWS_AS(verify_clf_sampled(clf3, sc.truth, unit_box(-1.0, 1.0), 10), DimensionError);
  }
}

TEST_CASE("check_gradient against central differences") {
  const auto box = unit_box(-2.0, 2.0);

  SUBCASE("exact gradient of a quadratic") {
    const auto clf = default_quadratic_clf<double>(2);
    const auto rep = check_gradient(clf, box, 1e-5, 42);
    CHECK(rep.max_rel_error <= 1e-8);
    CHECK(rep.samples >= 100);
  }

  SUBCASE("factor-2 mismatch reads as error about 1") {
    ClfSpec<double> wrong(2, [](const VectorD& x) { return 0.5 * x.squaredNorm(); },
                          [](const VectorD& x) { return VectorD(2.0 * x); },
                          [](const VectorD& x) { return x.squaredNorm(); },
                          [](const VectorD& x) { return x.squaredNorm(); });
    const auto rep = check_gradient(wrong, box, 1e-5, 42);
    CHECK(rep.max_rel_error == doctest::Approx(1.0).epsilon(1e-4));
  }

  SUBCASE("smooth shifted quadratic") {
    ClfSpec<double> clf(2,
                        [](const VectorD& x) {
                          return x[0] * x[0] + (x[1] - 4.0) * (x[1] - 4.0) - 16.0 + 8.0 * x[1] -
                                 x[1] * x[1] + 0.5 * x.squaredNorm();
                        },
                        [](const VectorD& x) {
                          VectorD g(2);
                          g << 2.0 * x[0] + x[0], 2.0 * (x[1] - 4.0) + 8.0 - 2.0 * x[1] + x[1];
                          return g;
                        },
                        [](const VectorD& x) { return x.squaredNorm(); },
                        [](const VectorD& x) { return x.squaredNorm(); });
    const auto rep = check_gradient(clf, box, 1e-5, 9);
    CHECK(rep.max_rel_error <= 1e-6);
  }

  SUBCASE("step outside (0, 1e-2] rejected") {
    const auto clf = default_quadratic_clf<double>(2);
    CHECK_THROWS_AS(check_gradient(clf, box, 0.5, 1), DomainError);
    CHECK_THROWS_AS(check_gradient(clf, box, 0.0, 1), DomainError);
  }

  SUBCASE("deterministic given seed") {
    const auto clf = default_quadratic_clf<double>(2);
    const auto a = check_gradient(clf, box, 1e-4, 123);
    const auto b = check_gradient(clf, box, 1e-4, 123);
    CHECK(a.max_rel_error == b.max_rel_error);
  }
}
