#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "safesocp/universal.hpp"
#include "oracles.hpp"

using namespace safesocp;
using namespace testsupport;

namespace {
Socc<double> one_dim_cone(double q_scale, double r1, double b1, double c) {
  MatrixD Q(2, 1);
  Q << q_scale, 0.0;
  VectorD r(2);
  r << r1, 0.0;
  RowVector<double> b(1);
  b << b1;
  return Socc<double>(Q, r, b, c);
}
}  // namespace

TEST_CASE("hand-evaluated 1-D cone: u_s = sqrt(5) - 1") {
  const auto s = one_dim_cone(1.0, 0.0, 2.0, 1.0);
  const auto [u_s, mid] = universal_control(s);
  CHECK(mid.tilde_b[0] == doctest::Approx(2.0));
  CHECK(mid.tilde_b[1] == doctest::Approx(0.0));
  CHECK(mid.tilde_c == doctest::Approx(1.0));
  CHECK(mid.bar_b == doctest::Approx(2.0));
  CHECK(u_s[0] == doctest::Approx(std::sqrt(5.0) - 1.0).epsilon(1e-12));
  CHECK(socc_residual(s, u_s) == doctest::Approx(-std::sqrt(5.0)).epsilon(1e-10));
}

TEST_CASE("contractive tilde_b gives u_s = 0") {
  // ||tilde_b|| <= 1 with r = 0: v_s = 0, residual = -tilde_c
  const auto s = one_dim_cone(1.0, 0.0, 0.5, 0.8);
  const auto [u_s, mid] = universal_control(s);
  CHECK(u_s.norm() == 0.0);
  CHECK(mid.v_s.norm() == 0.0);
  CHECK(socc_residual(s, u_s) == doctest::Approx(-0.8));
}

TEST_CASE("identity block with b = 0: unconstrained-feasible origin") {
  MatrixD Q = MatrixD::Zero(3, 2);
  Q.topRows(2) = MatrixD::Identity(2, 2);
  const Socc<double> s(Q, VectorD::Zero(3), RowVector<double>::Zero(2), 1.0);
  const auto [u_s, mid] = universal_control(s);
  CHECK(mid.tilde_b.norm() == 0.0);
  CHECK(u_s.norm() == 0.0);
  CHECK(socc_residual(s, u_s) == doctest::Approx(-1.0));
}

TEST_CASE("image condition diagnostics") {
  SUBCASE("r = 0 with small tilde_b: residual 0") {
    CHECK(check_image_condition(one_dim_cone(1.0, 0.0, 0.5, 0.8)) == doctest::Approx(0.0));
  }
  SUBCASE("v_s along tilde_b stays in Im(Q)") {
    CHECK(check_image_condition(one_dim_cone(1.0, 0.0, 2.0, 1.0)) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("r orthogonal to Im(Q) is rejected") {
    // Q spans e1; r = (0,1); small b keeps v_s = 0, so v_s - r misses Im(Q) by 1
    const auto s = one_dim_cone(1.0, 0.0, 0.5, 5.0);
    Socc<double> bad = s;
    bad.r[0] = 0.0;
    bad.r[1] = 1.0;
    CHECK(check_image_condition(bad) == doctest::Approx(1.0));
    CHECK_THROWS_AS(universal_control(bad), ImageConditionError);
  }
}

TEST_CASE("singular Q guard and the affine branch") {
  RowVector<double> b(2);
  b << 1.0, 0.0;
  const auto affine = embed_worstcase<double>(0.0, b, -2.0, 2);
  CHECK_THROWS_AS(universal_control(affine), SingularQError);

  SUBCASE("affine shortcut: feasible origin") {
    CHECK(universal_control_affine<double>(b, 0.5).norm() == 0.0);
  }
  SUBCASE("affine shortcut: half-space projection") {
    const VectorD u = universal_control_affine<double>(b, -2.0);
    CHECK(u[0] == doctest::Approx(2.0));
    CHECK(b.dot(u) + (-2.0) == doctest::Approx(0.0));
  }
  SUBCASE("affine shortcut: b = 0 with c < 0 is infeasible") {
    CHECK_THROWS_AS(universal_control_affine<double>(RowVector<double>::Zero(2), -1.0),
                    NotStrictlyFeasibleError);
  }
}

TEST_CASE("strict-feasibility precondition check is opt-in") {
  // infeasible cone: ||u|| <= u1 - 1
  RowVector<double> b(1);
  b << 1.0;
  MatrixD Q(2, 1);
  Q << 1.0, 0.0;
  const Socc<double> s(Q, VectorD::Zero(2), b, -1.0);
  CHECK_THROWS_AS(universal_control(s, 1e-9, true), NotStrictlyFeasibleError);
}

TEST_CASE("worst-case shortcut matches the general formula") {
  Rng rng(61);
  for (int i = 0; i < 300; ++i) {
    const int m = 1 + static_cast<int>(rng.next_u64() % 3);
    const double a = rng.uniform(0.2, 3.0);
    RowVector<double> b(m);
    for (int j = 0; j < m; ++j) b[j] = 2.0 * rng.normal();
    VectorD u0(m);
    for (int j = 0; j < m; ++j) u0[j] = rng.normal();
    const auto s = embed_worstcase(a, b, 0.0, m);
    const double c = (s.Q * u0).norm() - b.dot(u0) + rng.uniform(0.1, 1.0);
    const auto cone = embed_worstcase(a, b, c, m);
    const auto [u_general, mid] = universal_control(cone);
    const VectorD u_shortcut = universal_control_worstcase(a, b, c);
    CHECK((u_general - u_shortcut).norm() <= 1e-10 * (1.0 + u_general.norm()));
  }
}

TEST_CASE("residual nonpositive on random feasible cones passing the image check") {
  Rng rng(7);
  for (int i = 0; i < 300; ++i) {
    const int m = 1 + static_cast<int>(rng.next_u64() % 3);
    const auto s = make_random_universal_socc(rng, m);
    REQUIRE(check_image_condition(s) <= 1e-9);
    const auto [u_s, mid] = universal_control(s);
    CHECK(socc_residual(s, u_s) <= 1e-9);
  }
}

TEST_CASE("continuity across the ||tilde_b|| = 1 switch") {
  // path b(s) = s e1 crossing s = 1 with tilde_c = 1 fixed
  auto u_at = [](double s) {
    MatrixD Q = MatrixD::Zero(3, 2);
    Q.topRows(2) = MatrixD::Identity(2, 2);
    RowVector<double> b(2);
    b << s, 0.0;
    const Socc<double> cone(Q, VectorD::Zero(3), b, 1.0);
    return universal_control(cone).first;
  };
  double prev_maxjump = std::numeric_limits<double>::infinity();
  for (const double step : {1e-2, 1e-3, 1e-4}) {
    double maxjump = 0.0;
    VectorD last = u_at(0.5);
    for (double s = 0.5 + step; s <= 1.5 + 1e-12; s += step) {
      const VectorD cur = u_at(s);
      maxjump = std::max(maxjump, (cur - last).norm());
      last = cur;
    }
    CHECK(maxjump < prev_maxjump + 1e-15);
    prev_maxjump = maxjump;
  }
  CHECK(prev_maxjump <= 1e-3);  // jumps vanish with the path resolution
}
