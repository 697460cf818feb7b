#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "safesocp/scenario.hpp"
#include "safesocp/sim.hpp"
#include "oracles.hpp"

using namespace safesocp;
using namespace testsupport;

namespace {

VectorD vec2(double a, double b) {
  VectorD v(2);
  v << a, b;
  return v;
}

WorstCaseModel<double> planar_model_with_errors(const Scenario<double>& sc, double e_f, double e_g,
                                                double e_h = 0.0, double e_dh = 0.0) {
  auto model = exact_model(sc);
  model.e_f = [e_f](const VectorD&) { return e_f; };
  model.e_g = [e_g](const VectorD&) { return e_g; };
  model.e_h = [e_h](const VectorD&) { return e_h; };
  model.e_gradh = [e_dh](const VectorD&) { return e_dh; };
  return model;
}

}  // namespace

TEST_CASE("worst-case margin test at a point") {
  const auto sc = make_planar_scenario<double>();  // eta_h = 0.1
  const VectorD x = vec2(1.0, 0.0);

  SUBCASE("zero errors: margins are S/2 and (eta_h + zeta)/2") {
    const auto model = planar_model_with_errors(sc, 0, 0);
    const auto cm = check_worstcase_compat<double>(model, sc.clf, sc.cbf,
                                                   BoundB<double>::constant(3.0), x);
    CHECK(cm.holds());
    CHECK(cm.clf_margin == doctest::Approx(0.5 * sc.clf.S(x)));
    CHECK(cm.cbf_margin == doctest::Approx(0.5 * 0.1));
    CHECK(cm.confidence_label == 1.0);
  }
  SUBCASE("e_f = 0.05 with B = 3 still holds") {
    const auto model = planar_model_with_errors(sc, 0.05, 0);
    const auto cm = check_worstcase_compat<double>(model, sc.clf, sc.cbf,
                                                   BoundB<double>::constant(3.0), x);
    CHECK(cm.clf_margin == doctest::Approx(0.25 - 0.05));
    CHECK(cm.holds_clf);
  }
  SUBCASE("e_f = 0.3 breaks the stability margin") {
    const auto model = planar_model_with_errors(sc, 0.3, 0);
    const auto cm = check_worstcase_compat<double>(model, sc.clf, sc.cbf,
                                                   BoundB<double>::constant(3.0), x);
    CHECK(cm.clf_margin == doctest::Approx(0.25 - 0.30));
    CHECK(!cm.holds_clf);
  }
  SUBCASE("the origin is rejected") {
    const auto model = planar_model_with_errors(sc, 0, 0);
    CHECK_THROWS_AS(check_worstcase_compat<double>(model, sc.clf, sc.cbf,
                                                   BoundB<double>::constant(3.0),
                                                   VectorD::Zero(2)),
                    DomainError);
  }
}

TEST_CASE("GP margin test at a point") {
  const auto sc = make_planar_scenario<double>();
  const VectorD x = vec2(1.0, 0.0);  // S(x) = 0.5
  auto h_lb = [&sc](const VectorD& y) { return sc.barrier.h(y); };

  GpTerms<double> terms;
  terms.beta_delta = 1.0;
  terms.delta = 0.05;
  auto zero_vec = [](const VectorD&) { return VectorD::Zero(3); };
  terms.gamma_V = zero_vec;
  terms.gamma_h = zero_vec;
  terms.G_V = [](const VectorD&) { return MatrixD::Zero(3, 3); };
  terms.G_h = [](const VectorD&) { return MatrixD::Zero(3, 3); };

  SUBCASE("zero variance factors hold with the full RHS as margin") {
    const auto cm = check_gp_compat<double>(terms, sc.clf, sc.cbf, h_lb,
                                            BoundB<double>::constant(0.0), x);
    CHECK(cm.holds());
    CHECK(cm.clf_margin == doctest::Approx(0.5 / 2.0));
    CHECK(cm.confidence_label == doctest::Approx(0.9));
  }
  SUBCASE("sigma_max = 0.2 against S = 0.5, B = 0") {
    terms.G_V = [](const VectorD&) { return MatrixD(0.2 * MatrixD::Identity(3, 3)); };
    const auto cm = check_gp_compat<double>(terms, sc.clf, sc.cbf, h_lb,
                                            BoundB<double>::constant(0.0), x);
    CHECK(cm.clf_margin == doctest::Approx(0.25 - 0.2));
    CHECK(cm.holds_clf);
  }
  SUBCASE("B = 2 shrinks the RHS below sigma_max") {
    terms.G_V = [](const VectorD&) { return MatrixD(0.2 * MatrixD::Identity(3, 3)); };
    const auto cm = check_gp_compat<double>(terms, sc.clf, sc.cbf, h_lb,
                                            BoundB<double>::constant(2.0), x);
    CHECK(cm.clf_margin == doctest::Approx(0.5 / (2.0 * std::sqrt(5.0)) - 0.2));
    CHECK(!cm.holds_clf);
  }
}

TEST_CASE("margins are monotone in errors, sigma_max and B") {
  const auto sc = make_planar_scenario<double>();
  const VectorD x = vec2(2.0, 6.0);
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const double ef = rng.uniform(0.0, 0.3), eg = rng.uniform(0.0, 0.3);
    const double B1 = rng.uniform(0.0, 3.0);
    const auto m1 = check_worstcase_compat<double>(planar_model_with_errors(sc, ef, eg), sc.clf,
                                                   sc.cbf, BoundB<double>::constant(B1), x);
    const auto m2 = check_worstcase_compat<double>(
        planar_model_with_errors(sc, ef + 0.1, eg + 0.05), sc.clf, sc.cbf,
        BoundB<double>::constant(B1), x);
    const auto m3 = check_worstcase_compat<double>(planar_model_with_errors(sc, ef, eg), sc.clf,
                                                   sc.cbf, BoundB<double>::constant(B1 + 1.0), x);
    CHECK(m2.clf_margin <= m1.clf_margin + 1e-12);
    CHECK(m2.cbf_margin <= m1.cbf_margin + 1e-12);
    CHECK(m3.clf_margin <= m1.clf_margin + 1e-12);
    CHECK(m3.cbf_margin <= m1.cbf_margin + 1e-12);
  }
}

TEST_CASE("slack program and analysis bound") {
  const auto sc = make_planar_scenario<double>();

  SUBCASE("feasible at (2,6); bound = factor * ||u_slack||") {
    const VectorD x = vec2(2.0, 6.0);
    const auto prog = slack_program(sc.truth, sc.clf, sc.cbf, sc.barrier, x);
    const auto res = solve_min_norm(prog);
    REQUIRE(res.status == SolveStatus::Feasible);
    // cross-check against the grid oracle
    const VectorD u_oracle = refined_oracle(prog, 10.0);
    CHECK(std::abs(res.u_star.norm() - u_oracle.norm()) <= 1e-3);

    const double bound = slack_norm_bound(sc.truth, sc.clf, sc.cbf, sc.barrier, x, 1.5);
    CHECK(bound == doctest::Approx(1.5 * res.u_star.norm()).epsilon(1e-9));
    // monotone in the factor
    CHECK(slack_norm_bound(sc.truth, sc.clf, sc.cbf, sc.barrier, x, 1.0) <= bound);
  }

  SUBCASE("infeasible directly above the disk: throw vs mark") {
    const VectorD x = vec2(0.0, 6.0);
    CHECK_THROWS_AS(slack_norm_bound(sc.truth, sc.clf, sc.cbf, sc.barrier, x, 1.0),
                    InfeasibleSlackError);
    const double marked = slack_norm_bound(sc.truth, sc.clf, sc.cbf, sc.barrier, x, 1.0, {},
                                           SlackInfeasiblePolicy::MarkUnbounded);
    CHECK(!std::isfinite(marked));
    // a failed premise reads as conditions not holding
    const auto model = planar_model_with_errors(sc, 0, 0);
    const auto cm = check_worstcase_compat<double>(
        model, sc.clf, sc.cbf,
        BoundB<double>::analysis_pointwise(sc.truth, sc.clf, sc.cbf, sc.barrier, 1.5), x);
    CHECK(!cm.holds());
  }

  SUBCASE("stable drift makes B = 0 where u = 0 satisfies both slacks") {
    const auto planar = make_planar_scenario<double>();
    auto stable = make_linear_scenario<double>(-3.0 * MatrixD::Identity(2, 2),
                                               MatrixD::Identity(2, 2), planar.barrier.h,
                                               planar.barrier.gradh, 0.1);
    const VectorD x = vec2(4.0, 8.0);  // far from the disk, h large
    const double bound = slack_norm_bound(stable.truth, stable.clf, stable.cbf, stable.barrier, x,
                                          1.5);
    CHECK(bound <= 1e-7);
  }
}

TEST_CASE("grid-backed analysis bound") {
  const auto sc = make_planar_scenario<double>();
  const GridSpec<double> grid(Box<double>(vec2(1.0, 5.0), vec2(3.0, 7.0)), {5, 5});
  const auto B = compute_bound_B_analysis(sc.truth, sc.clf, sc.cbf, sc.barrier, grid, 1.5);
  REQUIRE(B.mode() == BoundB<double>::Mode::Analysis);

  SUBCASE("node queries return the nodal value") {
    const VectorD node = vec2(2.0, 6.0);
    const double pointwise = slack_norm_bound(sc.truth, sc.clf, sc.cbf, sc.barrier, node, 1.5);
    CHECK(B(node) == doctest::Approx(pointwise).epsilon(1e-9));
  }
  SUBCASE("interior queries dominate their cell corners") {
    const VectorD q = vec2(2.13, 6.31);
    double corner_max = 0.0;
    for (double dx : {2.0, 2.5})
      for (double dy : {6.0, 6.5})
        corner_max = std::max(
            corner_max, slack_norm_bound(sc.truth, sc.clf, sc.cbf, sc.barrier, vec2(dx, dy), 1.5));
    CHECK(B(q) == doctest::Approx(corner_max).epsilon(1e-9));
  }
  SUBCASE("queries outside the hull return the global maximum") {
    CHECK(B(vec2(-4.0, 0.0)) == doctest::Approx(B.field()->global_max()).epsilon(1e-12));
  }
  SUBCASE("throw policy reports the offending grid point") {
    const GridSpec<double> bad(Box<double>(vec2(-0.5, 5.5), vec2(0.5, 6.5)), {3, 3});
    CHECK_THROWS_WITH_AS(
        compute_bound_B_analysis(sc.truth, sc.clf, sc.cbf, sc.barrier, bad, 1.0),
        doctest::Contains("infeasible at"), InfeasibleSlackError);
  }
}

TEST_CASE("feasibility map: zero-error model holds everywhere with feasible phase-I") {
  const auto sc = make_planar_scenario<double>();
  const auto model = planar_model_with_errors(sc, 0, 0);
  const BoundB<double> B = BoundB<double>::analysis_pointwise(
      sc.truth, sc.clf, sc.cbf, sc.barrier, 1.5, {}, SlackInfeasiblePolicy::MarkUnbounded);

  const GridSpec<double> grid(Box<double>(vec2(-3.0, -1.0), vec2(3.0, 3.0)), {13, 9});
  auto margin_fn = [&](const VectorD& x) {
    return check_worstcase_compat<double>(model, sc.clf, sc.cbf, B, x);
  };
  auto pair_fn = [&](const VectorD& x) { return worstcase_pair(model, sc.clf, sc.cbf, x); };
  auto skip = [&](const VectorD& x) { return sc.barrier.h(x) < 0.0; };

  const auto cells = feasibility_map<double>(margin_fn, pair_fn, grid, 1e-2, skip);
  CHECK(!cells.empty());
  for (const auto& c : cells) {
    if (c.margins.holds()) CHECK(c.phase1_t < -1e-9);
  }
  // determinism across thread counts
  const auto cells4 = feasibility_map<double>(margin_fn, pair_fn, grid, 1e-2, skip, {}, 4);
  REQUIRE(cells4.size() == cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CHECK(cells4[i].x == cells[i].x);
    CHECK(cells4[i].phase1_t == cells[i].phase1_t);
  }
}

TEST_CASE("sparse data: conditions fail near the origin first, and the test is one-sided") {
  const auto sc = make_planar_scenario<double>();
  const Oracle<double> oracle{sc.truth};
  Dataset<double> ds(2, 2);
  Rng rng(12);
  const Box<double> far(vec2(1.0, 4.5), vec2(3.5, 7.5));
  while (ds.size() < 30) {
    const VectorD p = far.sample(rng);
    if (sc.barrier.h(p) >= 0.0) ds.insert_from(oracle, p);
  }
  const auto model = nn_model(sc, ds, LipschitzConstants<double>{});
  const BoundB<double> B = BoundB<double>::analysis_pointwise(
      sc.truth, sc.clf, sc.cbf, sc.barrier, 1.5, {}, SlackInfeasiblePolicy::MarkUnbounded);

  auto margins_at = [&](const VectorD& x) {
    return check_worstcase_compat<double>(model, sc.clf, sc.cbf, B, x);
  };
  // near the data the conditions hold; near the origin S(x) -> 0 kills them
  CHECK(margins_at(vec2(2.0, 6.0)).holds_clf);
  CHECK(!margins_at(vec2(0.05, 0.05)).holds());

  // one-sidedness: conditions fail at (1,0) under e_f = 0.3 yet the same
  // model's cone pair is strictly feasible there
  const auto coarse = planar_model_with_errors(sc, 0.3, 0.0);
  const VectorD x = vec2(1.0, 0.0);
  const auto cm = check_worstcase_compat<double>(coarse, sc.clf, sc.cbf,
                                                 BoundB<double>::constant(3.0), x);
  CHECK(!cm.holds());
  const auto ph = phase1(worstcase_pair(coarse, sc.clf, sc.cbf, x));
  CHECK(ph.t_star < -1e-9);
}
