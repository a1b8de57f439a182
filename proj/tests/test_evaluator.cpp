#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nudge/evaluator.hpp"
#include "nudge/trainer.hpp"

using namespace nudge;

namespace {

Polyline random_trajectory(Rng& rng, double scale = 20.0) {
  Polyline t(kHorizonSteps);
  for (Vec2& p : t) {
    p.x = rng.uniform(-scale, scale);
    p.y = rng.uniform(-scale, scale);
  }
  return t;
}

Polyline slow_history(double speed) {
  Polyline h(kHistorySteps);
  for (int j = 0; j < kHistorySteps; ++j) {
    h[j] = {-speed * 0.5 * (kHistorySteps - 1 - j), 0.0};
  }
  return h;
}

}  // namespace

TEST_CASE("displacement metrics") {
  Rng rng(2);
  const Polyline truth = random_trajectory(rng);

  SUBCASE("exact match gives zero everywhere") {
    CHECK(ade(truth, truth) == 0.0);
    CHECK(fde(truth, truth) == 0.0);
    for (int k = 1; k <= 6; ++k) CHECK(a_at(truth, truth, k) == 0.0);
  }

  SUBCASE("a constant one-meter x offset gives one meter everywhere") {
    Polyline shifted = truth;
    for (Vec2& p : shifted) p.x += 1.0;
    CHECK(ade(shifted, truth) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fde(shifted, truth) == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k <= 6; ++k) {
      CHECK(a_at(shifted, truth, k) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  SUBCASE("random pairs match a brute-force recomputation") {
    for (int trial = 0; trial < 50; ++trial) {
      const Polyline a = random_trajectory(rng);
      const Polyline b = random_trajectory(rng);
      double total = 0.0;
      for (int i = 0; i < kHorizonSteps; ++i) {
        total += std::hypot(a[i].x - b[i].x, a[i].y - b[i].y);
      }
      CHECK(std::abs(ade(a, b) - total / 12.0) < 1e-12);
      CHECK(std::abs(fde(a, b) - std::hypot(a[11].x - b[11].x, a[11].y - b[11].y)) < 1e-12);
      // a@6s averages all twelve waypoints: identical to ADE by definition.
      CHECK(a_at(a, b, 6) == ade(a, b));
    }
  }

  SUBCASE("shape mismatch is rejected") {
    Polyline shorter = truth;
    shorter.pop_back();
    CHECK_THROWS_AS(ade(shorter, truth), ShapeError);
    CHECK_THROWS_AS(a_at(truth, truth, 7), UsageError);
  }
}

TEST_CASE("stop override rule") {
  const OverrideRuleConfig rule;
  Rng rng(5);
  const Polyline pred = random_trajectory(rng);

  SUBCASE("fires only when all four conditions hold") {
    const OverrideOutcome out = stop_override("stop", slow_history(0.5), pred, rule);
    CHECK(out.fired);
    for (const Vec2& p : out.trajectory) {
      CHECK(p.x == 0.0);
      CHECK(p.y == 0.0);
    }
  }

  SUBCASE("a conflicting action verb blocks it") {
    const OverrideOutcome out =
        stop_override("stop after you pass the truck", slow_history(0.5), pred, rule);
    CHECK_FALSE(out.fired);
    CHECK(out.trajectory == pred);
    CHECK(out.reason.find("pass") != std::string::npos);
  }

  SUBCASE("stop-related noun phrases block it") {
    CHECK_FALSE(stop_override("stop at the stop sign", slow_history(0.5), pred, rule).fired);
    CHECK_FALSE(stop_override("there is a bus stop here", slow_history(0.5), pred, rule).fired);
  }

  SUBCASE("the speed gate blocks fast histories") {
    const OverrideOutcome out = stop_override("stop", slow_history(5.0), pred, rule);
    CHECK_FALSE(out.fired);
    CHECK(out.trajectory == pred);
  }

  SUBCASE("the word budget blocks long instructions") {
    const std::string wordy =
        "stop please kindly whenever you find it truly convenient somewhere around here soon";
    CHECK_FALSE(stop_override(wordy, slow_history(0.5), pred, rule).fired);
  }

  SUBCASE("no cue means no trigger") {
    CHECK_FALSE(stop_override("go straight ahead", slow_history(0.5), pred, rule).fired);
    CHECK_FALSE(stop_override("", slow_history(0.5), pred, rule).fired);
  }

  SUBCASE("multi-word cues match as phrases") {
    CHECK(stop_override("please pull over", slow_history(0.5), pred, rule).fired);
    // "pull" alone is not a cue.
    CHECK_FALSE(stop_override("pull forward please", slow_history(0.5), pred, rule).fired);
  }

  SUBCASE("deceleration-ramp mode emits a forward-slowing trajectory") {
    OverrideRuleConfig ramp = rule;
    ramp.mode = OverrideRuleConfig::Mode::kDecelRamp;
    const OverrideOutcome out = stop_override("stop", slow_history(1.6), pred, ramp);
    REQUIRE(out.fired);
    CHECK(out.trajectory.front().x > 0.0);
    CHECK(out.trajectory.back().x == out.trajectory[5].x);  // parked after the ramp
    for (size_t i = 1; i < out.trajectory.size(); ++i) {
      CHECK(out.trajectory[i].x >= out.trajectory[i - 1].x);
    }
  }
}

TEST_CASE("evaluation pipeline over a small dataset") {
  GeneratorConfig gcfg;
  const auto scenes = generate_dataset(77, 64, gcfg, Split::kVal, 0);
  const PlannerConfig pcfg;
  const PlannerParams theta = PlannerParams::stage1(pcfg);
  const Adapter adapter = Adapter::identity_init(
      AdapterConfig{Variant::kFilm, pcfg.feature_dim, 32, 128, 128, {}}, 11);

  EvalConfig ec;
  ec.regime = Regime::kRandom;
  ec.eval_seed = 4242;

  SUBCASE("identity adapter equals the frozen planner row") {
    const MethodSpec planner_only{"planner", &theta, nullptr, false, false, false};
    const MethodSpec with_adapter{"adapter", &theta, &adapter, true, false, false};
    const MethodResult a = evaluate_method(planner_only, scenes, pcfg, ec);
    const MethodResult b = evaluate_method(with_adapter, scenes, pcfg, ec);
    CHECK(a.ade == b.ade);
    CHECK(a.fde == b.fde);
    CHECK(a.a_at == b.a_at);
  }

  SUBCASE("identity adapter has exactly zero delta-ADE") {
    CHECK(delta_ade(adapter, theta, scenes, pcfg, ec) == 0.0);
  }

  SUBCASE("a zeroed language pathway keeps delta-ADE at exactly zero") {
    Adapter gated = Adapter::identity_init(
        AdapterConfig{Variant::kFilm, pcfg.feature_dim, 32, 128, 128, {}}, 12);
    Rng rng(9);
    // Busy head, but the generators stay zero: text cannot reach the output.
    gated.params().get("head.w2").value = Matrix::uniform(128, 72, 0.05, rng);
    gated.params().get("head.b2").value = Matrix::uniform(1, 72, 0.2, rng);
    gated.params().get("film.scale_b").value = Matrix::uniform(1, 32, 1.0, rng);
    CHECK(delta_ade(gated, theta, scenes, pcfg, ec) == 0.0);
  }

  SUBCASE("both text passes of one scene draw the identical command") {
    for (const Scene& s : scenes) {
      const Command a = eval_command(s, pcfg, ec);
      const Command b = eval_command(s, pcfg, ec);
      CHECK(a == b);
    }
  }

  SUBCASE("report: gain column, a6 = ADE, csv round-trip") {
    std::vector<MethodSpec> methods;
    methods.push_back({"stage1-base", &theta, nullptr, false, false, false});
    methods.push_back({"residual-film", &theta, &adapter, true, true, false});
    EvalReport report = build_report(methods, scenes, pcfg, ec, "stage1-base");
    report.config_hash = "feedfacefeedface";
    REQUIRE(report.rows.size() == 2);
    for (const MethodResult& row : report.rows) {
      CHECK(row.a_at[5] == doctest::Approx(row.ade).epsilon(1e-12));
    }
    CHECK(report.rows[0].name == "stage1-base");
    CHECK_FALSE(report.rows[0].gain.has_value());
    REQUIRE(report.rows[1].gain.has_value());
    CHECK(*report.rows[1].gain ==
          doctest::Approx(report.rows[0].ade - report.rows[1].ade).epsilon(1e-12));
    REQUIRE(report.rows[1].delta_ade.has_value());
    CHECK(*report.rows[1].delta_ade == 0.0);  // identity adapter

    const std::string csv = report_to_csv(report);
    const auto rows = report_rows_from_csv(csv);
    EvalReport reparsed = report;
    reparsed.rows = rows;
    CHECK(report_to_csv(reparsed) == csv);

    CHECK_THROWS_AS(build_report(methods, scenes, pcfg, ec, "missing-row"), ReportError);
  }

  SUBCASE("missing planner checkpoint raises a report error naming the method") {
    const MethodSpec broken{"ghost-method", nullptr, nullptr, false, false, false};
    try {
      evaluate_method(broken, scenes, pcfg, ec);
      FAIL("expected ReportError");
    } catch (const ReportError& e) {
      CHECK(std::string(e.what()).find("ghost-method") != std::string::npos);
    }
  }

  SUBCASE("report JSON carries the audit trail") {
    std::vector<MethodSpec> methods;
    methods.push_back({"stage1-base", &theta, nullptr, false, false, true});
    EvalReport report = build_report(methods, scenes, pcfg, ec, "stage1-base");
    const std::string js = report_to_json(report);
    CHECK(js.find("\"audit\"") != std::string::npos);
    CHECK(js.find("override_fired") != std::string::npos);
  }
}

TEST_CASE("override fires only on qualifying scenes across a generated set") {
  GeneratorConfig gcfg;
  const auto scenes = generate_dataset(123, 400, gcfg, Split::kVal, 0);
  const PlannerConfig pcfg;
  const PlannerParams theta = PlannerParams::stage1(pcfg);
  EvalConfig ec;
  ec.regime = Regime::kReliable;
  const MethodSpec spec{"planner+override", &theta, nullptr, false, false, true};
  const MethodResult result = evaluate_method(spec, scenes, pcfg, ec);
  int fired = 0;
  for (size_t i = 0; i < scenes.size(); ++i) {
    const SceneAudit& audit = result.audit[i];
    const Scene& s = scenes[i];
    if (audit.override_fired) {
      ++fired;
      const auto words = split_words(s.instruction);
      CHECK(words.size() <= 12);
      CHECK(mean_history_speed(s.history) <= 2.0);
    }
  }
  // The generated mix has ~10% stop scenes with mostly short stop phrasings.
  CHECK(fired > 0);
}
