#include <doctest.h>

#include <cmath>

#include "txl/recl.hpp"

using namespace txl;
using namespace txl::recl;

namespace {

// A table with position-constant losses per context.
evaluator::LossTable flat_table(const std::string& id, const std::vector<int>& contexts,
                                const std::vector<double>& level_per_context,
                                std::int64_t count = 10) {
  evaluator::LossTable table;
  table.model_id = id;
  table.stream_id = "fixture";
  table.contexts = contexts;
  table.t0 = contexts.back();
  table.count = count;
  for (double level : level_per_context) {
    table.losses.emplace_back(static_cast<std::size_t>(count), level);
  }
  return table;
}

evaluator::LossTable vector_table(const std::string& id, const std::vector<int>& contexts,
                                  const std::vector<std::vector<double>>& losses) {
  evaluator::LossTable table;
  table.model_id = id;
  table.stream_id = "fixture";
  table.contexts = contexts;
  table.t0 = contexts.back();
  table.count = static_cast<std::int64_t>(losses.front().size());
  table.losses = losses;
  return table;
}

}  // namespace

TEST_CASE("baseline: per-position minimum across the group") {
  ModelGroup group;
  group.tables.push_back(vector_table("a", {1}, {{1.0, 3.0}}));
  group.tables.push_back(vector_table("b", {1}, {{2.0, 2.0}}));
  const auto b = baseline(group, 1);
  CHECK(b == std::vector<double>{1.0, 2.0});

  // Single-model group: the baseline is that model's losses.
  ModelGroup solo;
  solo.tables.push_back(vector_table("a", {1}, {{0.5, 0.25, 4.0}}));
  CHECK(baseline(solo, 1) == std::vector<double>{0.5, 0.25, 4.0});

  // b(c, t) <= l_i(c, t) for every model and position.
  for (std::size_t i = 0; i < group.tables.size(); ++i) {
    const auto& losses = group.tables[i].at_context(1);
    for (std::size_t t = 0; t < losses.size(); ++t) CHECK(b[t] <= losses[t]);
  }

  // Mismatched coverage is rejected.
  ModelGroup bad;
  bad.tables.push_back(vector_table("a", {1}, {{1.0, 2.0}}));
  bad.tables.push_back(vector_table("b", {2}, {{1.0, 2.0}}));
  CHECK_THROWS_AS(baseline(bad, 1), ConfigError);
}

TEST_CASE("top_r_positions: ceil count, descending loss, earliest tie wins") {
  const std::vector<double> b{5.0, 1.0, 3.0, 4.0};
  CHECK(top_r_positions(b, 1.0) == std::vector<std::int64_t>{0, 3, 2, 1});
  CHECK(top_r_positions(b, 0.5) == std::vector<std::int64_t>{0, 3});
  // ceil(0.3 * 4) = 2.
  CHECK(top_r_positions(b, 0.3) == std::vector<std::int64_t>{0, 3});

  const std::vector<double> tied{2.0, 2.0, 1.0};
  CHECK(top_r_positions(tied, 1.0 / 3.0) == std::vector<std::int64_t>{0});

  CHECK_THROWS_AS(top_r_positions(b, 0.0), ConfigError);
  CHECK_THROWS_AS(top_r_positions(b, 1.5), ConfigError);
}

TEST_CASE("relative_loss: the baseline clamp") {
  // b(c) = {1.0, 2.0}; l(c') = {0.5, 3.0}: f = (0.5 + 2.0) / 2 = 1.25.
  ModelGroup group;
  group.tables.push_back(vector_table("m", {1, 2}, {{1.0, 2.0}, {0.5, 3.0}}));
  const std::vector<std::int64_t> both{0, 1};
  CHECK(relative_loss(group, 0, 1, 2, both) == doctest::Approx(1.25).epsilon(1e-12));

  // c' = c for the model that achieves the minimum everywhere: f = mean b.
  CHECK(relative_loss(group, 0, 1, 1, both) == doctest::Approx(1.5).epsilon(1e-12));

  // If the long-context losses never beat the baseline, the clamp holds f at
  // mean b: no credited gain.
  ModelGroup worse;
  worse.tables.push_back(vector_table("m", {1, 2}, {{1.0, 2.0}, {9.0, 9.0}}));
  CHECK(relative_loss(worse, 0, 1, 2, both) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(relative_gain(worse, 0, 1, 2, both) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("relative_gain: hand values and monotonicity") {
  // f(c,c) = ln 2, f(c,c') = 0 -> g = (2 - 1) / 2 = 0.5.
  ModelGroup group;
  group.tables.push_back(
      vector_table("m", {1, 2}, {{std::log(2.0), std::log(2.0)}, {0.0, 0.0}}));
  const std::vector<std::int64_t> both{0, 1};
  CHECK(relative_gain(group, 0, 1, 2, both) == doctest::Approx(0.5).epsilon(1e-12));

  // Equal relative losses mean zero gain.
  ModelGroup flat;
  flat.tables.push_back(flat_table("m", {1, 2}, {0.7, 0.7}));
  CHECK(relative_gain(flat, 0, 1, 2, {both.data(), 2}) == doctest::Approx(0.0).epsilon(1e-12));

  // Lower f(c, c') always means higher gain.
  double previous = -1.0;
  for (double level : {0.6, 0.4, 0.2}) {
    ModelGroup g;
    g.tables.push_back(flat_table("m", {1, 2}, {0.7, level}));
    const double gain = relative_gain(g, 0, 1, 2, {both.data(), 2});
    CHECK(gain > previous);
    previous = gain;
  }
}

TEST_CASE("recl_search: hand-traced fixtures") {
  ReclConfig config;
  config.r = 1.0;
  config.initial_c = 100;
  config.delta = 100;

  // Gains 0.05, 0.02, 0.005 at successive steps: the search stops at 300.
  {
    const std::vector<int> contexts{100, 200, 300, 400};
    const double a100 = 1.0;
    const double a200 = a100 + std::log(0.95);   // g(100,200) = 0.05
    const double a300 = a200 + std::log(0.98);   // g(200,300) = 0.02
    const double a400 = a300 + std::log(0.995);  // g(300,400) = 0.005
    ModelGroup group;
    group.tables.push_back(flat_table("m", contexts, {a100, a200, a300, a400}));
    const ReclResult result = recl_search(group, 0, config);
    CHECK(result.recl == 300);
    CHECK(result.saturated);
    REQUIRE(result.trace.size() == 3);
    CHECK(result.trace[0].gain == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(result.trace[1].gain == doctest::Approx(0.02).epsilon(1e-9));
    CHECK(result.trace[2].gain == doctest::Approx(0.005).epsilon(1e-9));
  }

  // A context-free model gains nothing: RECL = initial c.
  {
    ModelGroup group;
    group.tables.push_back(flat_table("flat", {100, 200, 300}, {0.9, 0.9, 0.9}));
    const ReclResult result = recl_search(group, 0, config);
    CHECK(result.recl == 100);
    CHECK(result.saturated);
  }

  // The threshold is strict: a gain exactly at the threshold continues the
  // search. Built by measuring the first-step gain and searching with the
  // threshold set to that very value (exp/log round-trips make a literal
  // 0.01 unrepresentable).
  {
    const std::vector<int> contexts{100, 200, 300};
    const double a100 = 1.0;
    const double a200 = a100 + std::log(0.99);  // g(100,200) ~ 0.01
    const double a300 = a200;                   // then zero gain
    ModelGroup group;
    group.tables.push_back(flat_table("m", contexts, {a100, a200, a300}));

    const std::vector<std::int64_t> all{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    const double boundary_gain = relative_gain(group, 0, 100, 200, all);
    ReclConfig boundary = config;
    boundary.threshold = boundary_gain;
    const ReclResult result = recl_search(group, 0, boundary);
    CHECK(result.recl == 200);  // gain == threshold is not below it
    REQUIRE(result.trace.size() == 2);
    CHECK(result.trace[0].gain == boundary_gain);
  }

  // Gains that never fall below the threshold exhaust the table: the last
  // visited context comes back flagged unsaturated.
  {
    const std::vector<int> contexts{100, 200, 300};
    const double a100 = 1.0;
    const double a200 = a100 + std::log(0.9);
    const double a300 = a200 + std::log(0.9);
    ModelGroup group;
    group.tables.push_back(flat_table("m", contexts, {a100, a200, a300}));
    const ReclResult result = recl_search(group, 0, config);
    CHECK(result.recl == 300);
    CHECK_FALSE(result.saturated);
  }

  // RECL never leaves the initial-c + k*delta grid.
  {
    ModelGroup group;
    group.tables.push_back(flat_table("m", {100, 200, 300}, {1.0, 0.9, 0.89}));
    const ReclResult result = recl_search(group, 0, config);
    CHECK((result.recl - config.initial_c) % config.delta == 0);
  }

  // Missing contexts in the walk are a configuration error.
  {
    ModelGroup group;
    group.tables.push_back(flat_table("m", {100, 300}, {1.0, 0.5}));
    CHECK_THROWS_AS(recl_search(group, 0, config), ConfigError);
  }
}

TEST_CASE("recl report serializes the full trace") {
  ReclConfig config;
  config.r = 0.5;
  config.initial_c = 100;
  config.delta = 100;
  ModelGroup group;
  group.tables.push_back(flat_table("demo", {100, 200}, {1.0, 1.0}));
  const ReclResult result = recl_search(group, 0, config);
  const nlohmann::json report = result_to_json(result, config);
  CHECK(report.at("model") == "demo");
  CHECK(report.at("recl").get<int>() == 100);
  CHECK(report.at("trace").size() == 1);
}
