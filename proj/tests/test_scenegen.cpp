#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "nudge/scenegen.hpp"

using namespace nudge;

namespace {

GeneratorConfig default_config() { return GeneratorConfig{}; }

bool scene_equal(const Scene& a, const Scene& b) {
  return a.id == b.id && a.history == b.history && a.future == b.future &&
         a.lanelets == b.lanelets && a.maneuver == b.maneuver && a.instruction == b.instruction &&
         a.split == b.split;
}

Polyline quarter_circle_left(double radius, double spacing) {
  Polyline line;
  const double total = radius * M_PI / 2.0;
  for (double s = 0.0; s <= total; s += spacing) {
    line.push_back({radius * std::sin(s / radius), radius * (1.0 - std::cos(s / radius))});
  }
  return line;
}

}  // namespace

TEST_CASE("generation is deterministic under a fixed seed") {
  const auto a = generate_dataset(77, 100, default_config());
  const auto b = generate_dataset(77, 100, default_config());
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(scene_equal(a[i], b[i]));
}

TEST_CASE("maneuver histogram stays within 3 sigma of the configured mix") {
  const int n = 1000;
  const auto scenes = generate_dataset(5, n, default_config());
  std::array<int, 4> counts{};
  for (const Scene& s : scenes) counts[static_cast<int>(s.maneuver)]++;
  const std::array<double, 4> mix{0.3, 0.3, 0.3, 0.1};
  for (int i = 0; i < 4; ++i) {
    const double expected = n * mix[i];
    const double sigma = std::sqrt(n * mix[i] * (1.0 - mix[i]));
    INFO("class ", i, " count ", counts[i]);
    CHECK(std::abs(counts[i] - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("scene shape invariants") {
  const auto scenes = generate_dataset(9, 200, default_config());
  for (const Scene& s : scenes) {
    REQUIRE(s.history.size() == static_cast<size_t>(kHistorySteps));
    REQUIRE(s.future.size() == static_cast<size_t>(kHorizonSteps));
    REQUIRE(!s.lanelets.empty());
    // History ends at the origin (ego-frame convention).
    CHECK(s.history.back().x == 0.0);
    CHECK(s.history.back().y == 0.0);
    if (s.maneuver == Maneuver::kStop) {
      CHECK(mean_history_speed(s.history) <= 2.0);
    }
  }
}

TEST_CASE("noise-free straight scenes have no lateral drift") {
  GeneratorConfig cfg = default_config();
  cfg.noise_sigma = 0.0;
  const auto scenes = generate_dataset(13, 300, cfg);
  for (const Scene& s : scenes) {
    if (s.maneuver != Maneuver::kStraight) continue;
    CHECK(std::abs(s.future.back().y) < 1.0);
  }
}

TEST_CASE("instruction templates") {
  for (Maneuver m :
       {Maneuver::kLeft, Maneuver::kStraight, Maneuver::kRight, Maneuver::kStop}) {
    CHECK(instruction_templates(m).size() >= 6);
    for (const std::string& t : instruction_templates(m)) {
      for (char ch : t) CHECK_FALSE(std::isdigit(static_cast<unsigned char>(ch)));
    }
  }

  SUBCASE("left maneuver draws from the left template set or filler") {
    Rng rng(21);
    const auto& pool = instruction_templates(Maneuver::kLeft);
    const auto& filler = filler_templates();
    for (int i = 0; i < 200; ++i) {
      const std::string s = instruction_for(Maneuver::kLeft, 0.25, rng);
      const bool in_pool = std::count(pool.begin(), pool.end(), s) > 0;
      const bool in_filler = std::count(filler.begin(), filler.end(), s) > 0;
      CHECK((in_pool || in_filler));
    }
  }

  SUBCASE("zero filler fraction always draws maneuver templates") {
    Rng rng(22);
    const auto& pool = instruction_templates(Maneuver::kRight);
    for (int i = 0; i < 100; ++i) {
      const std::string s = instruction_for(Maneuver::kRight, 0.0, rng);
      CHECK(std::count(pool.begin(), pool.end(), s) > 0);
    }
  }

  SUBCASE("filler templates avoid every maneuver keyword") {
    for (const std::string& f : filler_templates()) {
      for (const char* word : {"left", "right", "straight", "stop", "halt", "brake"}) {
        CHECK(f.find(word) == std::string::npos);
      }
    }
  }

  SUBCASE("stop instructions carry a short hard-stop cue at least half the time") {
    Rng rng(23);
    int short_cue = 0;
    const int trials = 2000;
    for (int i = 0; i < trials; ++i) {
      const std::string s = instruction_for(Maneuver::kStop, 0.25, rng);
      std::istringstream words(s);
      int count = 0;
      std::string w;
      bool cue = false;
      while (words >> w) {
        ++count;
        if (w.find("stop") == 0 || w == "halt" || w == "brake" || w == "pull") cue = true;
      }
      if (cue && count <= 12) ++short_cue;
    }
    CHECK(short_cue >= trials / 2);
  }
}

TEST_CASE("lanelet command inference") {
  const CommandRuleConfig rule;

  SUBCASE("straight centerline infers straight") {
    Polyline history{{-2.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0}};
    Polyline lane;
    for (double x = -5.0; x <= 30.0; x += 1.0) lane.push_back({x, 0.0});
    CHECK(infer_lanelet_command(history, {lane}, rule).index() == 1);
  }

  SUBCASE("quarter-circle left arc near its start infers left") {
    // Radius 15 m: heading change over the 20 m lookahead is 20/15 rad = 76 deg.
    Polyline history{{-2.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0}};
    CHECK(infer_lanelet_command(history, {quarter_circle_left(15.0, 0.5)}, rule).index() == 0);
  }

  SUBCASE("mirrored arc infers right") {
    Polyline arc = quarter_circle_left(15.0, 0.5);
    for (Vec2& p : arc) p.y = -p.y;
    Polyline history{{-2.0, 0.0}, {-1.0, 0.0}, {0.0, 0.0}};
    CHECK(infer_lanelet_command(history, {arc}, rule).index() == 2);
  }

  SUBCASE("equidistant lanelets break ties toward the smaller index") {
    Polyline history{{-1.0, 0.0}, {0.0, 0.0}};
    Polyline below;
    for (double x = -5.0; x <= 25.0; x += 1.0) below.push_back({x, -2.0});
    // Both lanelets are exactly 2 m away; the first index wins. Give them
    // different shapes so the tie-break is observable.
    Polyline arc = quarter_circle_left(15.0, 0.5);
    for (Vec2& p : arc) p.y += 2.0;
    CHECK(infer_lanelet_command(history, {arc, below}, rule).index() == 0);
    CHECK(infer_lanelet_command(history, {below, arc}, rule).index() == 1);
  }

  SUBCASE("empty lanelets raise an inference error") {
    Polyline history{{-1.0, 0.0}, {0.0, 0.0}};
    CHECK_THROWS_AS(infer_lanelet_command(history, {}, rule), UsageError);
  }

  SUBCASE("short history raises an inference error") {
    Polyline lane{{0.0, 0.0}, {10.0, 0.0}};
    CHECK_THROWS_AS(infer_lanelet_command({{0.0, 0.0}}, {lane}, rule), UsageError);
  }
}

TEST_CASE("past-only guarantee: the command never looks at the future") {
  const auto scenes = generate_dataset(31, 100, default_config());
  for (Scene s : scenes) {
    const Command before = infer_lanelet_command(s.history, s.lanelets);
    for (Vec2& p : s.future) {
      p.x += 1000.0;
      p.y -= 500.0;
    }
    const Command after = infer_lanelet_command(s.history, s.lanelets);
    CHECK(before == after);
  }
}

TEST_CASE("noise-free command recovery on turn and straight scenes") {
  GeneratorConfig cfg = default_config();
  cfg.noise_sigma = 0.0;
  const auto scenes = generate_dataset(17, 2000, cfg);
  int checked = 0;
  int recovered = 0;
  for (const Scene& s : scenes) {
    if (s.maneuver == Maneuver::kStop) continue;  // stop maps to the straight class
    ++checked;
    const Command c = infer_lanelet_command(s.history, s.lanelets);
    const int expected = s.maneuver == Maneuver::kLeft    ? 0
                         : s.maneuver == Maneuver::kRight ? 2
                                                          : 1;
    if (c.index() == expected) ++recovered;
  }
  INFO("recovered ", recovered, " of ", checked);
  CHECK(static_cast<double>(recovered) >= 0.99 * checked);
}

TEST_CASE("perturb_command regimes") {
  SUBCASE("reliable is the identity") {
    Rng rng(3);
    for (int i = 0; i < 3; ++i) {
      const Command c = Command::from_index(i);
      CHECK(perturb_command(c, Regime::kReliable, rng) == c);
    }
  }

  SUBCASE("random is uniform within 0.02 of one third") {
    Rng rng(1234);
    std::array<int, 3> counts{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      counts[perturb_command(Command::straight(), Regime::kRandom, rng).index()]++;
    }
    for (int c : counts) {
      CHECK(std::abs(static_cast<double>(c) / n - 1.0 / 3.0) < 0.02);
    }
  }

  SUBCASE("random ignores its input") {
    Rng rng_a(99);
    Rng rng_b(99);
    for (int i = 0; i < 50; ++i) {
      const Command a = perturb_command(Command::left(), Regime::kRandom, rng_a);
      const Command b = perturb_command(Command::right(), Regime::kRandom, rng_b);
      CHECK(a == b);
    }
  }
}

TEST_CASE("dataset files round-trip") {
  const auto scenes = generate_dataset(55, 100, default_config(), Split::kVal, 1000);
  DatasetHeader header{55, "deadbeefdeadbeef", 0};

  std::ostringstream first;
  save_dataset(first, scenes, header);
  std::istringstream reread(first.str());
  const LoadedDataset loaded = load_dataset(reread, "mem");
  CHECK(loaded.header.seed == 55);
  CHECK(loaded.header.config_hash == "deadbeefdeadbeef");
  REQUIRE(loaded.scenes.size() == scenes.size());
  for (size_t i = 0; i < scenes.size(); ++i) CHECK(scene_equal(scenes[i], loaded.scenes[i]));

  // write -> read -> write is byte-identical
  std::ostringstream second;
  save_dataset(second, loaded.scenes, loaded.header);
  CHECK(first.str() == second.str());
}

TEST_CASE("truncated dataset names the failing line") {
  const auto scenes = generate_dataset(8, 5, default_config());
  std::ostringstream out;
  save_dataset(out, scenes, {8, "cafe", 0});
  std::string text = out.str();
  text.resize(text.size() * 2 / 3);  // cut mid-record
  std::istringstream in(text);
  try {
    load_dataset(in, "trunc.jsonl");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("trunc.jsonl:") != std::string::npos);
  }
}

TEST_CASE("bad generator config is rejected") {
  GeneratorConfig cfg = default_config();
  cfg.curvature_min = -0.1;
  CHECK_THROWS_AS(generate_dataset(1, 10, cfg), ConfigError);
  GeneratorConfig cfg2 = default_config();
  cfg2.maneuver_mix = {0.5, 0.5, 0.5, 0.5};
  CHECK_THROWS_AS(generate_dataset(1, 10, cfg2), ConfigError);
  CHECK_THROWS_AS(generate_dataset(1, 0, default_config()), ConfigError);
}
