#include <doctest.h>

#include <filesystem>
#include <set>

#include "knobo/bench.hpp"
#include "knobo/error.hpp"
#include "knobo/rng.hpp"

using namespace knobo;

namespace {

// Pool with n examples per (label, group) cell. Feature 0 carries the group.
std::vector<LabeledExample> pool(std::size_t n_per_cell) {
  std::vector<LabeledExample> out;
  int id = 0;
  for (int y = 0; y < 2; ++y) {
    for (int g = 0; g < 2; ++g) {
      for (std::size_t i = 0; i < n_per_cell; ++i) {
        out.push_back({"e" + std::to_string(id++), {static_cast<double>(g), static_cast<double>(i)}, y, g, ""});
      }
    }
  }
  return out;
}

ConfoundSpec spec(std::size_t train, std::size_t val, std::size_t test) {
  ConfoundSpec s;
  s.class_names = {"normal", "pneumonia"};
  s.group_names = {"site_a", "site_b"};
  s.n_train = train;
  s.n_val = val;
  s.n_test = test;
  return s;
}

std::size_t count_label(const std::vector<LabeledExample>& v, int label) {
  std::size_t n = 0;
  for (const auto& e : v) n += e.label == label;
  return n;
}

}  // namespace

TEST_CASE("confounded splits: pairing, balance and disjointness") {
  const auto s = make_confounded_splits(pool(200), spec(200, 100, 100), 3);
  CHECK(s.train.size() == 200);
  CHECK(count_label(s.val, 0) == 50);
  CHECK(count_label(s.val, 1) == 50);
  CHECK(count_label(s.test, 0) == 50);
  for (const auto& e : s.train) CHECK(e.group == e.label);
  for (const auto& e : s.val) CHECK(e.group == e.label);
  for (const auto& e : s.test) CHECK(e.group != e.label);

  std::set<std::string> ids;
  for (const auto* split : {&s.train, &s.val, &s.test}) {
    for (const auto& e : *split) CHECK(ids.insert(e.pair_id).second);
  }
}

TEST_CASE("confounded splits: partial strength and errors") {
  auto sp = spec(100, 0, 0);
  sp.strength = 0.8;
  const auto s = make_confounded_splits(pool(100), sp, 1);
  std::size_t aligned = 0;
  for (const auto& e : s.train) aligned += e.group == e.label;
  CHECK(aligned == 80);

  CHECK_THROWS_WITH_AS(make_confounded_splits(pool(10), spec(100, 0, 0), 1), doctest::Contains("(normal, site_a)"),
                       DataError);
  CHECK_THROWS_AS(make_confounded_splits(pool(100), spec(99, 0, 0), 1), UsageError);
  CHECK(make_confounded_splits(pool(100), spec(40, 20, 20), 9).test.front().pair_id ==
        make_confounded_splits(pool(100), spec(40, 20, 20), 9).test.front().pair_id);
}

TEST_CASE("unconfounded split excludes used examples and balances groups") {
  const auto p = pool(100);
  const auto s = make_confounded_splits(p, spec(100, 0, 0), 2);
  const auto u = make_unconfounded_split(p, 80, 4, &s.train);
  CHECK(u.size() == 80);
  std::set<std::string> used;
  for (const auto& e : s.train) used.insert(e.pair_id);
  std::size_t g1 = 0;
  for (const auto& e : u) {
    CHECK_FALSE(used.contains(e.pair_id));
    g1 += e.group;
  }
  CHECK(g1 == 40);
  CHECK(count_label(u, 1) == 40);
}

TEST_CASE("evaluate: reversal and constant predictors") {
  const auto s = make_confounded_splits(pool(200), spec(100, 100, 100), 5);
  const PredictFn by_group = [](std::span<const double> x) { return static_cast<int>(x[0]); };
  const double id = evaluate(by_group, s.val);
  const double ood = evaluate(by_group, s.test);
  CHECK(id == 100.0);
  CHECK(ood == 0.0);
  CHECK(id + ood == 100.0);
  CHECK(evaluate([](std::span<const double>) { return 0; }, s.val) == 50.0);
  CHECK_THROWS_AS(evaluate(by_group, {}), DataError);

  SplitMix64 rng(1);
  std::vector<int> guesses;
  const PredictFn random = [&](std::span<const double>) {
    guesses.push_back(static_cast<int>(rng.below(2)));
    return guesses.back();
  };
  const double acc = evaluate(random, s.test);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < s.test.size(); ++i) hits += guesses[i] == s.test[i].label;
  CHECK(acc == doctest::Approx(100.0 * static_cast<double>(hits) / static_cast<double>(s.test.size())));
}

TEST_CASE("compute_metrics and display rounding") {
  const auto m = compute_metrics(89.7, 58.8, 73.1);
  CHECK(format_display(m.delta) == "30.9");
  CHECK(m.avg == doctest::Approx(74.25));
  CHECK(format_display(m.avg) == "74.3");
  CHECK(format_display(*m.overall) == "73.7");
  const auto same = compute_metrics(70, 70);
  CHECK(same.delta == 0.0);
  CHECK(same.avg == 70.0);
  CHECK_FALSE(same.overall.has_value());
  CHECK_THROWS_AS(compute_metrics(101, 50), UsageError);
  CHECK(round_display(0.05) == doctest::Approx(0.1));
  CHECK(round_display(56.85) == doctest::Approx(56.9));
  CHECK(round_display(-1.25) == doctest::Approx(-1.3));
  const auto j = metrics_to_json(m);
  CHECK(j.at("display").at("avg") == "74.3");
  CHECK(metrics_table(m, "KnoBo").find("74.3") != std::string::npos);
}

TEST_CASE("split persistence round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "knobo_test_bench";
  std::filesystem::create_directories(dir);
  auto p = pool(3);
  p[0].report_text = "Findings: opacity.";
  save_split(dir / "s", p, "train");
  const auto back = load_split(dir / "s");
  REQUIRE(back.size() == p.size());
  CHECK(back[0].pair_id == p[0].pair_id);
  CHECK(back[0].report_text == p[0].report_text);
  CHECK(back[5].group == p[5].group);
  CHECK(back[5].features == p[5].features);
  std::filesystem::remove_all(dir);
}
