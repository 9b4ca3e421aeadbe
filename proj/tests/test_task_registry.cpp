#include "oracles.hpp"
#include "planahead/error.hpp"
#include "planahead/task_registry.hpp"

#include <doctest.h>

#include <random>
#include <sstream>

using namespace planahead;

namespace {

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

RewardMatrix random_matrix(std::mt19937_64& rng, std::size_t tasks, std::size_t models, std::size_t runs) {
  // Skewed toward all-0 and all-1 rows so every label shows up.
  std::uniform_int_distribution<int> kind(0, 2);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> values;
  for (std::size_t t = 0; t < tasks; ++t) {
    const int k = kind(rng);
    for (std::size_t i = 0; i < models * runs; ++i) {
      values.push_back(k == 0 ? 0 : (k == 1 ? 1 : (coin(rng) ? 1 : 0)));
    }
  }
  std::vector<std::string> model_ids;
  for (std::size_t m = 0; m < models; ++m) model_ids.push_back("m" + std::to_string(m));
  return RewardMatrix(oracle::task_names(tasks), model_ids, runs, values);
}

}  // namespace

TEST_CASE("registry rejects duplicates and empty goals") {
  TaskRegistry registry;
  registry.add({"a", "do a", std::nullopt, ""});
  CHECK_THROWS_AS(registry.add({"a", "again", std::nullopt, ""}), ValidationError);
  CHECK_THROWS_AS(registry.add({"b", "", std::nullopt, ""}), ValidationError);
  CHECK(registry.contains("a"));
  CHECK_FALSE(registry.contains("b"));
}

TEST_CASE("registry reads jsonl") {
  std::istringstream in(R"({"task_id":"x","goal":"g1","domain_tag":"shopping"}
{"task_id":"y","goal":"g2"}
)");
  const auto registry = TaskRegistry::read_jsonl(in);
  REQUIRE(registry.size() == 2);
  CHECK(registry.at("x").domain_tag == "shopping");
  CHECK_FALSE(registry.at("y").domain_tag.has_value());
}

TEST_CASE("grading labels single tasks") {
  CHECK(grade_difficulty(RewardMatrix({"t"}, {"m1", "m2"}, 2, {1, 1, 1, 1}))[0].label == Difficulty::Easy);
  CHECK(grade_difficulty(RewardMatrix({"t"}, {"m1", "m2"}, 2, {0, 0, 0, 0}))[0].label == Difficulty::Hard);
}

TEST_CASE("grading a hand-built 3x2x2 tensor") {
  const RewardMatrix matrix({"all1", "all0", "mixed"}, {"m1", "m2"}, 2, {1, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0});
  const auto labels = grade_difficulty(matrix);
  REQUIRE(labels.size() == 3);
  CHECK(labels[0].label == Difficulty::Easy);
  CHECK(labels[1].label == Difficulty::Hard);
  CHECK(labels[2].label == Difficulty::Medium);
  const auto counts = count_labels(labels);
  CHECK(counts.easy == 1);
  CHECK(counts.medium == 1);
  CHECK(counts.hard == 1);
}

TEST_CASE("a task some models always solve and others never solve is medium") {
  const RewardMatrix matrix({"t"}, {"m1", "m2"}, 2, {1, 1, 0, 0});
  CHECK(grade_difficulty(matrix)[0].label == Difficulty::Medium);
}

TEST_CASE("full-run sensitivity has 100 percent overlap") {
  const auto matrix = RewardMatrix::single_model("m", {"a", "b", "c"}, {{0, 0, 0}, {0, 1, 0}, {0, 0, 0}});
  const auto row = hard_set_sensitivity(matrix, 3);
  CHECK(row.hard_count == 2);
  REQUIRE(row.overlap_pct);
  CHECK(*row.overlap_pct == doctest::Approx(100.0));
  CHECK_THROWS_AS(hard_set_sensitivity(matrix, 0), ValidationError);
  CHECK_THROWS_AS(hard_set_sensitivity(matrix, 4), ValidationError);
}

TEST_CASE("4-task sensitivity with a late success matches set intersection") {
  // "late" succeeds only in run 3 (index 2).
  const auto matrix = RewardMatrix::single_model(
      "m", {"late", "never", "early", "often"}, {{0, 0, 1, 0}, {0, 0, 0, 0}, {1, 0, 0, 0}, {1, 1, 1, 1}});
  const auto hard2 = oracle::label_sets(matrix, 2).hard;
  const auto hard3 = oracle::label_sets(matrix, 3).hard;
  const auto hard4 = oracle::label_sets(matrix, 4).hard;
  CHECK(hard2.count("late"));
  CHECK_FALSE(hard3.count("late"));

  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hard_n = oracle::label_sets(matrix, n).hard;
    std::size_t inter = 0;
    for (const auto& t : hard_n) inter += hard4.count(t);
    const auto row = hard_set_sensitivity(matrix, n);
    CHECK(row.hard_count == hard_n.size());
    CHECK(row.intersection == inter);
    CHECK(row.final_hard_count == hard4.size());
    REQUIRE(row.overlap_pct);
    CHECK(*row.overlap_pct == doctest::Approx(100.0 * static_cast<double>(inter) / hard_n.size()));
  }
}

TEST_CASE("overlap reproduces the 158 of 188 relation") {
  // 188 tasks hard after the first run, 30 of them solved later.
  std::vector<std::vector<int>> rows(200, std::vector<int>(5, 0));
  for (std::size_t t = 188; t < 200; ++t) rows[t][0] = 1;
  for (std::size_t t = 158; t < 188; ++t) rows[t][3] = 1;
  const auto matrix = RewardMatrix::single_model("m", oracle::task_names(200), rows);
  const auto first = hard_set_sensitivity(matrix, 1);
  CHECK(first.hard_count == 188);
  CHECK(first.intersection == 158);
  REQUIRE(first.overlap_pct);
  CHECK(oracle::one_decimal(*first.overlap_pct) == "84.0");
  CHECK(*first.overlap_pct == doctest::Approx(84.0).epsilon(0.0006));
  CHECK(*hard_set_sensitivity(matrix, 5).overlap_pct == doctest::Approx(100.0));
}

TEST_CASE("empty hard prefix has no overlap value") {
  const auto matrix = RewardMatrix::single_model("m", {"a"}, {{1, 1}});
  CHECK_FALSE(hard_set_sensitivity(matrix, 1).overlap_pct.has_value());
}

TEST_CASE("property: labels partition the task set and match the oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const auto matrix = random_matrix(rng, 1 + rng() % 25, 1 + rng() % 4, 1 + rng() % 6);
    const auto grading = grade_difficulty(matrix);
    REQUIRE(grading.size() == matrix.task_count());
    const auto easy = as_set(tasks_with_label(grading, Difficulty::Easy));
    const auto medium = as_set(tasks_with_label(grading, Difficulty::Medium));
    const auto hard = as_set(tasks_with_label(grading, Difficulty::Hard));
    CHECK(easy.size() + medium.size() + hard.size() == matrix.task_count());
    const auto expected = oracle::label_sets(matrix, matrix.runs());
    CHECK(easy == expected.easy);
    CHECK(medium == expected.medium);
    CHECK(hard == expected.hard);
    CHECK(grade_difficulty(matrix).size() == grading.size());
  }
}

TEST_CASE("property: hard and easy sets shrink as the run prefix grows") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const auto matrix = random_matrix(rng, 1 + rng() % 20, 1 + rng() % 3, 2 + rng() % 5);
    for (std::size_t n1 = 1; n1 <= matrix.runs(); ++n1) {
      const auto g1 = grade_difficulty(matrix.run_prefix(n1));
      const auto hard1 = as_set(tasks_with_label(g1, Difficulty::Hard));
      const auto easy1 = as_set(tasks_with_label(g1, Difficulty::Easy));
      for (std::size_t n2 = n1; n2 <= matrix.runs(); ++n2) {
        const auto g2 = grade_difficulty(matrix.run_prefix(n2));
        for (const auto& t : tasks_with_label(g2, Difficulty::Hard)) CHECK(hard1.count(t));
        for (const auto& t : tasks_with_label(g2, Difficulty::Easy)) CHECK(easy1.count(t));
      }
    }
  }
}

TEST_CASE("property: permuting runs within a cell keeps full-run labels") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto matrix = random_matrix(rng, 1 + rng() % 10, 1, 2 + rng() % 5);
    std::vector<std::vector<int>> rows;
    for (std::size_t t = 0; t < matrix.task_count(); ++t) {
      auto r = matrix.row(t, 0);
      rows.emplace_back(r.begin(), r.end());
      std::shuffle(rows.back().begin(), rows.back().end(), rng);
    }
    const auto shuffled = RewardMatrix::single_model("m0", matrix.task_ids(), rows);
    const auto a = grade_difficulty(matrix), b = grade_difficulty(shuffled);
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(a[t].label == b[t].label);
  }
}

TEST_CASE("grading an empty matrix fails with no tasks") {
  const RewardMatrix empty({}, {"m"}, 1, {});
  CHECK_THROWS_WITH_AS(grade_difficulty(empty), "no tasks", ValidationError);
}
