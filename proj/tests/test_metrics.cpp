#include <doctest.h>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "xmdisc/errors.hpp"
#include "xmdisc/metrics.hpp"
#include "xmdisc/rng.hpp"

using namespace xmdisc;
using L = DiscourseLabel;

namespace {

std::vector<L> random_labels(std::size_t n, Rng& rng) {
  std::vector<L> out(n);
  for (auto& l : out) l = label_from_code(static_cast<int>(rng.below(kNumLabels)));
  return out;
}

}  // namespace

TEST_CASE("worked F1 example") {
  const std::vector<L> truths{L::Insertion, L::Insertion, L::Concretization, L::Concretization};
  const std::vector<L> preds{L::Insertion, L::Concretization, L::Concretization, L::Concretization};
  const auto r = f1_report(preds, truths);
  CHECK(std::abs(r.per_class_f1[0] - 66.67) <= 0.01);
  CHECK(std::abs(r.per_class_f1[1] - 80.0) <= 0.01);
  CHECK(std::abs(r.weighted_f1 - 73.33) <= 0.01);
  CHECK(r.per_class_f1[2] == 0.0);
  CHECK(r.n == 4);
  CHECK(r.confusion[0][0] == 1);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.confusion[1][1] == 2);
}

TEST_CASE("f1_report equals brute-force counting") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(60);
    const auto truths = random_labels(n, rng);
    const auto preds = random_labels(n, rng);
    const auto r = f1_report(preds, truths);
    const auto c = oracle::count(preds, truths);
    double weighted = 0.0;
    for (int k = 0; k < kNumLabels; ++k) {
      const double f = oracle::f1(c.tp[k], c.fp[k], c.fn[k]);
      CHECK(r.per_class_f1[k] == f);
      weighted += f * static_cast<double>(c.support[k]);
    }
    CHECK(r.weighted_f1 == doctest::Approx(weighted / static_cast<double>(n)).epsilon(1e-12));
  }
}

TEST_CASE("f1 edge cases") {
  CHECK_THROWS_AS(f1_report({}, {}), ShapeError);
  CHECK_THROWS_AS(f1_report({L::Insertion}, {L::Insertion, L::Projection}), ShapeError);
  const std::vector<L> truths{L::Insertion, L::Projection, L::Extension};
  CHECK(f1_report(truths, truths).weighted_f1 == 100.0);
  // a predictor that always answers the majority class scores below perfect
  const std::vector<L> skewed{L::Concretization, L::Concretization, L::Concretization, L::Insertion};
  const std::vector<L> majority(4, L::Concretization);
  CHECK(f1_report(majority, skewed).weighted_f1 < 100.0);
}

TEST_CASE("significance") {
  Rng rng(12);
  const auto truths = random_labels(100, rng);
  std::vector<L> wrong(truths.size());
  for (std::size_t i = 0; i < truths.size(); ++i) wrong[i] = label_from_code((label_code(truths[i]) + 1) % kNumLabels);
  SUBCASE("identical predictions") {
    const auto preds = random_labels(100, rng);
    CHECK(significance(preds, preds, truths, 10000, 3) == 1.0);
  }
  SUBCASE("perfect against all wrong") {
    CHECK(significance(truths, wrong, truths, 10000, 3) < 0.001);
  }
  SUBCASE("symmetric and seeded") {
    const auto a = random_labels(100, rng);
    const auto b = random_labels(100, rng);
    const double p = significance(a, b, truths, 2000, 5);
    CHECK(p == significance(b, a, truths, 2000, 5));
    CHECK(p == significance(a, b, truths, 2000, 5));
    CHECK(p > 0.0);
    CHECK(p <= 1.0);
  }
  CHECK_THROWS_AS(significance(truths, wrong, truths, 0), ConfigError);
}

TEST_CASE("report rendering") {
  const std::vector<L> truths{L::Insertion, L::Insertion, L::Concretization, L::Concretization};
  const std::vector<L> preds{L::Insertion, L::Concretization, L::Concretization, L::Concretization};
  auto r = f1_report(preds, truths);
  r.significance = Significance{"concat", 0.012};
  const auto j = nlohmann::json::parse(report_to_json(r));
  CHECK(j["columns"].size() == 6);
  CHECK(j["columns"][5] == "weighted_f1");
  CHECK(j["values"][5].get<double>() == doctest::Approx(73.333).epsilon(1e-4));
  CHECK(j["significance"]["baseline"] == "concat");
  const auto row = render_report_row("full", r);
  CHECK(row.find("73.33") != std::string::npos);
  CHECK(render_report_header().find("insertion") != std::string::npos);
}
