#include <doctest.h>

#include <cmath>

#include "scriptorium/errors.hpp"
#include "scriptorium/metrics.hpp"
#include "scriptorium/rng.hpp"

using namespace scriptorium;

namespace {

ScoredTrial trial(std::string truth, std::vector<std::string> ranked) {
  return {"q", std::move(truth), std::move(ranked)};
}

}  // namespace

TEST_CASE("top-n accuracy counts ranks within n") {
  std::vector<ScoredTrial> trials = {
      trial("a", {"a", "b"}), trial("a", {"a", "b"}),
      trial("a", {"a", "b"}), trial("a", {"b", "a"})};
  CHECK(topn_accuracy(trials, 1) == doctest::Approx(0.75));
  CHECK(topn_accuracy(trials, 2) == doctest::Approx(1.0));
  CHECK(topn_accuracy(trials, 10) == doctest::Approx(1.0));
  CHECK_THROWS_AS(topn_accuracy(trials, 0), ConfigError);
}

TEST_CASE("soft top-n needs one hit anywhere in the window") {
  // correct item only at rank 3, N=5: hit
  CHECK(soft_topn({trial("a", {"x", "y", "a", "z", "w"})}, 5) == 1.0);
  // correct item only at rank 6, N=5: miss
  CHECK(soft_topn({trial("a", {"x", "y", "z", "w", "v", "a"})}, 5) == 0.0);
}

TEST_CASE("hard top-n needs the full window correct") {
  auto t = trial("a", {"a", "a", "b"});
  CHECK(hard_topn({t}, 2) == 1.0);
  CHECK(hard_topn({t}, 3) == 0.0);
  // fewer candidates than n counts as a miss
  CHECK(hard_topn({trial("a", {"a"})}, 2) == 0.0);
}

TEST_CASE("roc curve rates move monotonically with the threshold") {
  std::vector<double> genuine = {0.9, 0.8, 0.4};
  std::vector<double> impostor = {0.5, 0.3, 0.1};
  auto curve = roc_curve(genuine, impostor);
  REQUIRE(curve.size() >= 2);
  for (size_t i = 1; i < curve.size(); ++i) {
    CHECK(curve[i].threshold > curve[i - 1].threshold);
    CHECK(curve[i].false_acceptance_rate <=
          curve[i - 1].false_acceptance_rate);
    CHECK(curve[i].false_rejection_rate >= curve[i - 1].false_rejection_rate);
  }
}

TEST_CASE("eer pinned cases") {
  // perfect separation
  auto [e1, t1] = eer({0.9, 0.9, 0.9}, {0.1, 0.1});
  CHECK(e1 == doctest::Approx(0.0));
  CHECK(t1 > 0.1);
  CHECK(t1 <= 0.9);

  // identical multisets: no threshold beats a coin flip
  auto [e2, t2] = eer({0.2, 0.5, 0.8}, {0.2, 0.5, 0.8});
  CHECK(e2 == doctest::Approx(0.5));
  (void)t2;

  // one unavoidable error on each side at the crossing
  auto [e3, t3] = eer({0.8, 0.6}, {0.7, 0.3});
  CHECK(e3 == doctest::Approx(0.25));
  (void)t3;

  CHECK_THROWS_AS(eer({}, {0.1}), DataError);
  CHECK_THROWS_AS(eer({0.1}, {}), DataError);
}

TEST_CASE("eer is invariant under the similarity/distance flip") {
  SampleRng rng(31);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> g, i;
    for (int k = 0; k < 20; ++k) g.push_back(rng.uniform(0.3, 1.0));
    for (int k = 0; k < 20; ++k) i.push_back(rng.uniform(0.0, 0.7));
    std::vector<double> ng, ni;
    for (double x : g) ng.push_back(-x);
    for (double x : i) ni.push_back(-x);
    // negating scores swaps the roles of the two classes
    CHECK(eer(g, i).first == doctest::Approx(eer(ni, ng).first));
    CHECK(eer(g, i).first >= 0.0);
    CHECK(eer(g, i).first <= 0.5 + 1e-12);
  }
}

TEST_CASE("silhouette pinned cases") {
  // two singletons: convention fixes both samples at 0
  CHECK(silhouette({{0.f}, {5.f}}, {0, 1}) == doctest::Approx(0.0));

  // two tight far pairs, hand-computed value
  std::vector<std::vector<float>> pairs = {
      {0.f, 0.f}, {0.f, 1.f}, {100.f, 100.f}, {100.f, 101.f}};
  CHECK(silhouette(pairs, {0, 0, 1, 1}) ==
        doctest::Approx(0.9929289321903442).epsilon(1e-9));

  // coincident points split into two clusters: a = b = 0 handled as 0
  std::vector<std::vector<float>> same = {
      {1.f, 1.f}, {1.f, 1.f}, {1.f, 1.f}, {1.f, 1.f}};
  CHECK(silhouette(same, {0, 0, 1, 1}) == doctest::Approx(0.0));

  CHECK_THROWS_AS(silhouette({{0.f}, {1.f}}, {0, 0}), DataError);
}

TEST_CASE("silhouette stays within [-1, 1]") {
  SampleRng rng(77);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::vector<float>> pts;
    std::vector<int> assign;
    int n = 5 + static_cast<int>(rng.uniform_int(0, 15));
    for (int i = 0; i < n; ++i) {
      pts.push_back({static_cast<float>(rng.uniform(-10, 10)),
                     static_cast<float>(rng.uniform(-10, 10))});
      assign.push_back(static_cast<int>(rng.uniform_int(0, 2)));
    }
    for (int c = 0; c < 3; ++c)  // ensure all clusters nonempty
      assign[static_cast<size_t>(c)] = c;
    double s = silhouette(pts, assign);
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
}

TEST_CASE("delta-k is the signed difference") {
  CHECK(delta_k(657, 354) == 303);
  CHECK(delta_k(42, 42) == 0);
  CHECK(delta_k(55, 56) == -1);
}

TEST_CASE("report round-trips through its own parser") {
  EvalReport report;
  report.tables.push_back(
      {"identification", {"Top-1", "Top-5"}, {{"test", {91.2, 97.4}}}});
  report.tables.push_back(
      {"classification", {"K*-Sil.", "dK"}, {{"test", {0.23, 303.0}}}});
  report.provenance = "digest=abc123";

  std::string text = report.to_text();
  CHECK(text.find("identification") != std::string::npos);
  CHECK(text.find("91.2") != std::string::npos);
  CHECK(text.find("0.23") != std::string::npos);   // silhouette: 2 decimals
  CHECK(text.find("+303") != std::string::npos);   // delta-k: signed integer

  EvalReport parsed = EvalReport::from_text(text);
  REQUIRE(parsed.tables.size() == 2);
  CHECK(parsed.tables[0].task == "identification");
  CHECK(parsed.tables[0].columns ==
        std::vector<std::string>{"Top-1", "Top-5"});
  REQUIRE(parsed.tables[0].rows.size() == 1);
  CHECK(parsed.tables[0].rows[0].second[0] == doctest::Approx(91.2));
  CHECK(parsed.tables[1].rows[0].second[1] == doctest::Approx(303.0));
  CHECK(parsed.provenance == report.provenance);

  // json companion parses as json
  CHECK(report.to_json_text().find("identification") != std::string::npos);
}
