#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "scriptorium/errors.hpp"
#include "scriptorium/metrics.hpp"
#include "scriptorium/rng.hpp"
#include "scriptorium/tasks.hpp"

using namespace scriptorium;

namespace {

WriterTemplate tmpl(std::string id, StyleVector v) {
  return {std::move(id), std::move(v), 1};
}

DocumentVector doc(std::string id, std::string writer, StyleVector v) {
  return {std::move(id), std::move(writer), std::move(v), 1};
}

// Partition comparison that ignores cluster numbering.
bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

std::vector<StyleVector> make_blobs(int blobs, int per_blob, float spread,
                                    uint64_t seed) {
  SampleRng rng(seed);
  std::vector<StyleVector> pts;
  for (int b = 0; b < blobs; ++b) {
    float cx = 100.f * static_cast<float>(b);
    float cy = 50.f * static_cast<float>(b % 2);
    for (int i = 0; i < per_blob; ++i)
      pts.push_back({cx + static_cast<float>(rng.uniform(-spread, spread)),
                     cy + static_cast<float>(rng.uniform(-spread, spread))});
  }
  return pts;
}

}  // namespace

TEST_CASE("cosine similarity pinned values") {
  CHECK(cosine_similarity({1.f, 0.f}, {1.f, 0.f}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({1.f, 0.f}, {0.f, 1.f}) == doctest::Approx(0.0));
  CHECK(cosine_similarity({1.f, 0.f}, {-1.f, 0.f}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity({0.f, 0.f}, {1.f, 0.f}), DataError);
  CHECK_THROWS_AS(cosine_similarity({1.f}, {1.f, 0.f}), DataError);
}

TEST_CASE("cosine matches the direct formula on random pairs") {
  SampleRng rng(3);
  for (int t = 0; t < 100; ++t) {
    StyleVector a(8), b(8);
    for (auto& x : a) x = static_cast<float>(rng.uniform(-2, 2));
    for (auto& x : b) x = static_cast<float>(rng.uniform(-2, 2));
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
      dot += double(a[i]) * b[i];
      na += double(a[i]) * a[i];
      nb += double(b[i]) * b[i];
    }
    double expected = dot / (std::sqrt(na) * std::sqrt(nb));
    CHECK(cosine_similarity(a, b) == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("euclidean distance pinned value") {
  CHECK(euclidean_distance({0.f, 0.f}, {3.f, 4.f}) == doctest::Approx(5.0));
}

TEST_CASE("identification ranks by cosine with lexicographic ties") {
  std::vector<WriterTemplate> templates = {
      tmpl("A", {1.f, 0.f, 0.f}), tmpl("B", {0.f, 1.f, 0.f}),
      tmpl("C", {0.f, 0.f, 1.f})};

  // self-match
  RankedList r = identify("q", {1.f, 0.f, 0.f}, templates);
  REQUIRE(!r.entries.empty());
  CHECK(r.entries[0].candidate_id == "A");
  CHECK(r.entries[0].score == doctest::Approx(1.0));

  // 0.9 A + 0.1 B ranks A, B, C
  r = identify("q", {0.9f, 0.1f, 0.f}, templates);
  CHECK(r.entries[0].candidate_id == "A");
  CHECK(r.entries[1].candidate_id == "B");
  CHECK(r.entries[2].candidate_id == "C");

  // positive scaling leaves the ranking unchanged
  RankedList scaled = identify("q", {90.f, 10.f, 0.f}, templates);
  for (size_t i = 0; i < r.entries.size(); ++i)
    CHECK(scaled.entries[i].candidate_id == r.entries[i].candidate_id);

  // exact tie: equidistant from A and B, id order decides
  RankedList tie = identify("q", {1.f, 1.f, 0.f}, templates);
  CHECK(tie.entries[0].candidate_id == "A");
  CHECK(tie.entries[1].candidate_id == "B");
}

TEST_CASE("identification matches a brute-force oracle") {
  SampleRng rng(15);
  for (int t = 0; t < 50; ++t) {
    std::vector<WriterTemplate> templates;
    for (int i = 0; i < 8; ++i) {
      StyleVector v(4);
      for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
      if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.f; }))
        v[0] = 1.f;
      templates.push_back(tmpl("w" + std::to_string(i), v));
    }
    StyleVector q(4);
    for (auto& x : q) x = static_cast<float>(rng.uniform(-1, 1));
    q[0] += 1.5f;  // keep the norm clearly nonzero
    RankedList r = identify("q", q, templates);
    REQUIRE(r.entries.size() == templates.size());
    for (size_t i = 1; i < r.entries.size(); ++i)
      CHECK(r.entries[i - 1].score >= r.entries[i].score);
    // rank 1 matches argmax cosine
    double best = -2;
    std::string best_id;
    for (const auto& tp : templates) {
      double s = cosine_similarity(q, tp.mean_vector);
      if (s > best + 1e-12) {
        best = s;
        best_id = tp.writer_id;
      }
    }
    CHECK(r.entries[0].candidate_id == best_id);
  }
}

TEST_CASE("retrieval ranks by ascending distance") {
  std::vector<DocumentVector> database = {
      doc("d1", "w1", {5.f, 0.f}), doc("d2", "w2", {1.f, 1.f}),
      doc("d3", "w3", {0.f, 0.f})};
  DocumentVector query = doc("q", "w9", {0.f, 0.f});
  RankedList r = retrieve(query, database);
  CHECK(r.entries[0].candidate_id == "d3");
  CHECK(r.entries[0].score == doctest::Approx(0.0));
  CHECK(r.entries[1].candidate_id == "d2");
  CHECK(r.entries[2].candidate_id == "d1");

  // translation invariance
  auto shifted = database;
  for (auto& d : shifted)
    for (auto& x : d.mean_vector) x += 7.f;
  DocumentVector shifted_query = query;
  for (auto& x : shifted_query.mean_vector) x += 7.f;
  RankedList rs = retrieve(shifted_query, shifted);
  for (size_t i = 0; i < r.entries.size(); ++i)
    CHECK(rs.entries[i].candidate_id == r.entries[i].candidate_id);

  CHECK_THROWS_AS(retrieve(query, {}), DataError);
  // leave-one-out is the caller's job: a query inside the database is a bug
  std::vector<DocumentVector> with_query = database;
  with_query.push_back(query);
  CHECK_THROWS_AS(retrieve(query, with_query), DataError);
}

TEST_CASE("retrieval matches a brute-force sort") {
  SampleRng rng(23);
  std::vector<DocumentVector> database;
  for (int i = 0; i < 5; ++i) {
    StyleVector v(4);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    database.push_back(doc("d" + std::to_string(i), "w", v));
  }
  DocumentVector query = doc("q", "w", {0.f, 0.f, 0.f, 0.f});
  RankedList r = retrieve(query, database);
  std::vector<std::pair<double, std::string>> oracle;
  for (const auto& d : database)
    oracle.emplace_back(euclidean_distance(query.mean_vector, d.mean_vector),
                        d.document_id);
  std::sort(oracle.begin(), oracle.end());
  for (size_t i = 0; i < oracle.size(); ++i)
    CHECK(r.entries[i].candidate_id == oracle[i].second);
}

TEST_CASE("signature verification compares against the reference mean") {
  StyleVector v = {1.f, 2.f, 3.f};
  VerificationDecision d = verify_signature(v, {v, v, v, v, v}, 0.9);
  CHECK(d.score == doctest::Approx(1.0));
  CHECK(d.accepted);

  StyleVector orth = {0.f, 0.f, 1.f};
  d = verify_signature(orth, {{1.f, 0.f, 0.f}}, 0.5);
  CHECK(d.score == doctest::Approx(0.0));
  CHECK(!d.accepted);

  CHECK_THROWS_AS(verify_signature(v, {}, 0.5), DataError);
  CHECK_THROWS_AS(verify_signature(v, {{0.f, 0.f, 0.f}}, 0.5), DataError);
}

TEST_CASE("document verification pinned values") {
  DocumentVector a = doc("a", "w", {1.f, 1.f});
  VerificationDecision d = verify_documents(a, a, 1.0);
  CHECK(d.score == doctest::Approx(1.0));
  CHECK(d.accepted);

  DocumentVector anti = doc("b", "w", {-1.f, -1.f});
  d = verify_documents(a, anti, -0.5);
  CHECK(d.score == doctest::Approx(-1.0));
  CHECK(!d.accepted);
}

TEST_CASE("pca reduction preserves the geometry it keeps") {
  // points on a 1-d affine subspace of R^3
  std::vector<StyleVector> line;
  for (int i = 0; i < 10; ++i) {
    float t = static_cast<float>(i);
    line.push_back({1.f + 2.f * t, -1.f * t, 0.5f * t});
  }
  PcaReducer reducer(1);
  auto reduced = reducer.reduce(line);
  REQUIRE(reduced.size() == line.size());
  REQUIRE(reduced[0].size() == 1);
  double step3 = std::sqrt(2 * 2 + 1 + 0.25);
  for (size_t i = 1; i < reduced.size(); ++i)
    CHECK(std::abs(reduced[i][0] - reduced[i - 1][0]) ==
          doctest::Approx(step3).epsilon(1e-4));
  // deterministic orientation
  auto again = reducer.reduce(line);
  CHECK(reduced == again);
}

TEST_CASE("clustering recovers well-separated blobs") {
  auto pts = make_blobs(2, 20, 1.0f, 41);
  ClusteringResult r = classify_writers(pts, 2);
  CHECK(r.k == 2);
  CHECK(r.silhouette >= 0.9);
  std::vector<int> truth(40, 0);
  std::fill(truth.begin() + 20, truth.end(), 1);
  CHECK(same_partition(r.assignments, truth));
}

TEST_CASE("clustering edge cases") {
  auto pts = make_blobs(2, 3, 1.0f, 5);
  CHECK_THROWS_AS(classify_writers(pts, 0), DataError);
  CHECK_THROWS_AS(classify_writers(pts, 7), DataError);

  // k == n: singletons
  ClusteringResult singles = classify_writers(pts, 6);
  std::vector<int> sorted = singles.assignments;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expect(6);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(sorted == expect);

  std::vector<StyleVector> same(5, StyleVector{2.f, 2.f});
  CHECK_THROWS_AS(classify_writers(same, 2), DataError);
}

TEST_CASE("k estimation finds three blobs and tolerates permutation") {
  auto pts = make_blobs(3, 12, 1.0f, 61);
  KEstimate est = estimate_k(pts, 2, 10);
  CHECK(est.k_prime == 3);
  REQUIRE(est.silhouette_table.size() == 9);

  ClusteringResult base = classify_writers(pts, 3);

  // shuffled input: same k, same partition
  std::vector<size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), size_t{0});
  SampleRng rng(8);
  for (size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1],
              perm[static_cast<size_t>(rng.uniform_int(0, int64_t(i) - 1))]);
  std::vector<StyleVector> shuffled;
  for (size_t i : perm) shuffled.push_back(pts[i]);
  KEstimate est2 = estimate_k(shuffled, 2, 10);
  CHECK(est2.k_prime == 3);
  ClusteringResult shuffled_result = classify_writers(shuffled, 3);
  std::vector<int> unshuffled(pts.size());
  for (size_t i = 0; i < perm.size(); ++i)
    unshuffled[perm[i]] = shuffled_result.assignments[i];
  CHECK(same_partition(base.assignments, unshuffled));
}

TEST_CASE("k estimation degenerate ranges") {
  auto pts = make_blobs(2, 5, 1.0f, 9);
  KEstimate fixed = estimate_k(pts, 4, 4);
  CHECK(fixed.k_prime == 4);
  CHECK_THROWS_AS(estimate_k(pts, 5, 3), DataError);
  CHECK_THROWS_AS(estimate_k(pts, 2, 100), DataError);

  // 2 blobs: silhouette at k=2 beats k=6
  auto two = make_blobs(2, 10, 1.0f, 10);
  KEstimate est = estimate_k(two, 2, 6);
  double at2 = -2, at6 = -2;
  for (auto [k, s] : est.silhouette_table) {
    if (k == 2) at2 = s;
    if (k == 6) at6 = s;
  }
  CHECK(at2 > at6);
  CHECK(est.k_prime == 2);

  // minimizing convention flips the argmin
  ClusteringOptions opts;
  opts.minimize_silhouette = true;
  KEstimate min_est = estimate_k(two, 2, 6, opts);
  double best = 2;
  int best_k = 0;
  for (auto [k, s] : min_est.silhouette_table)
    if (s < best) {
      best = s;
      best_k = k;
    }
  CHECK(min_est.k_prime == best_k);
}
