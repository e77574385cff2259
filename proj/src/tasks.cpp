#include "scriptorium/tasks.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "scriptorium/errors.hpp"
#include "scriptorium/metrics.hpp"

namespace scriptorium {

double cosine_similarity(const StyleVector& a, const StyleVector& b) {
  if (a.size() != b.size()) throw DataError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw DataError("cosine undefined for zero-norm vector");
  // sqrt of the product keeps self-similarity at exactly 1.0
  return dot / std::sqrt(na * nb);
}

double euclidean_distance(const StyleVector& a, const StyleVector& b) {
  if (a.size() != b.size()) throw DataError("distance: dimension mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

namespace {

void sort_descending(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.candidate_id < b.candidate_id;
            });
}

void sort_ascending(std::vector<RankedEntry>& entries) {
  std::sort(entries.begin(), entries.end(),
            [](const RankedEntry& a, const RankedEntry& b) {
              if (a.score != b.score) return a.score < b.score;
              return a.candidate_id < b.candidate_id;
            });
}

}  // namespace

RankedList identify(const std::string& query_id, const StyleVector& word_vector,
                    const std::vector<WriterTemplate>& templates) {
  if (templates.empty()) throw DataError("identify: no writer templates");
  RankedList out;
  out.query_id = query_id;
  out.entries.reserve(templates.size());
  for (const auto& t : templates)
    out.entries.push_back(
        {t.writer_id, cosine_similarity(word_vector, t.mean_vector)});
  sort_descending(out.entries);
  return out;
}

RankedList retrieve(const DocumentVector& query,
                    const std::vector<DocumentVector>& database) {
  if (database.empty()) throw DataError("retrieve: empty database");
  RankedList out;
  out.query_id = query.document_id;
  out.entries.reserve(database.size());
  for (const auto& d : database) {
    if (d.document_id == query.document_id)
      throw DataError("retrieve: query present in database: " +
                      d.document_id);
    out.entries.push_back(
        {d.document_id, euclidean_distance(query.mean_vector, d.mean_vector)});
  }
  sort_ascending(out.entries);
  return out;
}

VerificationDecision verify_signature(
    const StyleVector& query, const std::vector<StyleVector>& genuine_refs,
    double threshold) {
  if (genuine_refs.empty())
    throw DataError("verify: no genuine reference signatures");
  StyleVector tmpl = aggregate(genuine_refs);
  VerificationDecision d;
  d.score = cosine_similarity(query, tmpl);
  d.threshold = threshold;
  d.accepted = d.score >= threshold;
  return d;
}

VerificationDecision verify_documents(const DocumentVector& a,
                                      const DocumentVector& b,
                                      double threshold) {
  VerificationDecision d;
  d.score = cosine_similarity(a.mean_vector, b.mean_vector);
  d.threshold = threshold;
  d.accepted = d.score >= threshold;
  return d;
}

// ---------------------------------------------------------------------------
// PCA reducer

std::vector<std::vector<float>> PcaReducer::reduce(
    const std::vector<StyleVector>& vectors) const {
  const int n = static_cast<int>(vectors.size());
  if (n == 0) return {};
  const int d = static_cast<int>(vectors.front().size());
  const int target = std::min({target_dim_, d, std::max(1, n - 1)});
  if (target >= d) {
    std::vector<std::vector<float>> out;
    out.reserve(vectors.size());
    for (const auto& v : vectors) out.emplace_back(v.begin(), v.end());
    return out;
  }

  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = vectors[static_cast<size_t>(i)][j];
  Eigen::RowVectorXd mean = X.colwise().mean();
  X.rowwise() -= mean;

  Eigen::MatrixXd cov = (X.transpose() * X) / std::max(1, n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // eigenvalues ascending: take the trailing `target` columns
  Eigen::MatrixXd components(d, target);
  for (int c = 0; c < target; ++c) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - c);
    // deterministic sign: largest-magnitude coefficient positive
    int arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    components.col(c) = v;
  }
  Eigen::MatrixXd proj = X * components;

  std::vector<std::vector<float>> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[static_cast<size_t>(i)].resize(static_cast<size_t>(target));
    for (int c = 0; c < target; ++c)
      out[static_cast<size_t>(i)][static_cast<size_t>(c)] =
          static_cast<float>(proj(i, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agglomerative clustering (average linkage, Euclidean)

namespace {

struct Linkage {
  // merge step i joins the clusters represented by (a, b); representatives
  // are the smallest original point index in each cluster
  std::vector<std::pair<int, int>> merges;
};

Linkage build_linkage(const std::vector<std::vector<float>>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<std::vector<double>> dist(
      static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n), 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < pts[static_cast<size_t>(i)].size(); ++k) {
        double d = static_cast<double>(pts[static_cast<size_t>(i)][k]) -
                   pts[static_cast<size_t>(j)][k];
        s += d * d;
      }
      dist[static_cast<size_t>(i)][static_cast<size_t>(j)] =
          dist[static_cast<size_t>(j)][static_cast<size_t>(i)] = std::sqrt(s);
    }

  std::vector<bool> active(static_cast<size_t>(n), true);
  std::vector<int> size(static_cast<size_t>(n), 1);
  Linkage linkage;
  for (int step = 0; step < n - 1; ++step) {
    double best = std::numeric_limits<double>::infinity();
    int bi = -1, bj = -1;
    for (int i = 0; i < n; ++i) {
      if (!active[static_cast<size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[static_cast<size_t>(j)]) continue;
        double d = dist[static_cast<size_t>(i)][static_cast<size_t>(j)];
        if (d < best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    // Lance-Williams average-linkage update, merged cluster keeps index bi
    for (int k = 0; k < n; ++k) {
      if (!active[static_cast<size_t>(k)] || k == bi || k == bj) continue;
      double d =
          (size[static_cast<size_t>(bi)] *
               dist[static_cast<size_t>(bi)][static_cast<size_t>(k)] +
           size[static_cast<size_t>(bj)] *
               dist[static_cast<size_t>(bj)][static_cast<size_t>(k)]) /
          (size[static_cast<size_t>(bi)] + size[static_cast<size_t>(bj)]);
      dist[static_cast<size_t>(bi)][static_cast<size_t>(k)] =
          dist[static_cast<size_t>(k)][static_cast<size_t>(bi)] = d;
    }
    size[static_cast<size_t>(bi)] += size[static_cast<size_t>(bj)];
    active[static_cast<size_t>(bj)] = false;
    linkage.merges.emplace_back(bi, bj);
  }
  return linkage;
}

std::vector<int> cut_linkage(const Linkage& linkage, int n, int k) {
  std::vector<int> parent(static_cast<size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[static_cast<size_t>(x)] != x) {
      parent[static_cast<size_t>(x)] =
          parent[static_cast<size_t>(parent[static_cast<size_t>(x)])];
      x = parent[static_cast<size_t>(x)];
    }
    return x;
  };
  for (int step = 0; step < n - k; ++step) {
    auto [a, b] = linkage.merges[static_cast<size_t>(step)];
    parent[static_cast<size_t>(find(b))] = find(a);
  }
  // dense labels in order of first appearance
  std::vector<int> labels(static_cast<size_t>(n), -1);
  std::vector<int> root_label(static_cast<size_t>(n), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (root_label[static_cast<size_t>(r)] < 0)
      root_label[static_cast<size_t>(r)] = next++;
    labels[static_cast<size_t>(i)] = root_label[static_cast<size_t>(r)];
  }
  return labels;
}

bool all_points_identical(const std::vector<std::vector<float>>& pts) {
  for (size_t i = 1; i < pts.size(); ++i)
    if (pts[i] != pts[0]) return false;
  return true;
}

}  // namespace

ClusteringResult classify_writers(const std::vector<StyleVector>& vectors,
                                  int k, const ClusteringOptions& opts) {
  const int n = static_cast<int>(vectors.size());
  if (k < 2) throw DataError("classify: k must be >= 2");
  if (k > n) throw DataError("classify: k exceeds the number of samples");
  PcaReducer default_reducer;
  const Reducer& reducer = opts.reducer ? *opts.reducer : default_reducer;
  auto reduced = reducer.reduce(vectors);
  if (all_points_identical(reduced))
    throw DataError("classify: degenerate input, all points identical");

  Linkage linkage = build_linkage(reduced);
  ClusteringResult result;
  result.k = k;
  result.assignments = cut_linkage(linkage, n, k);
  result.silhouette = silhouette(reduced, result.assignments);
  return result;
}

KEstimate estimate_k(const std::vector<StyleVector>& vectors, int k_min,
                     int k_max, const ClusteringOptions& opts) {
  const int n = static_cast<int>(vectors.size());
  if (k_min > k_max) throw DataError("estimate_k: empty range");
  if (k_min < 2 || k_max > n)
    throw DataError("estimate_k: range must lie within [2, n]");
  PcaReducer default_reducer;
  const Reducer& reducer = opts.reducer ? *opts.reducer : default_reducer;
  auto reduced = reducer.reduce(vectors);
  if (all_points_identical(reduced))
    throw DataError("estimate_k: degenerate input, all points identical");

  Linkage linkage = build_linkage(reduced);
  KEstimate est;
  bool have = false;
  double best = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    auto labels = cut_linkage(linkage, n, k);
    double s = silhouette(reduced, labels);
    est.silhouette_table.emplace_back(k, s);
    bool better = !have || (opts.minimize_silhouette ? s < best : s > best);
    if (better) {
      best = s;
      est.k_prime = k;
      have = true;
    }
  }
  return est;
}

}  // namespace scriptorium
