#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace scriptorium {

struct ScoredTrial {
  std::string query_id;
  std::string true_label;
  std::vector<std::string> ranked_labels;  // best match first
};

// Fraction of trials whose true label appears within the first n ranks.
double topn_accuracy(const std::vector<ScoredTrial>& trials, int n);

// Fraction with at least one correct candidate in the top n.
double soft_topn(const std::vector<ScoredTrial>& trials, int n);

// Fraction whose first n candidates are all correct (trials with fewer
// than n candidates count as misses).
double hard_topn(const std::vector<ScoredTrial>& trials, int n);

struct RocPoint {
  double threshold = 0.0;
  double false_acceptance_rate = 0.0;  // impostor scores >= threshold
  double false_rejection_rate = 0.0;   // genuine scores < threshold
};

std::vector<RocPoint> roc_curve(const std::vector<double>& genuine_scores,
                                const std::vector<double>& impostor_scores);

// Equal Error Rate: the best achievable trade-off between FAR and FRR over
// all thresholds, i.e. min over t of (FAR(t) + FRR(t)) / 2, with candidate
// thresholds halfway between adjacent distinct scores. Returns (eer,
// threshold). Similarity convention: accept when score >= threshold.
std::pair<double, double> eer(const std::vector<double>& genuine_scores,
                              const std::vector<double>& impostor_scores);

// Mean over samples of (b - a) / max(a, b); singleton clusters and
// zero-distance degenerate samples contribute 0.
double silhouette(const std::vector<std::vector<float>>& points,
                  const std::vector<int>& assignments);

inline int64_t delta_k(int64_t k_star, int64_t k_prime) {
  return k_star - k_prime;
}

// -----------------------------------------------------------------------
// Report

struct MetricTable {
  std::string task;
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::vector<double>>> rows;
};

// Per-task metric tables plus a provenance line; serializes to a fenced
// structured-text report and a machine-readable JSON companion.
struct EvalReport {
  std::vector<MetricTable> tables;
  std::string provenance;

  std::string to_text() const;
  static EvalReport from_text(const std::string& text);
  std::string to_json_text() const;
};

}  // namespace scriptorium
