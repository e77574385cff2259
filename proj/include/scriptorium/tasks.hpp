#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scriptorium/embedstore.hpp"

namespace scriptorium {

struct RankedEntry {
  std::string candidate_id;
  double score = 0.0;  // similarity for identification, distance for retrieval
};

// Best match first; ties broken lexicographically by candidate id.
struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;
};

double cosine_similarity(const StyleVector& a, const StyleVector& b);
double euclidean_distance(const StyleVector& a, const StyleVector& b);

// Writers ranked by cosine similarity to the query word vector, descending.
RankedList identify(const std::string& query_id, const StyleVector& word_vector,
                    const std::vector<WriterTemplate>& templates);

// Database documents ranked by ascending Euclidean distance. The query must
// not be part of the database (leave-one-out is the caller's protocol).
RankedList retrieve(const DocumentVector& query,
                    const std::vector<DocumentVector>& database);

struct VerificationDecision {
  double score = 0.0;
  double threshold = 0.0;
  bool accepted = false;  // score >= threshold
};

// Query vs the mean of the genuine reference signatures (5 per default
// protocol; any count >= 1 is accepted so the reference size stays
// configurable).
VerificationDecision verify_signature(const StyleVector& query,
                                      const std::vector<StyleVector>& genuine_refs,
                                      double threshold);

VerificationDecision verify_documents(const DocumentVector& a,
                                      const DocumentVector& b,
                                      double threshold);

// -----------------------------------------------------------------------
// Writer classification (clustering)

// Dimensionality reducer applied before clustering. The built-in default
// projects onto the top principal components; a neighbor-graph reducer can
// be plugged in behind the same interface.
class Reducer {
 public:
  virtual ~Reducer() = default;
  virtual std::vector<std::vector<float>> reduce(
      const std::vector<StyleVector>& vectors) const = 0;
};

class PcaReducer : public Reducer {
 public:
  explicit PcaReducer(int target_dim = 32) : target_dim_(target_dim) {}
  std::vector<std::vector<float>> reduce(
      const std::vector<StyleVector>& vectors) const override;

 private:
  int target_dim_;
};

struct ClusteringResult {
  std::vector<int> assignments;  // dense cluster indices 0..k-1
  int k = 0;
  double silhouette = 0.0;  // in the reduced space
};

struct ClusteringOptions {
  const Reducer* reducer = nullptr;  // nullptr: PCA to 32 dims
  // The standard convention scores higher silhouette as better; flip to
  // follow a minimizing grid search instead.
  bool minimize_silhouette = false;
};

// Average-linkage agglomerative clustering on Euclidean distance in the
// reduced space. Throws DataError when k is out of range or all points
// coincide (degenerate input).
ClusteringResult classify_writers(const std::vector<StyleVector>& vectors,
                                  int k, const ClusteringOptions& opts = {});

struct KEstimate {
  int k_prime = 0;
  std::vector<std::pair<int, double>> silhouette_table;  // (k, score)
};

// Grid search over k_range (inclusive); returns the k optimizing the
// silhouette criterion together with the full table.
KEstimate estimate_k(const std::vector<StyleVector>& vectors, int k_min,
                     int k_max, const ClusteringOptions& opts = {});

}  // namespace scriptorium
