#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scriptorium {

using StyleVector = std::vector<float>;

constexpr int kStyleDim = 512;

struct EmbeddingRecord {
  std::string sample_id;
  std::string writer_id;
  std::string document_id;
  StyleVector vector;
};

struct WriterTemplate {
  std::string writer_id;
  StyleVector mean_vector;
  uint64_t count = 0;
};

struct DocumentVector {
  std::string document_id;
  std::string writer_id;
  StyleVector mean_vector;
  uint64_t word_count = 0;
};

// Component-wise arithmetic mean. Throws DataError on an empty list or
// mismatched dimensions.
StyleVector aggregate(const std::vector<StyleVector>& vectors);

// One template per distinct writer_id, ordered by writer_id.
std::vector<WriterTemplate> build_writer_templates(
    const std::vector<EmbeddingRecord>& records);

// One vector per distinct (document_id, writer_id), ordered by document_id.
std::vector<DocumentVector> build_document_vectors(
    const std::vector<EmbeddingRecord>& records);

// Immutable collection of embedding records plus derived writer templates.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::vector<EmbeddingRecord> records);

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const std::vector<WriterTemplate>& templates() const { return templates_; }

  // Versioned little-endian binary file; round-trips vectors bit-exactly.
  void save(const std::string& path) const;
  static EmbeddingStore load(const std::string& path);

  // Tab-separated export: sample_id, writer_id, document_id, values...
  void export_tsv(const std::string& path) const;

 private:
  std::vector<EmbeddingRecord> records_;
  std::vector<WriterTemplate> templates_;
};

}  // namespace scriptorium
