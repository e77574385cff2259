#pragma once

#include <string>
#include <vector>

namespace scriptorium {

enum class SampleKind { Word, SignatureGenuine, SignatureForged };

std::string to_string(SampleKind kind);
SampleKind sample_kind_from_string(const std::string& s);

struct CorpusEntry {
  std::string image_path;
  std::string writer_id;
  std::string document_id;
  SampleKind kind = SampleKind::Word;
  std::string split;  // optional tag, e.g. "train" / "test"
};

// Writer-labeled corpus description: one tab-separated entry per line
//   path <TAB> writer_id <TAB> document_id <TAB> kind [<TAB> split]
// Lines starting with '#' are comments.
struct CorpusManifest {
  std::string name;
  std::vector<CorpusEntry> entries;

  static CorpusManifest load(const std::string& path);
  void save(const std::string& path) const;

  // Checks ids and, when check_paths is set, that every image exists.
  // Throws DataError naming the first offending entry.
  void validate(bool check_paths = true) const;

  std::vector<CorpusEntry> filter_split(const std::string& split) const;
};

}  // namespace scriptorium
