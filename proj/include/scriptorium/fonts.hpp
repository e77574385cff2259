#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scriptorium {

struct FontAsset {
  int font_id = 0;          // dense label in [0, S)
  std::string glyph_source; // path to a scalable font file
  std::string name;         // filename stem
};

// Loads up to max_fonts scalable fonts from `directory`, ordered
// lexicographically by filename. Unparseable files are skipped with a
// warning on stderr; ids are assigned densely after filtering.
// Throws ConfigError when the directory is missing or yields no usable font.
std::vector<FontAsset> load_font_pool(const std::string& directory,
                                      int max_fonts);

struct WordLexicon {
  std::vector<std::string> words;

  // One word per line; blank lines skipped. Throws ConfigError on a missing
  // file or an empty result.
  static WordLexicon load(const std::string& path);

  // Random draw of `count` distinct entries (all of them when count exceeds
  // the vocabulary), order fixed by `seed`.
  static WordLexicon sample(const WordLexicon& vocabulary, int count,
                            uint64_t seed);
};

}  // namespace scriptorium
