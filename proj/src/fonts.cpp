#include "scriptorium/fonts.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <opencv2/freetype.hpp>

#include "scriptorium/errors.hpp"
#include "scriptorium/rng.hpp"

namespace fs = std::filesystem;

namespace scriptorium {

namespace {

bool has_font_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".ttf" || ext == ".otf" || ext == ".ttc";
}

bool font_parses(const std::string& path) {
  try {
    auto ft = cv::freetype::createFreeType2();
    ft->loadFontData(path, 0);
    return true;
  } catch (const cv::Exception&) {
    return false;
  }
}

}  // namespace

std::vector<FontAsset> load_font_pool(const std::string& directory,
                                      int max_fonts) {
  if (!fs::is_directory(directory))
    throw ConfigError("font directory does not exist: " + directory);

  std::vector<fs::path> candidates;
  for (const auto& entry : fs::directory_iterator(directory))
    if (entry.is_regular_file() && has_font_extension(entry.path()))
      candidates.push_back(entry.path());
  std::sort(candidates.begin(), candidates.end(),
            [](const fs::path& a, const fs::path& b) {
              return a.filename().string() < b.filename().string();
            });

  std::vector<FontAsset> pool;
  for (const auto& path : candidates) {
    if (static_cast<int>(pool.size()) >= max_fonts) break;
    if (!font_parses(path.string())) {
      std::cerr << "warning: skipping unparseable font " << path << "\n";
      continue;
    }
    FontAsset asset;
    asset.font_id = static_cast<int>(pool.size());
    asset.glyph_source = path.string();
    asset.name = path.stem().string();
    pool.push_back(std::move(asset));
  }
  if (pool.empty())
    throw ConfigError("no usable scalable font found in: " + directory);
  return pool;
}

WordLexicon WordLexicon::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open word list: " + path);
  WordLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (!line.empty()) lex.words.push_back(line);
  }
  if (lex.words.empty()) throw ConfigError("word list is empty: " + path);
  return lex;
}

WordLexicon WordLexicon::sample(const WordLexicon& vocabulary, int count,
                                uint64_t seed) {
  std::vector<std::string> shuffled = vocabulary.words;
  // Fisher-Yates with the project's own stream so the draw is stable
  // across platforms.
  SampleRng rng(SampleRng::derive(seed, 0x776f7264, 0));
  for (size_t i = shuffled.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(shuffled[i - 1], shuffled[j]);
  }
  if (count < static_cast<int>(shuffled.size()))
    shuffled.resize(static_cast<size_t>(count));
  WordLexicon out;
  out.words = std::move(shuffled);
  return out;
}

}  // namespace scriptorium
