#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json_fwd.hpp>
#include <opencv2/core.hpp>
#include <string>
#include <vector>

#include "scriptorium/fonts.hpp"

namespace cv::freetype {
class FreeType2;
}

namespace scriptorium {

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

// Ranges for the randomized augmentation chain. The paper leaves all of
// these unspecified; the defaults are mild enough to keep every word
// legible while still breaking per-font duplication.
struct GeneratorConfig {
  int canvas_height = 64;
  ParamRange rotation_deg{-10.0, 10.0};
  int tps_rows = 3;
  int tps_cols = 5;
  // Control point displacement, uniform in +-frac * canvas_height px.
  double tps_displacement_frac = 0.04;
  ParamRange blur_sigma{0.0, 1.5};
  int dilation_max_radius = 2;
  ParamRange brightness{-0.2, 0.2};
  ParamRange contrast{-0.2, 0.2};
  ParamRange saturation{-0.2, 0.2};
  ParamRange hue{-0.05, 0.05};
  int background_count = 8;  // set from the background pool before sampling

  void validate() const;  // throws ConfigError on malformed ranges
  uint64_t digest() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

struct JitterParams {
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double hue = 0.0;
};

// Full parameter set producing one synthetic sample; a pure function of
// (root_seed, font_id, word_index, config).
struct RenderRecipe {
  uint64_t seed = 0;
  double rotation_deg = 0.0;
  int tps_rows = 0;
  int tps_cols = 0;
  std::vector<cv::Point2f> tps_displacements;  // row-major, pixels
  double blur_sigma = 0.0;
  int background_id = 0;
  int dilation_radius = 0;
  JitterParams jitter;
  int canvas_height = 64;
};

RenderRecipe sample_recipe(uint64_t root_seed, int font_id, int word_index,
                           const GeneratorConfig& config);

struct SyntheticSample {
  cv::Mat image;  // CV_8UC3, rows == recipe.canvas_height
  int font_id = 0;
  std::string word;
  RenderRecipe recipe;
};

// Pool of paper-like background textures, immutable after construction.
class BackgroundPool {
 public:
  // Procedural paper tones with grain; runs with zero external assets.
  static BackgroundPool procedural(int count = 8,
                                   uint64_t seed = 0x7061706572ULL);
  // Throws ConfigError when the directory holds no readable image.
  static BackgroundPool from_directory(const std::string& directory);

  int size() const { return static_cast<int>(textures_.size()); }
  // Texture tiled/cropped to the requested size.
  cv::Mat tiled(int background_id, cv::Size size) const;

 private:
  std::vector<cv::Mat> textures_;
};

// Rasterizes words with FreeType. One renderer per worker thread; the
// underlying font engines are lazily created and not shareable.
class GlyphRenderer {
 public:
  explicit GlyphRenderer(std::vector<FontAsset> fonts);
  ~GlyphRenderer();
  GlyphRenderer(GlyphRenderer&&) noexcept;

  // Dark glyphs on a white canvas of the given height; width follows the
  // text advance. Throws DataError when the word is empty or the font
  // produces no ink for it.
  cv::Mat render(const std::string& word, int font_id, int canvas_height);

  const std::vector<FontAsset>& fonts() const { return fonts_; }

 private:
  std::vector<FontAsset> fonts_;
  std::vector<cv::Ptr<cv::freetype::FreeType2>> engines_;
};

// One-off render with a temporary engine; prefer GlyphRenderer in loops.
cv::Mat render_word(const std::string& word, const FontAsset& font,
                    int canvas_height);

// Multiplicative blend: white canvas regions become texture, ink stays dark.
cv::Mat composite_background(const cv::Mat& word_image,
                             const cv::Mat& background);

cv::Mat apply_color_jitter(const cv::Mat& image, const JitterParams& jitter);

// render -> rotation -> TPS -> gaussian blur -> background -> grayscale
// dilation -> color jitter.
SyntheticSample generate_sample(const std::string& word, GlyphRenderer& renderer,
                                int font_id, const RenderRecipe& recipe,
                                const BackgroundPool& backgrounds);

struct DatasetManifest {
  uint64_t num_fonts = 0;
  uint64_t num_words = 0;
  std::string split_name;
  uint64_t root_seed = 0;
  std::string config_digest;
  std::string sample_digest;
  std::vector<std::pair<std::string, uint64_t>> shard_counts;

  uint64_t sample_count() const { return num_fonts * num_words; }

  void save(const std::string& path) const;
  static DatasetManifest load(const std::string& path);
};

// Random-access view over the full S x W grid; never materializes the
// dataset. Each instance owns its render engines: use one per thread.
class DatasetView {
 public:
  DatasetView(std::vector<FontAsset> fonts, WordLexicon lexicon,
              GeneratorConfig config, BackgroundPool backgrounds,
              uint64_t root_seed);

  SyntheticSample sample(int font_id, int word_index);
  int num_fonts() const;
  int num_words() const;
  const WordLexicon& lexicon() const { return *lexicon_; }
  const std::vector<FontAsset>& fonts() const { return renderer_.fonts(); }
  const GeneratorConfig& config() const { return *config_; }
  uint64_t root_seed() const { return root_seed_; }

  // Independent engines over the same immutable pools.
  DatasetView clone_for_worker() const;

 private:
  DatasetView(std::vector<FontAsset> fonts,
              std::shared_ptr<const WordLexicon> lexicon,
              std::shared_ptr<const GeneratorConfig> config,
              std::shared_ptr<const BackgroundPool> backgrounds,
              uint64_t root_seed);

  GlyphRenderer renderer_;
  std::shared_ptr<const WordLexicon> lexicon_;
  std::shared_ptr<const GeneratorConfig> config_;
  std::shared_ptr<const BackgroundPool> backgrounds_;
  uint64_t root_seed_;
};

// Generates every (font, word) combination into sharded PNG files
// (`shard_NNNN/fontID_wordIndex.png`) plus a manifest. The per-sample
// digest order is canonical (linear index), independent of worker count.
DatasetManifest write_dataset(DatasetView& view, const std::string& out_dir,
                              const std::string& split_name, int shard_size,
                              int workers);

}  // namespace scriptorium
