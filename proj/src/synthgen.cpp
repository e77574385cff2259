#include "scriptorium/synthgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <opencv2/freetype.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <thread>

#include "scriptorium/errors.hpp"
#include "scriptorium/hash.hpp"
#include "scriptorium/rng.hpp"
#include "scriptorium/tps.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scriptorium {

// ---------------------------------------------------------------------------
// GeneratorConfig

namespace {

void check_range(const ParamRange& r, const char* name) {
  if (!(r.lo <= r.hi))
    throw ConfigError(std::string("config range ") + name + ": min > max");
}

}  // namespace

void GeneratorConfig::validate() const {
  if (canvas_height < 16) throw ConfigError("canvas_height must be >= 16");
  check_range(rotation_deg, "rotation_deg");
  check_range(blur_sigma, "blur_sigma");
  check_range(brightness, "brightness");
  check_range(contrast, "contrast");
  check_range(saturation, "saturation");
  check_range(hue, "hue");
  if (blur_sigma.lo < 0) throw ConfigError("blur_sigma must be >= 0");
  if (tps_rows < 2 || tps_cols < 2)
    throw ConfigError("tps grid must be at least 2x2");
  if (tps_displacement_frac < 0)
    throw ConfigError("tps_displacement_frac must be >= 0");
  if (dilation_max_radius < 0)
    throw ConfigError("dilation_max_radius must be >= 0");
  if (background_count < 1) throw ConfigError("background_count must be >= 1");
}

void to_json(json& j, const GeneratorConfig& c) {
  j = json{{"canvas_height", c.canvas_height},
           {"rotation_deg", {c.rotation_deg.lo, c.rotation_deg.hi}},
           {"tps_rows", c.tps_rows},
           {"tps_cols", c.tps_cols},
           {"tps_displacement_frac", c.tps_displacement_frac},
           {"blur_sigma", {c.blur_sigma.lo, c.blur_sigma.hi}},
           {"dilation_max_radius", c.dilation_max_radius},
           {"brightness", {c.brightness.lo, c.brightness.hi}},
           {"contrast", {c.contrast.lo, c.contrast.hi}},
           {"saturation", {c.saturation.lo, c.saturation.hi}},
           {"hue", {c.hue.lo, c.hue.hi}},
           {"background_count", c.background_count}};
}

namespace {
ParamRange range_from(const json& j) {
  return ParamRange{j.at(0).get<double>(), j.at(1).get<double>()};
}
}  // namespace

void from_json(const json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.canvas_height = j.value("canvas_height", d.canvas_height);
  if (j.contains("rotation_deg")) c.rotation_deg = range_from(j["rotation_deg"]);
  c.tps_rows = j.value("tps_rows", d.tps_rows);
  c.tps_cols = j.value("tps_cols", d.tps_cols);
  c.tps_displacement_frac =
      j.value("tps_displacement_frac", d.tps_displacement_frac);
  if (j.contains("blur_sigma")) c.blur_sigma = range_from(j["blur_sigma"]);
  c.dilation_max_radius = j.value("dilation_max_radius", d.dilation_max_radius);
  if (j.contains("brightness")) c.brightness = range_from(j["brightness"]);
  if (j.contains("contrast")) c.contrast = range_from(j["contrast"]);
  if (j.contains("saturation")) c.saturation = range_from(j["saturation"]);
  if (j.contains("hue")) c.hue = range_from(j["hue"]);
  c.background_count = j.value("background_count", d.background_count);
}

uint64_t GeneratorConfig::digest() const {
  json j;
  to_json(j, *this);
  std::string s = j.dump();
  return fnv1a(s.data(), s.size());
}

// ---------------------------------------------------------------------------
// Recipe sampling

RenderRecipe sample_recipe(uint64_t root_seed, int font_id, int word_index,
                           const GeneratorConfig& config) {
  config.validate();
  RenderRecipe r;
  r.seed = SampleRng::derive(root_seed, static_cast<uint64_t>(font_id),
                             static_cast<uint64_t>(word_index));
  SampleRng rng(r.seed);
  r.canvas_height = config.canvas_height;
  r.rotation_deg = rng.uniform(config.rotation_deg.lo, config.rotation_deg.hi);
  r.tps_rows = config.tps_rows;
  r.tps_cols = config.tps_cols;
  const double amp = config.tps_displacement_frac * config.canvas_height;
  r.tps_displacements.resize(
      static_cast<size_t>(config.tps_rows) * config.tps_cols);
  for (auto& d : r.tps_displacements) {
    d.x = static_cast<float>(rng.uniform(-amp, amp));
    d.y = static_cast<float>(rng.uniform(-amp, amp));
  }
  r.blur_sigma = rng.uniform(config.blur_sigma.lo, config.blur_sigma.hi);
  r.background_id =
      static_cast<int>(rng.uniform_int(0, config.background_count - 1));
  r.dilation_radius =
      static_cast<int>(rng.uniform_int(0, config.dilation_max_radius));
  r.jitter.brightness = rng.uniform(config.brightness.lo, config.brightness.hi);
  r.jitter.contrast = rng.uniform(config.contrast.lo, config.contrast.hi);
  r.jitter.saturation = rng.uniform(config.saturation.lo, config.saturation.hi);
  r.jitter.hue = rng.uniform(config.hue.lo, config.hue.hi);
  return r;
}

// ---------------------------------------------------------------------------
// Backgrounds

BackgroundPool BackgroundPool::procedural(int count, uint64_t seed) {
  BackgroundPool pool;
  const int side = 256;
  for (int k = 0; k < count; ++k) {
    SampleRng rng(SampleRng::derive(seed, static_cast<uint64_t>(k), 0));
    double tone = rng.uniform(200.0, 245.0);
    double tint_b = rng.uniform(-8.0, 2.0);   // paper leans warm
    double tint_r = rng.uniform(-2.0, 8.0);
    // low-frequency cloudiness plus per-pixel grain
    cv::Mat coarse(8, 8, CV_32FC1);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        coarse.at<float>(y, x) = static_cast<float>(rng.uniform(-10.0, 10.0));
    cv::Mat cloud;
    cv::resize(coarse, cloud, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
    cv::Mat tex(side, side, CV_8UC3);
    for (int y = 0; y < side; ++y) {
      auto* row = tex.ptr<cv::Vec3b>(y);
      const float* c = cloud.ptr<float>(y);
      for (int x = 0; x < side; ++x) {
        double grain = rng.uniform(-6.0, 6.0);
        double v = tone + c[x] + grain;
        row[x] = cv::Vec3b(cv::saturate_cast<uchar>(v + tint_b),
                           cv::saturate_cast<uchar>(v),
                           cv::saturate_cast<uchar>(v + tint_r));
      }
    }
    pool.textures_.push_back(tex);
  }
  return pool;
}

BackgroundPool BackgroundPool::from_directory(const std::string& directory) {
  if (!fs::is_directory(directory))
    throw ConfigError("background directory does not exist: " + directory);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(directory))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  BackgroundPool pool;
  for (const auto& f : files) {
    cv::Mat img = cv::imread(f.string(), cv::IMREAD_COLOR);
    if (!img.empty()) pool.textures_.push_back(img);
  }
  if (pool.textures_.empty())
    throw ConfigError("no readable background image in: " + directory);
  return pool;
}

static cv::Mat tile_to(const cv::Mat& tex, cv::Size size) {
  int ny = (size.height + tex.rows - 1) / tex.rows;
  int nx = (size.width + tex.cols - 1) / tex.cols;
  cv::Mat big;
  cv::repeat(tex, ny, nx, big);
  return big(cv::Rect(0, 0, size.width, size.height)).clone();
}

cv::Mat BackgroundPool::tiled(int background_id, cv::Size size) const {
  if (textures_.empty()) throw DataError("background pool is empty");
  if (background_id < 0 || background_id >= static_cast<int>(textures_.size()))
    throw DataError("background_id out of range");
  return tile_to(textures_[static_cast<size_t>(background_id)], size);
}

// ---------------------------------------------------------------------------
// Rendering

GlyphRenderer::GlyphRenderer(std::vector<FontAsset> fonts)
    : fonts_(std::move(fonts)), engines_(fonts_.size()) {}
GlyphRenderer::~GlyphRenderer() = default;
GlyphRenderer::GlyphRenderer(GlyphRenderer&&) noexcept = default;

cv::Mat GlyphRenderer::render(const std::string& word, int font_id,
                              int canvas_height) {
  if (word.empty()) throw DataError("cannot render an empty word");
  if (canvas_height < 16) throw ConfigError("canvas_height must be >= 16");
  if (font_id < 0 || font_id >= static_cast<int>(fonts_.size()))
    throw DataError("font_id out of range: " + std::to_string(font_id));
  auto& engine = engines_[static_cast<size_t>(font_id)];
  if (!engine) {
    engine = cv::freetype::createFreeType2();
    engine->loadFontData(fonts_[static_cast<size_t>(font_id)].glyph_source, 0);
  }
  const int font_px = std::max(8, canvas_height / 2);
  int baseline = 0;
  cv::Size text = engine->getTextSize(word, font_px, -1, &baseline);
  const int margin_x = canvas_height / 4;
  const int width = std::max(text.width + 2 * margin_x, canvas_height / 2);
  cv::Mat canvas(canvas_height, width, CV_8UC3, cv::Scalar::all(255));
  int y_top = std::max(1, (canvas_height - text.height) / 2);
  engine->putText(canvas, word, cv::Point(margin_x, y_top), font_px,
                  cv::Scalar::all(0), -1, cv::LINE_AA, false);
  cv::Mat gray;
  cv::cvtColor(canvas, gray, cv::COLOR_BGR2GRAY);
  if (cv::countNonZero(gray < 250) == 0)
    throw DataError("font '" + fonts_[static_cast<size_t>(font_id)].name +
                    "' renders no ink for word '" + word + "'");
  return canvas;
}

cv::Mat render_word(const std::string& word, const FontAsset& font,
                    int canvas_height) {
  GlyphRenderer renderer({font});
  return renderer.render(word, 0, canvas_height);
}

// ---------------------------------------------------------------------------
// Augmentation steps

cv::Mat composite_background(const cv::Mat& word_image,
                             const cv::Mat& background) {
  if (background.empty()) throw DataError("empty background image");
  cv::Mat bg = background;
  if (bg.channels() == 1) cv::cvtColor(bg, bg, cv::COLOR_GRAY2BGR);
  if (bg.size() != word_image.size()) bg = tile_to(bg, word_image.size());
  cv::Mat out;
  // per-channel multiply of normalized intensities
  cv::multiply(word_image, bg, out, 1.0 / 255.0);
  return out;
}

cv::Mat apply_color_jitter(const cv::Mat& image, const JitterParams& jitter) {
  const bool any = jitter.brightness != 0.0 || jitter.contrast != 0.0 ||
                   jitter.saturation != 0.0 || jitter.hue != 0.0;
  if (!any) return image.clone();
  cv::Mat f;
  image.convertTo(f, CV_32FC3, 1.0 / 255.0);
  if (jitter.brightness != 0.0) f *= (1.0 + jitter.brightness);
  if (jitter.contrast != 0.0) {
    cv::Mat gray;
    cv::cvtColor(f, gray, cv::COLOR_BGR2GRAY);
    double m = cv::mean(gray)[0];
    f = (f - cv::Scalar::all(m)) * (1.0 + jitter.contrast) + cv::Scalar::all(m);
  }
  if (jitter.saturation != 0.0) {
    cv::Mat gray, gray3;
    cv::cvtColor(f, gray, cv::COLOR_BGR2GRAY);
    cv::cvtColor(gray, gray3, cv::COLOR_GRAY2BGR);
    f = gray3 + (f - gray3) * (1.0 + jitter.saturation);
  }
  if (jitter.hue != 0.0) {
    cv::Mat clamped;
    cv::min(cv::max(f, 0.0f), 1.0f, clamped);
    cv::Mat hsv;
    cv::cvtColor(clamped, hsv, cv::COLOR_BGR2HSV);  // H in [0, 360)
    std::vector<cv::Mat> ch;
    cv::split(hsv, ch);
    ch[0] += static_cast<float>(jitter.hue * 360.0);
    for (int y = 0; y < ch[0].rows; ++y) {
      float* h = ch[0].ptr<float>(y);
      for (int x = 0; x < ch[0].cols; ++x) {
        if (h[x] < 0) h[x] += 360.0f;
        if (h[x] >= 360.0f) h[x] -= 360.0f;
      }
    }
    cv::merge(ch, hsv);
    cv::cvtColor(hsv, f, cv::COLOR_HSV2BGR);
  }
  cv::Mat out;
  cv::min(cv::max(f, 0.0f), 1.0f, f);
  f.convertTo(out, CV_8UC3, 255.0);
  return out;
}

namespace {

std::vector<cv::Point2f> tps_grid(int rows, int cols, cv::Size size) {
  std::vector<cv::Point2f> pts;
  pts.reserve(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      float fx = 0.05f + 0.90f * static_cast<float>(j) / (cols - 1);
      float fy = 0.08f + 0.84f * static_cast<float>(i) / (rows - 1);
      pts.emplace_back(fx * (size.width - 1), fy * (size.height - 1));
    }
  return pts;
}

}  // namespace

SyntheticSample generate_sample(const std::string& word,
                                GlyphRenderer& renderer, int font_id,
                                const RenderRecipe& recipe,
                                const BackgroundPool& backgrounds) {
  cv::Mat img = renderer.render(word, font_id, recipe.canvas_height);

  if (recipe.rotation_deg != 0.0) {
    cv::Point2f center(img.cols / 2.0f, img.rows / 2.0f);
    cv::Mat rot = cv::getRotationMatrix2D(center, recipe.rotation_deg, 1.0);
    cv::warpAffine(img, img, rot, img.size(), cv::INTER_LINEAR,
                   cv::BORDER_CONSTANT, cv::Scalar::all(255));
  }

  bool any_disp = std::any_of(
      recipe.tps_displacements.begin(), recipe.tps_displacements.end(),
      [](const cv::Point2f& d) { return d.x != 0.0f || d.y != 0.0f; });
  if (any_disp) {
    if (recipe.tps_displacements.size() !=
        static_cast<size_t>(recipe.tps_rows) * recipe.tps_cols)
      throw DataError("recipe tps displacement count does not match grid");
    auto src = tps_grid(recipe.tps_rows, recipe.tps_cols, img.size());
    auto dst = src;
    for (size_t i = 0; i < dst.size(); ++i) dst[i] += recipe.tps_displacements[i];
    img = apply_tps(img, src, dst, cv::Scalar::all(255));
  }

  if (recipe.blur_sigma > 1e-12)
    cv::GaussianBlur(img, img, cv::Size(0, 0), recipe.blur_sigma);

  cv::Mat bg = backgrounds.tiled(recipe.background_id, img.size());
  img = composite_background(img, bg);

  if (recipe.dilation_radius > 0) {
    // min filter: thickens dark strokes (grayscale dilation of the ink)
    int k = 2 * recipe.dilation_radius + 1;
    cv::Mat kernel =
        cv::getStructuringElement(cv::MORPH_ELLIPSE, cv::Size(k, k));
    cv::erode(img, img, kernel);
  }

  img = apply_color_jitter(img, recipe.jitter);

  SyntheticSample s;
  s.image = img;
  s.font_id = font_id;
  s.word = word;
  s.recipe = recipe;
  return s;
}

// ---------------------------------------------------------------------------
// Manifest

void DatasetManifest::save(const std::string& path) const {
  json j{{"num_fonts", num_fonts},
         {"num_words", num_words},
         {"split_name", split_name},
         {"root_seed", root_seed},
         {"config_digest", config_digest},
         {"sample_digest", sample_digest}};
  j["shards"] = json::array();
  for (const auto& [name, count] : shard_counts)
    j["shards"].push_back({{"name", name}, {"count", count}});
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest: " + path);
  json j = json::parse(in);
  DatasetManifest m;
  m.num_fonts = j.at("num_fonts").get<uint64_t>();
  m.num_words = j.at("num_words").get<uint64_t>();
  m.split_name = j.at("split_name").get<std::string>();
  m.root_seed = j.at("root_seed").get<uint64_t>();
  m.config_digest = j.at("config_digest").get<std::string>();
  m.sample_digest = j.at("sample_digest").get<std::string>();
  for (const auto& s : j.at("shards"))
    m.shard_counts.emplace_back(s.at("name").get<std::string>(),
                                s.at("count").get<uint64_t>());
  return m;
}

// ---------------------------------------------------------------------------
// Dataset view and writer

DatasetView::DatasetView(std::vector<FontAsset> fonts, WordLexicon lexicon,
                         GeneratorConfig config, BackgroundPool backgrounds,
                         uint64_t root_seed)
    : renderer_(std::move(fonts)),
      lexicon_(std::make_shared<const WordLexicon>(std::move(lexicon))),
      backgrounds_(std::make_shared<const BackgroundPool>(std::move(backgrounds))),
      root_seed_(root_seed) {
  if (lexicon_->words.empty()) throw ConfigError("lexicon is empty");
  config.background_count = backgrounds_->size();
  config.validate();
  config_ = std::make_shared<const GeneratorConfig>(config);
}

int DatasetView::num_fonts() const {
  return static_cast<int>(renderer_.fonts().size());
}
int DatasetView::num_words() const {
  return static_cast<int>(lexicon_->words.size());
}

SyntheticSample DatasetView::sample(int font_id, int word_index) {
  if (font_id < 0 || font_id >= num_fonts())
    throw DataError("font_id out of range");
  if (word_index < 0 || word_index >= num_words())
    throw DataError("word_index out of range");
  RenderRecipe recipe =
      sample_recipe(root_seed_, font_id, word_index, *config_);
  return generate_sample(lexicon_->words[static_cast<size_t>(word_index)],
                         renderer_, font_id, recipe, *backgrounds_);
}

DatasetView::DatasetView(std::vector<FontAsset> fonts,
                         std::shared_ptr<const WordLexicon> lexicon,
                         std::shared_ptr<const GeneratorConfig> config,
                         std::shared_ptr<const BackgroundPool> backgrounds,
                         uint64_t root_seed)
    : renderer_(std::move(fonts)),
      lexicon_(std::move(lexicon)),
      config_(std::move(config)),
      backgrounds_(std::move(backgrounds)),
      root_seed_(root_seed) {}

DatasetView DatasetView::clone_for_worker() const {
  return DatasetView(renderer_.fonts(), lexicon_, config_, backgrounds_,
                     root_seed_);
}

namespace {

uint64_t image_hash(const cv::Mat& img) {
  Fnv1a h;
  h.update_u64(static_cast<uint64_t>(img.rows));
  h.update_u64(static_cast<uint64_t>(img.cols));
  for (int y = 0; y < img.rows; ++y)
    h.update(img.ptr(y), static_cast<size_t>(img.cols) * img.elemSize());
  return h.digest();
}

}  // namespace

DatasetManifest write_dataset(DatasetView& view, const std::string& out_dir,
                              const std::string& split_name, int shard_size,
                              int workers) {
  if (shard_size < 1) throw ConfigError("shard_size must be >= 1");
  const uint64_t S = static_cast<uint64_t>(view.num_fonts());
  const uint64_t W = static_cast<uint64_t>(view.num_words());
  const uint64_t total = S * W;
  const uint64_t num_shards = (total + shard_size - 1) / shard_size;

  fs::create_directories(out_dir);
  for (uint64_t s = 0; s < num_shards; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%04llu",
                  static_cast<unsigned long long>(s));
    fs::create_directories(fs::path(out_dir) / name);
  }

  std::vector<uint64_t> hashes(total);
  workers = std::max(1, workers);
  std::atomic<uint64_t> next_block{0};
  const uint64_t block = 64;  // work-stealing granularity
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&](DatasetView worker_view) {
    try {
      for (;;) {
        uint64_t lo = next_block.fetch_add(block);
        if (lo >= total) break;
        uint64_t hi = std::min(lo + block, total);
        for (uint64_t idx = lo; idx < hi; ++idx) {
          int f = static_cast<int>(idx / W);
          int w = static_cast<int>(idx % W);
          SyntheticSample s = worker_view.sample(f, w);
          char name[64];
          std::snprintf(name, sizeof(name), "shard_%04llu/%06d_%06d.png",
                        static_cast<unsigned long long>(idx / shard_size), f, w);
          cv::imwrite((fs::path(out_dir) / name).string(), s.image);
          hashes[idx] = image_hash(s.image);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (workers == 1) {
    run(view.clone_for_worker());
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i)
      pool.emplace_back(run, view.clone_for_worker());
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  Fnv1a digest;
  for (uint64_t h : hashes) digest.update_u64(h);

  DatasetManifest m;
  m.num_fonts = S;
  m.num_words = W;
  m.split_name = split_name;
  m.root_seed = view.root_seed();
  m.config_digest = hex_digest(view.config().digest());
  m.sample_digest = hex_digest(digest.digest());
  for (uint64_t s = 0; s < num_shards; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "shard_%04llu",
                  static_cast<unsigned long long>(s));
    uint64_t count = std::min<uint64_t>(shard_size, total - s * shard_size);
    m.shard_counts.emplace_back(name, count);
  }
  m.save((fs::path(out_dir) / "manifest.json").string());
  return m;
}

}  // namespace scriptorium
