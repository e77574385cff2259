// Command-line front end: dataset generation, encoder training and
// fine-tuning, embedding extraction, task evaluation, report merging.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <set>
#include <thread>

#include "scriptorium/embedstore.hpp"
#include "scriptorium/encoder.hpp"
#include "scriptorium/errors.hpp"
#include "scriptorium/fonts.hpp"
#include "scriptorium/hash.hpp"
#include "scriptorium/manifest.hpp"
#include "scriptorium/metrics.hpp"
#include "scriptorium/rng.hpp"
#include "scriptorium/synthgen.hpp"
#include "scriptorium/tasks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scriptorium;

namespace {

// ---------------------------------------------------------------------------
// Helpers

std::string resolve_out(const std::string& path) {
  const char* base = std::getenv("SCRIPTORIUM_OUT_DIR");
  if (base && *base && fs::path(path).is_relative())
    return (fs::path(base) / path).string();
  return path;
}

int resolve_workers(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SCRIPTORIUM_WORKERS"))
    if (int v = std::atoi(env); v > 0) return v;
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  return hw > 0 ? hw : 1;
}

uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read: " + path);
  Fnv1a h;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h.update(buf, static_cast<size_t>(in.gcount()));
  return h.digest();
}

json load_config_section(const std::string& config_path,
                         const std::string& section) {
  if (config_path.empty()) return json::object();
  std::ifstream in(config_path);
  if (!in) throw ConfigError("cannot open config file: " + config_path);
  json cfg = json::parse(in);
  if (cfg.contains(section)) return cfg.at(section);
  return json::object();
}

// Config file supplies defaults; explicit flags win.
template <typename T>
void merge_option(const CLI::App& app, const json& cfg, const std::string& flag,
                  T& var) {
  if (app.count("--" + flag) == 0 && cfg.contains(flag))
    var = cfg.at(flag).get<T>();
}

void write_provenance(const std::string& path, const json& prov) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  out << prov.dump(2) << "\n";
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// generate

int cmd_generate(const CLI::App& app, const json& cfg, std::string fonts_dir,
                 std::string words_file, std::string backgrounds_dir,
                 int num_fonts, int num_words, uint64_t seed, std::string out,
                 std::string split_name, int shard_size, int workers) {
  merge_option(app, cfg, "fonts", fonts_dir);
  merge_option(app, cfg, "words", words_file);
  merge_option(app, cfg, "backgrounds", backgrounds_dir);
  merge_option(app, cfg, "num-fonts", num_fonts);
  merge_option(app, cfg, "num-words", num_words);
  merge_option(app, cfg, "seed", seed);
  merge_option(app, cfg, "out", out);
  merge_option(app, cfg, "split-name", split_name);
  merge_option(app, cfg, "shard-size", shard_size);
  if (fonts_dir.empty()) throw ConfigError("--fonts is required");
  if (!fs::is_directory(fonts_dir))
    throw ConfigError("--fonts: not a directory: " + fonts_dir);
  if (words_file.empty()) throw ConfigError("--words is required");
  if (out.empty()) throw ConfigError("--out is required");
  out = resolve_out(out);
  workers = resolve_workers(workers);

  GeneratorConfig gen_cfg;
  if (cfg.contains("generator")) gen_cfg = cfg.at("generator").get<GeneratorConfig>();

  auto fonts = load_font_pool(fonts_dir, num_fonts);
  auto vocabulary = WordLexicon::load(words_file);
  auto lexicon = WordLexicon::sample(vocabulary, num_words, seed);
  BackgroundPool backgrounds =
      backgrounds_dir.empty() ? BackgroundPool::procedural()
                              : BackgroundPool::from_directory(backgrounds_dir);

  DatasetView view(fonts, lexicon, gen_cfg, std::move(backgrounds), seed);
  DatasetManifest manifest = write_dataset(view, out, split_name, shard_size,
                                           workers);

  // word list in manifest order, needed downstream
  std::ofstream words_out(fs::path(out) / "words.txt");
  for (const auto& w : lexicon.words) words_out << w << "\n";

  json prov;
  prov["command"] = "generate";
  prov["params"] = {{"fonts", fonts_dir},       {"words", words_file},
                    {"backgrounds", backgrounds_dir},
                    {"num-fonts", num_fonts},   {"num-words", num_words},
                    {"seed", seed},             {"split-name", split_name},
                    {"shard-size", shard_size}};
  json jcfg;
  to_json(jcfg, view.config());
  prov["generator"] = jcfg;
  prov["inputs"] = {{"words_digest", hex_digest(file_digest(words_file))}};
  prov["outputs"] = {{"samples", manifest.sample_count()},
                     {"manifest_digest", manifest.sample_digest}};
  write_provenance((fs::path(out) / "run_config.json").string(), prov);

  std::cout << "samples " << manifest.sample_count() << "\n";
  std::cout << "manifest digest " << manifest.sample_digest << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

// Reads generated shards back from disk; label = font id.
class DiskBatchSource : public BatchSource {
 public:
  DiskBatchSource(std::string dataset_dir, const DatasetManifest& manifest,
                  std::vector<int> word_indices, EncoderSpec spec,
                  uint64_t seed, int shard_size)
      : dir_(std::move(dataset_dir)),
        num_fonts_(static_cast<int>(manifest.num_fonts)),
        num_words_(static_cast<int>(manifest.num_words)),
        word_indices_(std::move(word_indices)),
        spec_(spec),
        seed_(seed),
        shard_size_(shard_size) {}

  cv::Mat load(int font, int word) const {
    uint64_t idx = static_cast<uint64_t>(font) * num_words_ + word;
    char name[64];
    std::snprintf(name, sizeof(name), "shard_%04llu/%06d_%06d.png",
                  static_cast<unsigned long long>(idx / shard_size_), font,
                  word);
    cv::Mat img = cv::imread((fs::path(dir_) / name).string());
    if (img.empty())
      throw DataError(std::string("missing dataset image: ") + name);
    return img;
  }

  std::pair<torch::Tensor, torch::Tensor> batch(int64_t iteration,
                                                int batch_size) override {
    std::vector<torch::Tensor> images;
    std::vector<int64_t> labels;
    for (int b = 0; b < batch_size; ++b) {
      SampleRng rng(SampleRng::derive(seed_, static_cast<uint64_t>(iteration),
                                      static_cast<uint64_t>(b)));
      int font = static_cast<int>(rng.uniform_int(0, num_fonts_ - 1));
      int word = word_indices_[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int64_t>(word_indices_.size()) - 1))];
      images.push_back(
          preprocess(load(font, word), spec_.input_height, spec_.input_width));
      labels.push_back(font);
    }
    return {torch::stack(images), torch::tensor(labels, torch::kInt64)};
  }

  int num_classes() const override { return num_fonts_; }
  int num_words() const { return num_words_; }

 private:
  std::string dir_;
  int num_fonts_, num_words_;
  std::vector<int> word_indices_;
  EncoderSpec spec_;
  uint64_t seed_;
  int shard_size_;
};

int cmd_train(const CLI::App& app, const json& cfg, std::string dataset,
              std::string out, std::string log_path, std::string state_path,
              double lr, int batch_size, int patience, int iters_per_epoch,
              int64_t max_iterations, double val_fraction, uint64_t seed,
              int input_height, int input_width, int val_per_font,
              bool fresh) {
  merge_option(app, cfg, "dataset", dataset);
  merge_option(app, cfg, "out", out);
  merge_option(app, cfg, "log", log_path);
  merge_option(app, cfg, "state", state_path);
  merge_option(app, cfg, "lr", lr);
  merge_option(app, cfg, "batch-size", batch_size);
  merge_option(app, cfg, "patience", patience);
  merge_option(app, cfg, "iters-per-epoch", iters_per_epoch);
  merge_option(app, cfg, "max-iterations", max_iterations);
  merge_option(app, cfg, "val-fraction", val_fraction);
  merge_option(app, cfg, "seed", seed);
  merge_option(app, cfg, "input-height", input_height);
  merge_option(app, cfg, "input-width", input_width);
  merge_option(app, cfg, "val-per-font", val_per_font);
  if (dataset.empty()) throw ConfigError("--dataset is required");
  if (out.empty()) throw ConfigError("--out is required");
  if (lr <= 0.0) throw ConfigError("--lr must be > 0");
  out = resolve_out(out);

  DatasetManifest manifest =
      DatasetManifest::load((fs::path(dataset) / "manifest.json").string());
  int shard_size = manifest.shard_counts.empty()
                       ? 1000
                       : static_cast<int>(manifest.shard_counts.front().second);

  EncoderSpec spec;
  spec.input_height = input_height;
  spec.input_width = input_width;
  spec.num_classes = static_cast<int>(manifest.num_fonts);
  if (spec.num_classes < 2)
    throw ConfigError("training needs at least 2 fonts");

  auto [train_words, val_words] =
      split_words(static_cast<int>(manifest.num_words), val_fraction, seed);
  DiskBatchSource source(dataset, manifest, train_words, spec, seed,
                         shard_size);

  // validation on held-out words: unseen content, seen fonts
  std::vector<torch::Tensor> val_images;
  std::vector<int64_t> val_labels;
  int per_font = std::min<int>(val_per_font, static_cast<int>(val_words.size()));
  for (int f = 0; f < spec.num_classes; ++f)
    for (int i = 0; i < per_font; ++i) {
      val_images.push_back(preprocess(
          source.load(f, val_words[static_cast<size_t>(i)]),
          spec.input_height, spec.input_width));
      val_labels.push_back(f);
    }
  EvalSet val{torch::stack(val_images), torch::tensor(val_labels, torch::kInt64)};

  TrainHyperparams hp;
  hp.initial_lr = lr;
  hp.batch_size = batch_size;
  hp.patience = patience;
  hp.iters_per_pseudo_epoch = iters_per_epoch;
  hp.max_iterations = max_iterations;
  hp.seed = seed;

  TrainOptions options;
  options.progress_log_path = log_path.empty() ? out + ".log" : log_path;
  options.state_path = state_path;
  if (fresh && !state_path.empty() && fs::exists(state_path))
    fs::remove(state_path);

  StyleEncoder model = build_encoder(spec.num_classes, spec, seed);
  TrainProvenance prov = train(model, source, val, hp, options);
  prov.dataset_digest = manifest.sample_digest;
  save_checkpoint(out, model, prov);

  json run;
  run["command"] = "train";
  run["params"] = {{"dataset", dataset},     {"lr", lr},
                   {"batch-size", batch_size}, {"patience", patience},
                   {"iters-per-epoch", iters_per_epoch},
                   {"max-iterations", max_iterations},
                   {"val-fraction", val_fraction},
                   {"seed", seed},
                   {"input-height", input_height},
                   {"input-width", input_width}};
  run["inputs"] = {{"dataset_digest", manifest.sample_digest}};
  run["outputs"] = {{"iterations", prov.iterations},
                    {"best_val_accuracy", prov.best_val_accuracy}};
  write_provenance(out + ".run.json", run);

  std::cout << "iterations " << prov.iterations << "\n";
  std::cout << "best_val_accuracy " << prov.best_val_accuracy << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// finetune

std::vector<std::string> sorted_writers(const std::vector<CorpusEntry>& entries) {
  std::set<std::string> w;
  for (const auto& e : entries) w.insert(e.writer_id);
  return {w.begin(), w.end()};
}

int cmd_finetune(const CLI::App& app, const json& cfg, std::string checkpoint,
                 std::string manifest_path, std::string split, std::string out,
                 double lr, int batch_size, int patience, int iters_per_epoch,
                 int64_t max_iterations, uint64_t seed) {
  merge_option(app, cfg, "checkpoint", checkpoint);
  merge_option(app, cfg, "manifest", manifest_path);
  merge_option(app, cfg, "split", split);
  merge_option(app, cfg, "out", out);
  merge_option(app, cfg, "lr", lr);
  merge_option(app, cfg, "batch-size", batch_size);
  merge_option(app, cfg, "patience", patience);
  merge_option(app, cfg, "iters-per-epoch", iters_per_epoch);
  merge_option(app, cfg, "max-iterations", max_iterations);
  merge_option(app, cfg, "seed", seed);
  if (checkpoint.empty() || manifest_path.empty() || out.empty())
    throw ConfigError("--checkpoint, --manifest and --out are required");
  if (lr <= 0.0) throw ConfigError("--lr must be > 0");
  out = resolve_out(out);

  StyleEncoder model = load_checkpoint(checkpoint);
  CorpusManifest manifest = CorpusManifest::load(manifest_path);
  manifest.validate();
  auto entries = manifest.filter_split(split);
  if (entries.empty()) throw DataError("no manifest entries for split: " + split);
  auto writers = sorted_writers(entries);
  if (writers.size() < 2) throw DataError("fine-tuning needs at least 2 writers");

  std::vector<torch::Tensor> images;
  std::vector<int64_t> labels;
  for (const auto& e : entries) {
    cv::Mat img = cv::imread(e.image_path);
    if (img.empty()) throw DataError("cannot read image: " + e.image_path);
    images.push_back(preprocess(img, model->spec.input_height,
                                model->spec.input_width));
    labels.push_back(static_cast<int64_t>(
        std::lower_bound(writers.begin(), writers.end(), e.writer_id) -
        writers.begin()));
  }
  torch::Tensor all_images = torch::stack(images);
  torch::Tensor all_labels = torch::tensor(labels, torch::kInt64);
  TensorBatchSource source(all_images, all_labels, seed);
  EvalSet val{all_images, all_labels};  // small real corpora: validate in-sample

  TrainHyperparams hp;
  hp.batch_size = batch_size;
  hp.patience = patience;
  hp.iters_per_pseudo_epoch = iters_per_epoch;
  hp.max_iterations = max_iterations;
  hp.seed = seed;

  TrainProvenance prov = fine_tune(model, source, val,
                                   static_cast<int>(writers.size()), lr, hp);
  prov.dataset_digest = hex_digest(file_digest(manifest_path));
  save_checkpoint(out, model, prov);
  std::cout << "writers " << writers.size() << "\n";
  std::cout << "iterations " << prov.iterations << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// embed

int cmd_embed(const CLI::App& app, const json& cfg, std::string checkpoint,
              std::string manifest_path, std::string split, std::string out) {
  merge_option(app, cfg, "checkpoint", checkpoint);
  merge_option(app, cfg, "manifest", manifest_path);
  merge_option(app, cfg, "split", split);
  merge_option(app, cfg, "out", out);
  if (checkpoint.empty() || manifest_path.empty() || out.empty())
    throw ConfigError("--checkpoint, --manifest and --out are required");
  out = resolve_out(out);

  StyleEncoder model = load_checkpoint(checkpoint);
  CorpusManifest manifest = CorpusManifest::load(manifest_path);
  manifest.validate();
  auto entries = manifest.filter_split(split);
  if (entries.empty())
    throw DataError("no manifest entries for split: " + split);

  std::vector<cv::Mat> images;
  images.reserve(entries.size());
  for (const auto& e : entries) {
    cv::Mat img = cv::imread(e.image_path);
    if (img.empty()) throw DataError("cannot read image: " + e.image_path);
    images.push_back(img);
  }
  auto vectors = encode(model, images);

  std::vector<EmbeddingRecord> records;
  records.reserve(entries.size());
  for (size_t i = 0; i < entries.size(); ++i)
    records.push_back({entries[i].image_path, entries[i].writer_id,
                       entries[i].document_id, vectors[i]});
  EmbeddingStore store(std::move(records));
  store.save(out);
  std::cout << "records " << store.records().size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOutputs {
  EvalReport report;
  json results = json::object();
};

void eval_identification(const EmbeddingStore& queries,
                         const EmbeddingStore& templates_store,
                         const std::string& out_dir, EvalOutputs& outputs) {
  const auto& templates = templates_store.templates();
  std::ofstream rankings(fs::path(out_dir) / "identification_rankings.tsv");
  std::vector<ScoredTrial> trials;
  for (const auto& r : queries.records()) {
    RankedList ranked = identify(r.sample_id, r.vector, templates);
    ScoredTrial trial;
    trial.query_id = r.sample_id;
    trial.true_label = r.writer_id;
    rankings << r.sample_id;
    for (size_t i = 0; i < ranked.entries.size(); ++i) {
      trial.ranked_labels.push_back(ranked.entries[i].candidate_id);
      if (i < 10)
        rankings << '\t' << ranked.entries[i].candidate_id << ':'
                 << ranked.entries[i].score;
    }
    rankings << '\n';
    trials.push_back(std::move(trial));
  }
  double top1 = 100.0 * topn_accuracy(trials, 1);
  double top5 = 100.0 * topn_accuracy(trials, 5);
  outputs.report.tables.push_back(
      {"identification", {"Top-1", "Top-5"}, {{"test", {top1, top5}}}});
  outputs.results["identification"] = {{"Top-1", top1}, {"Top-5", top5}};
}

std::vector<DocumentVector> filtered_documents(const EmbeddingStore& store,
                                               int min_pages) {
  auto docs = build_document_vectors(store.records());
  std::map<std::string, int> pages;
  for (const auto& d : docs) ++pages[d.writer_id];
  std::vector<DocumentVector> out;
  for (auto& d : docs)
    if (pages[d.writer_id] >= min_pages) out.push_back(std::move(d));
  return out;
}

void eval_retrieval(const EmbeddingStore& store, int min_pages,
                    const std::string& out_dir, EvalOutputs& outputs) {
  auto docs = filtered_documents(store, min_pages);
  if (docs.size() < 2) throw DataError("retrieval needs at least 2 documents");
  std::ofstream rankings(fs::path(out_dir) / "retrieval_rankings.tsv");
  std::map<std::string, std::string> doc_writer;
  for (const auto& d : docs) doc_writer[d.document_id] = d.writer_id;
  std::vector<ScoredTrial> trials;
  for (size_t q = 0; q < docs.size(); ++q) {
    std::vector<DocumentVector> database;
    for (size_t j = 0; j < docs.size(); ++j)
      if (j != q) database.push_back(docs[j]);
    RankedList ranked = retrieve(docs[q], database);
    ScoredTrial trial;
    trial.query_id = docs[q].document_id;
    trial.true_label = docs[q].writer_id;
    rankings << docs[q].document_id;
    for (size_t i = 0; i < ranked.entries.size(); ++i) {
      trial.ranked_labels.push_back(doc_writer[ranked.entries[i].candidate_id]);
      if (i < 10)
        rankings << '\t' << ranked.entries[i].candidate_id << ':'
                 << ranked.entries[i].score;
    }
    rankings << '\n';
    trials.push_back(std::move(trial));
  }
  double top1 = 100.0 * topn_accuracy(trials, 1);
  double s5 = 100.0 * soft_topn(trials, 5);
  double s10 = 100.0 * soft_topn(trials, 10);
  double h2 = 100.0 * hard_topn(trials, 2);
  double h3 = 100.0 * hard_topn(trials, 3);
  double h4 = 100.0 * hard_topn(trials, 4);
  outputs.report.tables.push_back(
      {"retrieval",
       {"Top-1", "STop-5", "STop-10", "HTop-2", "HTop-3", "HTop-4"},
       {{"test", {top1, s5, s10, h2, h3, h4}}}});
  outputs.results["retrieval"] = {{"Top-1", top1},  {"STop-5", s5},
                                  {"STop-10", s10}, {"HTop-2", h2},
                                  {"HTop-3", h3},   {"HTop-4", h4}};
}

void eval_verification(const EmbeddingStore& store, int min_pages,
                       const std::string& out_dir, EvalOutputs& outputs) {
  auto docs = filtered_documents(store, min_pages);
  if (docs.size() < 2)
    throw DataError("verification needs at least 2 documents");
  std::ofstream scores_file(fs::path(out_dir) / "verification_scores.tsv");
  std::vector<double> genuine, impostor;
  for (size_t i = 0; i < docs.size(); ++i)
    for (size_t j = i + 1; j < docs.size(); ++j) {
      double score = cosine_similarity(docs[i].mean_vector, docs[j].mean_vector);
      bool same = docs[i].writer_id == docs[j].writer_id;
      (same ? genuine : impostor).push_back(score);
      scores_file << docs[i].document_id << '\t' << docs[j].document_id << '\t'
                  << score << '\t' << (same ? "genuine" : "impostor") << '\n';
    }
  if (genuine.empty() || impostor.empty())
    throw DataError("verification needs both same-writer and different-writer pairs");
  auto [rate, threshold] = eer(genuine, impostor);
  outputs.report.tables.push_back(
      {"verification", {"EER"}, {{"document-level", {100.0 * rate}}}});
  outputs.results["verification"] = {{"EER", 100.0 * rate},
                                     {"threshold", threshold}};
}

void eval_signature_verification(const EmbeddingStore& store,
                                 const CorpusManifest& manifest, int num_refs,
                                 const std::string& out_dir,
                                 EvalOutputs& outputs) {
  std::map<std::string, SampleKind> kind_by_path;
  for (const auto& e : manifest.entries) kind_by_path[e.image_path] = e.kind;
  std::map<std::string, std::vector<const EmbeddingRecord*>> genuine_by_writer,
      forged_by_writer;
  for (const auto& r : store.records()) {
    auto it = kind_by_path.find(r.sample_id);
    if (it == kind_by_path.end()) continue;
    if (it->second == SampleKind::SignatureGenuine)
      genuine_by_writer[r.writer_id].push_back(&r);
    else if (it->second == SampleKind::SignatureForged)
      forged_by_writer[r.writer_id].push_back(&r);
  }
  std::vector<double> genuine_scores, impostor_scores;
  std::ofstream scores_file(fs::path(out_dir) / "signature_scores.tsv");
  for (auto& [writer, records] : genuine_by_writer) {
    if (static_cast<int>(records.size()) <= num_refs) continue;
    std::sort(records.begin(), records.end(),
              [](auto* a, auto* b) { return a->sample_id < b->sample_id; });
    std::vector<StyleVector> refs;
    for (int i = 0; i < num_refs; ++i) refs.push_back(records[static_cast<size_t>(i)]->vector);
    auto score_one = [&](const EmbeddingRecord* r, bool is_genuine) {
      VerificationDecision d = verify_signature(r->vector, refs, 0.0);
      (is_genuine ? genuine_scores : impostor_scores).push_back(d.score);
      scores_file << writer << '\t' << r->sample_id << '\t' << d.score << '\t'
                  << (is_genuine ? "genuine" : "forged") << '\n';
    };
    for (size_t i = static_cast<size_t>(num_refs); i < records.size(); ++i)
      score_one(records[i], true);
    for (const auto* r : forged_by_writer[writer]) score_one(r, false);
  }
  if (genuine_scores.empty() || impostor_scores.empty())
    throw DataError("signature verification needs genuine and forged queries");
  auto [rate, threshold] = eer(genuine_scores, impostor_scores);
  outputs.report.tables.push_back(
      {"signature-verification", {"EER"}, {{"word-level", {100.0 * rate}}}});
  outputs.results["signature-verification"] = {{"EER", 100.0 * rate},
                                               {"threshold", threshold}};
}

void eval_classification(const EmbeddingStore& store, int k_known,
                         int k_min, int k_max, bool minimize_silhouette,
                         const std::string& level, const std::string& out_dir,
                         EvalOutputs& outputs) {
  std::vector<StyleVector> vectors;
  std::vector<std::string> ids;
  if (level == "document") {
    for (const auto& d : build_document_vectors(store.records())) {
      vectors.push_back(d.mean_vector);
      ids.push_back(d.document_id);
    }
  } else {
    for (const auto& r : store.records()) {
      vectors.push_back(r.vector);
      ids.push_back(r.sample_id);
    }
  }
  const int n = static_cast<int>(vectors.size());
  if (n < 3) throw DataError("classification needs at least 3 samples");
  if (k_max <= 0) k_max = std::min(50, n - 1);
  k_max = std::min(k_max, n);
  ClusteringOptions opts;
  opts.minimize_silhouette = minimize_silhouette;

  KEstimate est = estimate_k(vectors, k_min, k_max, opts);
  std::ofstream table_file(fs::path(out_dir) / "classification_silhouette.tsv");
  for (auto [k, s] : est.silhouette_table)
    table_file << k << '\t' << s << '\n';

  MetricTable table{"classification", {}, {}};
  json res;
  res["K-prime"] = est.k_prime;
  if (k_known > 0) {
    ClusteringResult at_known = classify_writers(vectors, k_known, opts);
    std::ofstream assign_file(fs::path(out_dir) / "classification_assignments.tsv");
    for (size_t i = 0; i < ids.size(); ++i)
      assign_file << ids[i] << '\t' << at_known.assignments[i] << '\n';
    table.columns = {"K*-Sil.", "dK"};
    table.rows.push_back(
        {"test",
         {at_known.silhouette,
          static_cast<double>(delta_k(k_known, est.k_prime))}});
    res["K*-Sil."] = at_known.silhouette;
    res["dK"] = delta_k(k_known, est.k_prime);
  } else {
    ClusteringResult at_prime = classify_writers(vectors, est.k_prime, opts);
    std::ofstream assign_file(fs::path(out_dir) / "classification_assignments.tsv");
    for (size_t i = 0; i < ids.size(); ++i)
      assign_file << ids[i] << '\t' << at_prime.assignments[i] << '\n';
    table.columns = {"K-prime", "Sil."};
    table.rows.push_back(
        {"test", {static_cast<double>(est.k_prime), at_prime.silhouette}});
    res["Sil."] = at_prime.silhouette;
  }
  outputs.report.tables.push_back(std::move(table));
  outputs.results["classification"] = res;
}

int cmd_eval(const CLI::App& app, const json& cfg, std::string store_path,
             std::string templates_path, std::string manifest_path,
             std::string tasks_csv, std::string out_dir, int min_pages,
             int k_known, std::string k_range, bool minimize_silhouette,
             std::string level, int num_refs) {
  merge_option(app, cfg, "store", store_path);
  merge_option(app, cfg, "templates-store", templates_path);
  merge_option(app, cfg, "manifest", manifest_path);
  merge_option(app, cfg, "tasks", tasks_csv);
  merge_option(app, cfg, "out-dir", out_dir);
  merge_option(app, cfg, "min-pages", min_pages);
  merge_option(app, cfg, "k-known", k_known);
  merge_option(app, cfg, "k-range", k_range);
  merge_option(app, cfg, "level", level);
  merge_option(app, cfg, "num-refs", num_refs);
  if (store_path.empty()) throw ConfigError("--store is required");
  if (out_dir.empty()) throw ConfigError("--out-dir is required");
  out_dir = resolve_out(out_dir);
  fs::create_directories(out_dir);

  EmbeddingStore store = EmbeddingStore::load(store_path);
  EvalOutputs outputs;

  int k_min = 2, k_max = 0;
  if (!k_range.empty()) {
    auto colon = k_range.find(':');
    if (colon == std::string::npos)
      throw ConfigError("--k-range must be lo:hi");
    k_min = std::stoi(k_range.substr(0, colon));
    k_max = std::stoi(k_range.substr(colon + 1));
  }

  for (const std::string& task : split_csv(tasks_csv)) {
    if (task == "identification") {
      if (templates_path.empty())
        throw ConfigError("identification needs --templates-store");
      EmbeddingStore templates_store = EmbeddingStore::load(templates_path);
      eval_identification(store, templates_store, out_dir, outputs);
    } else if (task == "retrieval") {
      eval_retrieval(store, min_pages, out_dir, outputs);
    } else if (task == "verification") {
      eval_verification(store, min_pages, out_dir, outputs);
    } else if (task == "signature-verification") {
      if (manifest_path.empty())
        throw ConfigError("signature-verification needs --manifest for kinds");
      CorpusManifest manifest = CorpusManifest::load(manifest_path);
      eval_signature_verification(store, manifest, num_refs, out_dir, outputs);
    } else if (task == "classification") {
      eval_classification(store, k_known, k_min, k_max, minimize_silhouette,
                          level, out_dir, outputs);
    } else {
      throw ConfigError("unknown task: " + task);
    }
  }

  json prov;
  prov["command"] = "eval";
  prov["params"] = {{"tasks", tasks_csv},   {"min-pages", min_pages},
                    {"k-known", k_known},   {"k-range", k_range},
                    {"level", level},       {"num-refs", num_refs}};
  prov["inputs"] = {{"store_digest", hex_digest(file_digest(store_path))}};
  outputs.report.provenance = prov.dump();

  std::ofstream report_txt(fs::path(out_dir) / "report.txt");
  report_txt << outputs.report.to_text();
  std::ofstream report_json(fs::path(out_dir) / "report.json");
  json combined;
  combined["provenance"] = prov;
  combined["results"] = outputs.results;
  report_json << combined.dump(2) << "\n";
  std::cout << outputs.report.to_text();
  return 0;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(std::vector<std::string> inputs, std::string out) {
  EvalReport merged;
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report: " + path);
    json j = json::parse(in);
    for (auto& [task, row] : j.at("results").items()) {
      MetricTable table{task, {}, {}};
      std::vector<double> values;
      for (auto& [metric, value] : row.items()) {
        if (metric == "threshold") continue;
        table.columns.push_back(metric);
        values.push_back(value.get<double>());
      }
      table.rows.push_back({fs::path(path).parent_path().filename().string(),
                            std::move(values)});
      merged.tables.push_back(std::move(table));
    }
  }
  std::string text = merged.to_text();
  if (!out.empty()) {
    std::ofstream f(resolve_out(out));
    f << text;
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scriptorium: synthetic handwriting-style toolkit"};
  app.require_subcommand(1);
  torch::set_num_threads(resolve_workers(0));

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file with per-subcommand defaults")
      ->expected(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Generate a synthetic dataset");
  std::string g_fonts, g_words, g_backgrounds, g_out, g_split = "train";
  int g_num_fonts = 100, g_num_words = 200, g_shard = 1000, g_workers = 0;
  uint64_t g_seed = 0;
  gen->add_option("--fonts", g_fonts, "Directory of scalable font files");
  gen->add_option("--words", g_words, "Vocabulary file, one word per line");
  gen->add_option("--backgrounds", g_backgrounds,
                  "Directory of background textures (default: procedural)");
  gen->add_option("--num-fonts", g_num_fonts, "S: number of fonts");
  gen->add_option("--num-words", g_num_words, "W: number of words");
  gen->add_option("--seed", g_seed, "Root seed");
  gen->add_option("--out", g_out, "Output dataset directory");
  gen->add_option("--split-name", g_split, "Split label in the manifest");
  gen->add_option("--shard-size", g_shard, "Samples per shard directory");
  gen->add_option("--workers", g_workers, "Worker threads (0: auto)");

  // train
  auto* tr = app.add_subcommand("train", "Pre-train the font classifier");
  std::string t_dataset, t_out, t_log, t_state;
  double t_lr = 2e-5, t_val_fraction = 0.05;
  int t_batch = 32, t_patience = 30, t_ipe = 1000, t_h = 64, t_w = 256,
      t_val_per_font = 3;
  int64_t t_max_iter = 0;
  uint64_t t_seed = 0;
  bool t_fresh = false;
  tr->add_option("--dataset", t_dataset, "Generated dataset directory");
  tr->add_option("--out", t_out, "Checkpoint output path");
  tr->add_option("--log", t_log, "Progress log path");
  tr->add_option("--state", t_state, "Training state path (enables resume)");
  tr->add_option("--lr", t_lr, "Initial learning rate");
  tr->add_option("--batch-size", t_batch, "Batch size");
  tr->add_option("--patience", t_patience, "Early-stopping patience");
  tr->add_option("--iters-per-epoch", t_ipe, "Iterations per pseudo-epoch");
  tr->add_option("--max-iterations", t_max_iter, "Iteration cap (0: none)");
  tr->add_option("--val-fraction", t_val_fraction, "Held-out word fraction");
  tr->add_option("--seed", t_seed, "Seed");
  tr->add_option("--input-height", t_h, "Model input height");
  tr->add_option("--input-width", t_w, "Model input width");
  tr->add_option("--val-per-font", t_val_per_font,
                 "Validation images per font");
  tr->add_flag("--fresh", t_fresh, "Ignore an existing training state");

  // finetune
  auto* ft = app.add_subcommand("finetune", "Fine-tune on a writer corpus");
  std::string f_ckpt, f_manifest, f_split, f_out;
  double f_lr = 2e-5;
  int f_batch = 32, f_patience = 30, f_ipe = 1000;
  int64_t f_max_iter = 0;
  uint64_t f_seed = 0;
  ft->add_option("--checkpoint", f_ckpt, "Pre-trained checkpoint");
  ft->add_option("--manifest", f_manifest, "Corpus manifest");
  ft->add_option("--split", f_split, "Manifest split tag (empty: all)");
  ft->add_option("--out", f_out, "Fine-tuned checkpoint output");
  ft->add_option("--lr", f_lr, "Learning rate");
  ft->add_option("--batch-size", f_batch, "Batch size");
  ft->add_option("--patience", f_patience, "Early-stopping patience");
  ft->add_option("--iters-per-epoch", f_ipe, "Iterations per pseudo-epoch");
  ft->add_option("--max-iterations", f_max_iter, "Iteration cap (0: none)");
  ft->add_option("--seed", f_seed, "Seed");

  // embed
  auto* em = app.add_subcommand("embed", "Extract style vectors");
  std::string e_ckpt, e_manifest, e_split, e_out;
  em->add_option("--checkpoint", e_ckpt, "Encoder checkpoint");
  em->add_option("--manifest", e_manifest, "Corpus manifest");
  em->add_option("--split", e_split, "Manifest split tag (empty: all)");
  em->add_option("--out", e_out, "Embedding store output path");

  // eval
  auto* ev = app.add_subcommand("eval", "Run writer-centric evaluations");
  std::string v_store, v_templates, v_manifest, v_tasks = "retrieval",
              v_out_dir, v_k_range, v_level = "document";
  int v_min_pages = 2, v_k_known = 0, v_num_refs = 5;
  bool v_minimize = false;
  ev->add_option("--store", v_store, "Embedding store (queries)");
  ev->add_option("--templates-store", v_templates,
                 "Store providing writer templates (identification)");
  ev->add_option("--manifest", v_manifest,
                 "Corpus manifest (signature verification kinds)");
  ev->add_option("--tasks", v_tasks,
                 "Comma list: identification,retrieval,verification,"
                 "signature-verification,classification");
  ev->add_option("--out-dir", v_out_dir, "Directory for result files");
  ev->add_option("--min-pages", v_min_pages,
                 "Writers need at least this many documents");
  ev->add_option("--k-known", v_k_known, "True writer count K* (0: unknown)");
  ev->add_option("--k-range", v_k_range, "Cluster grid search range lo:hi");
  ev->add_flag("--minimize-silhouette", v_minimize,
               "Grid-search selects the minimal silhouette");
  ev->add_option("--level", v_level, "classification level: word|document");
  ev->add_option("--num-refs", v_num_refs,
                 "Genuine reference signatures per template");

  // report
  auto* rp = app.add_subcommand("report", "Merge evaluation result files");
  std::vector<std::string> r_inputs;
  std::string r_out;
  rp->add_option("inputs", r_inputs, "report.json files")->required();
  rp->add_option("--out", r_out, "Merged report output path");

  // let global options like --config appear after the subcommand name
  for (auto* sub : {gen, tr, ft, em, ev, rp}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed())
      return cmd_generate(*gen, load_config_section(config_path, "generate"),
                          g_fonts, g_words, g_backgrounds, g_num_fonts,
                          g_num_words, g_seed, g_out, g_split, g_shard,
                          g_workers);
    if (tr->parsed())
      return cmd_train(*tr, load_config_section(config_path, "train"),
                       t_dataset, t_out, t_log, t_state, t_lr, t_batch,
                       t_patience, t_ipe, t_max_iter, t_val_fraction, t_seed,
                       t_h, t_w, t_val_per_font, t_fresh);
    if (ft->parsed())
      return cmd_finetune(*ft, load_config_section(config_path, "finetune"),
                          f_ckpt, f_manifest, f_split, f_out, f_lr, f_batch,
                          f_patience, f_ipe, f_max_iter, f_seed);
    if (em->parsed())
      return cmd_embed(*em, load_config_section(config_path, "embed"), e_ckpt,
                       e_manifest, e_split, e_out);
    if (ev->parsed())
      return cmd_eval(*ev, load_config_section(config_path, "eval"), v_store,
                      v_templates, v_manifest, v_tasks, v_out_dir, v_min_pages,
                      v_k_known, v_k_range, v_minimize, v_level, v_num_refs);
    if (rp->parsed()) return cmd_report(r_inputs, r_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
