#include "scriptorium/encoder.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <opencv2/imgproc.hpp>

#include "scriptorium/errors.hpp"
#include "scriptorium/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace scriptorium {

// ---------------------------------------------------------------------------
// Model

ResidualBlockImpl::ResidualBlockImpl(int in_channels, int out_channels,
                                     int stride) {
  conv1 = register_module(
      "conv1", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels,
                                                          out_channels, 3)
                                     .stride(stride)
                                     .padding(1)
                                     .bias(false)));
  bn1 = register_module("bn1", torch::nn::BatchNorm2d(out_channels));
  conv2 = register_module(
      "conv2",
      torch::nn::Conv2d(
          torch::nn::Conv2dOptions(out_channels, out_channels, 3).padding(1).bias(
              false)));
  bn2 = register_module("bn2", torch::nn::BatchNorm2d(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    downsample = register_module(
        "downsample",
        torch::nn::Sequential(
            torch::nn::Conv2d(
                torch::nn::Conv2dOptions(in_channels, out_channels, 1)
                    .stride(stride)
                    .bias(false)),
            torch::nn::BatchNorm2d(out_channels)));
  }
}

torch::Tensor ResidualBlockImpl::forward(torch::Tensor x) {
  torch::Tensor identity = downsample ? downsample->forward(x) : x;
  x = torch::relu(bn1(conv1(x)));
  x = bn2(conv2(x));
  return torch::relu(x + identity);
}

StyleEncoderImpl::StyleEncoderImpl(EncoderSpec s) : spec(s) {
  backbone = torch::nn::Sequential(
      torch::nn::Conv2d(
          torch::nn::Conv2dOptions(3, 64, 7).stride(2).padding(3).bias(false)),
      torch::nn::BatchNorm2d(64), torch::nn::ReLU(),
      torch::nn::MaxPool2d(torch::nn::MaxPool2dOptions(3).stride(2).padding(1)));
  int in = 64;
  for (int stage = 0; stage < 4; ++stage) {
    int out = 64 << stage;
    backbone->push_back(ResidualBlock(in, out, stage == 0 ? 1 : 2));
    backbone->push_back(ResidualBlock(out, out, 1));
    in = out;
  }
  backbone->push_back(torch::nn::AdaptiveAvgPool2d(
      torch::nn::AdaptiveAvgPool2dOptions({1, 1})));
  backbone->push_back(torch::nn::Flatten());
  register_module("backbone", backbone);
  head = register_module("head",
                         torch::nn::Linear(spec.feature_dim, spec.num_classes));
}

torch::Tensor StyleEncoderImpl::features(torch::Tensor x) {
  return backbone->forward(x);
}

torch::Tensor StyleEncoderImpl::forward(torch::Tensor x) {
  return head(features(x));
}

void StyleEncoderImpl::replace_head(int num_classes) {
  if (num_classes < 2)
    throw DataError("classifier head needs at least 2 classes");
  spec.num_classes = num_classes;
  head = replace_module("head",
                        torch::nn::Linear(spec.feature_dim, num_classes));
}

StyleEncoder build_encoder(int num_classes, EncoderSpec spec, uint64_t seed) {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  spec.num_classes = num_classes;
  torch::manual_seed(seed);
  StyleEncoder model(spec);
  for (const auto& m : model->modules(/*include_self=*/false)) {
    if (auto* conv = m->as<torch::nn::Conv2d>()) {
      torch::nn::init::kaiming_normal_(conv->weight, 0.0,
                                       torch::kFanOut, torch::kReLU);
    }
  }
  return model;
}

// ---------------------------------------------------------------------------
// Schedule

double default_lr_decay() { return std::pow(10.0, -1.0 / 90000.0); }

namespace {

double effective_decay(const TrainHyperparams& hp) {
  double d = hp.lr_decay > 0.0 ? hp.lr_decay : default_lr_decay();
  if (d >= 1.0) throw ConfigError("lr decay factor must be < 1");
  return d;
}

}  // namespace

double learning_rate_at(const TrainHyperparams& hp, int64_t iteration) {
  return hp.initial_lr *
         std::pow(effective_decay(hp), static_cast<double>(iteration));
}

// ---------------------------------------------------------------------------
// Training

namespace {

void validate_hp(const TrainHyperparams& hp) {
  if (hp.initial_lr <= 0.0) throw ConfigError("initial_lr must be > 0");
  if (hp.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hp.patience < 1) throw ConfigError("patience must be >= 1");
  if (hp.iters_per_pseudo_epoch < 1)
    throw ConfigError("iters_per_pseudo_epoch must be >= 1");
  effective_decay(hp);
}

std::vector<torch::Tensor> snapshot_weights(StyleEncoder& model) {
  std::vector<torch::Tensor> out;
  for (const auto& p : model->parameters()) out.push_back(p.detach().clone());
  for (const auto& b : model->buffers()) out.push_back(b.detach().clone());
  return out;
}

void restore_weights(StyleEncoder& model,
                     const std::vector<torch::Tensor>& snapshot) {
  torch::NoGradGuard guard;
  size_t i = 0;
  for (auto& p : model->parameters()) p.copy_(snapshot.at(i++));
  for (auto& b : model->buffers()) b.copy_(snapshot.at(i++));
}

struct ResumeState {
  int64_t iteration = 0;
  int64_t best_epoch = -1;
  double best_val = -1.0;
  std::vector<torch::Tensor> best_weights;
};

void save_train_state(const std::string& path, StyleEncoder& model,
                      torch::optim::Adam& opt, const ResumeState& state) {
  torch::serialize::OutputArchive archive;
  torch::serialize::OutputArchive model_archive;
  model->save(model_archive);
  archive.write("model", model_archive);
  torch::serialize::OutputArchive opt_archive;
  opt.save(opt_archive);
  archive.write("optimizer", opt_archive);
  archive.write("iteration", torch::tensor(state.iteration));
  archive.write("best_epoch", torch::tensor(state.best_epoch));
  archive.write("best_val", torch::tensor(state.best_val, torch::kFloat64));
  archive.write("n_best",
                torch::tensor(static_cast<int64_t>(state.best_weights.size())));
  for (size_t i = 0; i < state.best_weights.size(); ++i)
    archive.write("best_" + std::to_string(i), state.best_weights[i]);
  archive.save_to(path + ".tmp");
  fs::rename(path + ".tmp", path);
}

ResumeState load_train_state(const std::string& path, StyleEncoder& model,
                             torch::optim::Adam& opt) {
  torch::serialize::InputArchive archive;
  archive.load_from(path);
  torch::serialize::InputArchive model_archive;
  archive.read("model", model_archive);
  model->load(model_archive);
  torch::serialize::InputArchive opt_archive;
  archive.read("optimizer", opt_archive);
  opt.load(opt_archive);
  ResumeState state;
  torch::Tensor iteration, best_epoch, best_val, n_best;
  archive.read("iteration", iteration);
  state.iteration = iteration.item<int64_t>();
  archive.read("best_epoch", best_epoch);
  state.best_epoch = best_epoch.item<int64_t>();
  archive.read("best_val", best_val);
  state.best_val = best_val.item<double>();
  archive.read("n_best", n_best);
  int64_t n = n_best.item<int64_t>();
  for (int64_t i = 0; i < n; ++i) {
    torch::Tensor w;
    archive.read("best_" + std::to_string(i), w);
    state.best_weights.push_back(w);
  }
  return state;
}

}  // namespace

TrainProvenance train(StyleEncoder& model, BatchSource& data,
                      const EvalSet& validation, const TrainHyperparams& hp,
                      const TrainOptions& options) {
  validate_hp(hp);
  torch::manual_seed(hp.seed);
  torch::optim::Adam opt(model->parameters(),
                         torch::optim::AdamOptions(hp.initial_lr));

  ResumeState state;
  if (!options.state_path.empty() && fs::exists(options.state_path))
    state = load_train_state(options.state_path, model, opt);

  std::ofstream log;
  if (!options.progress_log_path.empty()) {
    log.open(options.progress_log_path, std::ios::app);
    if (!log)
      throw ConfigError("cannot open progress log: " +
                        options.progress_log_path);
  }

  const int64_t pe = hp.iters_per_pseudo_epoch;
  const int num_classes = model->spec.num_classes;
  int64_t iter = state.iteration;

  while (!(hp.max_iterations > 0 && iter >= hp.max_iterations)) {
    double lr = learning_rate_at(hp, iter);
    for (auto& group : opt.param_groups())
      static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);

    auto [x, y] = data.batch(iter, hp.batch_size);
    if (y.numel() > 0) {
      int64_t lo = y.min().item<int64_t>();
      int64_t hi = y.max().item<int64_t>();
      if (lo < 0 || hi >= num_classes)
        throw DataError("training label out of range [0, " +
                        std::to_string(num_classes) + ")");
    }
    model->train();
    opt.zero_grad();
    torch::Tensor loss =
        torch::nn::functional::cross_entropy(model->forward(x), y);
    double loss_value = loss.item<double>();
    if (!std::isfinite(loss_value))
      throw DataError("non-finite loss at iteration " + std::to_string(iter) +
                      " (lr " + std::to_string(lr) + ")");
    loss.backward();
    opt.step();
    ++iter;

    if (iter % pe == 0) {
      int64_t epoch = iter / pe;
      double acc = eval_accuracy(model, validation);
      if (log)
        log << "pseudo_epoch " << epoch << " iteration " << iter << " lr "
            << lr << " train_loss " << loss_value << " val_accuracy " << acc
            << std::endl;
      if (acc > state.best_val) {
        state.best_val = acc;
        state.best_epoch = epoch;
        state.best_weights = snapshot_weights(model);
      }
      state.iteration = iter;
      if (!options.state_path.empty())
        save_train_state(options.state_path, model, opt, state);
      if (epoch - state.best_epoch >= hp.patience) break;
    }
  }

  if (!state.best_weights.empty()) restore_weights(model, state.best_weights);
  TrainProvenance prov;
  prov.iterations = iter;
  prov.best_val_accuracy = std::max(state.best_val, 0.0);
  return prov;
}

TrainProvenance fine_tune(StyleEncoder& model, BatchSource& data,
                          const EvalSet& validation, int num_writers,
                          double lr, TrainHyperparams hp,
                          const TrainOptions& options) {
  if (num_writers < 2)
    throw DataError("fine-tuning needs at least 2 writers");
  model->replace_head(num_writers);
  hp.initial_lr = lr;
  return train(model, data, validation, hp, options);
}

// ---------------------------------------------------------------------------
// Inference

torch::Tensor preprocess(const cv::Mat& image, int height, int width) {
  if (image.empty()) throw DataError("preprocess: empty image");
  cv::Mat bgr;
  if (image.channels() == 1)
    cv::cvtColor(image, bgr, cv::COLOR_GRAY2BGR);
  else if (image.channels() == 3)
    bgr = image;
  else
    throw DataError("preprocess: expected 1 or 3 channels");

  int new_w = std::max(
      1, static_cast<int>(std::lround(bgr.cols * static_cast<double>(height) /
                                      bgr.rows)));
  cv::Mat resized;
  cv::resize(bgr, resized, cv::Size(new_w, height), 0, 0, cv::INTER_LINEAR);
  cv::Mat fitted;
  if (new_w < width) {
    int pad = width - new_w;
    cv::copyMakeBorder(resized, fitted, 0, 0, pad / 2, pad - pad / 2,
                       cv::BORDER_CONSTANT, cv::Scalar::all(255));
  } else if (new_w > width) {
    int off = (new_w - width) / 2;
    fitted = resized(cv::Rect(off, 0, width, height)).clone();
  } else {
    fitted = resized;
  }

  cv::Mat f;
  fitted.convertTo(f, CV_32FC3, 1.0 / 255.0);
  torch::Tensor t = torch::from_blob(f.data, {height, width, 3}, torch::kFloat32)
                        .permute({2, 0, 1})
                        .clone();
  return (t - 0.5) / 0.5;
}

std::vector<StyleVector> encode(StyleEncoder& model,
                                const std::vector<cv::Mat>& images) {
  model->eval();
  torch::NoGradGuard guard;
  std::vector<StyleVector> out;
  out.reserve(images.size());
  const int H = model->spec.input_height, W = model->spec.input_width;
  const size_t chunk = 64;
  for (size_t start = 0; start < images.size(); start += chunk) {
    size_t end = std::min(images.size(), start + chunk);
    std::vector<torch::Tensor> batch;
    batch.reserve(end - start);
    for (size_t i = start; i < end; ++i)
      batch.push_back(preprocess(images[i], H, W));
    torch::Tensor feats = model->features(torch::stack(batch)).contiguous();
    for (int64_t r = 0; r < feats.size(0); ++r) {
      const float* row = feats[r].data_ptr<float>();
      out.emplace_back(row, row + model->spec.feature_dim);
    }
  }
  return out;
}

double eval_accuracy(StyleEncoder& model, const EvalSet& validation,
                     int batch_size) {
  if (validation.images.size(0) == 0) throw DataError("empty validation set");
  model->eval();
  torch::NoGradGuard guard;
  int64_t n = validation.images.size(0);
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t end = std::min(n, start + batch_size);
    torch::Tensor logits =
        model->forward(validation.images.slice(0, start, end));
    torch::Tensor pred = logits.argmax(1);
    correct +=
        pred.eq(validation.labels.slice(0, start, end)).sum().item<int64_t>();
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {
constexpr char kCkptMagic[8] = {'S', 'T', 'Y', 'L', 'E', 'N', 'C', '1'};

std::vector<std::pair<std::string, torch::Tensor>> ordered_tensors(
    StyleEncoder& model) {
  std::vector<std::pair<std::string, torch::Tensor>> out;
  for (const auto& p : model->named_parameters())
    out.emplace_back(p.key(), p.value());
  for (const auto& b : model->named_buffers())
    out.emplace_back(b.key(), b.value());
  return out;
}
}  // namespace

void save_checkpoint(const std::string& path, StyleEncoder& model,
                     const TrainProvenance& provenance) {
  auto tensors = ordered_tensors(model);
  json header;
  header["version"] = 1;
  header["spec"] = {{"num_classes", model->spec.num_classes},
                    {"feature_dim", model->spec.feature_dim},
                    {"input_height", model->spec.input_height},
                    {"input_width", model->spec.input_width}};
  header["provenance"] = {{"dataset_digest", provenance.dataset_digest},
                          {"iterations", provenance.iterations},
                          {"best_val_accuracy", provenance.best_val_accuracy}};
  header["tensors"] = json::array();
  for (auto& [name, t] : tensors) {
    json shape = json::array();
    for (int64_t s : t.sizes()) shape.push_back(s);
    header["tensors"].push_back({{"name", name}, {"shape", shape}});
  }
  std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  uint32_t len = static_cast<uint32_t>(header_text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_text.data(), len);
  for (auto& [name, t] : tensors) {
    torch::Tensor c = t.detach().to(torch::kFloat32).contiguous();
    out.write(reinterpret_cast<const char*>(c.data_ptr<float>()),
              static_cast<std::streamsize>(c.numel() * sizeof(float)));
  }
  if (!out) throw ConfigError("checkpoint write failed: " + path);
}

StyleEncoder load_checkpoint(const std::string& path,
                             TrainProvenance* provenance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    throw DataError("checkpoint: bad magic");
  uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (64u << 20))
    throw DataError("checkpoint: corrupt header length");
  std::string header_text(len, '\0');
  if (!in.read(header_text.data(), len))
    throw DataError("checkpoint: truncated header");
  json header = json::parse(header_text);
  if (header.at("version").get<int>() != 1)
    throw DataError("checkpoint: unsupported version");

  EncoderSpec spec;
  spec.num_classes = header.at("spec").at("num_classes").get<int>();
  spec.feature_dim = header.at("spec").at("feature_dim").get<int>();
  spec.input_height = header.at("spec").at("input_height").get<int>();
  spec.input_width = header.at("spec").at("input_width").get<int>();
  StyleEncoder model = build_encoder(spec.num_classes, spec, 0);

  auto tensors = ordered_tensors(model);
  const auto& meta = header.at("tensors");
  if (meta.size() != tensors.size())
    throw DataError("checkpoint: tensor count mismatch");
  torch::NoGradGuard guard;
  for (size_t i = 0; i < tensors.size(); ++i) {
    auto& [name, t] = tensors[i];
    if (meta[i].at("name").get<std::string>() != name)
      throw DataError("checkpoint: tensor order mismatch at " + name);
    std::vector<int64_t> shape =
        meta[i].at("shape").get<std::vector<int64_t>>();
    if (shape != t.sizes().vec())
      throw DataError("checkpoint: shape mismatch for " + name);
    torch::Tensor buf = torch::empty(shape, torch::kFloat32);
    if (!in.read(reinterpret_cast<char*>(buf.data_ptr<float>()),
                 static_cast<std::streamsize>(buf.numel() * sizeof(float))))
      throw DataError("checkpoint: truncated tensor data at " + name);
    t.copy_(buf.to(t.dtype()));
  }
  in.peek();
  if (!in.eof()) throw DataError("checkpoint: trailing bytes");

  if (provenance) {
    provenance->dataset_digest =
        header.at("provenance").at("dataset_digest").get<std::string>();
    provenance->iterations =
        header.at("provenance").at("iterations").get<int64_t>();
    provenance->best_val_accuracy =
        header.at("provenance").at("best_val_accuracy").get<double>();
  }
  return model;
}

// ---------------------------------------------------------------------------
// Batch sources

SyntheticBatchSource::SyntheticBatchSource(const DatasetView& view,
                                           std::vector<int> word_indices,
                                           EncoderSpec spec, uint64_t seed)
    : view_(view.clone_for_worker()),
      word_indices_(std::move(word_indices)),
      spec_(spec),
      seed_(seed) {
  if (word_indices_.empty())
    throw ConfigError("synthetic batch source: no word indices");
}

std::pair<torch::Tensor, torch::Tensor> SyntheticBatchSource::batch(
    int64_t iteration, int batch_size) {
  std::vector<torch::Tensor> images;
  std::vector<int64_t> labels;
  images.reserve(static_cast<size_t>(batch_size));
  for (int b = 0; b < batch_size; ++b) {
    SampleRng rng(SampleRng::derive(seed_, static_cast<uint64_t>(iteration),
                                    static_cast<uint64_t>(b)));
    int font = static_cast<int>(rng.uniform_int(0, view_.num_fonts() - 1));
    int word = word_indices_[static_cast<size_t>(rng.uniform_int(
        0, static_cast<int64_t>(word_indices_.size()) - 1))];
    SyntheticSample s = view_.sample(font, word);
    images.push_back(preprocess(s.image, spec_.input_height, spec_.input_width));
    labels.push_back(font);
  }
  return {torch::stack(images),
          torch::tensor(labels, torch::kInt64)};
}

int SyntheticBatchSource::num_classes() const { return view_.num_fonts(); }

TensorBatchSource::TensorBatchSource(torch::Tensor images, torch::Tensor labels,
                                     uint64_t seed)
    : images_(std::move(images)), labels_(std::move(labels)), seed_(seed) {
  if (images_.size(0) == 0) throw ConfigError("empty batch source");
  num_classes_ = static_cast<int>(labels_.max().item<int64_t>()) + 1;
}

std::pair<torch::Tensor, torch::Tensor> TensorBatchSource::batch(
    int64_t iteration, int batch_size) {
  std::vector<int64_t> idx(static_cast<size_t>(batch_size));
  const int64_t n = images_.size(0);
  for (int b = 0; b < batch_size; ++b) {
    SampleRng rng(SampleRng::derive(seed_, static_cast<uint64_t>(iteration),
                                    static_cast<uint64_t>(b)));
    idx[static_cast<size_t>(b)] = rng.uniform_int(0, n - 1);
  }
  torch::Tensor sel = torch::tensor(idx, torch::kInt64);
  return {images_.index_select(0, sel), labels_.index_select(0, sel)};
}

int TensorBatchSource::num_classes() const { return num_classes_; }

std::pair<std::vector<int>, std::vector<int>> split_words(int num_words,
                                                          double val_fraction,
                                                          uint64_t seed) {
  if (num_words < 2) throw ConfigError("need at least 2 words to split");
  std::vector<int> order(static_cast<size_t>(num_words));
  for (int i = 0; i < num_words; ++i) order[static_cast<size_t>(i)] = i;
  SampleRng rng(SampleRng::derive(seed, 0x73706c6974, 0));
  for (size_t i = order.size(); i > 1; --i) {
    size_t j =
        static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }
  int n_val = std::max(
      1, static_cast<int>(std::lround(num_words * val_fraction)));
  n_val = std::min(n_val, num_words - 1);
  std::vector<int> val(order.begin(), order.begin() + n_val);
  std::vector<int> train(order.begin() + n_val, order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {train, val};
}

EvalSet make_synthetic_eval_set(DatasetView& view,
                                const std::vector<int>& word_indices,
                                int per_font, const EncoderSpec& spec) {
  if (word_indices.empty()) throw ConfigError("no validation words");
  std::vector<torch::Tensor> images;
  std::vector<int64_t> labels;
  for (int f = 0; f < view.num_fonts(); ++f) {
    int count = std::min<int>(per_font, static_cast<int>(word_indices.size()));
    for (int i = 0; i < count; ++i) {
      SyntheticSample s = view.sample(f, word_indices[static_cast<size_t>(i)]);
      images.push_back(preprocess(s.image, spec.input_height, spec.input_width));
      labels.push_back(f);
    }
  }
  return {torch::stack(images), torch::tensor(labels, torch::kInt64)};
}

}  // namespace scriptorium
