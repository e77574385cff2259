#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <iosfwd>
#include <opencv2/core.hpp>
#include <string>
#include <utility>
#include <vector>

#include "scriptorium/embedstore.hpp"
#include "scriptorium/synthgen.hpp"

namespace scriptorium {

struct EncoderSpec {
  int num_classes = 2;
  int feature_dim = 512;
  int input_height = 64;
  int input_width = 256;
};

struct ResidualBlockImpl : torch::nn::Module {
  ResidualBlockImpl(int in_channels, int out_channels, int stride);
  torch::Tensor forward(torch::Tensor x);

  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
  torch::nn::BatchNorm2d bn1{nullptr}, bn2{nullptr};
  torch::nn::Sequential downsample{nullptr};
};
TORCH_MODULE(ResidualBlock);

// ResNet-18 topology: 7x7/2 stem with max pool, four stages of two basic
// blocks at widths 64/128/256/512, global average pool. The classifier
// head is a single detachable affine layer on the pooled 512-d feature.
struct StyleEncoderImpl : torch::nn::Module {
  explicit StyleEncoderImpl(EncoderSpec spec);

  torch::Tensor features(torch::Tensor x);  // (batch, 512)
  torch::Tensor forward(torch::Tensor x);   // (batch, num_classes)
  void replace_head(int num_classes);

  EncoderSpec spec;
  torch::nn::Sequential backbone{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(StyleEncoder);

// Seeded construction; throws ConfigError when num_classes < 2.
StyleEncoder build_encoder(int num_classes, EncoderSpec spec = {},
                           uint64_t seed = 0);

struct TrainHyperparams {
  double initial_lr = 2e-5;
  double lr_decay = 0.0;  // per-iteration factor; 0 selects the default
  int batch_size = 32;
  int patience = 30;               // pseudo-epochs without improvement
  int iters_per_pseudo_epoch = 1000;
  int64_t max_iterations = 0;      // 0: run until early stopping
  uint64_t seed = 0;
};

// Default decay 10^(-1/90000): a tenfold drop every 90000 iterations.
double default_lr_decay();

// Closed form initial_lr * decay^iteration.
double learning_rate_at(const TrainHyperparams& hp, int64_t iteration);

// Deterministic minibatch supplier: the batch for a given iteration index
// must not depend on call order.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  // images (batch, 3, H, W) float32, labels (batch) int64
  virtual std::pair<torch::Tensor, torch::Tensor> batch(int64_t iteration,
                                                        int batch_size) = 0;
  virtual int num_classes() const = 0;
};

struct EvalSet {
  torch::Tensor images;  // (n, 3, H, W)
  torch::Tensor labels;  // (n)
};

struct TrainProvenance {
  std::string dataset_digest;
  int64_t iterations = 0;
  double best_val_accuracy = 0.0;
};

struct TrainOptions {
  std::string progress_log_path;  // one line per pseudo-epoch when set
  std::string state_path;         // save/resume training state when set
};

// Minibatch optimization with Adam, per-iteration multiplicative lr decay
// and early stopping on validation accuracy. Returns with the best
// checkpoint's weights restored into `model`.
TrainProvenance train(StyleEncoder& model, BatchSource& data,
                      const EvalSet& validation, const TrainHyperparams& hp,
                      const TrainOptions& options = {});

// Head replaced for the new writer set, then trained end to end.
TrainProvenance fine_tune(StyleEncoder& model, BatchSource& data,
                          const EvalSet& validation, int num_writers,
                          double lr, TrainHyperparams hp = {},
                          const TrainOptions& options = {});

// Aspect-preserving resize to the encoder input shape (pad/crop width),
// normalized to zero mean and unit variance with fixed constants.
torch::Tensor preprocess(const cv::Mat& image, int height, int width);

// Pooled 512-d features, classifier head unused.
std::vector<StyleVector> encode(StyleEncoder& model,
                                const std::vector<cv::Mat>& images);

double eval_accuracy(StyleEncoder& model, const EvalSet& validation,
                     int batch_size = 64);

// Versioned binary checkpoint: magic, JSON spec/provenance header, then
// raw little-endian float32 tensors in declared parameter order.
void save_checkpoint(const std::string& path, StyleEncoder& model,
                     const TrainProvenance& provenance);
StyleEncoder load_checkpoint(const std::string& path,
                             TrainProvenance* provenance = nullptr);

// -----------------------------------------------------------------------
// Batch sources

// Renders Font-square samples on demand; label = font_id. Word indices
// are restricted to the given subset so held-out words stay unseen.
class SyntheticBatchSource : public BatchSource {
 public:
  SyntheticBatchSource(const DatasetView& view, std::vector<int> word_indices,
                       EncoderSpec spec, uint64_t seed);
  std::pair<torch::Tensor, torch::Tensor> batch(int64_t iteration,
                                                int batch_size) override;
  int num_classes() const override;

 private:
  DatasetView view_;
  std::vector<int> word_indices_;
  EncoderSpec spec_;
  uint64_t seed_;
};

// In-memory source over preloaded (image, label) pairs, sampled uniformly.
class TensorBatchSource : public BatchSource {
 public:
  TensorBatchSource(torch::Tensor images, torch::Tensor labels, uint64_t seed);
  std::pair<torch::Tensor, torch::Tensor> batch(int64_t iteration,
                                                int batch_size) override;
  int num_classes() const override;

 private:
  torch::Tensor images_, labels_;
  int num_classes_ = 0;
  uint64_t seed_;
};

// Splits word indices [0, num_words) into train / held-out validation.
std::pair<std::vector<int>, std::vector<int>> split_words(int num_words,
                                                          double val_fraction,
                                                          uint64_t seed);

// Fixed validation set: `per_font` held-out words per font.
EvalSet make_synthetic_eval_set(DatasetView& view,
                                const std::vector<int>& word_indices,
                                int per_font, const EncoderSpec& spec);

}  // namespace scriptorium
