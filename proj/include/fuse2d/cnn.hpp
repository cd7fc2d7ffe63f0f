#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fuse2d {

enum class LayerKind : std::uint8_t { Conv, MaxPool, Flatten, Dense, Softmax };
enum class Activation : std::uint8_t { None, ReLU };

inline constexpr int kNumClasses = 2;
inline constexpr int kConvKernel = 3;
inline constexpr int kPoolSize = 2;

/// Conv layers are 3x3, stride 1, zero "same" padding, ReLU. Pooling is 2x2
/// with stride 2.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int units = 0;  // filters for Conv, neurons for Dense
  Activation activation = Activation::None;

  static LayerSpec conv(int filters) { return {LayerKind::Conv, filters, Activation::ReLU}; }
  static LayerSpec max_pool() { return {LayerKind::MaxPool, 0, Activation::None}; }
  static LayerSpec flatten() { return {LayerKind::Flatten, 0, Activation::None}; }
  static LayerSpec dense(int units, Activation act = Activation::None) { return {LayerKind::Dense, units, act}; }
  static LayerSpec softmax() { return {LayerKind::Softmax, 0, Activation::None}; }

  bool has_parameters() const { return kind == LayerKind::Conv || kind == LayerKind::Dense; }
  bool operator==(const LayerSpec&) const = default;
};

std::string describe(const LayerSpec& spec);

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const { return static_cast<std::size_t>(height) * width * channels; }
  bool operator==(const Shape&) const = default;
};

enum class Profile : std::uint8_t { Full, Tiny };

struct ArchitectureOptions {
  bool pool_after_first_conv = true;
};

/// 128x128x3 input, conv 64/128/256, dense 128, dense 2.
std::vector<LayerSpec> full_architecture(const ArchitectureOptions& opts = {});
/// 32x32x3 input, conv 8/16/32, dense 32, dense 2.
std::vector<LayerSpec> tiny_architecture(const ArchitectureOptions& opts = {});
std::vector<LayerSpec> architecture(Profile p, const ArchitectureOptions& opts = {});
Shape input_shape(Profile p);

/// Output shape of every layer; throws std::invalid_argument on a broken
/// chain (odd pool input, missing Dense(2) -> Softmax tail, ...).
std::vector<Shape> propagate_shapes(std::span<const LayerSpec> arch, Shape input);

template <class Real>
struct Layer {
  LayerSpec spec;
  Shape in;
  Shape out;
  // Conv weights are laid out [ky][kx][in_channel][filter]; dense weights
  // [input][unit].
  std::vector<Real> weights;
  std::vector<Real> bias;
  // Adam moments and the number of updates applied to this layer.
  std::vector<Real> m_weights, v_weights, m_bias, v_bias;
  std::int64_t step = 0;
  bool frozen = false;
};

template <class Real>
struct BasicModel {
  Shape input;
  std::vector<Layer<Real>> layers;

  std::size_t parameter_count() const;
  std::vector<LayerSpec> specs() const;
};

using Model = BasicModel<float>;
using Model64 = BasicModel<double>;

/// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
template <class Real>
BasicModel<Real> init_model(std::span<const LayerSpec> arch, Shape input, std::uint64_t seed);

/// Copies parameters and freeze flags into a model of another precision.
template <class To, class From>
BasicModel<To> convert_model(const BasicModel<From>& m);

template <class Real>
using ProbVector = std::array<Real, kNumClasses>;

/// Numerically stable softmax over two logits.
template <class Real>
ProbVector<Real> softmax(const ProbVector<Real>& logits);

/// Activations kept by forward() for backward().
template <class Real>
struct ForwardCache {
  std::size_t batch = 0;
  // activations[0] is the input; activations[i + 1] the output of layer i.
  std::vector<std::vector<Real>> activations;
  // Flat input index chosen by each pooling output.
  std::vector<std::vector<std::uint32_t>> pool_argmax;
  std::vector<ProbVector<Real>> logits;
};

/// `batch` holds N examples of input.size() values (HWC, scaled to [0,1]).
/// Throws DivergenceError on non-finite outputs.
template <class Real>
std::vector<ProbVector<Real>> forward(const BasicModel<Real>& model, std::span<const Real> batch,
                                      ForwardCache<Real>* cache = nullptr);

/// Weighted mean of -log p[label], with p clamped at 1e-12.
template <class Real>
double weighted_cross_entropy(std::span<const ProbVector<Real>> probs, std::span<const int> labels,
                              std::span<const Real> weights);

template <class Real>
struct Gradients {
  std::vector<std::vector<Real>> weights;
  std::vector<std::vector<Real>> bias;
};

struct BackwardOptions {
  // When set, frozen layers get no gradient and propagation stops below the
  // lowest trainable layer. Gradients of trainable layers are unaffected.
  bool skip_frozen = false;
};

/// Exact gradient of weighted_cross_entropy(forward(batch)).
template <class Real>
Gradients<Real> backward(const BasicModel<Real>& model, const ForwardCache<Real>& cache,
                         std::span<const int> labels, std::span<const Real> weights,
                         const BackwardOptions& opts = {});

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of a parameter block at step t (t >= 1).
template <class Real>
void adam_update(std::span<Real> params, std::span<const Real> grads, std::span<Real> m, std::span<Real> v,
                 std::int64_t t, const AdamConfig& cfg);

/// Advances every trainable layer by one Adam step using its own step
/// counter. Frozen layers, including their moments, are left untouched.
/// Throws DivergenceError on a non-finite gradient.
template <class Real>
void adam_step(BasicModel<Real>& model, const Gradients<Real>& grads, const AdamConfig& cfg);

/// Freezes Conv, MaxPool and Flatten layers.
template <class Real>
void freeze_features(BasicModel<Real>& model);

struct Prediction {
  std::vector<int> labels;
  std::vector<ProbVector<double>> scores;
};

/// argmax of the class probabilities; an exact tie goes to class 0.
template <class Real>
Prediction predict(const BasicModel<Real>& model, std::span<const Real> images, std::size_t chunk = 256);

/// Model file: "F2DM", u16 version, input shape, layer table, float32
/// parameter blocks in layer order, freeze flags. Little-endian.
inline constexpr std::uint16_t kModelFormatVersion = 1;
std::string serialize_model(const Model& model);
Model deserialize_model(std::string_view bytes);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------- training

/// Images as a contiguous float buffer (N x shape.size()).
struct Dataset {
  Shape shape;
  std::vector<float> images;
  std::vector<int> labels;
  std::vector<float> weights;
  std::vector<std::string> subjects;

  std::size_t size() const { return labels.size(); }
  void append(const Dataset& other);
  void validate() const;  // throws DataError
};

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 64;
  int epochs = 16;
  bool shuffle = true;
  std::uint64_t seed = 0;
  Profile profile = Profile::Full;
  // Stage-2 epoch count; 0 means use `epochs`.
  int stage2_epochs = 0;
};

struct EpochRecord {
  int epoch = 0;
  int stage = 1;
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;
};

struct History {
  std::vector<EpochRecord> epochs;
  std::string to_csv() const;  // epoch,stage,loss,train_acc,val_acc
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains every trainable layer of `model` on `data` for `epochs` epochs.
/// Deterministic in (model, data, cfg.seed, stage).
History fit(Model& model, const Dataset& data, const TrainConfig& cfg, int stage, int epochs,
            const Dataset* validation = nullptr, const EpochCallback& on_epoch = {});

/// Stage 1 trains the whole network on `stage1`. If `stage2` is given, the
/// feature layers are frozen and only the dense head trains on it.
History fit_two_stage(Model& model, const Dataset& stage1, const Dataset* stage2, const TrainConfig& cfg,
                      const Dataset* validation = nullptr, const EpochCallback& on_epoch = {});

double accuracy(const Model& model, const Dataset& data);

// ---------------------------------------------------------------- gradcheck

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
  std::string worst;  // location of the largest error
};

/// Central finite differences over every parameter of a 64-bit model.
/// relative error = |analytic - numeric| / max(|analytic|, |numeric|, 1e-7).
GradCheckResult gradient_check(const Model64& model, std::span<const double> batch,
                               std::span<const int> labels, std::span<const double> weights,
                               double h = 1e-4);

/// The standard check: 8x8x3 input, conv 4 + pool, dense 8, dense 2, two
/// examples with unequal weights.
GradCheckResult run_standard_gradcheck(std::uint64_t seed = 1);

}  // namespace fuse2d
