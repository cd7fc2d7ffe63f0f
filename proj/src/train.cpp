#include <algorithm>
#include <cmath>
#include <numeric>

#include "fuse2d/cnn.hpp"
#include "fuse2d/error.hpp"
#include "fuse2d/random.hpp"
#include "text_io.hpp"

namespace fuse2d {

void Dataset::append(const Dataset& other) {
  if (other.size() == 0) return;
  if (size() == 0 && images.empty()) shape = other.shape;
  if (!(shape == other.shape)) throw DataError("cannot merge datasets with different image shapes");
  images.insert(images.end(), other.images.begin(), other.images.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  weights.insert(weights.end(), other.weights.begin(), other.weights.end());
  subjects.insert(subjects.end(), other.subjects.begin(), other.subjects.end());
}

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset is empty");
  if (images.size() != labels.size() * shape.size() || weights.size() != labels.size()) {
    throw DataError("dataset buffers are inconsistent");
  }
  for (int y : labels) {
    if (y < 0 || y >= kNumClasses) throw DataError("label " + std::to_string(y) + " outside {0,1}");
  }
  for (float w : weights) {
    if (!(w >= 0.0f) || !std::isfinite(w)) throw DataError("sample weights must be finite and non-negative");
  }
}

std::string History::to_csv() const {
  std::string out = "epoch,stage,loss,train_acc,val_acc\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + std::to_string(e.stage) + ",";
    detail::append_fixed(out, e.loss, 8);
    out.push_back(',');
    detail::append_fixed(out, e.train_acc, 6);
    out.push_back(',');
    if (e.val_acc) detail::append_fixed(out, *e.val_acc, 6);
    out.push_back('\n');
  }
  return out;
}

double accuracy(const Model& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const auto pred = predict<float>(model, data.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += pred.labels[i] == data.labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

History fit(Model& model, const Dataset& data, const TrainConfig& cfg, int stage, int epochs,
            const Dataset* validation, const EpochCallback& on_epoch) {
  data.validate();
  if (!(data.shape == model.input)) throw DataError("dataset image shape does not match the model input");
  if (cfg.batch_size <= 0 || epochs <= 0) throw std::invalid_argument("batch size and epochs must be positive");

  const std::size_t n = data.size();
  const std::size_t isz = data.shape.size();
  std::vector<std::size_t> order(n);
  std::vector<float> xb;
  std::vector<int> yb;
  std::vector<float> wb;
  ForwardCache<float> cache;
  History hist;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(stage) * 100003u + static_cast<std::uint64_t>(epoch)));
      rng.shuffle(order.begin(), order.end());
    }
    double loss_sum = 0.0, weight_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(n, b + static_cast<std::size_t>(cfg.batch_size));
      xb.resize((e - b) * isz);
      yb.resize(e - b);
      wb.resize(e - b);
      double bw = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t src = order[k];
        std::copy_n(data.images.begin() + static_cast<std::ptrdiff_t>(src * isz), isz,
                    xb.begin() + static_cast<std::ptrdiff_t>((k - b) * isz));
        yb[k - b] = data.labels[src];
        wb[k - b] = data.weights[src];
        bw += data.weights[src];
      }
      const auto probs = forward<float>(model, xb, &cache);
      for (std::size_t k = 0; k < probs.size(); ++k) {
        correct += ((probs[k][1] > probs[k][0]) ? 1 : 0) == yb[k] ? 1 : 0;
      }
      if (bw <= 0.0) continue;  // nothing to learn from an all-zero-weight batch
      const double loss = weighted_cross_entropy<float>(probs, yb, wb);
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss in stage " + std::to_string(stage) + ", epoch " +
                              std::to_string(epoch));
      }
      loss_sum += loss * bw;
      weight_sum += bw;
      const auto grads = backward<float>(model, cache, yb, wb, {.skip_frozen = true});
      adam_step(model, grads, cfg.adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.stage = stage;
    rec.loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    if (validation && validation->size() > 0) rec.val_acc = accuracy(model, *validation);
    hist.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return hist;
}

History fit_two_stage(Model& model, const Dataset& stage1, const Dataset* stage2, const TrainConfig& cfg,
                      const Dataset* validation, const EpochCallback& on_epoch) {
  if (stage1.size() == 0) throw DataError("stage-1 dataset is empty");
  if (stage2 && stage2->size() == 0) throw DataError("stage-2 dataset is empty");
  History hist = fit(model, stage1, cfg, 1, cfg.epochs, validation, on_epoch);
  if (stage2) {
    freeze_features(model);
    const int e2 = cfg.stage2_epochs > 0 ? cfg.stage2_epochs : cfg.epochs;
    auto h2 = fit(model, *stage2, cfg, 2, e2, validation, on_epoch);
    hist.epochs.insert(hist.epochs.end(), h2.epochs.begin(), h2.epochs.end());
  }
  return hist;
}

GradCheckResult gradient_check(const Model64& model, std::span<const double> batch, std::span<const int> labels,
                               std::span<const double> weights, double h) {
  ForwardCache<double> cache;
  const auto probs = forward<double>(model, batch, &cache);
  const auto grads = backward<double>(model, cache, labels, weights);

  Model64 probe = model;
  auto loss_at = [&]() {
    const auto p = forward<double>(probe, batch);
    return weighted_cross_entropy<double>(p, labels, weights);
  };

  GradCheckResult res;
  auto check = [&](std::vector<double>& params, const std::vector<double>& analytic, std::size_t layer,
                   const char* what) {
    for (std::size_t j = 0; j < params.size(); ++j) {
      const double orig = params[j];
      params[j] = orig + h;
      const double lp = loss_at();
      params[j] = orig - h;
      const double lm = loss_at();
      params[j] = orig;
      const double numeric = (lp - lm) / (2.0 * h);
      const double a = analytic[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-7});
      ++res.parameters_checked;
      if (rel > res.max_relative_error || res.worst.empty()) {
        res.max_relative_error = rel;
        res.worst = "layer " + std::to_string(layer) + " " + what + "[" + std::to_string(j) + "]";
      }
    }
  };
  for (std::size_t i = 0; i < probe.layers.size(); ++i) {
    if (!probe.layers[i].spec.has_parameters()) continue;
    check(probe.layers[i].weights, grads.weights[i], i, "weight");
    check(probe.layers[i].bias, grads.bias[i], i, "bias");
  }
  return res;
}

GradCheckResult run_standard_gradcheck(std::uint64_t seed) {
  const std::vector<LayerSpec> arch{LayerSpec::conv(4),
                                    LayerSpec::max_pool(),
                                    LayerSpec::flatten(),
                                    LayerSpec::dense(8, Activation::ReLU),
                                    LayerSpec::dense(kNumClasses),
                                    LayerSpec::softmax()};
  const Shape input{8, 8, 3};
  auto model = init_model<double>(arch, input, seed);
  // Non-zero biases so the bias paths and ReLU masks are exercised.
  Rng rng(mix_seed(seed, 999));
  for (auto& l : model.layers) {
    for (auto& b : l.bias) b = rng.uniform(-0.1, 0.1);
  }
  std::vector<double> batch(2 * input.size());
  for (auto& v : batch) v = rng.uniform();
  const std::vector<int> labels{0, 1};
  const std::vector<double> weights{1.0, 0.5};
  return gradient_check(model, batch, labels, weights);
}

}  // namespace fuse2d
