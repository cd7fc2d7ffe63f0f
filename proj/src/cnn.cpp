#include "fuse2d/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fuse2d/error.hpp"
#include "fuse2d/random.hpp"

namespace fuse2d {

std::string describe(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::Conv: return "conv3x3(" + std::to_string(spec.units) + ",relu)";
    case LayerKind::MaxPool: return "maxpool2x2";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense:
      return "dense(" + std::to_string(spec.units) + (spec.activation == Activation::ReLU ? ",relu)" : ")");
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

namespace {

std::vector<LayerSpec> conv_stack(int f1, int f2, int f3, int dense, const ArchitectureOptions& opts) {
  std::vector<LayerSpec> arch{LayerSpec::conv(f1)};
  if (opts.pool_after_first_conv) arch.push_back(LayerSpec::max_pool());
  arch.push_back(LayerSpec::conv(f2));
  arch.push_back(LayerSpec::max_pool());
  arch.push_back(LayerSpec::conv(f3));
  arch.push_back(LayerSpec::max_pool());
  arch.push_back(LayerSpec::flatten());
  arch.push_back(LayerSpec::dense(dense, Activation::ReLU));
  arch.push_back(LayerSpec::dense(kNumClasses));
  arch.push_back(LayerSpec::softmax());
  return arch;
}

}  // namespace

std::vector<LayerSpec> full_architecture(const ArchitectureOptions& opts) {
  return conv_stack(64, 128, 256, 128, opts);
}

std::vector<LayerSpec> tiny_architecture(const ArchitectureOptions& opts) {
  return conv_stack(8, 16, 32, 32, opts);
}

std::vector<LayerSpec> architecture(Profile p, const ArchitectureOptions& opts) {
  return p == Profile::Tiny ? tiny_architecture(opts) : full_architecture(opts);
}

Shape input_shape(Profile p) { return p == Profile::Tiny ? Shape{32, 32, 3} : Shape{128, 128, 3}; }

std::vector<Shape> propagate_shapes(std::span<const LayerSpec> arch, Shape input) {
  if (input.height <= 0 || input.width <= 0 || input.channels <= 0) {
    throw std::invalid_argument("input shape must be positive");
  }
  if (arch.size() < 2 || arch.back().kind != LayerKind::Softmax ||
      arch[arch.size() - 2] != LayerSpec::dense(kNumClasses)) {
    throw std::invalid_argument("architecture must end with dense(2) -> softmax");
  }
  std::vector<Shape> out;
  Shape s = input;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const auto& l = arch[i];
    const auto where = "layer " + std::to_string(i) + " (" + describe(l) + ")";
    switch (l.kind) {
      case LayerKind::Conv:
        if (l.units <= 0) throw std::invalid_argument(where + ": filter count must be positive");
        if (l.activation != Activation::ReLU) throw std::invalid_argument(where + ": conv uses ReLU");
        s = {s.height, s.width, l.units};
        break;
      case LayerKind::MaxPool:
        if (s.height < kPoolSize || s.width < kPoolSize || s.height % kPoolSize || s.width % kPoolSize) {
          throw std::invalid_argument(where + ": input " + std::to_string(s.height) + "x" +
                                      std::to_string(s.width) + " is not divisible by the pool size");
        }
        s = {s.height / kPoolSize, s.width / kPoolSize, s.channels};
        break;
      case LayerKind::Flatten:
        s = {1, 1, static_cast<int>(s.size())};
        break;
      case LayerKind::Dense:
        if (l.units <= 0) throw std::invalid_argument(where + ": unit count must be positive");
        s = {1, 1, l.units};
        break;
      case LayerKind::Softmax:
        if (i + 1 != arch.size()) throw std::invalid_argument(where + ": softmax must be the last layer");
        break;
    }
    out.push_back(s);
  }
  return out;
}

template <class Real>
std::size_t BasicModel<Real>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

template <class Real>
std::vector<LayerSpec> BasicModel<Real>::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

namespace {

template <class Real>
BasicModel<Real> build_model(std::span<const LayerSpec> arch, Shape input) {
  const auto shapes = propagate_shapes(arch, input);
  BasicModel<Real> model;
  model.input = input;
  Shape in = input;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    Layer<Real> layer;
    layer.spec = arch[i];
    layer.in = in;
    layer.out = shapes[i];
    std::size_t nw = 0, nb = 0;
    if (arch[i].kind == LayerKind::Conv) {
      nw = static_cast<std::size_t>(kConvKernel * kConvKernel) * in.channels * arch[i].units;
      nb = static_cast<std::size_t>(arch[i].units);
    } else if (arch[i].kind == LayerKind::Dense) {
      nw = in.size() * static_cast<std::size_t>(arch[i].units);
      nb = static_cast<std::size_t>(arch[i].units);
    }
    layer.weights.assign(nw, Real(0));
    layer.bias.assign(nb, Real(0));
    layer.m_weights.assign(nw, Real(0));
    layer.v_weights.assign(nw, Real(0));
    layer.m_bias.assign(nb, Real(0));
    layer.v_bias.assign(nb, Real(0));
    model.layers.push_back(std::move(layer));
    in = shapes[i];
  }
  return model;
}

}  // namespace

template <class Real>
BasicModel<Real> init_model(std::span<const LayerSpec> arch, Shape input, std::uint64_t seed) {
  auto model = build_model<Real>(arch, input);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    if (!l.spec.has_parameters()) continue;
    const std::size_t fan_in = l.spec.kind == LayerKind::Conv
                                   ? static_cast<std::size_t>(kConvKernel * kConvKernel) * l.in.channels
                                   : l.in.size();
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Rng rng(mix_seed(seed, i));
    for (auto& w : l.weights) w = static_cast<Real>(rng.uniform(-bound, bound));
  }
  return model;
}

template <class To, class From>
BasicModel<To> convert_model(const BasicModel<From>& m) {
  auto out = build_model<To>(m.specs(), m.input);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto& src = m.layers[i];
    auto& dst = out.layers[i];
    std::transform(src.weights.begin(), src.weights.end(), dst.weights.begin(),
                   [](From v) { return static_cast<To>(v); });
    std::transform(src.bias.begin(), src.bias.end(), dst.bias.begin(), [](From v) { return static_cast<To>(v); });
    dst.frozen = src.frozen;
  }
  return out;
}

template <class Real>
ProbVector<Real> softmax(const ProbVector<Real>& x) {
  const Real mx = std::max(x[0], x[1]);
  const Real e0 = std::exp(x[0] - mx);
  const Real e1 = std::exp(x[1] - mx);
  const Real sum = e0 + e1;
  return {e0 / sum, e1 / sum};
}

namespace {

// ---------------------------------------------------------------- kernels

template <class Real>
void conv_forward(const Layer<Real>& l, const Real* in, Real* out) {
  const int H = l.in.height, W = l.in.width, C = l.in.channels, F = l.out.channels;
  const Real* w = l.weights.data();
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      Real* acc = out + (static_cast<std::size_t>(y) * W + x) * F;
      std::copy(l.bias.begin(), l.bias.end(), acc);
      for (int ky = 0; ky < kConvKernel; ++ky) {
        const int yy = y + ky - 1;
        if (yy < 0 || yy >= H) continue;
        for (int kx = 0; kx < kConvKernel; ++kx) {
          const int xx = x + kx - 1;
          if (xx < 0 || xx >= W) continue;
          const Real* src = in + (static_cast<std::size_t>(yy) * W + xx) * C;
          const Real* wk = w + static_cast<std::size_t>(ky * kConvKernel + kx) * C * F;
          for (int c = 0; c < C; ++c) {
            const Real a = src[c];
            const Real* wc = wk + static_cast<std::size_t>(c) * F;
            for (int f = 0; f < F; ++f) acc[f] += a * wc[f];
          }
        }
      }
      for (int f = 0; f < F; ++f) acc[f] = std::max(acc[f], Real(0));
    }
  }
}

// `grad_out` is dL/dz (after the ReLU mask). Accumulates into dw/db and, if
// `grad_in` is non-null, writes dL/d(input).
template <class Real>
void conv_backward(const Layer<Real>& l, const Real* in, const Real* grad_out, Real* dw, Real* db, Real* grad_in) {
  const int H = l.in.height, W = l.in.width, C = l.in.channels, F = l.out.channels;
  const Real* w = l.weights.data();
  if (grad_in) std::fill(grad_in, grad_in + l.in.size(), Real(0));
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const Real* g = grad_out + (static_cast<std::size_t>(y) * W + x) * F;
      if (db) {
        for (int f = 0; f < F; ++f) db[f] += g[f];
      }
      for (int ky = 0; ky < kConvKernel; ++ky) {
        const int yy = y + ky - 1;
        if (yy < 0 || yy >= H) continue;
        for (int kx = 0; kx < kConvKernel; ++kx) {
          const int xx = x + kx - 1;
          if (xx < 0 || xx >= W) continue;
          const std::size_t src_off = (static_cast<std::size_t>(yy) * W + xx) * C;
          const std::size_t k_off = static_cast<std::size_t>(ky * kConvKernel + kx) * C * F;
          for (int c = 0; c < C; ++c) {
            const std::size_t wo = k_off + static_cast<std::size_t>(c) * F;
            if (dw) {
              const Real a = in[src_off + c];
              Real* dwc = dw + wo;
              for (int f = 0; f < F; ++f) dwc[f] += a * g[f];
            }
            if (grad_in) {
              const Real* wc = w + wo;
              Real s = 0;
              for (int f = 0; f < F; ++f) s += wc[f] * g[f];
              grad_in[src_off + c] += s;
            }
          }
        }
      }
    }
  }
}

template <class Real>
void pool_forward(const Layer<Real>& l, const Real* in, Real* out, std::uint32_t* argmax) {
  const int W = l.in.width, C = l.in.channels;
  const int OH = l.out.height, OW = l.out.width;
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      for (int c = 0; c < C; ++c) {
        std::uint32_t best = 0;
        Real bv = -std::numeric_limits<Real>::infinity();
        for (int dy = 0; dy < kPoolSize; ++dy) {
          for (int dx = 0; dx < kPoolSize; ++dx) {
            const auto idx = static_cast<std::uint32_t>(
                ((static_cast<std::size_t>(oy) * kPoolSize + dy) * W + (ox * kPoolSize + dx)) * C + c);
            if (in[idx] > bv) {
              bv = in[idx];
              best = idx;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(oy) * OW + ox) * C + c;
        out[o] = bv;
        if (argmax) argmax[o] = best;
      }
    }
  }
}

template <class Real>
void dense_forward(const Layer<Real>& l, const Real* in, Real* out) {
  const std::size_t I = l.in.size();
  const int U = l.spec.units;
  std::copy(l.bias.begin(), l.bias.end(), out);
  const Real* w = l.weights.data();
  for (std::size_t i = 0; i < I; ++i) {
    const Real a = in[i];
    if (a == Real(0)) continue;
    const Real* wi = w + i * U;
    for (int u = 0; u < U; ++u) out[u] += a * wi[u];
  }
  if (l.spec.activation == Activation::ReLU) {
    for (int u = 0; u < U; ++u) out[u] = std::max(out[u], Real(0));
  }
}

template <class Real>
void dense_backward(const Layer<Real>& l, const Real* in, const Real* g, Real* dw, Real* db, Real* grad_in) {
  const std::size_t I = l.in.size();
  const int U = l.spec.units;
  const Real* w = l.weights.data();
  if (db) {
    for (int u = 0; u < U; ++u) db[u] += g[u];
  }
  for (std::size_t i = 0; i < I; ++i) {
    if (dw) {
      const Real a = in[i];
      Real* dwi = dw + i * U;
      for (int u = 0; u < U; ++u) dwi[u] += a * g[u];
    }
    if (grad_in) {
      const Real* wi = w + i * U;
      Real s = 0;
      for (int u = 0; u < U; ++u) s += wi[u] * g[u];
      grad_in[i] = s;
    }
  }
}

}  // namespace

template <class Real>
std::vector<ProbVector<Real>> forward(const BasicModel<Real>& model, std::span<const Real> batch,
                                      ForwardCache<Real>* cache) {
  const std::size_t in_size = model.input.size();
  if (in_size == 0 || batch.size() % in_size != 0) {
    throw std::invalid_argument("batch size " + std::to_string(batch.size()) +
                                " is not a multiple of the model input size " + std::to_string(in_size));
  }
  const std::size_t n = batch.size() / in_size;
  const std::size_t L = model.layers.size();

  ForwardCache<Real> local;
  ForwardCache<Real>& c = cache ? *cache : local;
  c.batch = n;
  c.activations.resize(L + 1);
  c.pool_argmax.resize(L);
  c.activations[0].assign(batch.begin(), batch.end());

  for (std::size_t i = 0; i < L; ++i) {
    const auto& l = model.layers[i];
    const auto& in = c.activations[i];
    auto& out = c.activations[i + 1];
    const std::size_t isz = l.in.size(), osz = l.out.size();
    out.resize(n * osz);
    switch (l.spec.kind) {
      case LayerKind::Conv:
        for (std::size_t k = 0; k < n; ++k) conv_forward(l, in.data() + k * isz, out.data() + k * osz);
        break;
      case LayerKind::MaxPool:
        c.pool_argmax[i].resize(n * osz);
        for (std::size_t k = 0; k < n; ++k) {
          pool_forward(l, in.data() + k * isz, out.data() + k * osz, c.pool_argmax[i].data() + k * osz);
        }
        break;
      case LayerKind::Flatten:
        out = in;
        break;
      case LayerKind::Dense:
        for (std::size_t k = 0; k < n; ++k) dense_forward(l, in.data() + k * isz, out.data() + k * osz);
        break;
      case LayerKind::Softmax:
        for (std::size_t k = 0; k < n; ++k) {
          const auto p = softmax<Real>({in[2 * k], in[2 * k + 1]});
          out[2 * k] = p[0];
          out[2 * k + 1] = p[1];
        }
        break;
    }
    // Drop activations that backward() never reads when no cache is kept.
    if (!cache && i > 0) std::vector<Real>().swap(c.activations[i]);
  }

  const auto& logits = c.activations[L - 1].empty() ? c.activations[L] : c.activations[L - 1];
  const auto& probs = c.activations[L];
  std::vector<ProbVector<Real>> result(n);
  c.logits.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    result[k] = {probs[2 * k], probs[2 * k + 1]};
    if (cache) c.logits[k] = {logits[2 * k], logits[2 * k + 1]};
    if (!std::isfinite(result[k][0]) || !std::isfinite(result[k][1])) {
      throw DivergenceError("non-finite class probabilities in forward pass");
    }
  }
  return result;
}

template <class Real>
double weighted_cross_entropy(std::span<const ProbVector<Real>> probs, std::span<const int> labels,
                              std::span<const Real> weights) {
  if (probs.size() != labels.size() || probs.size() != weights.size()) {
    throw std::invalid_argument("probs, labels and weights must have equal length");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= kNumClasses) throw std::invalid_argument("label outside {0,1}");
    if (weights[i] < 0) throw std::invalid_argument("negative sample weight");
    const double p = std::max(static_cast<double>(probs[i][static_cast<std::size_t>(labels[i])]), 1e-12);
    num -= static_cast<double>(weights[i]) * std::log(p);
    den += static_cast<double>(weights[i]);
  }
  if (den <= 0.0) throw std::invalid_argument("all sample weights are zero");
  return num / den;
}

template <class Real>
Gradients<Real> backward(const BasicModel<Real>& model, const ForwardCache<Real>& cache, std::span<const int> labels,
                         std::span<const Real> weights, const BackwardOptions& opts) {
  const std::size_t L = model.layers.size();
  const std::size_t n = cache.batch;
  if (cache.activations.size() != L + 1 || cache.activations[L].size() != n * kNumClasses) {
    throw std::logic_error("backward called without a matching forward cache");
  }
  if (labels.size() != n || weights.size() != n) {
    throw std::invalid_argument("labels and weights must match the cached batch");
  }
  double wsum = 0.0;
  for (auto w : weights) {
    if (w < 0) throw std::invalid_argument("negative sample weight");
    wsum += static_cast<double>(w);
  }
  if (wsum <= 0.0) throw std::invalid_argument("all sample weights are zero");

  Gradients<Real> grads;
  grads.weights.resize(L);
  grads.bias.resize(L);
  std::size_t lowest = 0;
  if (opts.skip_frozen) {
    lowest = L;
    for (std::size_t i = 0; i < L; ++i) {
      if (model.layers[i].spec.has_parameters() && !model.layers[i].frozen) {
        lowest = i;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < L; ++i) {
    const auto& l = model.layers[i];
    const bool want = !(opts.skip_frozen && l.frozen);
    if (want) {
      grads.weights[i].assign(l.weights.size(), Real(0));
      grads.bias[i].assign(l.bias.size(), Real(0));
    }
  }
  if (lowest == L) return grads;

  // dL/dlogits of softmax + weighted cross-entropy.
  const auto& probs = cache.activations[L];
  std::vector<Real> g(n * kNumClasses);
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] < 0 || labels[k] >= kNumClasses) throw std::invalid_argument("label outside {0,1}");
    const Real scale = static_cast<Real>(static_cast<double>(weights[k]) / wsum);
    for (int j = 0; j < kNumClasses; ++j) {
      g[k * 2 + j] = scale * (probs[k * 2 + j] - (labels[k] == j ? Real(1) : Real(0)));
    }
  }

  std::vector<Real> g_in;
  for (std::size_t ii = L - 1; ii-- > 0;) {
    const auto& l = model.layers[ii];
    const auto& in = cache.activations[ii];
    const auto& out = cache.activations[ii + 1];
    const std::size_t isz = l.in.size(), osz = l.out.size();
    const bool need_input_grad = ii > lowest;

    if (l.spec.has_parameters() && l.spec.activation == Activation::ReLU) {
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (out[j] <= Real(0)) g[j] = Real(0);
      }
    }
    Real* dw = grads.weights[ii].empty() ? nullptr : grads.weights[ii].data();
    Real* db = grads.bias[ii].empty() ? nullptr : grads.bias[ii].data();
    if (need_input_grad) g_in.assign(n * isz, Real(0));

    switch (l.spec.kind) {
      case LayerKind::Conv:
        for (std::size_t k = 0; k < n; ++k) {
          conv_backward(l, in.data() + k * isz, g.data() + k * osz, dw, db,
                        need_input_grad ? g_in.data() + k * isz : nullptr);
        }
        break;
      case LayerKind::Dense:
        for (std::size_t k = 0; k < n; ++k) {
          dense_backward(l, in.data() + k * isz, g.data() + k * osz, dw, db,
                         need_input_grad ? g_in.data() + k * isz : nullptr);
        }
        break;
      case LayerKind::MaxPool:
        if (need_input_grad) {
          const auto& am = cache.pool_argmax[ii];
          for (std::size_t k = 0; k < n; ++k) {
            for (std::size_t o = 0; o < osz; ++o) g_in[k * isz + am[k * osz + o]] += g[k * osz + o];
          }
        }
        break;
      case LayerKind::Flatten:
        if (need_input_grad) g_in = g;
        break;
      case LayerKind::Softmax:
        throw std::logic_error("softmax must be the last layer");
    }
    if (!need_input_grad) break;
    g.swap(g_in);
  }
  return grads;
}

template <class Real>
void adam_update(std::span<Real> params, std::span<const Real> grads, std::span<Real> m, std::span<Real> v,
                 std::int64_t t, const AdamConfig& cfg) {
  if (t < 1) throw std::invalid_argument("Adam step must be >= 1");
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
    throw std::invalid_argument("Adam buffers differ in size");
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const Real b1 = static_cast<Real>(cfg.beta1), b2 = static_cast<Real>(cfg.beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Real g = grads[i];
    m[i] = b1 * m[i] + (Real(1) - b1) * g;
    v[i] = b2 * v[i] + (Real(1) - b2) * g * g;
    const double m_hat = static_cast<double>(m[i]) / bc1;
    const double v_hat = static_cast<double>(v[i]) / bc2;
    params[i] = static_cast<Real>(static_cast<double>(params[i]) -
                                  cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
  }
}

template <class Real>
void adam_step(BasicModel<Real>& model, const Gradients<Real>& grads, const AdamConfig& cfg) {
  if (grads.weights.size() != model.layers.size()) throw std::invalid_argument("gradient/model layer mismatch");
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    if (!l.spec.has_parameters() || l.frozen) continue;
    const auto& gw = grads.weights[i];
    const auto& gb = grads.bias[i];
    if (gw.size() != l.weights.size() || gb.size() != l.bias.size()) {
      throw std::invalid_argument("missing gradient for trainable layer " + std::to_string(i));
    }
    for (auto x : gw) {
      if (!std::isfinite(x)) throw DivergenceError("non-finite gradient in layer " + std::to_string(i));
    }
    for (auto x : gb) {
      if (!std::isfinite(x)) throw DivergenceError("non-finite gradient in layer " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& l = model.layers[i];
    if (!l.spec.has_parameters() || l.frozen) continue;
    ++l.step;
    adam_update<Real>(l.weights, grads.weights[i], l.m_weights, l.v_weights, l.step, cfg);
    adam_update<Real>(l.bias, grads.bias[i], l.m_bias, l.v_bias, l.step, cfg);
  }
}

template <class Real>
void freeze_features(BasicModel<Real>& model) {
  for (auto& l : model.layers) {
    if (l.spec.kind == LayerKind::Conv || l.spec.kind == LayerKind::MaxPool || l.spec.kind == LayerKind::Flatten) {
      l.frozen = true;
    }
  }
}

template <class Real>
Prediction predict(const BasicModel<Real>& model, std::span<const Real> images, std::size_t chunk) {
  const std::size_t in_size = model.input.size();
  if (images.size() % in_size != 0) throw std::invalid_argument("image buffer does not match the model input");
  const std::size_t n = images.size() / in_size;
  chunk = std::max<std::size_t>(chunk, 1);
  Prediction out;
  out.labels.reserve(n);
  out.scores.reserve(n);
  for (std::size_t b = 0; b < n; b += chunk) {
    const std::size_t e = std::min(n, b + chunk);
    const auto probs = forward(model, images.subspan(b * in_size, (e - b) * in_size));
    for (const auto& p : probs) {
      out.labels.push_back(p[1] > p[0] ? 1 : 0);
      out.scores.push_back({static_cast<double>(p[0]), static_cast<double>(p[1])});
    }
  }
  return out;
}

#define FUSE2D_INSTANTIATE(Real)                                                                                 \
  template struct BasicModel<Real>;                                                                              \
  template BasicModel<Real> init_model<Real>(std::span<const LayerSpec>, Shape, std::uint64_t);                  \
  template ProbVector<Real> softmax<Real>(const ProbVector<Real>&);                                              \
  template std::vector<ProbVector<Real>> forward<Real>(const BasicModel<Real>&, std::span<const Real>,           \
                                                       ForwardCache<Real>*);                                     \
  template double weighted_cross_entropy<Real>(std::span<const ProbVector<Real>>, std::span<const int>,          \
                                               std::span<const Real>);                                           \
  template Gradients<Real> backward<Real>(const BasicModel<Real>&, const ForwardCache<Real>&,                    \
                                          std::span<const int>, std::span<const Real>, const BackwardOptions&);  \
  template void adam_update<Real>(std::span<Real>, std::span<const Real>, std::span<Real>, std::span<Real>,      \
                                  std::int64_t, const AdamConfig&);                                              \
  template void adam_step<Real>(BasicModel<Real>&, const Gradients<Real>&, const AdamConfig&);                   \
  template void freeze_features<Real>(BasicModel<Real>&);                                                        \
  template Prediction predict<Real>(const BasicModel<Real>&, std::span<const Real>, std::size_t);

FUSE2D_INSTANTIATE(float)
FUSE2D_INSTANTIATE(double)
#undef FUSE2D_INSTANTIATE

template BasicModel<double> convert_model<double, float>(const BasicModel<float>&);
template BasicModel<float> convert_model<float, double>(const BasicModel<double>&);
template BasicModel<float> convert_model<float, float>(const BasicModel<float>&);
template BasicModel<double> convert_model<double, double>(const BasicModel<double>&);

}  // namespace fuse2d
