#include <doctest.h>

#include <cmath>
#include <limits>

#include "fuse2d/cnn.hpp"
#include "fuse2d/error.hpp"
#include "fuse2d/random.hpp"
#include "test_util.hpp"

using namespace fuse2d;

namespace {

std::vector<LayerSpec> small_arch() {
  return {LayerSpec::conv(3), LayerSpec::max_pool(), LayerSpec::flatten(),
          LayerSpec::dense(5, Activation::ReLU), LayerSpec::dense(2), LayerSpec::softmax()};
}

template <class Real>
std::vector<Real> random_batch(std::size_t n, Shape s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Real> out(n * s.size());
  for (auto& v : out) v = static_cast<Real>(rng.uniform());
  return out;
}

template <class Real>
void randomize_biases(BasicModel<Real>& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& l : m.layers) {
    for (auto& b : l.bias) b = static_cast<Real>(rng.uniform() * 0.2 - 0.1);
  }
}

double loss_of(const Model64& m, const std::vector<double>& x, const std::vector<int>& y,
               const std::vector<double>& w) {
  const auto p = forward<double>(m, x);
  return weighted_cross_entropy<double>(p, y, w);
}

// Two linearly separable classes: class 1 is bright in the top half.
Dataset separable(int n, Shape s, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.shape = s;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    for (int r = 0; r < s.height; ++r) {
      for (int c = 0; c < s.width; ++c) {
        for (int ch = 0; ch < s.channels; ++ch) {
          const bool top = r < s.height / 2;
          const double base = (label == 1) == top ? 0.8 : 0.2;
          d.images.push_back(static_cast<float>(base + 0.1 * (rng.uniform() - 0.5)));
        }
      }
    }
    d.labels.push_back(label);
    d.weights.push_back(1.0f);
    d.subjects.push_back("S" + std::to_string(i % 3));
  }
  return d;
}

template <class Real>
bool conv_state_equal(const BasicModel<Real>& a, const BasicModel<Real>& b) {
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    const auto& x = a.layers[i];
    const auto& y = b.layers[i];
    if (x.spec.kind != LayerKind::Conv) continue;
    if (x.weights != y.weights || x.bias != y.bias || x.m_weights != y.m_weights || x.v_weights != y.v_weights ||
        x.m_bias != y.m_bias || x.v_bias != y.v_bias || x.step != y.step) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("architecture shapes") {
  const auto full = propagate_shapes(full_architecture(), input_shape(Profile::Full));
  const auto tiny = propagate_shapes(tiny_architecture(), input_shape(Profile::Tiny));
  const auto flat_idx = full.size() - 4;
  CHECK(full[flat_idx].size() == 65536);
  CHECK(tiny[tiny.size() - 4].size() == 512);
  CHECK(full.back() == Shape{1, 1, 2});

  ArchitectureOptions no_pool;
  no_pool.pool_after_first_conv = false;
  const auto np = propagate_shapes(full_architecture(no_pool), input_shape(Profile::Full));
  CHECK(np[np.size() - 4].size() == 256u * 32 * 32);

  // Same padding keeps spatial dims.
  const auto conv_only = propagate_shapes(small_arch(), Shape{6, 4, 2});
  CHECK(conv_only[0] == Shape{6, 4, 3});
  CHECK(conv_only[1] == Shape{3, 2, 3});

  const std::vector<LayerSpec> no_tail{LayerSpec::flatten(), LayerSpec::dense(3), LayerSpec::softmax()};
  CHECK_THROWS_AS(propagate_shapes(no_tail, Shape{2, 2, 1}), std::invalid_argument);
  const std::vector<LayerSpec> odd_pool{LayerSpec::max_pool(), LayerSpec::flatten(), LayerSpec::dense(2),
                                        LayerSpec::softmax()};
  CHECK_THROWS_AS(propagate_shapes(odd_pool, Shape{3, 3, 1}), std::invalid_argument);

  auto tm = init_model<float>(tiny_architecture(), input_shape(Profile::Tiny), 1);
  // 3*3*3*8+8 + 3*3*8*16+16 + 3*3*16*32+32 + 512*32+32 + 32*2+2
  CHECK(tm.parameter_count() == 224 + 1168 + 4640 + 16416 + 66);
}

TEST_CASE("init is deterministic and bounded") {
  const auto a = init_model<float>(small_arch(), Shape{4, 4, 2}, 7);
  const auto b = init_model<float>(small_arch(), Shape{4, 4, 2}, 7);
  const auto c = init_model<float>(small_arch(), Shape{4, 4, 2}, 8);
  CHECK(a.layers[0].weights == b.layers[0].weights);
  CHECK(a.layers[0].weights != c.layers[0].weights);
  const double bound = std::sqrt(6.0 / (9 * 2));
  for (float w : a.layers[0].weights) CHECK(std::abs(w) <= bound);
  for (float v : a.layers[3].bias) CHECK(v == 0.0f);
}

TEST_CASE("softmax") {
  auto p = softmax<double>({0.0, 0.0});
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
  p = softmax<double>({1000.0, -1000.0});
  CHECK(p[0] == 1.0);
  CHECK(p[1] == 0.0);
  CHECK(std::isfinite(p[1]));
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double a = (rng.uniform() * 2 - 1) * 1e3;
    const double b = (rng.uniform() * 2 - 1) * 1e3;
    const double s = (rng.uniform() * 2 - 1) * 1e2;
    const auto q = softmax<double>({a, b});
    const auto r = softmax<double>({a + s, b + s});
    CHECK(std::abs(q[0] + q[1] - 1.0) <= 1e-12);
    CHECK(std::abs(q[0] - r[0]) <= 1e-9);
    // Oracle: logistic form.
    CHECK(std::abs(q[1] - 1.0 / (1.0 + std::exp(a - b))) <= 1e-12);
  }
}

TEST_CASE("weighted cross-entropy") {
  const std::vector<ProbVector<double>> probs{{0.8, 0.2}, {0.4, 0.6}};
  const std::vector<int> y{0, 1};
  CHECK(weighted_cross_entropy<double>(probs, y, std::vector<double>{1, 1}) ==
        doctest::Approx((-std::log(0.8) - std::log(0.6)) / 2).epsilon(1e-14));
  CHECK(weighted_cross_entropy<double>(probs, y, std::vector<double>{1, 3}) ==
        doctest::Approx((-std::log(0.8) - 3 * std::log(0.6)) / 4).epsilon(1e-14));
  const std::vector<ProbVector<double>> zero{{1.0, 0.0}};
  CHECK(weighted_cross_entropy<double>(zero, std::vector<int>{1}, std::vector<double>{1}) ==
        doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(weighted_cross_entropy<double>(probs, y, std::vector<double>{0, 0}), std::invalid_argument);
}

TEST_CASE("forward basics") {
  SUBCASE("all-zero network gives equal probabilities and ties to class 0") {
    auto m = init_model<float>(small_arch(), Shape{4, 4, 2}, 1);
    for (auto& l : m.layers) std::fill(l.weights.begin(), l.weights.end(), 0.0f);
    const auto x = random_batch<float>(3, m.input, 2);
    const auto p = forward<float>(m, x);
    for (const auto& q : p) {
      CHECK(q[0] == 0.5f);
      CHECK(q[1] == 0.5f);
    }
    const auto pred = predict<float>(m, x);
    CHECK(pred.labels == std::vector<int>{0, 0, 0});
  }
  SUBCASE("dense identity") {
    const std::vector<LayerSpec> arch{LayerSpec::dense(2), LayerSpec::softmax()};
    auto m = init_model<double>(arch, Shape{1, 1, 2}, 1);
    m.layers[0].weights = {1, 0, 0, 1};
    m.layers[0].bias = {0, 0};
    ForwardCache<double> cache;
    const std::vector<double> x{0.3, 1.1};
    const auto p = forward<double>(m, x, &cache);
    CHECK(cache.logits[0][0] == 0.3);
    CHECK(cache.logits[0][1] == 1.1);
    CHECK(p[0][1] == doctest::Approx(1.0 / (1.0 + std::exp(0.3 - 1.1))).epsilon(1e-14));
  }
  SUBCASE("conv with a centre-tap kernel copies the input") {
    const std::vector<LayerSpec> arch{LayerSpec::conv(1), LayerSpec::flatten(), LayerSpec::dense(2),
                                      LayerSpec::softmax()};
    auto m = init_model<double>(arch, Shape{3, 3, 1}, 1);
    std::fill(m.layers[0].weights.begin(), m.layers[0].weights.end(), 0.0);
    m.layers[0].weights[4] = 1.0;  // ky=1, kx=1
    ForwardCache<double> cache;
    const std::vector<double> x{0, 1, 2, 3, 4, 5, 6, 7, 8};
    forward<double>(m, x, &cache);
    CHECK(cache.activations[1] == x);
  }
  SUBCASE("non-finite input diverges") {
    auto m = init_model<float>(small_arch(), Shape{4, 4, 2}, 1);
    auto x = random_batch<float>(1, m.input, 2);
    x[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(forward<float>(m, x), DivergenceError);
  }
}

TEST_CASE("backward matches finite differences") {
  auto m = init_model<double>(small_arch(), Shape{4, 4, 2}, 3);
  randomize_biases(m, 4);
  const auto x = random_batch<double>(3, m.input, 5);
  const std::vector<int> y{0, 1, 1};
  const std::vector<double> w{1.0, 0.5, 2.0};
  ForwardCache<double> cache;
  forward<double>(m, x, &cache);
  const auto g = backward<double>(m, cache, y, w);
  const double h = 1e-5;
  double worst = 0;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    for (int which = 0; which < 2; ++which) {
      auto& params = which ? m.layers[li].bias : m.layers[li].weights;
      const auto& grad = which ? g.bias[li] : g.weights[li];
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double orig = params[k];
        params[k] = orig + h;
        const double up = loss_of(m, x, y, w);
        params[k] = orig - h;
        const double down = loss_of(m, x, y, w);
        params[k] = orig;
        const double num = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(num - grad[k]));
      }
    }
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("backward weight invariances") {
  auto m = init_model<double>(small_arch(), Shape{4, 4, 2}, 9);
  const auto x = random_batch<double>(2, m.input, 10);
  const std::vector<int> y{0, 1};
  ForwardCache<double> cache;
  forward<double>(m, x, &cache);

  SUBCASE("zero-weight example contributes nothing") {
    const auto with_zero = backward<double>(m, cache, y, std::vector<double>{1.0, 0.0});
    const std::vector<double> x0(x.begin(), x.begin() + static_cast<long>(m.input.size()));
    ForwardCache<double> c0;
    forward<double>(m, x0, &c0);
    const auto alone = backward<double>(m, c0, std::vector<int>{0}, std::vector<double>{1.0});
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      for (std::size_t k = 0; k < alone.weights[i].size(); ++k) {
        CHECK(with_zero.weights[i][k] == doctest::Approx(alone.weights[i][k]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("duplicated example at half weight equals the original") {
    std::vector<double> x3 = x;
    x3.insert(x3.end(), x.begin() + static_cast<long>(m.input.size()), x.end());
    ForwardCache<double> c3;
    forward<double>(m, x3, &c3);
    const auto dup = backward<double>(m, c3, std::vector<int>{0, 1, 1}, std::vector<double>{1.0, 0.5, 0.5});
    const auto base = backward<double>(m, cache, y, std::vector<double>{1.0, 1.0});
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      for (std::size_t k = 0; k < base.weights[i].size(); ++k) {
        CHECK(dup.weights[i][k] == doctest::Approx(base.weights[i][k]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("skip_frozen leaves trainable gradients unchanged") {
    auto frozen = m;
    freeze_features(frozen);
    const auto all = backward<double>(frozen, cache, y, std::vector<double>{1, 1});
    BackwardOptions opts;
    opts.skip_frozen = true;
    const auto part = backward<double>(frozen, cache, y, std::vector<double>{1, 1}, opts);
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (frozen.layers[i].frozen) continue;
      CHECK(part.weights[i] == all.weights[i]);
      CHECK(part.bias[i] == all.bias[i]);
    }
  }
}

TEST_CASE("gradient check helper") {
  const auto r = run_standard_gradcheck(1);
  CHECK(r.max_relative_error < 1e-3);
  CHECK(r.parameters_checked == (27 * 4 + 4) + (64 * 8 + 8) + (8 * 2 + 2));
}

TEST_CASE("adam") {
  SUBCASE("single step from zero") {
    std::vector<double> p{0.0}, g{1.0}, mm{0.0}, vv{0.0};
    adam_update<double>(p, g, mm, vv, 1, {});
    CHECK(std::abs(p[0] - (-0.001 / (1.0 + 1e-8))) < 1e-15);
  }
  SUBCASE("constant gradient closed form") {
    for (double grad : {0.5, -2.0, 1e-3}) {
      std::vector<double> p{0.0}, g{grad}, mm{0.0}, vv{0.0};
      for (int t = 1; t <= 25; ++t) {
        adam_update<double>(p, g, mm, vv, t, {});
        const double expect = -t * 0.001 * grad / (std::abs(grad) + 1e-8);
        CHECK(std::abs(p[0] - expect) < 1e-9);
      }
    }
  }
  SUBCASE("zero gradient does not move parameters") {
    std::vector<double> p{0.7}, g{0.0}, mm{0.0}, vv{0.0};
    for (int t = 1; t <= 5; ++t) adam_update<double>(p, g, mm, vv, t, {});
    CHECK(p[0] == 0.7);
  }
  SUBCASE("frozen layers are untouched") {
    auto m = init_model<float>(small_arch(), Shape{4, 4, 2}, 2);
    const auto x = random_batch<float>(2, m.input, 3);
    const std::vector<int> y{0, 1};
    const std::vector<float> w{1, 1};
    ForwardCache<float> cache;
    forward<float>(m, x, &cache);
    adam_step(m, backward<float>(m, cache, y, w), {});
    freeze_features(m);
    auto before = m;
    forward<float>(m, x, &cache);
    adam_step(m, backward<float>(m, cache, y, w), {});
    CHECK(conv_state_equal(m, before));
    CHECK(m.layers[0].step == 1);
    CHECK(m.layers[3].step == 2);
    CHECK(m.layers[3].weights != before.layers[3].weights);
  }
  SUBCASE("non-finite gradient diverges") {
    auto m = init_model<float>(small_arch(), Shape{4, 4, 2}, 2);
    Gradients<float> g;
    for (auto& l : m.layers) {
      g.weights.emplace_back(l.weights.size(), 0.0f);
      g.bias.emplace_back(l.bias.size(), 0.0f);
    }
    g.weights[0][0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(adam_step(m, g, {}), DivergenceError);
  }
}

TEST_CASE("freeze_features") {
  auto m = init_model<float>(tiny_architecture(), input_shape(Profile::Tiny), 1);
  freeze_features(m);
  auto again = m;
  freeze_features(again);
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const auto k = m.layers[i].spec.kind;
    const bool feature = k == LayerKind::Conv || k == LayerKind::MaxPool || k == LayerKind::Flatten;
    CHECK(m.layers[i].frozen == feature);
    CHECK(again.layers[i].frozen == m.layers[i].frozen);
  }
}

TEST_CASE("training") {
  const Shape s = input_shape(Profile::Tiny);
  const auto d1 = separable(16, s, 1);
  const auto d2 = separable(16, s, 2);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.epochs = 2;
  cfg.seed = 11;
  cfg.profile = Profile::Tiny;

  SUBCASE("two-stage keeps conv state bit-identical") {
    auto m = init_model<float>(tiny_architecture(), s, 3);
    fit(m, d1, cfg, 1, cfg.epochs);
    const auto after1 = m;
    freeze_features(m);
    fit(m, d2, cfg, 2, cfg.epochs);
    CHECK(conv_state_equal(m, after1));
    bool dense_changed = false;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      if (m.layers[i].spec.kind == LayerKind::Dense && m.layers[i].weights != after1.layers[i].weights) {
        dense_changed = true;
      }
    }
    CHECK(dense_changed);

    auto n = init_model<float>(tiny_architecture(), s, 3);
    const auto h = fit_two_stage(n, d1, &d2, cfg);
    CHECK(serialize_model(n) == serialize_model(m));
    CHECK(h.epochs.size() == 4);
    CHECK(h.epochs.back().stage == 2);
  }
  SUBCASE("fit is deterministic and learns") {
    auto a = init_model<float>(tiny_architecture(), s, 4);
    auto b = a;
    cfg.epochs = 6;
    const auto ha = fit(a, d1, cfg, 1, cfg.epochs);
    const auto hb = fit(b, d1, cfg, 1, cfg.epochs);
    CHECK(serialize_model(a) == serialize_model(b));
    CHECK(ha.to_csv() == hb.to_csv());
    CHECK(ha.to_csv().rfind("epoch,stage,loss,train_acc,val_acc\n", 0) == 0);
    CHECK(ha.epochs.back().loss < ha.epochs.front().loss);
    CHECK(accuracy(a, d1) == 1.0);
  }
  SUBCASE("bad data") {
    auto m = init_model<float>(tiny_architecture(), s, 4);
    Dataset bad = d1;
    bad.labels.pop_back();
    CHECK_THROWS_AS(fit(m, bad, cfg, 1, 1), DataError);
  }
}

TEST_CASE("model serialization") {
  const auto dir = test::scratch_dir("cnn_io");
  auto m = init_model<float>(small_arch(), Shape{4, 4, 2}, 5);
  randomize_biases(m, 6);
  freeze_features(m);
  save_model(m, dir / "a.f2dm");
  const auto loaded = load_model(dir / "a.f2dm");
  save_model(loaded, dir / "b.f2dm");
  CHECK(test::slurp(dir / "a.f2dm") == test::slurp(dir / "b.f2dm"));
  CHECK(loaded.specs() == m.specs());
  CHECK(loaded.layers[0].frozen);
  CHECK_FALSE(loaded.layers[3].frozen);
  CHECK(loaded.layers[3].bias == m.layers[3].bias);

  const auto bytes = serialize_model(m);
  CHECK(bytes.substr(0, 4) == "F2DM");
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad), FormatError);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(deserialize_model(bytes + "x"), FormatError);
  std::string version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(deserialize_model(version), FormatError);
  CHECK_THROWS_AS(load_model(dir / "missing.f2dm"), IoError);
}
