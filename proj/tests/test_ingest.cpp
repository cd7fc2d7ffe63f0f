#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fuse2d/error.hpp"
#include "fuse2d/ingest.hpp"
#include "fuse2d/random.hpp"
#include "test_util.hpp"

using namespace fuse2d;
namespace fs = std::filesystem;

namespace {

// Independent least-squares slope from raw sums.
double ls_slope(const std::vector<double>& y) {
  const double n = static_cast<double>(y.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double mean(const std::vector<double>& y) {
  double s = 0;
  for (double v : y) s += v;
  return s / static_cast<double>(y.size());
}

Recording constant_recording(const std::string& id, int seconds) {
  Recording r;
  r.subject_id = id;
  r.ppg.assign(static_cast<std::size_t>(seconds) * 64, 0.5);
  r.eda.assign(static_cast<std::size_t>(seconds) * 4, 1.0);
  r.acc_xyz.assign(static_cast<std::size_t>(seconds) * 32, Vec3{0.0, 0.0, 1.0});
  r.labels = {{0, seconds / 2, Label::NoStress}, {seconds / 2, seconds, Label::Stress}};
  return r;
}

void write_lines(const fs::path& p, std::size_t n, const std::string& line) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += line + "\n";
  test::spit(p, s);
}

fs::path write_raw_dir(const std::string& name, std::size_t ppg, std::size_t eda, std::size_t acc,
                       const std::string& labels) {
  auto dir = test::scratch_dir("ingest_" + name);
  test::spit(dir / "subject.json", R"({"id": "S9", "rates": {"ppg": 64, "eda": 4, "acc": 32}})");
  write_lines(dir / "ppg.csv", ppg, "0.25");
  write_lines(dir / "eda.csv", eda, "1.5");
  write_lines(dir / "acc.csv", acc, "0.1,0.2,0.9");
  test::spit(dir / "labels.csv", labels);
  return dir;
}

}  // namespace

TEST_CASE("load_recording reads a 60 s directory") {
  const auto dir = write_raw_dir("ok", 3840, 240, 1920, "0,30,nostress\n30,60,stress\n");
  const auto rec = load_recording(dir);
  CHECK(rec.subject_id == "S9");
  CHECK(rec.duration_s() == 60);
  CHECK(rec.ppg.size() == 3840);
  CHECK(rec.eda.size() == 240);
  CHECK(rec.acc_xyz.size() == 1920);
  REQUIRE(rec.labels.size() == 2);
  CHECK(rec.labels[0] == LabelInterval{0, 30, Label::NoStress});
  CHECK(rec.labels[1] == LabelInterval{30, 60, Label::Stress});
  CHECK_NOTHROW(rec.validate());
}

TEST_CASE("load_recording rejects inconsistent lengths") {
  const auto dir = write_raw_dir("short_eda", 3840, 239, 1920, "0,60,nostress\n");
  CHECK_THROWS_AS(load_recording(dir), DataError);
}

TEST_CASE("load_recording truncates a trailing partial second") {
  const auto dir = write_raw_dir("partial", 3840 + 10, 241, 1920 + 5, "0,60,nostress\n");
  const auto rec = load_recording(dir);
  CHECK(rec.duration_s() == 60);
  CHECK(rec.ppg.size() == 3840);
  CHECK(rec.eda.size() == 240);
  CHECK(rec.acc_xyz.size() == 1920);
}

TEST_CASE("load_recording errors") {
  SUBCASE("missing file") {
    const auto dir = write_raw_dir("missing", 64, 4, 32, "0,1,stress\n");
    fs::remove(dir / "acc.csv");
    CHECK_THROWS_AS(load_recording(dir), IoError);
  }
  SUBCASE("malformed row names file and line") {
    const auto dir = write_raw_dir("malformed", 128, 8, 64, "0,2,stress\n");
    std::string ppg;
    for (int i = 0; i < 128; ++i) ppg += (i == 6 ? "abc" : "0.1") + std::string("\n");
    test::spit(dir / "ppg.csv", ppg);
    try {
      load_recording(dir);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("ppg.csv:7") != std::string::npos);
    }
  }
  SUBCASE("bad acc row") {
    const auto dir = write_raw_dir("bad_acc", 64, 4, 32, "0,1,stress\n");
    test::spit(dir / "acc.csv", "1,2\n");
    CHECK_THROWS_AS(load_recording(dir), DataError);
  }
  SUBCASE("overlapping labels") {
    const auto dir = write_raw_dir("overlap", 640, 40, 320, "0,6,nostress\n5,10,stress\n");
    CHECK_THROWS_AS(load_recording(dir), DataError);
  }
  SUBCASE("label past the end") {
    const auto dir = write_raw_dir("past_end", 640, 40, 320, "0,11,nostress\n");
    CHECK_THROWS_AS(load_recording(dir), DataError);
  }
  SUBCASE("unknown label") {
    const auto dir = write_raw_dir("unknown_label", 640, 40, 320, "0,10,amused\n");
    CHECK_THROWS_AS(load_recording(dir), DataError);
  }
}

TEST_CASE("save_recording then load_recording preserves the recording") {
  SynthConfig cfg;
  cfg.subjects = 1;
  cfg.seconds_per_condition = 10;
  const auto rec = generate_synthetic(cfg, 3).front();
  const auto dir = test::scratch_dir("roundtrip") / rec.subject_id;
  save_recording(rec, dir);
  const auto back = load_recording(dir);
  CHECK(back.subject_id == rec.subject_id);
  CHECK(back.labels == rec.labels);
  REQUIRE(back.ppg.size() == rec.ppg.size());
  for (std::size_t i = 0; i < rec.ppg.size(); ++i) CHECK(back.ppg[i] == doctest::Approx(rec.ppg[i]).epsilon(1e-6));
}

TEST_CASE("generate_synthetic is deterministic and seed sensitive") {
  SynthConfig cfg;
  cfg.subjects = 2;
  cfg.seconds_per_condition = 60;
  const auto a = test::scratch_dir("synth_a");
  const auto b = test::scratch_dir("synth_b");
  for (const auto& r : generate_synthetic(cfg, 7)) save_recording(r, a / r.subject_id);
  for (const auto& r : generate_synthetic(cfg, 7)) save_recording(r, b / r.subject_id);
  for (const char* id : {"S2", "S3"}) {
    for (const char* f : {"subject.json", "ppg.csv", "eda.csv", "acc.csv", "labels.csv"}) {
      CHECK(test::slurp(a / id / f) == test::slurp(b / id / f));
    }
  }

  const auto r7 = generate_synthetic(cfg, 7);
  const auto r8 = generate_synthetic(cfg, 8);
  CHECK(r7[0].ppg != r8[0].ppg);
  CHECK(r7[0].eda != r8[0].eda);

  for (const auto& r : r7) {
    CHECK_NOTHROW(r.validate());
    CHECK(r.duration_s() == 120);
    REQUIRE(r.labels.size() == 2);
    CHECK(r.labels[0].label == Label::NoStress);
    CHECK(r.labels[1].label == Label::Stress);
  }
}

TEST_CASE("generate_synthetic errors on degenerate configs") {
  SynthConfig cfg;
  cfg.subjects = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), std::invalid_argument);
  cfg.subjects = 1;
  cfg.seconds_per_condition = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg, 1), std::invalid_argument);
}

TEST_CASE("zero separation makes both conditions statistically alike") {
  SynthConfig cfg;
  cfg.subjects = 1;
  cfg.seconds_per_condition = 600;
  cfg.separation = 0.0;
  const auto rec = generate_synthetic(cfg, 11).front();
  const auto half = [](const std::vector<double>& xs, bool second) {
    const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
    return second ? std::vector<double>(mid, xs.end()) : std::vector<double>(xs.begin(), mid);
  };
  const auto acc = acc_magnitude(rec.acc_xyz);
  // Same generator on both halves: means agree to within noise.
  CHECK(std::abs(mean(half(acc, false)) - mean(half(acc, true))) < 0.02);
  CHECK(std::abs(ls_slope(half(rec.eda, true))) < 1e-3);

  cfg.separation = 1.0;
  const auto sep = generate_synthetic(cfg, 11).front();
  // Default separation: EDA climbs during stress.
  CHECK(ls_slope(half(sep.eda, true)) > 0.01);
}

TEST_CASE("detrend_linear") {
  CHECK(detrend_linear(std::vector<double>{1, 2, 3, 4}) == std::vector<double>{0, 0, 0, 0});
  CHECK(detrend_linear(std::vector<double>{5, 5, 5, 5}) == std::vector<double>{0, 0, 0, 0});
  CHECK_THROWS_AS(detrend_linear(std::vector<double>{1.0}), std::invalid_argument);

  std::vector<double> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = std::sin(0.05 * static_cast<double>(i)) + 0.01 * static_cast<double>(i) + 3.0;
  }
  const auto r = detrend_linear(y);
  CHECK(r.size() == y.size());
  CHECK(std::abs(ls_slope(r)) < 1e-9);
  CHECK(std::abs(mean(r)) < 1e-9);

  // Idempotent.
  const auto rr = detrend_linear(r);
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(std::abs(rr[i] - r[i]) < 1e-9);
}

TEST_CASE("acc_magnitude") {
  const std::vector<Vec3> acc{{3, 4, 0}, {0, 0, 0}, {1, 2, 2}};
  CHECK(acc_magnitude(acc) == std::vector<double>{5, 0, 3});

  // Invariant under sign flips and axis permutations; dominates each axis.
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double m = acc_magnitude(std::vector<Vec3>{v}).front();
    CHECK(m >= std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])}));
    const Vec3 flipped{-v[2], v[0], -v[1]};
    CHECK(acc_magnitude(std::vector<Vec3>{flipped}).front() == doctest::Approx(m).epsilon(1e-15));
  }
}

TEST_CASE("preprocess detrends PPG and EDA but not ACC, preserving lengths") {
  SynthConfig cfg;
  cfg.subjects = 1;
  cfg.seconds_per_condition = 20;
  const auto rec = generate_synthetic(cfg, 2).front();
  const auto pre = preprocess(rec, {});
  CHECK(pre.ppg.size() == rec.ppg.size());
  CHECK(pre.eda.size() == rec.eda.size());
  CHECK(pre.acc_xyz == rec.acc_xyz);
  CHECK(std::abs(mean(pre.eda)) < 1e-9);
  CHECK(preprocess(rec, {.detrend = false}).eda == rec.eda);
}

TEST_CASE("split_by_subject") {
  std::vector<Recording> recs;
  for (int s = 2; s <= 17; ++s) recs.push_back(constant_recording("S" + std::to_string(s), 10));

  const auto split = split_by_subject(recs, {"S17"});
  REQUIRE(split.test.size() == 1);
  CHECK(split.test[0].subject_id == "S17");
  CHECK(split.train.size() == 15);
  CHECK(split.train.front().subject_id == "S2");
  CHECK(split.train.back().subject_id == "S16");

  const auto s9 = split_by_subject(recs, {"S9"});
  CHECK(s9.train.size() == 15);
  for (const auto& r : s9.train) CHECK(r.subject_id != "S9");

  std::set<std::string> all;
  for (const auto& r : recs) all.insert(r.subject_id);
  CHECK_THROWS_AS(split_by_subject(recs, all), DataError);
  CHECK_THROWS_AS(split_by_subject(recs, {"S99"}), DataError);
  CHECK_THROWS_AS(split_by_subject(recs, {}), std::invalid_argument);

  // Partition property for random test sets.
  Rng rng(17);
  for (int t = 0; t < 50; ++t) {
    std::set<std::string> ids;
    const auto k = 1 + rng.below(recs.size() - 1);
    while (ids.size() < k) ids.insert(recs[rng.below(recs.size())].subject_id);
    const auto sp = split_by_subject(recs, ids);
    CHECK(sp.train.size() + sp.test.size() == recs.size());
    for (const auto& r : sp.train) CHECK_FALSE(ids.contains(r.subject_id));
    for (const auto& r : sp.test) CHECK(ids.contains(r.subject_id));
  }
}
