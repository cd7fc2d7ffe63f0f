#include <doctest.h>

#include "fuse2d/error.hpp"
#include "fuse2d/pipeline.hpp"
#include "test_util.hpp"

using namespace fuse2d;
namespace fs = std::filesystem;

namespace {

fs::path make_data(const fs::path& root, int subjects, int seconds) {
  pipeline::SynthOptions s;
  s.config.subjects = subjects;
  s.config.seconds_per_condition = seconds;
  s.seed = 5;
  s.out = root / "data";
  pipeline::cmd_synth(s);
  return s.out;
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST_CASE("class mapping") {
  CHECK(pipeline::class_index(Label::NoStress) == 0);
  CHECK(pipeline::class_index(Label::Stress) == 1);
  CHECK(pipeline::class_label(1) == Label::Stress);
  CHECK_THROWS_AS(pipeline::class_index(Label::Ignore), DataError);
}

TEST_CASE("images") {
  const auto root = test::scratch_dir("pipeline_images");
  const auto data = make_data(root, 1, 20);
  CHECK(pipeline::find_recordings(data).size() == 1);

  // 16 windows per 20 s condition; straddling windows are dropped.
  pipeline::ImagesOptions o;
  o.data = {data};
  o.arrangements = "all";
  o.out = root / "all";
  auto r = pipeline::cmd_images(o);
  CHECK(r.windows == 32);
  CHECK(r.images == 32 * 6);
  CHECK(count_ext(o.out, ".png") == 32 * 6);
  const auto rows = pipeline::read_manifest(o.out);
  REQUIRE(rows.size() == 32 * 6);
  CHECK(rows[0].path == "S2_0_PEA_custom.png");
  CHECK(rows[0].label == Label::NoStress);
  CHECK(rows.back().label == Label::Stress);

  o.arrangements = "PEA,EPA,EAP";
  o.out = root / "three";
  o.dump_matrices = true;
  o.workers = 3;
  r = pipeline::cmd_images(o);
  CHECK(count_ext(o.out, ".png") == 32 * 3);
  CHECK(count_ext(o.out, ".csv") == 32 * 3 + 1);
  // Same pixels regardless of worker count.
  CHECK(test::slurp(o.out / "S2_7_EPA_custom.png") == test::slurp(root / "all" / "S2_7_EPA_custom.png"));
  CHECK(test::slurp(o.out / "manifest.csv").find("S2_0_EAP_custom.png,S2,0,EAP,custom,nostress") !=
        std::string::npos);

  o.scheme = ColorScheme::Grayscale;
  o.arrangements = "EAP";
  o.out = root / "gray";
  o.dump_matrices = false;
  pipeline::cmd_images(o);
  const auto g = read_png(o.out / "S2_3_EAP_gray.png");
  const auto c = read_png(root / "three" / "S2_3_EAP_custom.png");
  CHECK(g != c);
  for (std::size_t i = 0; i < g.pixels.size(); i += 3) {
    CHECK(g.pixels[i] == g.pixels[i + 1]);
    CHECK(g.pixels[i] == g.pixels[i + 2]);
  }

  // Block-sampled tiny input equals the 32x32 colour map.
  const auto in = pipeline::image_to_input(c, input_shape(Profile::Tiny));
  CHECK(in.size() == 32u * 32 * 3);
  CHECK(in[0] == c.pixels[0] / 255.0f);

  pipeline::ImagesOptions bad = o;
  bad.data = {root / "nowhere"};
  CHECK_THROWS_AS(pipeline::cmd_images(bad), IoError);
}

TEST_CASE("train and eval") {
  const auto root = test::scratch_dir("pipeline_train");
  const auto data = make_data(root, 3, 20);
  pipeline::ImagesOptions io;
  io.data = {data};
  io.out = root / "img";
  pipeline::cmd_images(io);

  pipeline::TrainOptions t;
  t.stage1 = io.out;
  t.train.profile = Profile::Tiny;
  t.train.epochs = 3;
  t.train.batch_size = 16;
  t.train.seed = 2;
  t.test_subjects = {"S4"};
  t.model_out = root / "m" / "model.f2dm";
  t.history_out = root / "m" / "history.csv";

  SUBCASE("auto validation holds out the last training subject") {
    const auto r = pipeline::cmd_train(t);
    CHECK(r.train_subjects == std::vector<std::string>{"S2"});
    CHECK(r.validation_subjects == std::vector<std::string>{"S3"});
    CHECK(r.history.epochs.size() == 3);
    CHECK(r.history.epochs[0].val_acc.has_value());
    CHECK(fs::is_regular_file(pipeline::metadata_path(t.model_out)));
    CHECK(fs::is_regular_file(t.history_out));
  }

  SUBCASE("eval") {
    t.validation = "none";
    pipeline::cmd_train(t);
    pipeline::EvalOptions e;
    e.model = t.model_out;
    e.data = io.out;
    e.report_out = root / "report.json";
    e.roc_out = root / "roc.csv";

    e.subjects = {"S2"};
    CHECK_THROWS_AS(pipeline::cmd_eval(e), DataError);

    e.subjects = {"S4"};
    const auto r = pipeline::cmd_eval(e);
    CHECK((r.auc >= 0.0 && r.auc <= 1.0));
    CHECK(r.confusion.total() == 32);
    CHECK(r.meta["leak"] == false);
    CHECK(r.meta["dataset"] == "img");
    CHECK(read_report(e.report_out) == r);
    CHECK(fs::is_regular_file(e.roc_out));

    e.subjects = {"S2", "S3"};
    e.allow_leak = true;
    const auto leak = pipeline::cmd_eval(e);
    CHECK(leak.meta["leak"] == true);
    CHECK(leak.accuracy >= 0.5);

    fs::remove(pipeline::metadata_path(t.model_out));
    e.allow_leak = false;
    e.subjects = {"S4"};
    CHECK_THROWS_AS(pipeline::cmd_eval(e), DataError);
  }

  SUBCASE("errors") {
    t.stage1 = root / "missing";
    CHECK_THROWS_AS(pipeline::cmd_train(t), DataError);

    // A single-class manifest cannot be trained on.
    const auto rows = pipeline::read_manifest(io.out);
    std::vector<pipeline::ManifestRow> one;
    for (const auto& r : rows) {
      if (r.label == Label::Stress) one.push_back(r);
    }
    test::spit(io.out / "stress_only.csv", pipeline::manifest_to_csv(one));
    t.stage1 = io.out / "stress_only.csv";
    CHECK_THROWS_AS(pipeline::cmd_train(t), DataError);

    t.stage1 = io.out;
    t.validation = "S9";
    CHECK_THROWS_AS(pipeline::cmd_train(t), DataError);
  }
}
