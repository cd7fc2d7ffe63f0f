// fuse2d: synthesize recordings, render fused images, train and evaluate.
//
// Exit codes: 0 success, 1 failed check, 2 usage, 3 data validation,
// 4 training divergence.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fuse2d/error.hpp"
#include "fuse2d/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fuse2d;

constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

// JSON config: top-level keys are global flags, objects named after a
// subcommand hold that subcommand's flags. Command-line flags win.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> out;
    collect(j, "", {}, out);
    return out;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json& j, const std::string& name, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& out) {
    if (j.is_object()) {
      if (!name.empty()) parents.push_back(name);
      for (auto it = j.begin(); it != j.end(); ++it) collect(*it, it.key(), parents, out);
      return;
    }
    CLI::ConfigItem item;
    item.name = name;
    item.parents = parents;
    if (j.is_array()) {
      for (const auto& v : j) item.inputs.push_back(scalar(v));
    } else {
      item.inputs.push_back(scalar(j));
    }
    out.push_back(std::move(item));
  }
};

std::vector<std::string> split_list(const std::vector<std::string>& xs) {
  std::vector<std::string> out;
  for (const auto& x : xs) {
    std::stringstream ss(x);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(item);
    }
  }
  return out;
}

Profile parse_profile(const std::string& s) {
  if (s == "tiny") return Profile::Tiny;
  if (s == "full") return Profile::Full;
  throw std::invalid_argument("unknown profile '" + s + "' (expected tiny or full)");
}

int parse_positive(const std::string& s) {
  if (s == "nostress") return 0;
  if (s == "stress") return 1;
  throw std::invalid_argument("unknown positive class '" + s + "' (expected nostress or stress)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fuse multirate biosignals into 2D images and classify them with a small CNN"};
  app.require_subcommand(1);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file mirroring the command-line flags");

  // synth
  auto* synth = app.add_subcommand("synth", "Write deterministic synthetic recordings");
  pipeline::SynthOptions synth_opts;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--subjects", synth_opts.config.subjects, "Number of subjects")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--seconds", synth_opts.config.seconds_per_condition, "Seconds per condition")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  synth->add_option("--separation", synth_opts.config.separation, "Class separation (0 = none)")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", synth_seed, "Random seed")->envname("FUSE2D_SEED");
  synth->add_option("--out", synth_opts.out, "Output directory")->required();

  // images
  auto* images = app.add_subcommand("images", "Render fused PNG images and a manifest");
  pipeline::ImagesOptions img_opts;
  std::string scheme = "custom", fill = "zeros";
  std::vector<int> repeat{1, 8, 1};
  bool no_detrend = false;
  images->add_option("--data", img_opts.data, "Recording directory or parent of recording directories")
      ->required()
      ->delimiter(',');
  images->add_option("--out", img_opts.out, "Output directory")->required();
  images->add_option("--arrangement", img_opts.arrangements, "\"all\" or codes such as PEA,EPA,EAP")
      ->capture_default_str();
  images->add_option("--scheme", scheme, "gray | manual | custom")->capture_default_str();
  images->add_option("--window", img_opts.window.window_s, "Window length (s)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  images->add_option("--stride", img_opts.window.stride_s, "Window stride (s)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  images->add_option("--repeat", repeat, "Repetition factors for P,E,A")->delimiter(',')->expected(3);
  images->add_option("--fill", fill, "zeros | repeat")->capture_default_str();
  images->add_flag("--no-detrend", no_detrend, "Skip linear detrending of PPG and EDA");
  images->add_option("--workers", img_opts.workers, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  images->add_flag("--dump-matrices", img_opts.dump_matrices, "Also write each 32x32 matrix as CSV");

  // train
  auto* train = app.add_subcommand("train", "Train a classifier (single- or two-stage)");
  pipeline::TrainOptions train_opts;
  std::optional<std::uint64_t> train_seed;
  std::vector<std::string> stage2_dirs, test_subjects;
  std::string profile = "full";
  bool no_shuffle = false, no_first_pool = false, stage2_without_stage1 = false;
  train_opts.model_out = "model.f2dm";
  train->add_option("--stage1", train_opts.stage1, "Image directory (manifest) for stage 1")->required();
  train->add_option("--stage2", stage2_dirs, "Image directories for stage 2")->delimiter(',');
  train->add_option("--stage2-weights", train_opts.stage2_weights, "Sample weight per stage-2 directory")
      ->delimiter(',');
  train->add_flag("--stage2-without-stage1", stage2_without_stage1, "Do not re-include stage-1 data in stage 2");
  train->add_option("--profile", profile, "tiny | full")->capture_default_str();
  train->add_option("--epochs", train_opts.train.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--stage2-epochs", train_opts.train.stage2_epochs, "Defaults to --epochs")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--batch-size", train_opts.train.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--lr", train_opts.train.adam.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  train->add_option("--seed", train_seed, "Random seed (required)")->envname("FUSE2D_SEED");
  train->add_option("--test-subjects", test_subjects, "Subjects excluded from training")->delimiter(',');
  train->add_option("--val", train_opts.validation, "Validation subject: auto | none | <id>")->capture_default_str();
  train->add_flag("--no-shuffle", no_shuffle);
  train->add_flag("--no-first-pool", no_first_pool, "No pooling after the first conv layer");
  train->add_option("--out", train_opts.model_out, "Model file")->capture_default_str();
  train->add_option("--history", train_opts.history_out, "History CSV (default <out>.history.csv)");
  bool quiet = false;
  train->add_flag("-q,--quiet", quiet, "No per-epoch progress");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a model on held-out subjects");
  pipeline::EvalOptions eval_opts;
  std::vector<std::string> eval_subjects;
  std::string positive = "nostress";
  eval_opts.report_out = "report.json";
  eval->add_option("--model", eval_opts.model)->required();
  eval->add_option("--data", eval_opts.data, "Image directory (manifest)")->required();
  eval->add_option("--subjects", eval_subjects, "Subjects to evaluate (default: all in the manifest)")
      ->delimiter(',');
  eval->add_option("--positive", positive, "nostress | stress")->capture_default_str();
  eval->add_flag("--allow-leak", eval_opts.allow_leak, "Permit evaluating on training subjects");
  eval->add_option("--out", eval_opts.report_out, "Report JSON")->capture_default_str();
  eval->add_option("--roc", eval_opts.roc_out, "Optional ROC CSV (threshold,tpr,fpr)");

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  std::uint64_t gc_seed = 1;
  gradcheck->add_option("--seed", gc_seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) {
      synth_opts.seed = synth_seed.value_or(0);
      const auto dirs = pipeline::cmd_synth(synth_opts);
      std::cout << "wrote " << dirs.size() << " recordings to " << synth_opts.out.string() << "\n";
    } else if (images->parsed()) {
      img_opts.scheme = parse_color_scheme(scheme);
      if (repeat.size() != 3) throw std::invalid_argument("--repeat needs three factors");
      for (int i = 0; i < 3; ++i) img_opts.layout.repeat[static_cast<std::size_t>(i)] = repeat[static_cast<std::size_t>(i)];
      if (fill == "zeros") img_opts.layout.fill = FillPolicy::Zeros;
      else if (fill == "repeat") img_opts.layout.fill = FillPolicy::RepeatBands;
      else throw std::invalid_argument("unknown fill policy '" + fill + "'");
      img_opts.preprocess.detrend = !no_detrend;
      const auto res = pipeline::cmd_images(img_opts);
      std::cout << "rendered " << res.images << " images from " << res.windows << " windows into "
                << img_opts.out.string() << "\n";
    } else if (train->parsed()) {
      if (!train_seed) {
        std::cerr << "train: --seed (or FUSE2D_SEED) is required\n";
        return kExitUsage;
      }
      train_opts.train.seed = *train_seed;
      train_opts.train.profile = parse_profile(profile);
      train_opts.train.shuffle = !no_shuffle;
      train_opts.arch.pool_after_first_conv = !no_first_pool;
      train_opts.stage2_include_stage1 = !stage2_without_stage1;
      for (const auto& d : split_list(stage2_dirs)) train_opts.stage2.emplace_back(d);
      train_opts.test_subjects = split_list(test_subjects);
      if (train_opts.history_out.empty()) {
        train_opts.history_out = train_opts.model_out;
        train_opts.history_out += ".history.csv";
      }
      if (!quiet) {
        train_opts.on_epoch = [](const EpochRecord& r) {
          std::fprintf(stderr, "stage %d epoch %2d  loss %.5f  train_acc %.4f", r.stage, r.epoch, r.loss,
                       r.train_acc);
          if (r.val_acc) std::fprintf(stderr, "  val_acc %.4f", *r.val_acc);
          std::fprintf(stderr, "\n");
        };
      }
      const auto res = pipeline::cmd_train(train_opts);
      std::cout << "saved " << train_opts.model_out.string() << " (" << res.model.parameter_count()
                << " parameters, " << (train_opts.stage2.empty() ? 1 : 2) << " stage(s))\n";
    } else if (eval->parsed()) {
      eval_opts.subjects = split_list(eval_subjects);
      eval_opts.positive = parse_positive(positive);
      const auto r = pipeline::cmd_eval(eval_opts);
      std::printf("accuracy %.4f  precision %.4f  recall %.4f  f1 %.4f  auc %.4f\n", r.accuracy, r.precision,
                  r.recall, r.f1, r.auc);
    } else if (gradcheck->parsed()) {
      const auto r = run_standard_gradcheck(gc_seed);
      std::printf("checked %zu parameters; max relative error %.3e (%s)\n", r.parameters_checked,
                  r.max_relative_error, r.worst.c_str());
      return r.max_relative_error < 1e-3 ? 0 : kExitCheckFailed;
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
