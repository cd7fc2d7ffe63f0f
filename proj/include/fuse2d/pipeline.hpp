#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fuse2d/cnn.hpp"
#include "fuse2d/colorize.hpp"
#include "fuse2d/fusion.hpp"
#include "fuse2d/ingest.hpp"
#include "fuse2d/metrics.hpp"

// End-to-end commands shared by the CLI, the Python module and the
// acceptance suite.
namespace fuse2d::pipeline {

namespace fs = std::filesystem;

/// Class index used by the network: NoStress = 0, Stress = 1.
int class_index(Label label);
Label class_label(int index);

/// Recording directories under `root`: `root` itself if it holds
/// subject.json, otherwise its immediate subdirectories that do, sorted by
/// name.
std::vector<fs::path> find_recordings(const fs::path& root);

// ---------------------------------------------------------------- synth

struct SynthOptions {
  SynthConfig config;
  std::uint64_t seed = 0;
  fs::path out;
};

/// Writes one directory per subject; returns their paths.
std::vector<fs::path> cmd_synth(const SynthOptions& opts);

// ---------------------------------------------------------------- images

struct ImagesOptions {
  std::vector<fs::path> data;
  WindowConfig window;
  BandLayout layout;
  PreprocessConfig preprocess;
  std::string arrangements = "EAP";
  ColorScheme scheme = ColorScheme::Custom;
  fs::path out;
  int workers = 1;
  bool dump_matrices = false;  // also write <subject>_<start>_<arr>.csv
};

struct ManifestRow {
  std::string path;  // relative to the manifest directory
  std::string subject;
  int start_s = 0;
  std::string arrangement;
  std::string scheme;
  Label label = Label::NoStress;
};

inline constexpr const char* kManifestName = "manifest.csv";

struct ImagesResult {
  std::size_t windows = 0;
  std::size_t images = 0;
  std::vector<ManifestRow> manifest;
};

/// PNG for every kept window x selected arrangement, plus manifest.csv.
ImagesResult cmd_images(const ImagesOptions& opts);

/// Fused image for one window (shared by cmd_images and the bindings).
FusedImage render_window(const Window& raw, const Arrangement& arr, const BandLayout& layout, ColorScheme scheme);

std::string manifest_to_csv(const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const fs::path& dir_or_file);

/// Loads the images listed in a manifest as network input of `shape`
/// (block-downsampled when the files are larger, scaled by 1/255).
/// `subjects`, when non-empty, selects rows; `exclude` drops rows.
Dataset load_dataset(const fs::path& dir_or_file, Shape shape, const std::vector<std::string>& subjects = {},
                     const std::vector<std::string>& exclude = {}, float weight = 1.0f);

std::vector<float> image_to_input(const RgbImage& img, Shape shape);

// ---------------------------------------------------------------- train

struct TrainOptions {
  fs::path stage1;
  std::vector<fs::path> stage2;
  std::vector<float> stage2_weights;  // one per stage2 dataset, default 1
  bool stage2_include_stage1 = true;
  TrainConfig train;
  ArchitectureOptions arch;
  std::vector<std::string> test_subjects;  // never trained on
  std::string validation = "auto";         // "auto", "none" or a subject id
  fs::path model_out;
  fs::path history_out;
  EpochCallback on_epoch;
};

struct TrainResult {
  Model model;
  History history;
  std::vector<std::string> train_subjects;
  std::vector<std::string> validation_subjects;
};

/// Writes the model, its metadata sidecar (<model>.json) and the history.
TrainResult cmd_train(const TrainOptions& opts);

fs::path metadata_path(const fs::path& model_path);

// ---------------------------------------------------------------- eval

struct EvalOptions {
  fs::path model;
  fs::path data;
  std::vector<std::string> subjects;  // held-out subjects to evaluate
  int positive = 0;
  bool allow_leak = false;
  fs::path report_out;
  fs::path roc_out;  // optional
};

EvalReport cmd_eval(const EvalOptions& opts);

}  // namespace fuse2d::pipeline
