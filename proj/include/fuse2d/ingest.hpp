#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fuse2d {

enum class Label : std::uint8_t { NoStress, Stress, Ignore };

std::string to_string(Label label);
Label parse_label(std::string_view text);  // throws DataError

/// Sampling rates in samples per second.
struct ChannelRates {
  int ppg = 64;
  int eda = 4;
  int acc = 32;
};

struct LabelInterval {
  int start_s = 0;
  int end_s = 0;  // exclusive
  Label label = Label::Ignore;

  bool operator==(const LabelInterval&) const = default;
};

using Vec3 = std::array<double, 3>;

/// One subject's multirate recording. Channel lengths are tied to a common
/// integer duration: ppg = T*rates.ppg, eda = T*rates.eda, acc = T*rates.acc.
struct Recording {
  std::string subject_id;
  ChannelRates rates;
  std::vector<double> ppg;
  std::vector<double> eda;
  std::vector<Vec3> acc_xyz;
  std::vector<LabelInterval> labels;

  int duration_s() const;
  /// Throws DataError when lengths, rates or labels are inconsistent.
  void validate() const;
};

/// Reads the text directory format (subject.json, ppg.csv, eda.csv, acc.csv,
/// labels.csv). Trailing partial seconds are truncated with a warning on
/// stderr.
Recording load_recording(const std::filesystem::path& dir);

/// Writes `rec` in the same format load_recording reads. Values are printed
/// with fixed precision so output is byte-stable.
void save_recording(const Recording& rec, const std::filesystem::path& dir);

/// Knobs for the synthetic stress/no-stress generator. The generator produces
/// one NoStress interval followed by one Stress interval per subject.
struct SynthConfig {
  int subjects = 6;
  int seconds_per_condition = 60;
  // 0 makes both conditions come from the same generator; 1 is the default
  // contrast.
  double separation = 1.0;

  double ppg_rest_hz = 1.1;       // resting pulse rate
  double ppg_stress_hz = 0.7;     // added to the pulse rate at separation 1
  double ppg_noise = 0.05;
  double eda_level = 2.0;         // microsiemens
  double eda_stress_slope = 0.1;  // uS per second at separation 1
  double eda_bump_rate = 0.25;    // phasic responses per second at separation 1
  double eda_bump_amp = 0.3;
  double eda_noise = 0.01;
  double acc_noise = 0.02;        // g
  double acc_burst_rate = 0.4;    // bursts per second at separation 1
  double acc_burst_amp = 0.8;     // g
};

/// Deterministic in (config, seed). Subject ids are S2, S3, ...
std::vector<Recording> generate_synthetic(const SynthConfig& config, std::uint64_t seed);

/// Subtracts the least-squares line fitted over the sample index.
std::vector<double> detrend_linear(std::span<const double> channel);

/// Elementwise Euclidean norm of the three axes.
std::vector<double> acc_magnitude(std::span<const Vec3> acc_xyz);

struct PreprocessConfig {
  bool detrend = true;  // PPG and EDA only
};

Recording preprocess(Recording rec, const PreprocessConfig& cfg);

struct SubjectSplit {
  std::vector<Recording> train;
  std::vector<Recording> test;
};

SubjectSplit split_by_subject(std::span<const Recording> recordings,
                              const std::set<std::string>& test_ids);

}  // namespace fuse2d
