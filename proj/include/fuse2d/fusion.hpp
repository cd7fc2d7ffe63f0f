#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fuse2d/ingest.hpp"

namespace fuse2d {

inline constexpr int kMatrixSide = 32;
inline constexpr int kMatrixCells = kMatrixSide * kMatrixSide;

enum class Signal : std::uint8_t { P, E, A };
inline constexpr std::array<Signal, 3> kAllSignals{Signal::P, Signal::E, Signal::A};

char signal_code(Signal s);
Signal parse_signal(char code);  // throws std::invalid_argument

struct WindowConfig {
  int window_s = 5;
  int stride_s = 1;
};

/// One labelled window. `acc` holds the composite magnitude.
struct Window {
  std::string subject_id;
  int start_s = 0;
  Label label = Label::NoStress;
  std::vector<double> ppg;
  std::vector<double> eda;
  std::vector<double> acc;

  std::span<const double> channel(Signal s) const;
};

/// Order of signal bands in the matrix, e.g. "EAP".
class Arrangement {
 public:
  Arrangement() = default;
  explicit Arrangement(std::vector<Signal> order);  // throws on duplicates
  static Arrangement parse(std::string_view code);

  const std::vector<Signal>& order() const { return order_; }
  std::string code() const;
  bool operator==(const Arrangement&) const = default;

 private:
  std::vector<Signal> order_;
};

enum class FillPolicy : std::uint8_t { Zeros, RepeatBands };

struct BandLayout {
  // Per-sample repetition factor, indexed by Signal.
  std::array<int, 3> repeat{1, 8, 1};
  FillPolicy fill = FillPolicy::Zeros;

  int factor(Signal s) const { return repeat[static_cast<std::size_t>(s)]; }
};

enum class RowTag : std::uint8_t { P, E, A, Fill };
RowTag row_tag(Signal s);

struct Provenance {
  std::string subject_id;
  int start_s = 0;
  std::string arrangement;
  Label label = Label::NoStress;

  bool operator==(const Provenance&) const = default;
};

/// 32x32 row-major grid of values in [0, 1].
struct SignalMatrix {
  std::array<double, kMatrixCells> cells{};
  std::array<RowTag, kMatrixSide> band_map{};
  Provenance provenance;

  double at(int row, int col) const { return cells[static_cast<std::size_t>(row * kMatrixSide + col)]; }
};

/// All windows of `cfg` inside the recording, before label filtering.
/// Returns the start second of each window.
std::vector<int> window_starts(int duration_s, const WindowConfig& cfg);

/// Windows fully inside a single Stress or NoStress interval, with the ACC
/// magnitude computed.
std::vector<Window> slide_windows(const Recording& rec, const WindowConfig& cfg);

/// Per-channel min-max scaling to [0, 1]; a constant channel maps to 0.5.
Window normalize_window(Window w);

std::vector<double> repeat_samples(std::span<const double> samples, int factor);

/// Throws std::invalid_argument when the bands overflow the matrix.
void validate_layout(const Window& w, const BandLayout& layout);

SignalMatrix assemble_matrix(const Window& normalized, const Arrangement& arr, const BandLayout& layout);

/// All n! orderings of `signals`, lexicographic with respect to the input
/// order.
std::vector<Arrangement> enumerate_arrangements(std::span<const Signal> signals);

/// "all" or a comma-separated list of codes such as "PEA,EPA,EAP".
std::vector<Arrangement> select_arrangements(std::string_view selector);

/// 32 lines of 32 comma-separated decimals.
std::string matrix_to_csv(const SignalMatrix& m);
std::string matrix_file_name(const Provenance& p);

}  // namespace fuse2d
