#include "fuse2d/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fuse2d/error.hpp"
#include "text_io.hpp"

namespace fuse2d {

char signal_code(Signal s) {
  switch (s) {
    case Signal::P: return 'P';
    case Signal::E: return 'E';
    case Signal::A: return 'A';
  }
  return '?';
}

Signal parse_signal(char code) {
  switch (code) {
    case 'P': case 'p': return Signal::P;
    case 'E': case 'e': return Signal::E;
    case 'A': case 'a': return Signal::A;
    default: break;
  }
  throw std::invalid_argument(std::string("unknown signal code '") + code + "'");
}

RowTag row_tag(Signal s) {
  switch (s) {
    case Signal::P: return RowTag::P;
    case Signal::E: return RowTag::E;
    case Signal::A: return RowTag::A;
  }
  return RowTag::Fill;
}

std::span<const double> Window::channel(Signal s) const {
  switch (s) {
    case Signal::P: return ppg;
    case Signal::E: return eda;
    case Signal::A: return acc;
  }
  return {};
}

Arrangement::Arrangement(std::vector<Signal> order) : order_(std::move(order)) {
  for (std::size_t i = 0; i < order_.size(); ++i) {
    for (std::size_t j = i + 1; j < order_.size(); ++j) {
      if (order_[i] == order_[j]) {
        throw std::invalid_argument(std::string("duplicate signal '") + signal_code(order_[i]) +
                                    "' in arrangement");
      }
    }
  }
}

Arrangement Arrangement::parse(std::string_view code) {
  std::vector<Signal> order;
  for (char c : code) order.push_back(parse_signal(c));
  if (order.empty()) throw std::invalid_argument("empty arrangement");
  return Arrangement(std::move(order));
}

std::string Arrangement::code() const {
  std::string s;
  for (auto sig : order_) s.push_back(signal_code(sig));
  return s;
}

std::vector<int> window_starts(int duration_s, const WindowConfig& cfg) {
  if (cfg.window_s < 1 || cfg.stride_s < 1) {
    throw std::invalid_argument("window and stride must be at least 1 s");
  }
  if (duration_s < cfg.window_s) {
    throw DataError("recording of " + std::to_string(duration_s) + " s is shorter than the " +
                    std::to_string(cfg.window_s) + " s window");
  }
  std::vector<int> starts;
  for (int s = 0; s + cfg.window_s <= duration_s; s += cfg.stride_s) starts.push_back(s);
  return starts;
}

std::vector<Window> slide_windows(const Recording& rec, const WindowConfig& cfg) {
  const int t = rec.duration_s();
  const auto starts = window_starts(t, cfg);
  std::vector<Window> out;
  for (int s : starts) {
    const int e = s + cfg.window_s;
    const auto it = std::find_if(rec.labels.begin(), rec.labels.end(), [&](const LabelInterval& l) {
      return l.start_s <= s && e <= l.end_s;
    });
    if (it == rec.labels.end() || it->label == Label::Ignore) continue;

    Window w;
    w.subject_id = rec.subject_id;
    w.start_s = s;
    w.label = it->label;
    auto slice = [&](const auto& xs, int rate) {
      const auto b = xs.begin() + static_cast<std::ptrdiff_t>(s) * rate;
      return std::vector(b, b + static_cast<std::ptrdiff_t>(cfg.window_s) * rate);
    };
    w.ppg = slice(rec.ppg, rec.rates.ppg);
    w.eda = slice(rec.eda, rec.rates.eda);
    const auto acc = slice(rec.acc_xyz, rec.rates.acc);
    w.acc = acc_magnitude(acc);
    out.push_back(std::move(w));
  }
  return out;
}

namespace {

void normalize_channel(std::vector<double>& xs, const char* name) {
  if (xs.empty()) return;
  for (double v : xs) {
    if (!std::isfinite(v)) throw DataError(std::string("non-finite sample in ") + name + " channel");
  }
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  const double min = *lo, max = *hi;
  if (max == min) {
    std::fill(xs.begin(), xs.end(), 0.5);
    return;
  }
  const double range = max - min;
  for (double& v : xs) v = std::clamp((v - min) / range, 0.0, 1.0);
}

}  // namespace

Window normalize_window(Window w) {
  normalize_channel(w.ppg, "PPG");
  normalize_channel(w.eda, "EDA");
  normalize_channel(w.acc, "ACC");
  return w;
}

std::vector<double> repeat_samples(std::span<const double> samples, int factor) {
  if (factor < 1) throw std::invalid_argument("repetition factor must be at least 1");
  std::vector<double> out;
  out.reserve(samples.size() * static_cast<std::size_t>(factor));
  for (double v : samples) out.insert(out.end(), static_cast<std::size_t>(factor), v);
  return out;
}

void validate_layout(const Window& w, const BandLayout& layout) {
  std::size_t cells = 0;
  for (auto s : kAllSignals) {
    if (layout.factor(s) < 1) throw std::invalid_argument("repetition factor must be at least 1");
    cells += w.channel(s).size() * static_cast<std::size_t>(layout.factor(s));
  }
  if (cells > static_cast<std::size_t>(kMatrixCells)) {
    throw std::invalid_argument("band layout needs " + std::to_string(cells) + " cells, matrix holds " +
                                std::to_string(kMatrixCells));
  }
}

SignalMatrix assemble_matrix(const Window& w, const Arrangement& arr, const BandLayout& layout) {
  if (arr.order().empty()) throw std::invalid_argument("empty arrangement");
  std::size_t cells_needed = 0;
  for (auto s : arr.order()) {
    if (layout.factor(s) < 1) throw std::invalid_argument("repetition factor must be at least 1");
    for (double v : w.channel(s)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw DataError(std::string("window channel ") + signal_code(s) + " is not normalized to [0,1]");
      }
    }
    cells_needed += w.channel(s).size() * static_cast<std::size_t>(layout.factor(s));
  }
  if (cells_needed > static_cast<std::size_t>(kMatrixCells)) {
    throw std::invalid_argument("band layout overflows the matrix: " + std::to_string(cells_needed) +
                                " cells");
  }

  std::vector<double> values;
  std::vector<RowTag> source;  // tag of every written cell
  values.reserve(kMatrixCells);
  source.reserve(kMatrixCells);
  for (auto s : arr.order()) {
    const auto band = repeat_samples(w.channel(s), layout.factor(s));
    values.insert(values.end(), band.begin(), band.end());
    source.insert(source.end(), band.size(), row_tag(s));
  }
  const std::size_t band_cells = values.size();

  SignalMatrix m;
  std::copy(values.begin(), values.end(), m.cells.begin());
  std::vector<RowTag> cell_tag(kMatrixCells, RowTag::Fill);
  std::copy(source.begin(), source.end(), cell_tag.begin());
  if (layout.fill == FillPolicy::RepeatBands && band_cells > 0) {
    for (std::size_t i = band_cells; i < static_cast<std::size_t>(kMatrixCells); ++i) {
      m.cells[i] = values[(i - band_cells) % band_cells];
      cell_tag[i] = source[(i - band_cells) % band_cells];
    }
  }
  for (int r = 0; r < kMatrixSide; ++r) m.band_map[r] = cell_tag[static_cast<std::size_t>(r * kMatrixSide)];

  m.provenance = {w.subject_id, w.start_s, arr.code(), w.label};
  return m;
}

std::vector<Arrangement> enumerate_arrangements(std::span<const Signal> signals) {
  // Validates distinctness.
  Arrangement probe(std::vector<Signal>(signals.begin(), signals.end()));
  std::vector<std::size_t> idx(signals.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<Arrangement> out;
  if (signals.empty()) return out;
  do {
    std::vector<Signal> order;
    for (auto i : idx) order.push_back(signals[i]);
    out.emplace_back(std::move(order));
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

std::vector<Arrangement> select_arrangements(std::string_view selector) {
  const auto trimmed = detail::trim(selector);
  if (trimmed == "all" || trimmed == "ALL") return enumerate_arrangements(kAllSignals);
  std::vector<Arrangement> out;
  for (auto field : detail::split_fields(trimmed)) {
    if (field.empty()) continue;
    auto a = Arrangement::parse(field);
    if (a.order().size() != kAllSignals.size()) {
      throw std::invalid_argument("arrangement '" + std::string(field) + "' must name P, E and A");
    }
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
  }
  if (out.empty()) throw std::invalid_argument("empty arrangement selector");
  return out;
}

std::string matrix_to_csv(const SignalMatrix& m) {
  std::string out;
  out.reserve(kMatrixCells * 9);
  for (int r = 0; r < kMatrixSide; ++r) {
    for (int c = 0; c < kMatrixSide; ++c) {
      if (c) out.push_back(',');
      detail::append_fixed(out, m.at(r, c));
    }
    out.push_back('\n');
  }
  return out;
}

std::string matrix_file_name(const Provenance& p) {
  return p.subject_id + "_" + std::to_string(p.start_s) + "_" + p.arrangement + ".csv";
}

}  // namespace fuse2d
