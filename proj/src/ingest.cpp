#include "fuse2d/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fuse2d/error.hpp"
#include "fuse2d/random.hpp"
#include "text_io.hpp"

namespace fuse2d {

namespace fs = std::filesystem;
using detail::where;

std::string to_string(Label label) {
  switch (label) {
    case Label::NoStress: return "nostress";
    case Label::Stress: return "stress";
    case Label::Ignore: return "ignore";
  }
  return "ignore";
}

Label parse_label(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "nostress") return Label::NoStress;
  if (lower == "stress") return Label::Stress;
  if (lower == "ignore") return Label::Ignore;
  throw DataError("unknown label '" + std::string(text) + "'");
}

int Recording::duration_s() const {
  return rates.ppg > 0 ? static_cast<int>(ppg.size() / static_cast<std::size_t>(rates.ppg)) : 0;
}

namespace {

void validate_labels(std::vector<LabelInterval> labels, int duration, const std::string& who) {
  std::sort(labels.begin(), labels.end(),
            [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& l = labels[i];
    if (l.start_s < 0 || l.end_s <= l.start_s) {
      throw DataError(who + ": label interval [" + std::to_string(l.start_s) + "," +
                      std::to_string(l.end_s) + ") is empty or negative");
    }
    if (l.end_s > duration) {
      throw DataError(who + ": label interval ends at " + std::to_string(l.end_s) +
                      " s beyond duration " + std::to_string(duration) + " s");
    }
    if (i > 0 && labels[i - 1].end_s > l.start_s) {
      throw DataError(who + ": label intervals overlap at " + std::to_string(l.start_s) + " s");
    }
  }
}

}  // namespace

void Recording::validate() const {
  if (rates.ppg <= 0 || rates.eda <= 0 || rates.acc <= 0) {
    throw DataError(subject_id + ": sampling rates must be positive");
  }
  const auto t = static_cast<std::size_t>(duration_s());
  if (ppg.size() != t * rates.ppg || eda.size() != t * rates.eda ||
      acc_xyz.size() != t * rates.acc) {
    throw DataError(subject_id + ": channel lengths (ppg " + std::to_string(ppg.size()) +
                    ", eda " + std::to_string(eda.size()) + ", acc " +
                    std::to_string(acc_xyz.size()) + ") do not share an integer duration");
  }
  validate_labels(labels, static_cast<int>(t), subject_id);
}

namespace {

std::vector<double> read_scalar_csv(const fs::path& file) {
  const auto text = detail::read_file(file);
  const auto lines = detail::split_lines(text);
  std::vector<double> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto field = detail::trim(lines[i]);
    double v = 0.0;
    if (!detail::parse_number(field, v) || !std::isfinite(v)) {
      throw DataError(where(file, i + 1) + ": expected one finite decimal value");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<Vec3> read_acc_csv(const fs::path& file) {
  const auto text = detail::read_file(file);
  const auto lines = detail::split_lines(text);
  std::vector<Vec3> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = detail::split_fields(lines[i]);
    Vec3 v{};
    bool ok = fields.size() == 3;
    for (std::size_t k = 0; ok && k < 3; ++k) {
      ok = detail::parse_number(fields[k], v[k]) && std::isfinite(v[k]);
    }
    if (!ok) throw DataError(where(file, i + 1) + ": expected \"x,y,z\"");
    out.push_back(v);
  }
  return out;
}

std::vector<LabelInterval> read_labels_csv(const fs::path& file) {
  const auto text = detail::read_file(file);
  const auto lines = detail::split_lines(text);
  std::vector<LabelInterval> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const auto fields = detail::split_fields(lines[i]);
    LabelInterval l;
    if (fields.size() != 3 || !detail::parse_number(fields[0], l.start_s) ||
        !detail::parse_number(fields[1], l.end_s)) {
      throw DataError(where(file, i + 1) + ": expected \"start_s,end_s,label\"");
    }
    try {
      l.label = parse_label(fields[2]);
    } catch (const DataError& e) {
      throw DataError(where(file, i + 1) + ": " + e.what());
    }
    out.push_back(l);
  }
  return out;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError("missing file " + p.string());
}

}  // namespace

Recording load_recording(const fs::path& dir) {
  for (const char* name : {"subject.json", "ppg.csv", "eda.csv", "acc.csv", "labels.csv"}) {
    require_file(dir / name);
  }

  Recording rec;
  try {
    const auto meta = nlohmann::json::parse(detail::read_file(dir / "subject.json"));
    rec.subject_id = meta.at("id").get<std::string>();
    if (meta.contains("rates")) {
      const auto& r = meta.at("rates");
      rec.rates.ppg = r.value("ppg", rec.rates.ppg);
      rec.rates.eda = r.value("eda", rec.rates.eda);
      rec.rates.acc = r.value("acc", rec.rates.acc);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "subject.json").string() + ": " + e.what());
  }
  if (rec.subject_id.empty()) throw DataError((dir / "subject.json").string() + ": empty id");
  if (rec.rates.ppg <= 0 || rec.rates.eda <= 0 || rec.rates.acc <= 0) {
    throw DataError((dir / "subject.json").string() + ": rates must be positive");
  }

  rec.ppg = read_scalar_csv(dir / "ppg.csv");
  rec.eda = read_scalar_csv(dir / "eda.csv");
  rec.acc_xyz = read_acc_csv(dir / "acc.csv");
  rec.labels = read_labels_csv(dir / "labels.csv");

  const auto seconds = [](std::size_t n, int rate) { return n / static_cast<std::size_t>(rate); };
  const auto t = seconds(rec.ppg.size(), rec.rates.ppg);
  if (seconds(rec.eda.size(), rec.rates.eda) != t || seconds(rec.acc_xyz.size(), rec.rates.acc) != t) {
    throw DataError(dir.string() + ": length inconsistency: ppg " + std::to_string(rec.ppg.size()) +
                    " rows, eda " + std::to_string(rec.eda.size()) + " rows, acc " +
                    std::to_string(rec.acc_xyz.size()) + " rows");
  }
  if (t == 0) throw DataError(dir.string() + ": recording shorter than one second");

  if (rec.ppg.size() != t * rec.rates.ppg || rec.eda.size() != t * rec.rates.eda ||
      rec.acc_xyz.size() != t * rec.rates.acc) {
    std::cerr << "warning: " << dir.string() << ": truncating trailing partial second\n";
    rec.ppg.resize(t * rec.rates.ppg);
    rec.eda.resize(t * rec.rates.eda);
    rec.acc_xyz.resize(t * rec.rates.acc);
  }

  validate_labels(rec.labels, static_cast<int>(t), (dir / "labels.csv").string());
  return rec;
}

void save_recording(const Recording& rec, const fs::path& dir) {
  rec.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json meta;
  meta["id"] = rec.subject_id;
  meta["rates"] = {{"ppg", rec.rates.ppg}, {"eda", rec.rates.eda}, {"acc", rec.rates.acc}};
  detail::write_file(dir / "subject.json", meta.dump(2) + "\n");

  auto scalar = [](const std::vector<double>& xs) {
    std::string out;
    out.reserve(xs.size() * 12);
    for (double v : xs) {
      detail::append_fixed(out, v);
      out.push_back('\n');
    }
    return out;
  };
  detail::write_file(dir / "ppg.csv", scalar(rec.ppg));
  detail::write_file(dir / "eda.csv", scalar(rec.eda));

  std::string acc;
  acc.reserve(rec.acc_xyz.size() * 30);
  for (const auto& v : rec.acc_xyz) {
    detail::append_fixed(acc, v[0]);
    acc.push_back(',');
    detail::append_fixed(acc, v[1]);
    acc.push_back(',');
    detail::append_fixed(acc, v[2]);
    acc.push_back('\n');
  }
  detail::write_file(dir / "acc.csv", acc);

  std::string labels;
  for (const auto& l : rec.labels) {
    labels += std::to_string(l.start_s) + "," + std::to_string(l.end_s) + "," + to_string(l.label) + "\n";
  }
  detail::write_file(dir / "labels.csv", labels);
}

namespace {

// Poisson event train with the given rate (events per second) over
// [0, seconds); returns event times.
std::vector<double> event_times(Rng& rng, double rate, double seconds) {
  std::vector<double> out;
  if (rate <= 0.0) return out;
  double t = 0.0;
  while (true) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    t += -std::log(u) / rate;
    if (t >= seconds) break;
    out.push_back(t);
  }
  return out;
}

// Skin-conductance response shape, peak-normalized to 1.
double scr_shape(double tau) {
  if (tau < 0.0) return 0.0;
  constexpr double kRise = 0.75, kDecay = 4.0;
  // Peak of exp(-t/d) - exp(-t/r) occurs at t* = ln(d/r) * r*d/(d-r).
  static const double peak = [] {
    const double ts = std::log(kDecay / kRise) * kRise * kDecay / (kDecay - kRise);
    return std::exp(-ts / kDecay) - std::exp(-ts / kRise);
  }();
  return (std::exp(-tau / kDecay) - std::exp(-tau / kRise)) / peak;
}

Recording synth_subject(const SynthConfig& c, std::uint64_t seed, int index) {
  using std::numbers::pi;
  Rng rng(mix_seed(seed, static_cast<std::uint64_t>(index)));

  Recording rec;
  rec.subject_id = "S" + std::to_string(index + 2);
  const int d = c.seconds_per_condition;
  const int total = 2 * d;
  rec.labels = {{0, d, Label::NoStress}, {d, total, Label::Stress}};

  // Per-subject physiology.
  const double rest_hz = c.ppg_rest_hz + 0.1 * rng.normal();
  const double ppg_amp = 1.0 + 0.1 * rng.normal();
  const double eda_base = c.eda_level * (1.0 + 0.2 * rng.normal());
  const double wander_hz = 0.05 + 0.02 * rng.uniform();
  Vec3 gravity{0.1 * rng.normal(), 0.1 * rng.normal(), 1.0};
  const double gnorm = std::sqrt(gravity[0] * gravity[0] + gravity[1] * gravity[1] + gravity[2] * gravity[2]);
  for (auto& g : gravity) g /= gnorm;

  auto stress_at = [d](double t) { return t >= d ? 1.0 : 0.0; };

  // PPG: pulse wave with a dicrotic harmonic, baseline wander and noise.
  const int n_ppg = total * rec.rates.ppg;
  rec.ppg.resize(static_cast<std::size_t>(n_ppg));
  double phase = rng.uniform(0.0, 2.0 * pi);
  for (int i = 0; i < n_ppg; ++i) {
    const double t = static_cast<double>(i) / rec.rates.ppg;
    const double hz = rest_hz + c.separation * c.ppg_stress_hz * stress_at(t);
    phase += 2.0 * pi * hz / rec.rates.ppg;
    rec.ppg[i] = ppg_amp * (std::sin(phase) + 0.35 * std::sin(2.0 * phase + 0.8)) +
                 0.2 * std::sin(2.0 * pi * wander_hz * t) + c.ppg_noise * rng.normal();
  }

  // EDA: tonic level, upward drift under stress, phasic responses.
  constexpr double kRestBumpRate = 0.03;
  std::vector<double> bumps;
  for (double t0 : event_times(rng, kRestBumpRate, d)) bumps.push_back(t0);
  for (double t0 : event_times(rng, kRestBumpRate + c.separation * c.eda_bump_rate, d)) {
    bumps.push_back(d + t0);
  }
  const int n_eda = total * rec.rates.eda;
  rec.eda.resize(static_cast<std::size_t>(n_eda));
  for (int i = 0; i < n_eda; ++i) {
    const double t = static_cast<double>(i) / rec.rates.eda;
    double v = eda_base + c.separation * c.eda_stress_slope * std::max(0.0, t - d);
    for (double t0 : bumps) v += c.eda_bump_amp * scr_shape(t - t0);
    rec.eda[i] = v + c.eda_noise * rng.normal();
  }

  // ACC: gravity plus sensor noise, with oscillatory motion bursts.
  constexpr double kRestBurstRate = 0.02;
  constexpr double kBurstSeconds = 0.75;
  std::vector<double> bursts = event_times(rng, kRestBurstRate, d);
  for (double t0 : event_times(rng, kRestBurstRate + c.separation * c.acc_burst_rate, d)) {
    bursts.push_back(d + t0);
  }
  const int n_acc = total * rec.rates.acc;
  rec.acc_xyz.resize(static_cast<std::size_t>(n_acc));
  for (int i = 0; i < n_acc; ++i) {
    const double t = static_cast<double>(i) / rec.rates.acc;
    Vec3 v = gravity;
    for (double t0 : bursts) {
      const double tau = t - t0;
      if (tau < 0.0 || tau >= kBurstSeconds) continue;
      const double env = std::sin(pi * tau / kBurstSeconds);
      const double osc = std::sin(2.0 * pi * 3.0 * tau);
      v[0] += c.acc_burst_amp * env * osc;
      v[1] += 0.6 * c.acc_burst_amp * env * std::cos(2.0 * pi * 3.0 * tau);
      v[2] += 0.4 * c.acc_burst_amp * env * env;
    }
    for (auto& a : v) a += c.acc_noise * rng.normal();
    rec.acc_xyz[i] = v;
  }
  return rec;
}

}  // namespace

std::vector<Recording> generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  if (config.subjects <= 0) throw std::invalid_argument("subject count must be positive");
  if (config.seconds_per_condition <= 0) throw std::invalid_argument("duration must be positive");
  if (config.separation < 0.0) throw std::invalid_argument("separation must be non-negative");
  std::vector<Recording> out;
  out.reserve(static_cast<std::size_t>(config.subjects));
  for (int s = 0; s < config.subjects; ++s) out.push_back(synth_subject(config, seed, s));
  return out;
}

std::vector<double> detrend_linear(std::span<const double> channel) {
  const std::size_t n = channel.size();
  if (n < 2) throw std::invalid_argument("detrend_linear needs at least 2 samples");
  // Centered index keeps the normal equations well conditioned.
  const double xm = (static_cast<double>(n) - 1.0) / 2.0;
  double ym = 0.0;
  for (double y : channel) ym += y;
  ym /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xm;
    sxy += dx * (channel[i] - ym);
    sxx += dx * dx;
  }
  const double slope = sxy / sxx;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = channel[i] - ym - slope * (static_cast<double>(i) - xm);
  }
  return out;
}

std::vector<double> acc_magnitude(std::span<const Vec3> acc_xyz) {
  std::vector<double> out;
  out.reserve(acc_xyz.size());
  for (const auto& v : acc_xyz) out.push_back(std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
  return out;
}

Recording preprocess(Recording rec, const PreprocessConfig& cfg) {
  if (cfg.detrend) {
    if (rec.ppg.size() >= 2) rec.ppg = detrend_linear(rec.ppg);
    if (rec.eda.size() >= 2) rec.eda = detrend_linear(rec.eda);
  }
  return rec;
}

SubjectSplit split_by_subject(std::span<const Recording> recordings,
                              const std::set<std::string>& test_ids) {
  if (test_ids.empty()) throw std::invalid_argument("test subject set is empty");
  std::set<std::string> present;
  for (const auto& r : recordings) present.insert(r.subject_id);
  for (const auto& id : test_ids) {
    if (!present.contains(id)) throw DataError("unknown test subject '" + id + "'");
  }
  SubjectSplit split;
  for (const auto& r : recordings) {
    (test_ids.contains(r.subject_id) ? split.test : split.train).push_back(r);
  }
  if (split.train.empty()) throw DataError("split leaves no training subjects");
  return split;
}

}  // namespace fuse2d
