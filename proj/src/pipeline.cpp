#include "fuse2d/pipeline.hpp"

#include <algorithm>
#include <iostream>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "fuse2d/error.hpp"
#include "text_io.hpp"

namespace fuse2d::pipeline {

int class_index(Label label) {
  switch (label) {
    case Label::NoStress: return 0;
    case Label::Stress: return 1;
    case Label::Ignore: break;
  }
  throw DataError("'ignore' windows have no class index");
}

Label class_label(int index) {
  if (index == 0) return Label::NoStress;
  if (index == 1) return Label::Stress;
  throw DataError("class index " + std::to_string(index) + " outside {0,1}");
}

std::vector<fs::path> find_recordings(const fs::path& root) {
  if (fs::is_regular_file(root / "subject.json")) return {root};
  if (!fs::is_directory(root)) throw IoError("data directory not found: " + root.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::is_regular_file(entry.path() / "subject.json")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no recording directories under " + root.string());
  return out;
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

}  // namespace

std::vector<fs::path> cmd_synth(const SynthOptions& opts) {
  const auto recs = generate_synthetic(opts.config, opts.seed);
  ensure_dir(opts.out);
  std::vector<fs::path> dirs;
  for (const auto& r : recs) {
    const auto dir = opts.out / r.subject_id;
    save_recording(r, dir);
    dirs.push_back(dir);
  }
  return dirs;
}

FusedImage render_window(const Window& raw, const Arrangement& arr, const BandLayout& layout, ColorScheme scheme) {
  const auto m = assemble_matrix(normalize_window(raw), arr, layout);
  return upscale_nearest(colorize(m, scheme), scheme, m.provenance);
}

std::string manifest_to_csv(const std::vector<ManifestRow>& rows) {
  std::string out = "path,subject,start_s,arrangement,scheme,label\n";
  for (const auto& r : rows) {
    out += r.path + "," + r.subject + "," + std::to_string(r.start_s) + "," + r.arrangement + "," + r.scheme + "," +
           to_string(r.label) + "\n";
  }
  return out;
}

std::vector<ManifestRow> read_manifest(const fs::path& dir_or_file) {
  const fs::path file = fs::is_directory(dir_or_file) ? dir_or_file / kManifestName : dir_or_file;
  if (!fs::is_regular_file(file)) throw DataError("manifest not found: " + file.string());
  const auto text = detail::read_file(file);
  const auto lines = detail::split_lines(text);
  if (lines.empty() || detail::trim(lines[0]) != "path,subject,start_s,arrangement,scheme,label") {
    throw DataError(detail::where(file, 1) + ": missing manifest header");
  }
  std::vector<ManifestRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    const auto f = detail::split_fields(lines[i]);
    ManifestRow r;
    if (f.size() != 6 || !detail::parse_number(f[2], r.start_s)) {
      throw DataError(detail::where(file, i + 1) + ": expected 6 manifest columns");
    }
    r.path = f[0];
    r.subject = f[1];
    r.arrangement = f[3];
    r.scheme = f[4];
    try {
      r.label = parse_label(f[5]);
    } catch (const DataError& e) {
      throw DataError(detail::where(file, i + 1) + ": " + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

ImagesResult cmd_images(const ImagesOptions& opts) {
  if (opts.data.empty()) throw std::invalid_argument("no data directories given");
  const auto arrangements = select_arrangements(opts.arrangements);

  std::vector<fs::path> dirs;
  for (const auto& d : opts.data) {
    const auto found = find_recordings(d);
    dirs.insert(dirs.end(), found.begin(), found.end());
  }
  std::vector<Window> windows;
  std::set<std::string> seen;
  for (const auto& dir : dirs) {
    const auto rec = preprocess(load_recording(dir), opts.preprocess);
    if (!seen.insert(rec.subject_id).second) throw DataError("duplicate subject id " + rec.subject_id);
    auto ws = slide_windows(rec, opts.window);
    if (!ws.empty()) validate_layout(ws.front(), opts.layout);
    std::move(ws.begin(), ws.end(), std::back_inserter(windows));
  }
  if (windows.empty()) throw DataError("every window was dropped by label filtering; nothing to render");

  ensure_dir(opts.out);
  ImagesResult result;
  result.windows = windows.size();
  result.manifest.resize(windows.size() * arrangements.size());

  // Each job owns a disjoint slice of the manifest, so output is independent
  // of the worker count.
  auto render = [&](std::size_t begin, std::size_t end) {
    for (std::size_t w = begin; w < end; ++w) {
      const auto normalized = normalize_window(windows[w]);
      for (std::size_t a = 0; a < arrangements.size(); ++a) {
        const auto m = assemble_matrix(normalized, arrangements[a], opts.layout);
        const auto img = upscale_nearest(colorize(m, opts.scheme), opts.scheme, m.provenance);
        const auto name = image_file_name(m.provenance, opts.scheme);
        write_png(img, opts.out / name);
        if (opts.dump_matrices) detail::write_file(opts.out / matrix_file_name(m.provenance), matrix_to_csv(m));
        result.manifest[w * arrangements.size() + a] = {name,
                                                        m.provenance.subject_id,
                                                        m.provenance.start_s,
                                                        m.provenance.arrangement,
                                                        to_string(opts.scheme),
                                                        m.provenance.label};
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(opts.workers, 1)), 1,
                                                      windows.size());
  if (workers == 1) {
    render(0, windows.size());
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t per = (windows.size() + workers - 1) / workers;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        try {
          render(std::min(windows.size(), t * per), std::min(windows.size(), (t + 1) * per));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  detail::write_file(opts.out / kManifestName, manifest_to_csv(result.manifest));
  result.images = result.manifest.size();
  return result;
}

std::vector<float> image_to_input(const RgbImage& img, Shape shape) {
  if (shape.channels != 3) throw std::invalid_argument("network input must have 3 channels");
  const RgbImage* src = &img;
  RgbImage small;
  if (img.width != shape.width || img.height != shape.height) {
    if (img.width % shape.width || img.height % shape.height || img.width / shape.width != img.height / shape.height) {
      throw DataError("image of " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                      " cannot be reduced to the network input " + std::to_string(shape.width) + "x" +
                      std::to_string(shape.height));
    }
    small = downsample_blocks(img, img.width / shape.width);
    src = &small;
  }
  std::vector<float> out(src->pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(src->pixels[i]) / 255.0f;
  return out;
}

Dataset load_dataset(const fs::path& dir_or_file, Shape shape, const std::vector<std::string>& subjects,
                     const std::vector<std::string>& exclude, float weight) {
  const fs::path dir = fs::is_directory(dir_or_file) ? dir_or_file : dir_or_file.parent_path();
  const auto rows = read_manifest(dir_or_file);
  Dataset ds;
  ds.shape = shape;
  for (const auto& r : rows) {
    if (!subjects.empty() && std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end()) continue;
    if (std::find(exclude.begin(), exclude.end(), r.subject) != exclude.end()) continue;
    if (r.label == Label::Ignore) continue;
    const auto path = dir / r.path;
    if (!fs::is_regular_file(path)) throw DataError("manifest lists missing image " + path.string());
    const auto px = image_to_input(read_png(path), shape);
    ds.images.insert(ds.images.end(), px.begin(), px.end());
    ds.labels.push_back(class_index(r.label));
    ds.weights.push_back(weight);
    ds.subjects.push_back(r.subject);
  }
  return ds;
}

fs::path metadata_path(const fs::path& model_path) {
  auto p = model_path;
  p += ".json";
  return p;
}

namespace {

std::vector<std::string> unique_in_order(const std::vector<std::string>& xs) {
  std::vector<std::string> out;
  for (const auto& x : xs) {
    if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(x);
  }
  return out;
}

Dataset select(const Dataset& ds, const std::vector<std::string>& keep_subjects, bool keep) {
  Dataset out;
  out.shape = ds.shape;
  const std::size_t isz = ds.shape.size();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool in = std::find(keep_subjects.begin(), keep_subjects.end(), ds.subjects[i]) != keep_subjects.end();
    if (in != keep) continue;
    out.images.insert(out.images.end(), ds.images.begin() + static_cast<std::ptrdiff_t>(i * isz),
                      ds.images.begin() + static_cast<std::ptrdiff_t>((i + 1) * isz));
    out.labels.push_back(ds.labels[i]);
    out.weights.push_back(ds.weights[i]);
    out.subjects.push_back(ds.subjects[i]);
  }
  return out;
}

void require_both_classes(const Dataset& ds, const std::string& what) {
  if (ds.size() == 0) throw DataError(what + " is empty");
  const bool has0 = std::find(ds.labels.begin(), ds.labels.end(), 0) != ds.labels.end();
  const bool has1 = std::find(ds.labels.begin(), ds.labels.end(), 1) != ds.labels.end();
  if (!has0 || !has1) throw DataError(what + " holds a single class");
}

std::vector<std::string> manifest_arrangements(const fs::path& p) {
  std::vector<std::string> out;
  for (const auto& r : read_manifest(p)) out.push_back(r.arrangement);
  return unique_in_order(out);
}

}  // namespace

TrainResult cmd_train(const TrainOptions& opts) {
  const Shape shape = input_shape(opts.train.profile);
  const auto arch = architecture(opts.train.profile, opts.arch);

  Dataset stage1 = load_dataset(opts.stage1, shape, {}, opts.test_subjects);
  require_both_classes(stage1, "stage-1 training set " + opts.stage1.string());

  TrainResult result;
  auto subjects = unique_in_order(stage1.subjects);
  if (opts.validation == "auto") {
    if (subjects.size() > 1) {
      result.validation_subjects = {subjects.back()};
    } else {
      std::cerr << "warning: only one training subject; skipping validation\n";
    }
  } else if (opts.validation != "none" && !opts.validation.empty()) {
    if (std::find(subjects.begin(), subjects.end(), opts.validation) == subjects.end()) {
      throw DataError("validation subject '" + opts.validation + "' is not in the training manifest");
    }
    result.validation_subjects = {opts.validation};
  }
  Dataset validation = select(stage1, result.validation_subjects, true);
  stage1 = select(stage1, result.validation_subjects, false);
  require_both_classes(stage1, "stage-1 training set after the validation hold-out");

  std::optional<Dataset> stage2;
  if (!opts.stage2.empty()) {
    if (!opts.stage2_weights.empty() && opts.stage2_weights.size() != opts.stage2.size()) {
      throw std::invalid_argument("give one stage-2 weight per stage-2 dataset");
    }
    stage2.emplace();
    stage2->shape = shape;
    if (opts.stage2_include_stage1) stage2->append(stage1);
    std::vector<std::string> drop = opts.test_subjects;
    drop.insert(drop.end(), result.validation_subjects.begin(), result.validation_subjects.end());
    for (std::size_t i = 0; i < opts.stage2.size(); ++i) {
      const float w = opts.stage2_weights.empty() ? 1.0f : opts.stage2_weights[i];
      stage2->append(load_dataset(opts.stage2[i], shape, {}, drop, w));
    }
    require_both_classes(*stage2, "stage-2 training set");
  }

  std::vector<std::string> train_subjects = unique_in_order(stage1.subjects);
  if (stage2) {
    for (const auto& s : unique_in_order(stage2->subjects)) {
      if (std::find(train_subjects.begin(), train_subjects.end(), s) == train_subjects.end()) {
        train_subjects.push_back(s);
      }
    }
  }

  result.model = init_model<float>(arch, shape, opts.train.seed);
  result.history = fit_two_stage(result.model, stage1, stage2 ? &*stage2 : nullptr, opts.train,
                                 validation.size() ? &validation : nullptr, opts.on_epoch);
  result.train_subjects = train_subjects;

  if (!opts.model_out.empty()) {
    if (opts.model_out.has_parent_path()) ensure_dir(opts.model_out.parent_path());
    save_model(result.model, opts.model_out);
    nlohmann::ordered_json meta;
    meta["format"] = "F2DM";
    meta["profile"] = opts.train.profile == Profile::Tiny ? "tiny" : "full";
    meta["seed"] = opts.train.seed;
    meta["train_subjects"] = train_subjects;
    meta["validation_subjects"] = result.validation_subjects;
    meta["test_subjects"] = opts.test_subjects;
    std::vector<std::string> arrs = manifest_arrangements(opts.stage1);
    for (const auto& p : opts.stage2) {
      for (const auto& a : manifest_arrangements(p)) {
        if (std::find(arrs.begin(), arrs.end(), a) == arrs.end()) arrs.push_back(a);
      }
    }
    meta["arrangements"] = arrs;
    meta["stages"] = stage2 ? 2 : 1;
    detail::write_file(metadata_path(opts.model_out), meta.dump(2) + "\n");
  }
  if (!opts.history_out.empty()) detail::write_file(opts.history_out, result.history.to_csv());
  return result;
}

EvalReport cmd_eval(const EvalOptions& opts) {
  if (!fs::is_regular_file(opts.model)) throw DataError("model file not found: " + opts.model.string());
  const Model model = load_model(opts.model);
  const auto rows = read_manifest(opts.data);

  std::vector<std::string> train_subjects;
  std::uint64_t seed = 0;
  const auto meta_path = metadata_path(opts.model);
  if (fs::is_regular_file(meta_path)) {
    const auto meta = nlohmann::json::parse(detail::read_file(meta_path));
    train_subjects = meta.value("train_subjects", std::vector<std::string>{});
    seed = meta.value("seed", std::uint64_t{0});
  } else if (!opts.allow_leak) {
    throw DataError("no training metadata next to " + opts.model.string() +
                    "; cannot verify subject independence (pass --allow-leak to override)");
  }

  const Dataset ds = load_dataset(opts.data, model.input, opts.subjects);
  if (ds.size() == 0) throw DataError("no evaluation images selected from " + opts.data.string());
  const auto eval_subjects = unique_in_order(ds.subjects);
  std::vector<std::string> overlap;
  for (const auto& s : eval_subjects) {
    if (std::find(train_subjects.begin(), train_subjects.end(), s) != train_subjects.end()) overlap.push_back(s);
  }
  if (!overlap.empty()) {
    std::string list;
    for (const auto& s : overlap) list += (list.empty() ? "" : ",") + s;
    if (!opts.allow_leak) {
      throw DataError("evaluation subjects overlap the training subjects (" + list +
                      "); pass --allow-leak to evaluate anyway");
    }
    std::cerr << "warning: evaluating on training subjects " << list << "\n";
  }

  const auto pred = predict<float>(model, ds.images);
  std::vector<double> pos_scores;
  for (const auto& s : pred.scores) pos_scores.push_back(s[static_cast<std::size_t>(opts.positive)]);
  EvalReport report = evaluate(pred.labels, pos_scores, ds.labels, opts.positive);

  std::vector<std::string> arrs;
  for (const auto& r : rows) {
    if (std::find(eval_subjects.begin(), eval_subjects.end(), r.subject) != eval_subjects.end()) {
      arrs.push_back(r.arrangement);
    }
  }
  report.meta["model"] = opts.model.filename().string();
  // Names only, so reports from identical runs in different directories match.
  auto data_name = opts.data.lexically_normal();
  if (data_name.filename().empty()) data_name = data_name.parent_path();
  report.meta["dataset"] = data_name.filename().string();
  report.meta["arrangements"] = unique_in_order(arrs);
  report.meta["subjects"] = eval_subjects;
  report.meta["seed"] = seed;
  report.meta["examples"] = ds.size();
  report.meta["leak"] = !overlap.empty();

  if (!opts.report_out.empty()) {
    if (opts.report_out.has_parent_path()) ensure_dir(opts.report_out.parent_path());
    write_report(report, opts.report_out);
  }
  if (!opts.roc_out.empty()) {
    bool both = false;
    for (int y : ds.labels) both = both || y != ds.labels.front();
    if (both) {
      detail::write_file(opts.roc_out, roc_to_csv(roc_curve(pos_scores, ds.labels, opts.positive)));
    } else {
      std::cerr << "warning: single-class evaluation set; no ROC curve written\n";
    }
  }
  return report;
}

}  // namespace fuse2d::pipeline
