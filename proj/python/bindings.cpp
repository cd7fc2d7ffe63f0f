#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fuse2d/error.hpp"
#include "fuse2d/pipeline.hpp"

namespace py = pybind11;
using namespace fuse2d;

namespace {

py::array_t<std::uint8_t> to_array(const RgbImage& img) {
  py::array_t<std::uint8_t> out({img.height, img.width, 3});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

Window make_window(const std::vector<double>& ppg, const std::vector<double>& eda, const std::vector<double>& acc) {
  Window w;
  w.subject_id = "py";
  w.ppg = ppg;
  w.eda = eda;
  w.acc = acc;
  return w;
}

py::dict report_dict(const EvalReport& r) {
  return py::module_::import("json").attr("loads")(report_to_json(r));
}

}  // namespace

PYBIND11_MODULE(_fuse2d, m) {
  m.doc() = "Multirate biosignal fusion into 2D images with a small CNN classifier";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);

  m.def("window_starts", [](int duration_s, int window_s, int stride_s) {
    return window_starts(duration_s, {window_s, stride_s});
  }, py::arg("duration_s"), py::arg("window_s") = 5, py::arg("stride_s") = 1);

  m.def("arrangements", [](const std::string& selector) {
    std::vector<std::string> codes;
    for (const auto& a : select_arrangements(selector)) codes.push_back(a.code());
    return codes;
  }, py::arg("selector") = "all");

  m.def("fuse_window", [](const std::vector<double>& ppg, const std::vector<double>& eda,
                          const std::vector<double>& acc, const std::string& arrangement) {
    const auto mat = assemble_matrix(normalize_window(make_window(ppg, eda, acc)), Arrangement::parse(arrangement), {});
    py::array_t<double> out({kMatrixSide, kMatrixSide});
    std::copy(mat.cells.begin(), mat.cells.end(), out.mutable_data());
    return out;
  }, py::arg("ppg"), py::arg("eda"), py::arg("acc"), py::arg("arrangement") = "EAP",
        "Normalized 32x32 signal matrix for one window (ppg 320, eda 20, acc magnitude 160 samples).");

  m.def("render_window", [](const std::vector<double>& ppg, const std::vector<double>& eda,
                            const std::vector<double>& acc, const std::string& arrangement, const std::string& scheme) {
    const auto img = pipeline::render_window(make_window(ppg, eda, acc), Arrangement::parse(arrangement), {},
                                             parse_color_scheme(scheme));
    return to_array(img.image);
  }, py::arg("ppg"), py::arg("eda"), py::arg("acc"), py::arg("arrangement") = "EAP", py::arg("scheme") = "custom",
        "128x128x3 uint8 image for one window.");

  m.def("custom_color", [](double v) { return custom_color(v); }, py::arg("v"));

  m.def("softmax", [](double a, double b) {
    const auto p = softmax<double>({a, b});
    return std::make_pair(p[0], p[1]);
  });

  m.def("metrics", [](const std::vector<int>& pred, const std::vector<int>& truth, int positive) {
    const auto cm = confusion_counts(pred, truth, positive);
    const auto r = classification_metrics(cm, true);
    py::dict d;
    d["tp"] = cm.tp;
    d["tn"] = cm.tn;
    d["fp"] = cm.fp;
    d["fn"] = cm.fn;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    d["accuracy"] = r.accuracy;
    return d;
  }, py::arg("pred"), py::arg("truth"), py::arg("positive") = 0);

  m.def("roc_auc", [](const std::vector<double>& scores, const std::vector<int>& truth, int positive) {
    return roc_auc(scores, truth, positive);
  }, py::arg("scores"), py::arg("truth"), py::arg("positive") = 0);

  m.def("gradcheck", [](std::uint64_t seed) {
    const auto r = run_standard_gradcheck(seed);
    return py::make_tuple(r.max_relative_error, r.parameters_checked);
  }, py::arg("seed") = 1, "Returns (max relative error, parameters checked).");

  m.def("synth", [](const std::filesystem::path& out, int subjects, int seconds, double separation,
                    std::uint64_t seed) {
    pipeline::SynthOptions o;
    o.out = out;
    o.config.subjects = subjects;
    o.config.seconds_per_condition = seconds;
    o.config.separation = separation;
    o.seed = seed;
    py::gil_scoped_release release;
    return pipeline::cmd_synth(o);
  }, py::arg("out"), py::arg("subjects") = 6, py::arg("seconds") = 60, py::arg("separation") = 1.0,
        py::arg("seed") = 0);

  m.def("images", [](const std::vector<std::filesystem::path>& data, const std::filesystem::path& out,
                     const std::string& arrangements, const std::string& scheme, int workers) {
    pipeline::ImagesOptions o;
    o.data = data;
    o.out = out;
    o.arrangements = arrangements;
    o.scheme = parse_color_scheme(scheme);
    o.workers = workers;
    py::gil_scoped_release release;
    return pipeline::cmd_images(o).images;
  }, py::arg("data"), py::arg("out"), py::arg("arrangements") = "EAP", py::arg("scheme") = "custom",
        py::arg("workers") = 1, "Renders PNGs and a manifest; returns the image count.");

  m.def("train", [](const std::filesystem::path& stage1, const std::filesystem::path& model_out, std::uint64_t seed,
                    const std::vector<std::filesystem::path>& stage2, const std::vector<std::string>& test_subjects,
                    const std::string& profile, int epochs, const std::string& validation) {
    pipeline::TrainOptions o;
    o.stage1 = stage1;
    o.stage2 = stage2;
    o.model_out = model_out;
    o.train.seed = seed;
    o.train.epochs = epochs;
    o.train.profile = profile == "full" ? Profile::Full : Profile::Tiny;
    o.test_subjects = test_subjects;
    o.validation = validation;
    py::gil_scoped_release release;
    const auto r = pipeline::cmd_train(o);
    std::vector<double> acc;
    for (const auto& e : r.history.epochs) acc.push_back(e.train_acc);
    return acc;
  }, py::arg("stage1"), py::arg("model_out"), py::arg("seed"), py::arg("stage2") = std::vector<std::filesystem::path>{},
        py::arg("test_subjects") = std::vector<std::string>{}, py::arg("profile") = "tiny", py::arg("epochs") = 16,
        py::arg("validation") = "auto", "Trains and saves a model; returns per-epoch training accuracy.");

  m.def("evaluate", [](const std::filesystem::path& model, const std::filesystem::path& data,
                       const std::vector<std::string>& subjects, const std::string& positive, bool allow_leak,
                       const std::filesystem::path& report_out) {
    pipeline::EvalOptions o;
    o.model = model;
    o.data = data;
    o.subjects = subjects;
    o.positive = positive == "stress" ? 1 : 0;
    o.allow_leak = allow_leak;
    o.report_out = report_out;
    EvalReport r;
    {
      py::gil_scoped_release release;
      r = pipeline::cmd_eval(o);
    }
    return report_dict(r);
  }, py::arg("model"), py::arg("data"), py::arg("subjects") = std::vector<std::string>{},
        py::arg("positive") = "nostress", py::arg("allow_leak") = false,
        py::arg("report_out") = std::filesystem::path{});
}
