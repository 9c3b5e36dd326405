#include "metrack/cli.hpp"
#include "metrack/config.hpp"
#include "metrack/eval.hpp"
#include "metrack/features.hpp"
#include "metrack/image.hpp"
#include "metrack/linalg.hpp"
#include "metrack/metric.hpp"
#include "metrack/tracker.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>
#include <tuple>

namespace py = pybind11;
using namespace metrack;

namespace {

using BoxTuple = std::tuple<double, double, double, double>;

BoundingBox to_box(const BoxTuple& t) {
    return {std::get<0>(t), std::get<1>(t), std::get<2>(t), std::get<3>(t)};
}

BoxTuple from_box(const BoundingBox& b) { return {b.x, b.y, b.w, b.h}; }

BoxSequence to_sequence(const std::map<std::int64_t, BoxTuple>& boxes) {
    BoxSequence out;
    for (const auto& [frame, box] : boxes) out[frame] = to_box(box);
    return out;
}

// Thin wrapper so the Python object owns its tracker by value.
class PyTracker {
public:
    PyTracker(const Mat& frame, const BoxTuple& box, const std::string& config_text)
        : tracker_(Tracker::init(GrayFrame::from_matrix(frame), to_box(box),
                                 parse_config(config_text, "<config>").tracker)) {}

    BoxTuple step(const Mat& frame) {
        tracker_.step(GrayFrame::from_matrix(frame));
        return from_box(tracker_.current_box());
    }

    BoxTuple box() const { return from_box(tracker_.current_box()); }
    double score(const Vec& feature) const { return tracker_.score(feature); }
    Mat metric() const { return tracker_.metric().matrix(); }
    std::int64_t frame_index() const { return tracker_.frame_index(); }
    std::size_t fg_size() const { return tracker_.fg_buffer().size(); }
    std::size_t bg_size() const { return tracker_.bg_buffer().size(); }
    double consistency_error() const { return tracker_.consistency_error(); }

private:
    Tracker tracker_;
};

}  // namespace

PYBIND11_MODULE(_metrack, m) {
    m.doc() = "Online metric-learning tracker";

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def("hog405", [](const Mat& patch) {
        if (patch.rows() != kPatchSide || patch.cols() != kPatchSide) {
            throw InputError("hog405 expects a 32x32 patch");
        }
        Patch p;
        p.pixels = patch;
        return hog405(p);
    }, py::arg("patch"), "405-dimensional HOG descriptor of a 32x32 patch.");

    m.def("featurize", [](const Mat& frame, const BoxTuple& box, const std::string& mode) {
        return featurize(GrayFrame::from_matrix(frame), to_box(box), parse_feature_mode(mode));
    }, py::arg("frame"), py::arg("box"), py::arg("mode") = "hog405",
       "Feature vector of a box in a [0, 1] grayscale frame.");

    m.def("solve_regression", [](const Mat& basis, const Mat& metric, const Vec& y) {
        const RegressionSolution s = solve_regression_dense(basis, MetricMatrix(metric), y);
        return std::make_tuple(s.coeffs, s.residual);
    }, py::arg("basis"), py::arg("metric"), py::arg("y"),
       "Coefficients and residual of min_x (y - P x)^T M (y - P x).");

    m.def("triplet_loss", [](const Mat& metric, const Vec& a, const Vec& p, const Vec& n) {
        return triplet_loss(MetricMatrix(metric), Triplet{a, p, n});
    }, py::arg("metric"), py::arg("anchor"), py::arg("positive"), py::arg("negative"));

    m.def("pa_update", [](const Mat& metric, const Vec& a, const Vec& p, const Vec& n, double c) {
        MetricMatrix updated(metric);
        const PAStep step = pa_update(updated, Triplet{a, p, n}, PAConfig{c});
        return std::make_tuple(updated.matrix(), step.eta, step.loss);
    }, py::arg("metric"), py::arg("anchor"), py::arg("positive"), py::arg("negative"),
       py::arg("c") = 1.0, "One passive-aggressive step; returns (metric, eta, loss).");

    m.def("cle", [](const BoxTuple& a, const BoxTuple& b) { return cle(to_box(a), to_box(b)); });
    m.def("vor", [](const BoxTuple& a, const BoxTuple& b) {
        return vor_overlap(to_box(a), to_box(b));
    });
    m.def("summarize", [](const std::map<std::int64_t, BoxTuple>& preds,
                          const std::map<std::int64_t, BoxTuple>& gt) {
        const SequenceReport r = summarize(to_sequence(preds), to_sequence(gt));
        py::dict d;
        d["mean_cle"] = r.mean_cle;
        d["mean_vor"] = r.mean_vor;
        d["success_rate"] = r.success_rate;
        d["frames_evaluated"] = r.frames_evaluated;
        d["frames_missing_gt"] = r.frames_missing_gt;
        return d;
    }, py::arg("predictions"), py::arg("ground_truth"));

    m.def("read_frame", [](const std::filesystem::path& path) { return load_frame(path).pixels(); });
    m.def("write_pgm", [](const std::filesystem::path& path, const Mat& frame) {
        write_pgm(path, GrayFrame::from_matrix(frame));
    });
    m.def("default_config", &default_config_text);

    m.def("run_cli", [](std::vector<std::string> args) {
        args.insert(args.begin(), "metrack");
        std::vector<char*> argv;
        for (std::string& a : args) argv.push_back(a.data());
        return cli::run(static_cast<int>(argv.size()), argv.data());
    }, py::arg("args"), "Runs the command-line interface and returns its exit code.");

    py::class_<PyTracker>(m, "Tracker")
        .def(py::init<const Mat&, const BoxTuple&, const std::string&>(), py::arg("frame"),
             py::arg("box"), py::arg("config") = "")
        .def("step", &PyTracker::step, py::arg("frame"))
        .def("score", &PyTracker::score, py::arg("feature"))
        .def("consistency_error", &PyTracker::consistency_error)
        .def_property_readonly("box", &PyTracker::box)
        .def_property_readonly("metric", &PyTracker::metric)
        .def_property_readonly("frame_index", &PyTracker::frame_index)
        .def_property_readonly("fg_size", &PyTracker::fg_size)
        .def_property_readonly("bg_size", &PyTracker::bg_size);
}
