#include <cstring>
#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fanet/gradcheck.hpp"
#include "fanet/tensor_io.hpp"
#include "fanet/train.hpp"

namespace py = pybind11;
using namespace fanet;

namespace {

Tensor tensor_from_array(py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
    const auto info = arr.request();
    if (info.ndim < 1 || info.ndim > 4) {
        throw ValidationError("expected a 1..4-dimensional float array");
    }
    int dims[4] = {1, 1, 1, 1};
    for (int i = 0; i < info.ndim; ++i) {
        dims[4 - info.ndim + i] = static_cast<int>(info.shape[static_cast<std::size_t>(i)]);
    }
    Tensor t(Shape{dims[0], dims[1], dims[2], dims[3]});
    std::memcpy(t.data().data(), info.ptr, static_cast<std::size_t>(info.size) * sizeof(float));
    return t;
}

py::array_t<float> array_from_tensor(const Tensor& t) {
    const Shape s = t.shape();
    py::array_t<float> arr({s.b, s.c, s.h, s.w});
    std::memcpy(arr.mutable_data(), t.data().data(), t.data().size() * sizeof(float));
    return arr;
}

py::dict report_to_dict(const MetricsReport& r) {
    py::dict d;
    d["precision"] = r.precision;
    d["recall"] = r.recall;
    d["f1"] = r.f1;
    d["iou"] = r.iou;
    d["degenerate"] = r.degenerate;
    py::dict c;
    c["tp"] = r.counts.tp;
    c["fp"] = r.counts.fp;
    c["fn"] = r.counts.fn;
    c["tn"] = r.counts.tn;
    d["counts"] = c;
    return d;
}

class PyModel {
public:
    PyModel(const std::string& config_text, std::uint64_t seed)
        : config_(Config::from_string(config_text, "<python>")),
          model_(model_config_from(config_), seed) {}

    explicit PyModel(const std::string& checkpoint_path) {
        Checkpoint ck = load_checkpoint(checkpoint_path);
        config_ = ck.config;
        TrainConfig tc = TrainConfig::from_config(config_);
        model_ = FanetModel<float>(model_config_from(config_), tc.seed);
        Adam<float> opt(model_.params());
        std::mt19937 rng;
        restore(ck, model_, opt, rng);
    }

    py::tuple forward(py::array_t<float, py::array::c_style | py::array::forcecast> image) {
        Tensor x = tensor_from_array(image);
        SegMap out = model_.forward(nullptr, x);
        return py::make_tuple(array_from_tensor(out.logits), array_from_tensor(out.probabilities));
    }

    py::tuple predict(py::array_t<float, py::array::c_style | py::array::forcecast> image) {
        Tensor x = tensor_from_array(image);
        SegMap out = predict_padded(model_, x);
        return py::make_tuple(array_from_tensor(out.logits), array_from_tensor(out.probabilities));
    }

    std::vector<std::string> param_names() {
        std::vector<std::string> names;
        for (const auto& p : model_.params()) names.push_back(p.name);
        return names;
    }

    std::string config_text() const { return config_.serialize(); }

private:
    Config config_;
    FanetModel<float> model_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "building-extraction network: native core";

    py::register_exception<FanetError>(m, "FanetError");

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_text") = "",
             py::arg("seed") = 0)
        .def_static("from_checkpoint",
                    [](const std::string& path) { return PyModel(path); }, py::arg("path"))
        .def("forward", &PyModel::forward, py::arg("image"),
             "run the network on a (B,3,H,W) float image in [0,1]; returns (logits, probabilities)")
        .def("predict", &PyModel::predict, py::arg("image"),
             "like forward, but reflect-pads to a multiple of 32 and crops back")
        .def("param_names", &PyModel::param_names)
        .def("config_text", &PyModel::config_text);

    m.def("gradcheck",
          [](const std::string& selector, std::uint64_t seed) {
              GradcheckReport r = run_gradcheck(selector, seed);
              py::list rows;
              for (const auto& row : r.rows) {
                  py::dict d;
                  d["module"] = row.module;
                  d["leaf"] = row.leaf;
                  d["max_rel"] = row.max_rel;
                  rows.append(d);
              }
              py::dict out;
              out["pass"] = r.pass;
              out["rows"] = rows;
              out["tolerance"] = r.tolerance;
              return out;
          },
          py::arg("selector") = "all", py::arg("seed") = 0);

    m.def("train",
          [](const std::string& config_text, const std::string& manifest_path,
             const std::string& out_dir, const std::string& resume) {
              Config cfg = Config::from_string(config_text, "<python>");
              std::ostringstream log;
              TrainResult r = train_model(cfg, load_manifest(manifest_path), out_dir, log, resume);
              py::dict out;
              out["epochs_run"] = r.epochs_run;
              out["final_loss"] = r.final_loss;
              out["best_val_iou"] = r.best_val_iou;
              out["last_checkpoint"] = r.last_checkpoint;
              out["best_checkpoint"] = r.best_checkpoint;
              out["log"] = log.str();
              return out;
          },
          py::arg("config_text"), py::arg("manifest_path"), py::arg("out_dir"),
          py::arg("resume") = "",
          "train on a manifest; returns a summary dict including the training log");

    m.def("generate_synthetic",
          [](const std::string& config_text, const std::string& out_dir) {
              Config cfg = Config::from_string(config_text, "<python>");
              SynthSpec spec = SynthSpec::from_config(cfg);
              return generate_synthetic(spec, out_dir);
          },
          py::arg("config_text"), py::arg("out_dir"),
          "write a synthetic dataset; returns the manifest path");

    m.def("evaluate_masks",
          [](py::array_t<float, py::array::c_style | py::array::forcecast> pred,
             py::array_t<float, py::array::c_style | py::array::forcecast> truth,
             double threshold) {
              ConfusionCounts c;
              accumulate(binarize(tensor_from_array(pred), threshold), tensor_from_array(truth), c);
              return report_to_dict(report(c));
          },
          py::arg("pred"), py::arg("truth"), py::arg("threshold") = 0.5,
          "confusion metrics of a probability map against a binary mask");

    m.def("read_ftns", [](const std::string& path) { return array_from_tensor(read_ftns(path)); },
          py::arg("path"));
    m.def("write_ftns",
          [](const std::string& path,
             py::array_t<float, py::array::c_style | py::array::forcecast> arr) {
              write_ftns(path, tensor_from_array(arr));
          },
          py::arg("path"), py::arg("array"));
}
