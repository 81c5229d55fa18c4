#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "disque/color.hpp"
#include "disque/distortion.hpp"
#include "disque/egip.hpp"
#include "disque/evalharness.hpp"
#include "disque/features.hpp"
#include "disque/image_io.hpp"
#include "disque/regress.hpp"
#include "disque/synth.hpp"
#include "disque/tonemap.hpp"
#include "disque/trainer.hpp"

namespace py = pybind11;
using namespace disque;

namespace {

// HxWx3 float arrays in [0,1] are the numpy-side pixel currency.
Image image_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a,
                       const std::string& colorspace) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw py::value_error("expected an HxWx3 float array");
    Image img;
    img.pixels = cv::Mat(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
                         CV_32FC3);
    std::memcpy(img.pixels.data, a.data(), sizeof(float) * a.size());
    clip01(img.pixels);
    img.colorspace = colorspace_from_string(colorspace);
    return img;
}

py::array_t<float> array_from_image(const Image& img) {
    py::array_t<float> a({img.rows(), img.cols(), 3});
    std::memcpy(a.mutable_data(), img.pixels.data,
                sizeof(float) * static_cast<size_t>(img.rows()) * img.cols() * 3);
    return a;
}

class PyModel {
public:
    explicit PyModel(const std::string& checkpoint_path) {
        model_ = load_model(checkpoint_path, &meta_);
    }

    std::vector<double> extract(const py::array_t<float>& a, const std::string& cs) {
        const Image img = image_from_array(a, cs);
        return extract_features(img, model_);
    }

    py::array_t<float> reconstruct(const py::array_t<float>& a, const std::string& cs) {
        const Image img = image_from_array(a, cs);
        torch::NoGradGuard no_grad;
        return array_from_image(tensor_to_image(model_->reconstruct(image_to_tensor(img))));
    }

    py::array_t<float> egip(const py::array_t<float>& example_src,
                            const py::array_t<float>& example_tgt,
                            const py::array_t<float>& input_src, const std::string& mode,
                            const std::string& cs) {
        EgipRequest req;
        req.example_src = image_from_array(example_src, cs);
        req.example_tgt = image_from_array(example_tgt, "srgb");
        req.input_src = image_from_array(input_src, cs);
        req.mode = egip_mode_from_string(mode);
        return array_from_image(egip_apply(req, model_));
    }

    int feature_dim() const { return 4 * meta_.net.appearance_dim(); }
    int patch_size() const { return meta_.net.patch_size; }

private:
    DualHeadUNet model_{nullptr};
    Checkpoint meta_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "disque core bindings: colorspaces, distortion bank, tone mapping, "
              "feature extraction, example-guided processing";

    m.def("srgb_eotf", [](double v) { return srgb_eotf(v); });
    m.def("srgb_oetf", [](double v) { return srgb_oetf(v); });
    m.def("pq_eotf", [](double v) { return pq_eotf(v); });
    m.def("pq_oetf", [](double v) { return pq_oetf(v); });

    m.def(
        "srgb_to_linear",
        [](const py::array_t<float>& a) {
            return array_from_image(srgb_to_linear(image_from_array(a, "srgb")));
        },
        py::arg("image"));
    m.def(
        "linear_to_srgb",
        [](const py::array_t<float>& a) {
            return array_from_image(linear_to_srgb(image_from_array(a, "linear")));
        },
        py::arg("image"));
    m.def(
        "pq_to_linear",
        [](const py::array_t<float>& a, double peak_nits) {
            return array_from_image(pq_to_linear(image_from_array(a, "pq"), peak_nits));
        },
        py::arg("image"), py::arg("peak_nits") = 1000.0);
    m.def(
        "linear_to_pq",
        [](const py::array_t<float>& a, double peak_nits) {
            return array_from_image(linear_to_pq(image_from_array(a, "linear"), peak_nits));
        },
        py::arg("image"), py::arg("peak_nits") = 1000.0);

    m.def(
        "distort",
        [](const py::array_t<float>& a, const std::string& spec) {
            return array_from_image(
                apply_transform(image_from_array(a, "srgb"), TransformSpec::parse(spec)));
        },
        py::arg("image"), py::arg("spec"));
    m.def(
        "sample_transform",
        [](std::uint64_t seed) { return sample_transform(seed).serialize(); },
        py::arg("seed"));
    m.def(
        "tone_map",
        [](const py::array_t<float>& a, const std::string& spec, double peak_nits) {
            return array_from_image(
                tone_map(image_from_array(a, "pq"), TmoSpec::parse(spec), peak_nits));
        },
        py::arg("image"), py::arg("spec"), py::arg("peak_nits") = 1000.0);

    m.def(
        "screen_image",
        [](const py::array_t<float>& a, double theta_over, double theta_under,
           double sat_threshold) {
            const auto rep = screen_image(image_from_array(a, "srgb"), theta_over,
                                          theta_under, sat_threshold);
            py::dict d;
            d["is_grayscale"] = rep.is_grayscale;
            d["overexposed_fraction"] = rep.overexposed_fraction;
            d["underexposed_fraction"] = rep.underexposed_fraction;
            d["accepted"] = rep.accepted;
            return d;
        },
        py::arg("image"), py::arg("theta_over") = 0.30, py::arg("theta_under") = 0.30,
        py::arg("sat_threshold") = 0.02);

    m.def(
        "metrics",
        [](const std::vector<double>& pred, const std::vector<double>& truth) {
            const auto m2 = compute_metrics(pred, truth);
            return py::make_tuple(m2.pcc, m2.srocc, m2.rmse);
        },
        py::arg("pred"), py::arg("truth"));

    m.def("fr_feature", &fr_feature, py::arg("z_ref"), py::arg("z_dis"));

    m.def(
        "synth_image",
        [](int rows, int cols, std::uint64_t seed) {
            return array_from_image(synth_image(rows, cols, seed));
        },
        py::arg("rows"), py::arg("cols"), py::arg("seed"));

    m.def(
        "train",
        [](const std::string& config_json, const std::string& manifest_path,
           const std::string& out_dir) {
            TrainConfig cfg = TrainConfig::from_json(config_json);
            Manifest manifest = Manifest::load(manifest_path);
            Trainer trainer(cfg, manifest, out_dir);
            const auto steps = trainer.run();
            return py::make_tuple(steps, out_dir + "/checkpoint_latest.pt");
        },
        py::arg("config_json"), py::arg("manifest_path"), py::arg("out_dir"),
        "Runs training to completion; returns (steps, checkpoint_path).");

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&>(), py::arg("checkpoint_path"))
        .def("extract_features", &PyModel::extract, py::arg("image"),
             py::arg("colorspace") = "srgb")
        .def("reconstruct", &PyModel::reconstruct, py::arg("image"),
             py::arg("colorspace") = "srgb")
        .def("egip", &PyModel::egip, py::arg("example_src"), py::arg("example_tgt"),
             py::arg("input_src"), py::arg("mode") = "mixing",
             py::arg("colorspace") = "srgb")
        .def_property_readonly("feature_dim", &PyModel::feature_dim)
        .def_property_readonly("patch_size", &PyModel::patch_size);

    py::register_exception<Error>(m, "DisqueError");
}
