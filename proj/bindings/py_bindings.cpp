#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "deltaflux/canvas_oracle.hpp"
#include "deltaflux/engine.hpp"
#include "deltaflux/synth.hpp"

namespace py = pybind11;
using namespace dflx;

namespace {

Tensor tensor_from_numpy(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3) throw Error("expected a CHW float32 array");
    Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
             static_cast<int>(a.shape(2)));
    std::memcpy(t.data.data(), a.data(), t.size() * sizeof(float));
    return t;
}

py::array_t<float> tensor_to_numpy(const Tensor& t) {
    py::array_t<float> a({t.channels, t.height, t.width});
    std::memcpy(a.mutable_data(), t.data.data(), t.size() * sizeof(float));
    return a;
}

Homography homography_from(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.size() != 9) throw Error("homography expects 9 values (3x3 row-major)");
    Homography h;
    std::memcpy(h.m.data(), a.data(), 9 * sizeof(float));
    return h;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Sparse CNN inference on video frame differences with wrapped tile buffers";

    py::register_exception<Error>(m, "DeltafluxError");

    py::class_<ConvParams>(m, "ConvParams")
        .def(py::init<>())
        .def_readwrite("in_channels", &ConvParams::in_channels)
        .def_readwrite("out_channels", &ConvParams::out_channels)
        .def_readwrite("kernel_h", &ConvParams::kernel_h)
        .def_readwrite("kernel_w", &ConvParams::kernel_w)
        .def_readwrite("stride", &ConvParams::stride)
        .def_readwrite("padding", &ConvParams::padding)
        .def_readwrite("weights", &ConvParams::weights)
        .def_readwrite("bias", &ConvParams::bias);

    m.def("dense_conv2d", [](const py::array_t<float>& x, const ConvParams& p) {
        return tensor_to_numpy(dense_conv2d(tensor_from_numpy(x), p));
    });
    m.def("dense_relu",
          [](const py::array_t<float>& x) { return tensor_to_numpy(dense_relu(tensor_from_numpy(x))); });
    m.def("dense_maxpool", [](const py::array_t<float>& x, int k, int s) {
        return tensor_to_numpy(dense_maxpool(tensor_from_numpy(x), k, s));
    });
    m.def("dense_avgpool", [](const py::array_t<float>& x, int k, int s) {
        return tensor_to_numpy(dense_avgpool(tensor_from_numpy(x), k, s));
    });
    m.def("dense_upsample_nearest", [](const py::array_t<float>& x, int f) {
        return tensor_to_numpy(dense_upsample_nearest(tensor_from_numpy(x), f));
    });

    m.def("wrap_tile", [](int64_t tx, int64_t ty, int rows, int cols) {
        return wrap_tile({tx, ty}, GridSpec{1, 1, rows, cols});
    });

    m.def("save_tensor",
          [](const py::array_t<float>& x, const std::string& path) {
              save_tensor(tensor_from_numpy(x), path);
          });
    m.def("load_tensor", [](const std::string& path) { return tensor_to_numpy(load_tensor(path)); });
    m.def("load_frame", [](const std::string& path) { return tensor_to_numpy(load_frame(path)); });
    m.def("save_ppm", [](const py::array_t<float>& x, const std::string& path) {
        save_ppm(tensor_from_numpy(x), path);
    });

    py::class_<EngineConfig>(m, "EngineConfig")
        .def(py::init<>())
        .def_readwrite("tile_size", &EngineConfig::tile_size)
        .def_readwrite("grid_rows", &EngineConfig::grid_rows)
        .def_readwrite("grid_cols", &EngineConfig::grid_cols)
        .def_readwrite("input_threshold", &EngineConfig::input_threshold)
        .def_readwrite("default_threshold", &EngineConfig::default_threshold)
        .def_readwrite("override_net_thresholds", &EngineConfig::override_net_thresholds)
        .def_readwrite("mask_dilation", &EngineConfig::mask_dilation)
        .def_readwrite("roi_enabled", &EngineConfig::roi_enabled)
        .def_readwrite("noise_suppression", &EngineConfig::noise_suppression)
        .def_readwrite("padded_convolutions", &EngineConfig::padded_convolutions);

    py::class_<NetworkSpec>(m, "NetworkSpec");
    m.def("load_network", &load_network, py::arg("net_path"), py::arg("weights_dir") = "");

    m.def("run_dense", [](const NetworkSpec& spec, int tile_size, const py::array_t<float>& x) {
        return tensor_to_numpy(run_dense(validate(spec, tile_size), tensor_from_numpy(x)));
    });

    py::class_<DeltaEngine>(m, "DeltaEngine")
        .def(py::init<const NetworkSpec&, const EngineConfig&>())
        .def(
            "run_frame",
            [](DeltaEngine& e, const py::array_t<float>& frame, const py::array_t<float>& h) {
                const FrameResult r = e.run_frame(tensor_from_numpy(frame), homography_from(h));
                py::dict d;
                d["output"] = tensor_to_numpy(r.output);
                d["origin"] = py::make_tuple(r.place.origin.ty, r.place.origin.tx);
                d["update_rate"] = r.update_rate;
                d["conv_flops"] = r.flops.total;
                d["dense_flops"] = r.flops.dense_total;
                d["fresh"] = r.events.fresh;
                d["evicted"] = r.events.evicted;
                d["reset"] = r.events.reset;
                return d;
            },
            py::arg("frame"), py::arg("homography"))
        .def("reset", &DeltaEngine::reset);

    m.def("identity_homography", [] {
        py::array_t<float> a({3, 3});
        const Homography h = Homography::identity();
        std::memcpy(a.mutable_data(), h.m.data(), 9 * sizeof(float));
        return a;
    });
    m.def("translation_homography", [](float dx, float dy) {
        py::array_t<float> a({3, 3});
        const Homography h = Homography::translation(dx, dy);
        std::memcpy(a.mutable_data(), h.m.data(), 9 * sizeof(float));
        return a;
    });
}
