#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "unseg/errors.hpp"
#include "unseg/eval.hpp"
#include "unseg/graph.hpp"
#include "unseg/io.hpp"
#include "unseg/loss.hpp"
#include "unseg/model.hpp"
#include "unseg/pipeline.hpp"
#include "unseg/synthetic.hpp"

namespace py = pybind11;
using namespace unseg;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

SegmentationMask mask_from_array(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("mask must be a 2-D uint8 array (height, width)");
  SegmentationMask m(static_cast<std::uint32_t>(a.shape(1)), static_cast<std::uint32_t>(a.shape(0)));
  const auto* src = a.data();
  for (std::size_t i = 0; i < m.pixels.size(); ++i) m.pixels[i] = src[i] ? 1 : 0;
  return m;
}

py::array_t<std::uint8_t> mask_to_array(const SegmentationMask& m) {
  py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(m.height), static_cast<py::ssize_t>(m.width)});
  std::copy(m.pixels.begin(), m.pixels.end(), a.mutable_data());
  return a;
}

RgbImage image_from_array(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must be a (height, width, 3) uint8 array");
  RgbImage img(static_cast<std::uint32_t>(a.shape(1)), static_cast<std::uint32_t>(a.shape(0)));
  std::copy(a.data(), a.data() + img.rgb.size(), img.rgb.begin());
  return img;
}

py::array_t<std::uint8_t> image_to_array(const RgbImage& img) {
  py::array_t<std::uint8_t> a({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width),
                               py::ssize_t{3}});
  std::copy(img.rgb.begin(), img.rgb.end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_unseg, m) {
  m.doc() = "Patch-graph GCN segmentation trained on a relaxed modularity objective";

  py::register_exception<Error>(m, "UnsegError", PyExc_RuntimeError);
  py::register_exception<EmptyGraph>(m, "EmptyGraph", PyExc_RuntimeError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", PyExc_ValueError);

  py::enum_<Activation>(m, "Activation")
      .value("SILU", Activation::SiLU)
      .value("SELU", Activation::SELU)
      .value("GELU", Activation::GELU)
      .value("RELU", Activation::ReLU);
  py::enum_<RefineMode>(m, "RefineMode").value("NONE", RefineMode::None).value("SMOOTH", RefineMode::Smooth);

  py::class_<PatchFeatureGrid>(m, "PatchFeatureGrid")
      .def(py::init([](const Matrix& data, std::uint32_t grid_h, std::uint32_t grid_w, std::uint32_t source_w,
                       std::uint32_t source_h, std::uint32_t patch_size) {
             PatchFeatureGrid f{grid_h, grid_w, data, source_w, source_h, patch_size};
             f.validate();
             return f;
           }),
           py::arg("data"), py::arg("grid_h"), py::arg("grid_w"), py::arg("source_image_w") = 0,
           py::arg("source_image_h") = 0, py::arg("patch_size") = 0)
      .def_readonly("grid_h", &PatchFeatureGrid::grid_h)
      .def_readonly("grid_w", &PatchFeatureGrid::grid_w)
      .def_readonly("data", &PatchFeatureGrid::data)
      .def_readonly("source_image_w", &PatchFeatureGrid::source_image_w)
      .def_readonly("source_image_h", &PatchFeatureGrid::source_image_h)
      .def_readonly("patch_size", &PatchFeatureGrid::patch_size);

  py::class_<PatchGraph>(m, "PatchGraph")
      .def(py::init([](const Matrix& a) { return PatchGraph::from_adjacency(a); }), py::arg("adjacency"))
      .def_readonly("adjacency", &PatchGraph::adjacency)
      .def_readonly("degrees", &PatchGraph::degrees)
      .def_readonly("edge_count", &PatchGraph::edge_count);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("tau", &TrainConfig::tau)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("lr", &TrainConfig::lr)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("k", &TrainConfig::k)
      .def_readwrite("activation", &TrainConfig::activation)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("restarts", &TrainConfig::restarts)
      .def_readwrite("refine", &TrainConfig::refine)
      .def_readwrite("keep_self_loops", &TrainConfig::keep_self_loops);

  py::class_<TrainResult>(m, "TrainResult")
      .def_property_readonly("assignment", [](const TrainResult& r) { return r.assignment.matrix(); })
      .def_readonly("loss_trace", &TrainResult::loss_trace)
      .def_readonly("initial_loss", &TrainResult::initial_loss)
      .def_readonly("final_loss", &TrainResult::final_loss)
      .def_readonly("adam_steps", &TrainResult::adam_steps);

  m.def("normalize_features", &normalize_features, py::arg("features"));
  m.def(
      "build_adjacency",
      [](const PatchFeatureGrid& f, double tau, bool keep_self_loops) {
        return build_adjacency(f, {tau, keep_self_loops});
      },
      py::arg("features"), py::arg("tau") = 0.5, py::arg("keep_self_loops") = false);
  m.def("normalized_adjacency", &normalized_adjacency, py::arg("graph"));
  m.def("modularity_quadratic", &modularity_quadratic, py::arg("graph"), py::arg("assignment"));
  m.def(
      "modularity_hard",
      [](const PatchGraph& g, const std::vector<int>& labels) { return modularity_hard(g, labels); },
      py::arg("graph"), py::arg("labels"));
  m.def("loss_value", &loss_value, py::arg("graph"), py::arg("assignment"));
  m.def("loss_grad", &loss_grad, py::arg("graph"), py::arg("assignment"));
  m.def("train_image", &train_image, py::arg("features"), py::arg("config") = TrainConfig{},
        py::call_guard<py::gil_scoped_release>());
  m.def(
      "hard_labels", [](const Matrix& c) { return hard_labels(c); }, py::arg("assignment"));
  m.def(
      "select_foreground",
      [](const std::vector<int>& labels, std::uint32_t h, std::uint32_t w) { return select_foreground(labels, h, w); },
      py::arg("labels"), py::arg("grid_h"), py::arg("grid_w"));
  m.def(
      "upsample_mask",
      [](const Matrix& c, int fg, std::uint32_t gh, std::uint32_t gw, std::uint32_t ow, std::uint32_t oh) {
        return mask_to_array(upsample_mask(c, fg, gh, gw, ow, oh));
      },
      py::arg("assignment"), py::arg("foreground"), py::arg("grid_h"), py::arg("grid_w"), py::arg("out_w"),
      py::arg("out_h"));
  m.def(
      "refine_edges",
      [](const U8Array& mask, const U8Array& image, RefineMode mode) {
        return mask_to_array(refine_edges(mask_from_array(mask), image_from_array(image), mode));
      },
      py::arg("mask"), py::arg("image"), py::arg("mode") = RefineMode::Smooth);
  m.def(
      "segment",
      [](const PatchFeatureGrid& f, const TrainConfig& cfg, std::optional<U8Array> image) {
        std::optional<RgbImage> img;
        if (image) img = image_from_array(*image);
        SegmentResult r;
        {
          py::gil_scoped_release release;
          r = segment(f, cfg, img ? &*img : nullptr);
        }
        return py::make_tuple(mask_to_array(r.mask), r.training.final_loss, r.foreground);
      },
      py::arg("features"), py::arg("config") = TrainConfig{}, py::arg("image") = py::none());
  m.def(
      "iou_per_class",
      [](const U8Array& pred, const U8Array& gt, int cls) {
        return iou_per_class(mask_from_array(pred), mask_from_array(gt), cls);
      },
      py::arg("pred"), py::arg("gt"), py::arg("cls"));
  m.def(
      "miou", [](const U8Array& pred, const U8Array& gt) { return miou(mask_from_array(pred), mask_from_array(gt)); },
      py::arg("pred"), py::arg("gt"));

  m.def("read_features", &read_features, py::arg("path"));
  m.def("write_features", &write_features, py::arg("features"), py::arg("path"));
  m.def(
      "read_mask", [](const std::filesystem::path& p) { return mask_to_array(read_mask(p)); }, py::arg("path"));
  m.def(
      "write_mask", [](const U8Array& mask, const std::filesystem::path& p) { write_mask(mask_from_array(mask), p); },
      py::arg("mask"), py::arg("path"));

  m.def(
      "make_planted_instance",
      [](std::uint64_t seed, std::uint32_t grid, double noise) {
        PlantedOptions opt;
        opt.grid = grid;
        opt.noise_sigma = noise;
        PlantedInstance inst = make_planted_instance(seed, opt);
        return py::make_tuple(inst.features, mask_to_array(inst.truth), image_to_array(inst.image));
      },
      py::arg("seed"), py::arg("grid") = 28, py::arg("noise_sigma") = 0.05);
}
