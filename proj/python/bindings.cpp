// Copyright 2026 The mofe-restore Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mofe/degrade.hpp"
#include "mofe/errors.hpp"
#include "mofe/frequency.hpp"
#include "mofe/guidance.hpp"
#include "mofe/image.hpp"
#include "mofe/losses.hpp"
#include "mofe/model.hpp"
#include "mofe/train.hpp"

namespace py = pybind11;
using namespace mofe;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Shape shape_of(const Array& a) {
  Shape s;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) s.push_back(static_cast<std::size_t>(a.shape(i)));
  return s;
}

Tensor<float> to_tensor(const Array& a) {
  return Tensor<float>::from_data(shape_of(a), std::vector<float>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor<float>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Image to_image(const Array& a) {
  if (a.ndim() != 3) throw DimensionError("image must be [C, H, W], got rank " + std::to_string(a.ndim()));
  Image img(a.shape(0), a.shape(1), a.shape(2));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

Array from_image(const Image& img) {
  Array out({img.channels, img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

GuidanceTriplet triplet_of(const std::vector<float>& i, const std::vector<float>& j, const std::vector<float>& a) {
  return {i, j, a};
}

}  // namespace

PYBIND11_MODULE(_mofe, m) {
  m.doc() = "Frequency-expert image restoration core";

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);

  m.def("dwt_haar", [](const Array& x) { return to_array(dwt_haar_stacked(to_tensor(x))); },
        "Stacked one-level Haar transform of a [C, H, W] array: [LL, LH, HL, HH] along channels.");
  m.def("idwt_haar", [](const Array& x) { return to_array(idwt_haar_stacked(to_tensor(x))); });
  m.def(
      "dft2",
      [](const Array& x) {
        auto s = dft2(to_tensor(x));
        return py::make_tuple(to_array(s.real), to_array(s.imag));
      },
      "Unnormalized 2D DFT per channel; returns (real, imag).");

  m.def("psnr", [](const Array& a, const Array& b) { return psnr(to_image(a), to_image(b)); });
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a), to_image(b)); });
  m.def("read_ppm", [](const std::string& path) { return from_image(read_ppm(path)); });
  m.def("write_ppm", [](const std::string& path, const Array& a) { write_ppm(path, to_image(a)); });

  m.def("standard_combos", &standard_combos);
  m.def("parse_combo", [](const std::string& code) { return parse_combo(code).labels; });
  m.def(
      "degrade",
      [](const Array& clean, const std::string& combo, std::uint64_t seed) {
        const Image img = to_image(clean);
        return from_image(apply_recipe(img, sample_recipe(parse_combo(combo), img.height, seed)));
      },
      py::arg("clean"), py::arg("combo"), py::arg("seed"));
  m.def("procedural_image", [](std::size_t size, std::uint64_t seed) { return from_image(procedural_image(size, seed)); });

  py::class_<GuidanceTriplet>(m, "GuidanceTriplet")
      .def(py::init(&triplet_of), py::arg("e_image"), py::arg("e_joint"), py::arg("e_answer"))
      .def_readwrite("e_image", &GuidanceTriplet::e_image)
      .def_readwrite("e_joint", &GuidanceTriplet::e_joint)
      .def_readwrite("e_answer", &GuidanceTriplet::e_answer);

  py::class_<EmbeddingStore>(m, "EmbeddingStore")
      .def(py::init([](std::size_t image, std::size_t joint, std::size_t answer) {
             return EmbeddingStore(EmbeddingDims{image, joint, answer});
           }),
           py::arg("dim_image") = 64, py::arg("dim_joint") = 64, py::arg("dim_answer") = 64)
      .def("add", &EmbeddingStore::add, py::arg("id"), py::arg("image_path"), py::arg("labels"), py::arg("triplet"))
      .def("__len__", &EmbeddingStore::size)
      .def("__contains__", &EmbeddingStore::contains)
      .def("triplet", &EmbeddingStore::triplet)
      .def("ids",
           [](const EmbeddingStore& s) {
             std::vector<std::string> ids;
             for (const auto& r : s.records()) ids.push_back(r.id);
             return ids;
           })
      .def("write", &EmbeddingStore::write)
      .def_static("read", &EmbeddingStore::read);

  py::class_<RestorationModel<float>>(m, "Model")
      .def_static(
          "build", [](const std::string& profile, std::uint64_t seed) {
            return RestorationModel<float>::build(ModelConfig::profile(profile), seed);
          },
          py::arg("profile") = "toy", py::arg("seed") = 0)
      .def_static("load",
                  [](const std::string& path) { return model_from_checkpoint<float>(load_checkpoint(path)); })
      .def("save", [](const RestorationModel<float>& model, const std::string& path) { save_checkpoint(path, model); })
      .def("config", [](const RestorationModel<float>& model) { return model.config().to_json().dump(); })
      .def("num_parameters",
           [](const RestorationModel<float>& model) {
             std::size_t n = 0;
             for (const auto& p : model.parameters()) n += p.tensor.numel();
             return n;
           })
      .def("restore",
           [](const RestorationModel<float>& model, const Array& degraded, const GuidanceTriplet& g) {
             return from_image(restore(model, to_image(degraded), g));
           })
      .def("router_weights", [](const RestorationModel<float>& model, const GuidanceTriplet& g) {
        NoGradGuard guard;
        std::vector<std::vector<float>> out;
        for (const auto* site : model.mofe_modules()) {
          const auto w = site->route(GuidanceTensors<float>::from(g).answer);
          out.push_back(w.values());
        }
        return out;
      });
}
