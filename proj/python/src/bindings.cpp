// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fibereq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fibereq/activations.hpp"
#include "fibereq/channel.hpp"
#include "fibereq/config.hpp"
#include "fibereq/io.hpp"
#include "fibereq/metrics.hpp"
#include "fibereq/model.hpp"

namespace py = pybind11;
using namespace fibereq;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Scalars in, float out; arrays keep their shape.
py::object map_array(const act::ActivationSpec& s, const DArray& x, bool gradient) {
  if (x.ndim() == 0) {
    const double v = *x.data();
    return py::float_(gradient ? act::grad(s, v) : act::eval(s, v));
  }
  DArray y(x.request().shape);
  const auto n = static_cast<std::size_t>(x.size());
  if (gradient) {
    act::grad_n(s, x.data(), y.mutable_data(), n);
  } else {
    act::eval_n(s, x.data(), y.mutable_data(), n);
  }
  return std::move(y);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.attr("__version__") = FIBEREQ_VERSION;

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  // metrics
  m.def("q_factor", &q_factor, py::arg("ber"));
  m.def("ber_from_q", &ber_from_q, py::arg("q_db"));
  m.def("erfc_inv", &erfc_inv, py::arg("z"));
  m.def("throughput", &throughput, py::arg("clock_hz"), py::arg("qam_order"), py::arg("n_out"));
  m.def("n_fpga", &n_fpga, py::arg("target_bps"), py::arg("achieved_bps"), py::arg("utilization"));
  m.def(
      "ber",
      [](const CVec& predicted, const Bits& bits) { return ber(predicted, bits); },
      py::arg("predicted"), py::arg("reference_bits"));

  // 16-QAM
  m.def("generate_bits", &generate_bits, py::arg("n_bits"), py::arg("seed"));
  m.def(
      "map_16qam", [](const Bits& b) { return map_16qam(b); }, py::arg("bits"));
  m.def(
      "demap_16qam", [](const CVec& s) { return demap_16qam(s); }, py::arg("symbols"));

  // activations
  py::enum_<act::Function>(m, "Function")
      .value("tanh", act::Function::Tanh)
      .value("sigmoid", act::Function::Sigmoid);
  py::enum_<act::Family>(m, "Family")
      .value("exact", act::Family::Exact)
      .value("taylor", act::Family::Taylor)
      .value("pwl", act::Family::Pwl)
      .value("lut", act::Family::Lut);

  py::class_<act::ActivationSpec>(m, "Activation")
      .def_property_readonly("label", &act::ActivationSpec::label)
      .def_property_readonly("function", [](const act::ActivationSpec& s) { return s.function; })
      .def("__call__", [](const act::ActivationSpec& s, const DArray& x) { return map_array(s, x, false); })
      .def("grad", [](const act::ActivationSpec& s, const DArray& x) { return map_array(s, x, true); })
      .def("to_json", [](const act::ActivationSpec& s) { return activation_to_json(s); })
      .def_static("from_json", &activation_from_json)
      .def("__repr__", [](const act::ActivationSpec& s) { return "<Activation " + s.label() + ">"; });

  m.def("exact", &act::make_exact, py::arg("function"));
  m.def("taylor", &act::make_taylor, py::arg("function"), py::arg("order"), py::arg("boundary"));
  m.def("default_taylor_boundary", &act::default_taylor_boundary, py::arg("function"), py::arg("order"));
  m.def("pwl", &act::make_pwl, py::arg("function"), py::arg("n_segments"));
  m.def(
      "lut", [](act::Function f, int bits) { return act::build_lut(f, bits); }, py::arg("function"),
      py::arg("n_bits"));
  m.def(
      "lut",
      [](act::Function f, int bits, double lo, double hi) { return act::build_lut(f, bits, lo, hi); },
      py::arg("function"), py::arg("n_bits"), py::arg("x_min"), py::arg("x_max"));

  // models
  py::enum_<nn::Architecture>(m, "Architecture")
      .value("bilstm_cnn", nn::Architecture::BiLstmCnn)
      .value("deep_cnn", nn::Architecture::DeepCnn);

  py::class_<nn::ModelDims>(m, "ModelDims")
      .def(py::init<>())
      .def_readwrite("features", &nn::ModelDims::features)
      .def_readwrite("window", &nn::ModelDims::window)
      .def_readwrite("hidden", &nn::ModelDims::hidden)
      .def_readwrite("hidden_kernel", &nn::ModelDims::hidden_kernel)
      .def_readwrite("out_kernel", &nn::ModelDims::out_kernel)
      .def_readwrite("outputs", &nn::ModelDims::outputs)
      .def_property_readonly("n_out", &nn::ModelDims::n_out);

  py::class_<nn::EqualizerModel>(m, "Model")
      .def_static("create", &nn::EqualizerModel::create, py::arg("architecture"),
                  py::arg("dims") = nn::ModelDims{}, py::arg("seed") = 0)
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const nn::EqualizerModel& mod, const std::string& p) { save_model(p, mod); })
      .def_readonly("architecture", &nn::EqualizerModel::architecture)
      .def_readonly("dims", &nn::EqualizerModel::dims)
      .def_property_readonly("tensor_names", &nn::EqualizerModel::tensor_names)
      .def_property_readonly("parameter_count", &nn::EqualizerModel::parameter_count)
      .def_property_readonly("activation_label",
                             [](const nn::EqualizerModel& mod) { return mod.activations.label(); })
      .def("use_activations",
           [](nn::EqualizerModel& mod, act::Family fam, int level) {
             mod.activations = act::make_activation_set(fam, level);
           },
           py::arg("family"), py::arg("level") = 0)
      .def("forward", [](const nn::EqualizerModel& mod, const nn::Mat& w) { return nn::forward(mod, w); },
           py::arg("window"))
      .def("real_multipliers_per_symbol",
           [](const nn::EqualizerModel& mod) { return nn::count_real_multipliers(mod).per_symbol; });

  // configuration
  m.def(
      "default_config", [] { return serialize_config(ExperimentConfig{}); },
      "Default experiment configuration as INI text.");
  m.def(
      "normalize_config", [](const std::string& text) {
        const ExperimentConfig c = parse_config(text);
        c.validate();
        return serialize_config(c);
      },
      py::arg("text"), "Parse, validate and re-serialize INI text.");
}
