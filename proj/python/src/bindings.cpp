// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "danet/attention.hpp"
#include "danet/dataio.hpp"
#include "danet/error.hpp"
#include "danet/evaluation.hpp"
#include "danet/gradcheck.hpp"
#include "danet/model.hpp"
#include "danet/training.hpp"

namespace py = pybind11;
using namespace danet;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out(std::vector<py::ssize_t>(t.shape().begin(), t.shape().end()));
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

// [N x C x T] values (zero-padded to the longest instance), labels, class names.
py::dict dataset_to_dict(const MvDataset& ds) {
  const MvDataset padded = pad_to_length(ds, ds.max_length());
  Array values({ds.size(), ds.num_channels(), ds.max_length()});
  double* out = values.mutable_data();
  for (const auto& s : padded.instances) out = std::copy(s.values.begin(), s.values.end(), out);
  py::dict d;
  d["name"] = ds.name;
  d["split"] = to_string(ds.split);
  d["values"] = values;
  d["labels"] = ds.labels;
  d["class_names"] = ds.class_names;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Dual-attention classifier for multivariate time series";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ContractError>(m, "ContractError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init<>())
      .def_readwrite("num_stages", &ModelConfig::num_stages)
      .def_readwrite("merge_factor", &ModelConfig::merge_factor)
      .def_readwrite("window_size", &ModelConfig::window_size)
      .def_readwrite("channel_schedule", &ModelConfig::channel_schedule)
      .def_readwrite("heads_schedule", &ModelConfig::heads_schedule)
      .def_readwrite("blocks_schedule", &ModelConfig::blocks_schedule)
      .def_readwrite("input_channels", &ModelConfig::input_channels)
      .def_readwrite("num_classes", &ModelConfig::num_classes)
      .def("validate", &ModelConfig::validate)
      .def("top_u", &ModelConfig::top_u)
      .def("padded_length", &ModelConfig::padded_length)
      .def("to_json", &ModelConfig::to_json)
      .def_static("from_json", py::overload_cast<const std::string&>(&ModelConfig::from_json));

  m.def("load_ts", [](const std::filesystem::path& p) { return dataset_to_dict(parse_ts_file(p)); },
        py::arg("path"), "Parse a .ts file into {'values': [N x C x T], 'labels', ...}.");

  m.def("ssaw_attention", [](const Array& q, const Array& k, const Array& v, std::size_t u) {
    return to_array(ssaw_attention(to_tensor(q), to_tensor(k), to_tensor(v), u));
  }, py::arg("q"), py::arg("k"), py::arg("v"), py::arg("u"));
  m.def("w_mha_attention", [](const Array& q, const Array& k, const Array& v) {
    return to_array(w_mha_attention(to_tensor(q), to_tensor(k), to_tensor(v)));
  }, py::arg("q"), py::arg("k"), py::arg("v"));

  m.def("forward", [](const Array& batch, const ModelConfig& config, std::uint64_t seed) {
    return to_array(model_forward(to_tensor(batch), config, init_params(config, seed)));
  }, py::arg("batch"), py::arg("config"), py::arg("seed") = 0,
     "Logits of a freshly initialized model for a [B x T x C] batch.");

  m.def("mpce", [](const std::vector<double>& e, const std::vector<std::size_t>& d) { return mpce(e, d); },
        py::arg("error_rates"), py::arg("class_counts"));

  m.def("ranking_summary", [](const std::map<std::string, std::map<std::string, double>>& acc) {
    AccuracyTable table;
    for (const auto& [method, row] : acc) {
      for (const auto& [dataset, a] : row) table.set(method, dataset, a);
    }
    py::dict out;
    for (const auto& s : ranking_summary(table)) {
      py::dict d;
      d["avg_acc"] = s.mean_accuracy;
      d["avg_acc_std"] = s.std_accuracy;
      d["win"] = s.wins;
      d["avg_rank"] = s.avg_rank;
      out[py::str(s.method)] = d;
    }
    return out;
  }, py::arg("accuracy"), "accuracy[method][dataset] -> per-method AVG acc, Win and AVG rank.");

  m.def("gradcheck", [](std::size_t seeds, double tolerance, const std::string& corrupt_op) {
    GradcheckOptions opt;
    opt.num_seeds = seeds;
    opt.tolerance = tolerance;
    opt.corrupt_op = corrupt_op;
    py::dict out;
    for (const auto& c : run_gradcheck(opt)) out[py::str(c.layer)] = py::make_tuple(c.max_rel_error, c.passed);
    return out;
  }, py::arg("seeds") = 1, py::arg("tolerance") = 1e-4, py::arg("corrupt_op") = "",
     "layer -> (max relative error, passed).");
}
