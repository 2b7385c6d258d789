#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fedunlearn/arch.hpp"
#include "fedunlearn/checkpoint.hpp"
#include "fedunlearn/config.hpp"
#include "fedunlearn/data.hpp"
#include "fedunlearn/experiment.hpp"
#include "fedunlearn/federation.hpp"
#include "fedunlearn/model.hpp"
#include "fedunlearn/nn.hpp"
#include "fedunlearn/unlearning.hpp"
#include "fedunlearn/vector_ops.hpp"

namespace py = pybind11;
using namespace fedunlearn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <typename T>
std::vector<T> to_vector(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  return std::vector<T>(a.data(), a.data() + a.size());
}

/// Builds a batch from an (n, H, W, C) or (n, H*W*C) float array.
Batch make_batch(const ArchSpec& arch, const FloatArray& images, const py::array_t<int>& labels) {
  const auto n = static_cast<std::size_t>(labels.size());
  if (static_cast<std::size_t>(images.size()) != n * arch.input.size()) {
    throw std::invalid_argument("images must hold labels.size * input size values");
  }
  return Batch{arch.input, to_vector<float>(images), std::vector<int>(labels.data(), labels.data() + labels.size())};
}

py::dict outcome_dict(const UnlearnOutcome& o) {
  py::dict d;
  d["stop_reason"] = std::string(to_string(o.stop_reason));
  d["steps"] = o.steps;
  d["final_val_acc"] = o.final_val_acc;
  d["distance"] = o.distance;
  d["delta"] = o.delta;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated training, projected-gradient-ascent unlearning and retrain comparison";

  py::class_<ArchSpec>(m, "Arch")
      .def_static("parse", [](const std::string& s) { return parse_arch(s); })
      .def_static("paper_cnn", &paper_cnn)
      .def_static("mlp", [](int h, int w, int c, const std::vector<int>& hidden,
                            int classes) { return mlp(Shape{h, w, c}, hidden, classes); },
                  py::arg("height"), py::arg("width"), py::arg("channels"), py::arg("hidden"),
                  py::arg("num_classes") = 10)
      .def_property_readonly("input_shape",
                             [](const ArchSpec& a) { return py::make_tuple(a.input.height, a.input.width, a.input.channels); })
      .def_property_readonly("num_classes", &ArchSpec::num_classes)
      .def("param_count", [](const ArchSpec& a) { return param_count(a); })
      .def("__str__", [](const ArchSpec& a) { return to_string(a); })
      .def("__repr__", [](const ArchSpec& a) { return "Arch('" + to_string(a) + "')"; })
      .def("__eq__", [](const ArchSpec& a, const ArchSpec& b) { return a == b; });

  py::class_<ModelParams>(m, "Model")
      .def(py::init([](const ArchSpec& arch, const FloatArray& w) {
             ModelParams mp{arch, to_vector<float>(w)};
             mp.validate();
             return mp;
           }),
           py::arg("arch"), py::arg("weights"))
      .def_static("init", &init_model, py::arg("arch"), py::arg("seed"))
      .def_static("zeros", &zero_model, py::arg("arch"))
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); })
      .def("save", [](const ModelParams& mp, const std::filesystem::path& p) { save_checkpoint(mp, p); })
      .def_readonly("arch", &ModelParams::arch)
      .def_property_readonly("weights", [](const ModelParams& mp) { return to_array(mp.weights); })
      .def("__len__", &ModelParams::dim)
      .def("__eq__", [](const ModelParams& a, const ModelParams& b) { return a == b; });

  m.def("param_count", [](const ArchSpec& a) { return param_count(a); });

  m.def(
      "forward",
      [](const ModelParams& mp, const FloatArray& images) {
        const auto n = static_cast<std::size_t>(images.size()) / mp.arch.input.size();
        Batch b{mp.arch.input, to_vector<float>(images), std::vector<int>(n, 0)};
        const auto p = forward(mp, b);
        py::array_t<float> out({static_cast<py::ssize_t>(p.rows), static_cast<py::ssize_t>(p.cols)});
        std::copy(p.values.begin(), p.values.end(), out.mutable_data());
        return out;
      },
      py::arg("model"), py::arg("images"), "Softmax probabilities, one row per image.");

  m.def(
      "loss_and_grad",
      [](const ArchSpec& arch, const DoubleArray& w, const FloatArray& images, const py::array_t<int>& labels) {
        const auto lg = loss_and_grad(arch, std::span<const double>(w.data(), static_cast<std::size_t>(w.size())),
                                      make_batch(arch, images, labels));
        return py::make_tuple(lg.loss, to_array(lg.grad));
      },
      py::arg("arch"), py::arg("weights"), py::arg("images"), py::arg("labels"),
      "Mean cross-entropy and its gradient, computed in double precision.");

  m.def(
      "clip_grad",
      [](const DoubleArray& g, double radius) {
        return to_array(clip_grad<double>(std::span<const double>(g.data(), static_cast<std::size_t>(g.size())), radius));
      },
      py::arg("grad"), py::arg("radius"));

  m.def(
      "project_l2",
      [](const DoubleArray& w, const DoubleArray& center, double delta) {
        return to_array(project_l2<double>(std::span<const double>(w.data(), static_cast<std::size_t>(w.size())),
                                           std::span<const double>(center.data(), static_cast<std::size_t>(center.size())),
                                           delta));
      },
      py::arg("w"), py::arg("center"), py::arg("delta"));

  m.def(
      "fedavg",
      [](const std::vector<ModelParams>& models, const std::vector<std::size_t>& counts, const std::string& mode) {
        if (mode != "equal" && mode != "proportional") throw std::invalid_argument("mode must be equal or proportional");
        return fedavg(models, counts, mode == "equal" ? AggregationMode::equal : AggregationMode::proportional);
      },
      py::arg("models"), py::arg("counts"), py::arg("mode") = "equal");

  m.def("compute_reference", &compute_reference, py::arg("global_model"), py::arg("last_local"),
        py::arg("num_clients"));
  m.def("compute_delta", py::overload_cast<const ModelParams&, int, std::uint64_t>(&compute_delta),
        py::arg("reference"), py::arg("count") = 10, py::arg("seed") = 1);

  m.def(
      "load_idx",
      [](const std::filesystem::path& images, const std::filesystem::path& labels) {
        const auto d = load_idx(images, labels);
        py::array_t<float> x({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.shape.height),
                              static_cast<py::ssize_t>(d.shape.width), static_cast<py::ssize_t>(d.shape.channels)});
        std::copy(d.features.begin(), d.features.end(), x.mutable_data());
        return py::make_tuple(x, to_array(d.labels));
      },
      py::arg("images"), py::arg("labels"), "Returns (images in [0,1] as n*H*W*C, labels).");

  m.def(
      "make_synthetic",
      [](std::size_t count, std::uint64_t seed) {
        const auto d = make_synthetic(count, seed);
        py::array_t<float> x({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.shape.height),
                              static_cast<py::ssize_t>(d.shape.width), static_cast<py::ssize_t>(d.shape.channels)});
        std::copy(d.features.begin(), d.features.end(), x.mutable_data());
        return py::make_tuple(x, to_array(d.labels));
      },
      py::arg("count"), py::arg("seed"));

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& scenario, const std::vector<std::string>& overrides,
         const std::optional<std::filesystem::path>& out_dir) {
        auto config = parse_config_text(config_text);
        for (const auto& o : overrides) apply_override(config, o);
        if (scenario == "train") {
          config.scenario = Scenario::train;
        } else if (scenario == "retrain") {
          config.scenario = Scenario::retrain;
        } else if (scenario == "unlearn") {
          config.scenario = Scenario::unlearn;
        } else if (scenario == "compare") {
          config.scenario = Scenario::full_compare;
        } else {
          throw std::invalid_argument("scenario must be train, retrain, unlearn or compare");
        }
        if (out_dir) config.out_dir = *out_dir;
        finalize_config(config);
        ScenarioResult r;
        {
          py::gil_scoped_release release;
          r = run_scenario(config);
        }
        py::dict d;
        d["exit_code"] = r.exit_code;
        d["error"] = r.error;
        d["failed_stage"] = r.failed_stage;
        py::dict table;
        for (const auto& p : r.table) table[py::str(p.role)] = py::make_tuple(p.clean, p.backdoor);
        d["accuracy"] = table;
        py::list metrics;
        for (const auto& rec : r.metrics) {
          py::dict row;
          row["phase"] = std::string(to_string(rec.phase));
          row["round"] = rec.round;
          row["clean_acc"] = rec.clean_acc;
          row["backdoor_acc"] = rec.backdoor_acc;
          row["updates"] = rec.updates;
          metrics.append(row);
        }
        d["metrics"] = metrics;
        d["unlearn"] = r.outcome ? py::object(outcome_dict(*r.outcome)) : py::object(py::none());
        d["out_dir"] = config.out_dir.string();
        return d;
      },
      py::arg("config_text") = "", py::arg("scenario") = "compare", py::arg("overrides") = std::vector<std::string>{},
      py::arg("out_dir") = py::none(),
      "Runs a scenario from YAML text and returns the accuracy table, metrics and unlearning outcome.");

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_IOError);
}
