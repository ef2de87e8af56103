#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "glt/attention.hpp"
#include "glt/checkpoint.hpp"
#include "glt/config.hpp"
#include "glt/data.hpp"
#include "glt/error.hpp"
#include "glt/gradcheck_suite.hpp"
#include "glt/interpretation.hpp"
#include "glt/metrics.hpp"
#include "glt/patches.hpp"
#include "glt/tensor_io.hpp"
#include "glt/train.hpp"

namespace py = pybind11;
using namespace glt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a)
{
    Shape shape(a.shape(), a.shape() + a.ndim());
    return Tensor::from_data(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t)
{
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    Array out(shape);
    std::copy(t.data().begin(), t.data().end(), out.mutable_data());
    return out;
}

Array heatmap_array(const Heatmap& map)
{
    Array out({map.height, map.width});
    std::copy(map.grid.begin(), map.grid.end(), out.mutable_data());
    return out;
}

RunConfig run_config(const std::map<std::string, std::string>& overrides)
{
    RunConfig cfg;
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    return cfg;
}

PatchSpec patch_of(const std::tuple<std::size_t, std::size_t, std::size_t>& t)
{
    return {std::get<0>(t), std::get<1>(t), std::get<2>(t)};
}

py::tuple patch_tuple(const PatchSpec& p) { return py::make_tuple(p.row, p.col, p.size); }

py::dict estimate_dict(const AgeEstimate& est)
{
    py::list patches, ages;
    for (const auto& p : est.per_patch) {
        patches.append(patch_tuple(p.patch));
        ages.append(p.age);
    }
    py::dict d;
    d["mean"] = est.mean;
    d["sigma"] = est.stddev;
    d["patches"] = patches;
    d["ages"] = ages;
    return d;
}

// Model handle that also keeps its run configuration.
struct PyModel {
    RunConfig cfg;
    GltModel model;

    PyModel(const std::map<std::string, std::string>& overrides, std::uint64_t seed)
        : cfg(run_config(overrides)), model(cfg.model_config(), seed)
    {
        model.set_mode(Mode::eval);
    }
};

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Global-local transformer for age regression from image slices";

    auto base = py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    (void)base;

    // metrics
    m.def("mae", [](const std::vector<double>& p, const std::vector<double>& t) { return mae(p, t); },
          py::arg("pred"), py::arg("target"));
    m.def("pearson_r", [](const std::vector<double>& p, const std::vector<double>& t) { return pearson_r(p, t); },
          py::arg("pred"), py::arg("target"));
    m.def("cumulative_score",
          [](const std::vector<double>& p, const std::vector<double>& t, double alpha) {
              return cumulative_score(p, t, alpha);
          },
          py::arg("pred"), py::arg("target"), py::arg("alpha"));
    m.def("evaluate",
          [](const std::vector<double>& p, const std::vector<double>& t) {
              const auto r = evaluate(p, t);
              py::dict d;
              d["n"] = r.n;
              d["mae"] = r.mae;
              d["pearson_r"] = r.pearson_r ? py::cast(*r.pearson_r) : py::none();
              d["cs"] = r.cs;
              return d;
          },
          py::arg("pred"), py::arg("target"), "MAE, Pearson r and CS at alpha = 0, 0.5, ..., 5");

    // patches
    m.def("sliding_window",
          [](std::size_t h, std::size_t w, std::size_t size) {
              py::list out;
              for (const auto& p : sliding_window(h, w, size)) out.append(patch_tuple(p));
              return out;
          },
          py::arg("height"), py::arg("width"), py::arg("size"), "(row, col, size) windows with stride size / 2");
    m.def("sample_multisize",
          [](std::size_t h, std::size_t w, std::size_t n, std::uint64_t seed, std::size_t gmin, std::size_t gmax,
             std::size_t gstep) {
              py::list out;
              for (const auto& p : sample_multisize(h, w, n, seed, {gmin, gmax, gstep})) out.append(patch_tuple(p));
              return out;
          },
          py::arg("height"), py::arg("width"), py::arg("n"), py::arg("seed"), py::arg("grid_min") = 32,
          py::arg("grid_max") = 104, py::arg("grid_step") = 8);
    m.def("fuse_planes", &fuse_planes, py::arg("axial"), py::arg("coronal"), py::arg("sagittal"));

    // attention
    m.def("multi_head_attention",
          [](const Array& q, const Array& k, const Array& v, std::size_t heads, const std::string& scaling) {
              GlaConfig cfg;
              cfg.d_model = static_cast<std::size_t>(q.shape(q.ndim() - 1));
              cfg.heads = heads;
              if (scaling == "per_head") cfg.scaling = AttentionScaling::per_head;
              else if (scaling == "whole_model") cfg.scaling = AttentionScaling::whole_model;
              else throw ContractError("scaling must be per_head or whole_model");
              const auto out = multi_head_attention(to_tensor(q), to_tensor(k), to_tensor(v), cfg);
              return py::make_tuple(to_array(out.context), to_array(out.weights));
          },
          py::arg("queries"), py::arg("keys"), py::arg("values"), py::arg("heads") = 1,
          py::arg("scaling") = "per_head", "Returns (context, weights).");

    // interpretation
    m.def("subject_heatmap",
          [](std::size_t h, std::size_t w, const std::vector<std::tuple<std::size_t, std::size_t, std::size_t>>& patches,
             const std::vector<double>& errors, std::size_t per_size) {
              if (patches.size() != errors.size()) throw ContractError("one error per patch is required");
              std::vector<PatchError> pe;
              for (std::size_t i = 0; i < patches.size(); ++i) pe.push_back({patch_of(patches[i]), errors[i]});
              return heatmap_array(subject_heatmap(h, w, pe, per_size));
          },
          py::arg("height"), py::arg("width"), py::arg("patches"), py::arg("errors"), py::arg("per_size") = 5);

    // data
    m.def("slice_indices", &slice_indices, py::arg("dim"), py::arg("count") = 5);
    m.def("synthetic_cohort",
          [](const std::map<std::string, std::string>& overrides) {
              const auto cfg = run_config(overrides);
              py::list out;
              for_each_synthetic(cfg.synthetic_spec(), [&](const SyntheticSubject& s) {
                  const auto rec = make_record(s, cfg.get_size("data.slices"));
                  py::dict d;
                  d["id"] = rec.id;
                  d["age"] = rec.age;
                  for (auto p : kPlanes) d[plane_name(p)] = to_array(rec.plane(p));
                  out.append(d);
              });
              return out;
          },
          py::arg("config") = std::map<std::string, std::string>{},
          "Synthetic subjects with [K, H, W] slice stacks per plane. Keys follow the run configuration.");
    m.def("save_tensor", [](const Array& a, const std::filesystem::path& p) { save_tensor(to_tensor(a), p); },
          py::arg("array"), py::arg("path"));
    m.def("load_tensor", [](const std::filesystem::path& p) { return to_array(load_tensor(p)); }, py::arg("path"));

    m.def("gradcheck",
          [](std::uint64_t seed, bool inject_fault) {
              py::list out;
              for (const auto& c : run_gradcheck_suite({seed, inject_fault})) {
                  py::dict d;
                  d["name"] = c.name;
                  d["max_relative_error"] = c.report.max_relative_error;
                  d["tolerance"] = c.tolerance;
                  d["passed"] = c.passed();
                  out.append(d);
              }
              return out;
          },
          py::arg("seed") = 0, py::arg("inject_fault") = false);

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::map<std::string, std::string>&, std::uint64_t>(),
             py::arg("config") = std::map<std::string, std::string>{}, py::arg("seed") = 0,
             "Model built from run-configuration keys (model.*, data.slices).")
        .def_property_readonly("local_only", [](const PyModel& m) { return m.model.local_only(); })
        .def_property_readonly("parameter_names",
                               [](const PyModel& m) {
                                   std::vector<std::string> names;
                                   for (const auto& p : m.model.parameters()) names.push_back(p.name);
                                   return names;
                               })
        .def("predict",
             [](PyModel& m, const Array& image, const std::tuple<std::size_t, std::size_t, std::size_t>& patch) {
                 NoGradGuard ng;
                 const auto p = m.model.forward(to_tensor(image), patch_of(patch));
                 return py::make_tuple(p.age_global ? py::cast(*p.age_global) : py::none(), p.age_local);
             },
             py::arg("image"), py::arg("patch"), "Returns (global_age or None, local_age).")
        .def("infer_single_size",
             [](PyModel& m, const Array& image, std::size_t size) {
                 return estimate_dict(infer_single_size(m.model, to_tensor(image), size));
             },
             py::arg("image"), py::arg("size"))
        .def("infer_multi_size",
             [](PyModel& m, const Array& image, std::size_t n, std::uint64_t seed) {
                 return estimate_dict(infer_multi_size(m.model, to_tensor(image), n, seed, m.cfg.size_grid()));
             },
             py::arg("image"), py::arg("n"), py::arg("seed") = 0)
        .def("train",
             [](PyModel& m, const std::vector<Array>& images, const std::vector<double>& ages,
                const std::map<std::string, std::string>& overrides,
                const std::function<void(std::size_t, double)>& progress) {
                 if (images.size() != ages.size()) throw ContractError("one age per image is required");
                 auto cfg = m.cfg;
                 for (const auto& [k, v] : overrides) cfg.set(k, v);
                 std::vector<TrainSample> data;
                 for (std::size_t i = 0; i < images.size(); ++i) data.push_back({to_tensor(images[i]), ages[i]});
                 TrainProgress cb;
                 if (progress) cb = progress;
                 const auto result = train(m.model, data, cfg.train_config(), cb);
                 std::vector<double> curve;
                 for (const auto& p : result.curve) curve.push_back(p.loss);
                 return curve;
             },
             py::arg("images"), py::arg("ages"), py::arg("config") = std::map<std::string, std::string>{},
             py::arg("progress") = nullptr, "Trains in place (train.* keys); returns the per-step loss curve.")
        .def("save", [](const PyModel& m, const std::filesystem::path& stem) { save_checkpoint(m.model.state(), stem); },
             py::arg("stem"))
        .def("load",
             [](PyModel& m, const std::filesystem::path& stem) { load_checkpoint_into(m.model.state(), stem); },
             py::arg("stem"));
}
