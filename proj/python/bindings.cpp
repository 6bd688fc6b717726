#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxelhop/errors.hpp"
#include "voxelhop/io.hpp"
#include "voxelhop/model.hpp"
#include "voxelhop/synth.hpp"

namespace py = pybind11;
namespace vh = voxelhop;

namespace {

vh::Volume4D volume_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 4) throw vh::ShapeError("expected a 4D array (S, S, K, C)");
  const auto s1 = static_cast<int>(arr.shape(0));
  const auto s2 = static_cast<int>(arr.shape(1));
  if (s1 != s2) throw vh::ShapeError("horizontal plane must be square");
  vh::Volume4D vol(s1, static_cast<int>(arr.shape(2)), static_cast<int>(arr.shape(3)));
  std::memcpy(vol.data.data(), arr.data(), sizeof(double) * vol.data.size());
  return vol;
}

py::array_t<double> array_from_volume(const vh::Volume4D& vol) {
  py::array_t<double> arr({vol.s, vol.s, vol.k, vol.c});
  std::memcpy(arr.mutable_data(), vol.data.data(), sizeof(double) * vol.data.size());
  return arr;
}

nlohmann::json json_from_dict(const py::dict& d) {
  const py::object dumps = py::module_::import("json").attr("dumps");
  return nlohmann::json::parse(dumps(d).cast<std::string>());
}

py::object dict_from_json(const nlohmann::json& j) {
  const py::object loads = py::module_::import("json").attr("loads");
  return loads(j.dump());
}

vh::RunConfig config_from_dict(const py::dict& d) {
  vh::RunConfig config = vh::run_config_from_json(json_from_dict(d));
  vh::validate_config(config);
  return config;
}

vh::Dataset dataset_from_lists(const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& volumes,
                               const std::vector<int>& labels) {
  if (volumes.size() != labels.size()) throw vh::DataError("volumes/labels length mismatch");
  vh::Dataset dataset;
  for (std::size_t j = 0; j < volumes.size(); ++j) {
    dataset.volumes.push_back(volume_from_array(volumes[j]));
    dataset.labels.push_back(labels[j]);
    dataset.ids.push_back("sample_" + std::to_string(j));
  }
  return dataset;
}

py::dict report_to_dict(const vh::EvalReport& report) {
  py::dict d;
  d["folds"] = report.folds;
  d["repeats"] = report.repeats;
  d["accuracy_mean"] = report.accuracy_mean;
  d["accuracy_std"] = report.accuracy_std;
  d["auc_mean"] = report.auc_mean;
  d["auc_std"] = report.auc_std;
  py::list per_repeat;
  for (const auto& rr : report.per_repeat) {
    py::dict r;
    r["scores"] = rr.scores;
    r["accuracy"] = rr.accuracy;
    r["auc"] = rr.auc;
    per_repeat.append(std::move(r));
  }
  d["per_repeat"] = std::move(per_repeat);
  d["roc"] = report.roc_points;
  py::dict params;
  params["saab"] = report.params.saab;
  params["lag"] = report.params.lag;
  params["classifier"] = report.params.classifier;
  params["total"] = report.params.total;
  d["parameters"] = std::move(params);
  return d;
}

}  // namespace

PYBIND11_MODULE(_voxelhop, m) {
  m.doc() = "VoxelHop: successive-subspace-learning classifier for multi-channel 3D volumes";

  py::register_exception<vh::IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<vh::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<vh::ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<vh::DataError>(m, "DataError", PyExc_ValueError);

  py::class_<vh::TrainedModel>(m, "Model")
      .def("predict",
           [](const vh::TrainedModel& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& x) {
             const vh::Prediction p = vh::predict(model, volume_from_array(x));
             return py::make_tuple(p.score, p.label);
           },
           py::arg("volume"), "Returns (score, label) for one (S, S, K, C) volume.")
      .def("save", [](const vh::TrainedModel& model, const std::string& path) { vh::save_model_file(model, path); },
           py::arg("path"))
      .def_property_readonly("parameter_counts",
                             [](const vh::TrainedModel& model) {
                               const vh::ParamCounts p = vh::count_parameters(model);
                               py::dict d;
                               d["saab"] = p.saab;
                               d["lag"] = p.lag;
                               d["classifier"] = p.classifier;
                               d["total"] = p.total;
                               return d;
                             })
      .def_property_readonly("stage_filters", [](const vh::TrainedModel& model) {
        py::list stages;
        for (const auto& banks : model.cascade.banks) {
          py::list fs;
          for (const auto& bank : banks.per_channel) fs.append(bank.F);
          stages.append(std::move(fs));
        }
        return stages;
      });

  m.def("load_model", [](const std::string& path) { return vh::load_model_file(path); }, py::arg("path"));

  m.def(
      "fit",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& volumes,
         const std::vector<int>& labels, const py::dict& config, int threads) {
        return vh::fit(dataset_from_lists(volumes, labels), config_from_dict(config), threads);
      },
      py::arg("volumes"), py::arg("labels"), py::arg("config"), py::arg("threads") = 0);

  m.def(
      "loocv",
      [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>& volumes,
         const std::vector<int>& labels, const py::dict& config, int threads) {
        return report_to_dict(vh::loocv(dataset_from_lists(volumes, labels), config_from_dict(config), threads));
      },
      py::arg("volumes"), py::arg("labels"), py::arg("config"), py::arg("threads") = 0);

  m.def(
      "plan",
      [](int s, int k, int channels, const py::dict& config) {
        const vh::RunConfig cfg = config_from_dict(config);
        const vh::PlanReport plan = vh::plan_shapes(s, k, channels, cfg.stages, cfg.aggregation);
        py::dict d;
        d["ok"] = plan.ok;
        if (!plan.ok) {
          d["first_illegal_stage"] = plan.first_illegal_stage;
          d["reason"] = plan.reason;
        }
        py::list stages;
        for (const auto& st : plan.stages) {
          py::dict e;
          e["stage"] = st.stage;
          e["input"] = py::make_tuple(st.s_in, st.s_in, st.v_in);
          e["output"] = py::make_tuple(st.s_out, st.s_out, st.v_out);
          e["pooled"] = py::make_tuple(st.s_pooled, st.s_pooled, st.v_pooled);
          e["aggregated"] = py::make_tuple(st.agg_p, st.agg_p, st.agg_qv);
          stages.append(std::move(e));
        }
        d["stages"] = std::move(stages);
        return d;
      },
      py::arg("s"), py::arg("k"), py::arg("channels"), py::arg("config"));

  m.def(
      "synth_dataset",
      [](int controls, int patients, int s, int k, int channels, double amplitude, double noise,
         std::uint64_t seed) {
        vh::SynthParams params;
        params.n_controls = controls;
        params.n_patients = patients;
        params.s = s;
        params.k = k;
        params.c = channels;
        params.signal_amplitude = amplitude;
        params.noise_sigma = noise;
        params.seed = seed;
        const vh::Dataset dataset = vh::synth_dataset(params);
        py::list volumes;
        for (const auto& vol : dataset.volumes) volumes.append(array_from_volume(vol));
        return py::make_tuple(volumes, dataset.labels);
      },
      py::arg("controls"), py::arg("patients"), py::arg("s"), py::arg("k"), py::arg("channels") = 3,
      py::arg("amplitude") = 1.2, py::arg("noise") = 0.01, py::arg("seed") = 1);

  m.def("auc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
    return vh::auc(scores, labels);
  });

  m.def("extract_windows",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& slab, int s, int k) {
          if (slab.ndim() != 3) throw vh::ShapeError("expected a 3D array (S, S, K)");
          const auto s1 = static_cast<int>(slab.shape(0));
          if (s1 != static_cast<int>(slab.shape(1))) throw vh::ShapeError("horizontal plane must be square");
          vh::Volume4D vol(s1, static_cast<int>(slab.shape(2)), 1);
          std::memcpy(vol.data.data(), slab.data(), sizeof(double) * vol.data.size());
          const Eigen::MatrixXd w = vh::extract_windows(vol, vh::WindowSpec{s, k});
          py::array_t<double> out({static_cast<py::ssize_t>(w.rows()), static_cast<py::ssize_t>(w.cols())});
          auto r = out.mutable_unchecked<2>();
          for (py::ssize_t i = 0; i < w.rows(); ++i) {
            for (py::ssize_t j = 0; j < w.cols(); ++j) r(i, j) = w(i, j);
          }
          return out;
        },
        py::arg("slab"), py::arg("s"), py::arg("k"));

  m.def("config_from_file", [](const std::string& path) {
    return dict_from_json(vh::run_config_to_json(vh::load_config_file(path)));
  });
}
