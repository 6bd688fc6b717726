#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "voxelhop/errors.hpp"
#include "voxelhop/io.hpp"
#include "voxelhop/model.hpp"
#include "voxelhop/synth.hpp"
#include "voxelhop/threading.hpp"

namespace vh = voxelhop;
using nlohmann::json;

namespace {

json plan_to_json(const vh::PlanReport& plan) {
  json stages = json::array();
  for (const vh::PlanStage& st : plan.stages) {
    std::string pool;
    switch (st.pool) {
      case vh::StagePool::kHorizontal: pool = "horizontal"; break;
      case vh::StagePool::kFull: pool = "full"; break;
      case vh::StagePool::kNone: pool = "none"; break;
    }
    stages.push_back({{"stage", st.stage},
                      {"input", {{"s", st.s_in}, {"v", st.v_in}}},
                      {"output", {{"s", st.s_out}, {"v", st.v_out}}},
                      {"pool", pool},
                      {"pooled", {{"s", st.s_pooled}, {"v", st.v_pooled}}},
                      {"aggregated", {{"p", st.agg_p}, {"qv", st.agg_qv}}}});
  }
  json j{{"ok", plan.ok}, {"stages", std::move(stages)}};
  if (!plan.ok) {
    j["first_illegal_stage"] = plan.first_illegal_stage;
    j["reason"] = plan.reason;
  }
  return j;
}

void print_plan_table(const vh::PlanReport& plan, std::ostream& os) {
  os << "stage  input(SxSxV.F)        output(SxSxV.F)       pool        pooled        aggregated(PxPxQv.F)\n";
  for (const vh::PlanStage& st : plan.stages) {
    const int i = st.stage;
    std::string pool = st.pool == vh::StagePool::kHorizontal ? "horizontal"
                       : st.pool == vh::StagePool::kFull     ? "full"
                                                             : "none";
    os << i << "      " << st.s_in << "x" << st.s_in << "x" << st.v_in << "*F" << (i - 1) << "      "
       << st.s_out << "x" << st.s_out << "x" << st.v_out << "*F" << i << "      " << pool << "      "
       << st.s_pooled << "x" << st.s_pooled << "x" << st.v_pooled << "*F" << i << "      ";
    if (st.agg_p > 0) {
      os << st.agg_p << "x" << st.agg_p << "x" << st.agg_qv << "*F" << i;
    } else {
      os << "-";
    }
    os << "\n";
  }
  if (!plan.ok) os << "ILLEGAL at stage " << plan.first_illegal_stage << ": " << plan.reason << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw vh::IoError("cannot open for writing", path);
  out << text;
  if (!out) throw vh::IoError("failed writing", path);
}

void write_energy_curves(const vh::TrainedModel& model, const std::string& dir) {
  for (std::size_t i = 0; i < model.cascade.banks.size(); ++i) {
    for (std::size_t c = 0; c < model.cascade.banks[i].per_channel.size(); ++c) {
      const auto curve = vh::energy_curve(model.cascade.banks[i].per_channel[c]);
      std::string csv = "ac_filters,cumulative_energy_fraction\n";
      for (const auto& [f, frac] : curve) csv += std::to_string(f) + "," + std::to_string(frac) + "\n";
      write_text(dir + "/energy_stage" + std::to_string(i + 1) + "_ch" + std::to_string(c) + ".csv", csv);
    }
  }
}

json params_json(const vh::ParamCounts& p) {
  return json{{"saab", p.saab}, {"lag", p.lag}, {"classifier", p.classifier}, {"total", p.total}};
}

json model_summary(const vh::TrainedModel& model) {
  json stages = json::array();
  for (std::size_t i = 0; i < model.cascade.banks.size(); ++i) {
    json filters = json::array();
    for (const auto& bank : model.cascade.banks[i].per_channel) filters.push_back(bank.F);
    json kept = json::array();
    for (const auto& mask : model.masks[i]) {
      kept.push_back({{"kept", mask.kept.size()}, {"of", mask.total_features()}});
    }
    stages.push_back({{"stage", i + 1},
                      {"filters", std::move(filters)},
                      {"selection", std::move(kept)},
                      {"lag_input_dim", model.lag_units[i].n}});
  }
  return json{{"format_version", model.format_version},
              {"input_dims", {model.cascade.s0, model.cascade.s0, model.cascade.k0, model.cascade.channels}},
              {"stages", std::move(stages)},
              {"threshold", model.threshold},
              {"parameters", params_json(vh::count_parameters(model))},
              {"config", vh::run_config_to_json(model.config)}};
}

void write_eval_reports(const vh::EvalReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  json per_repeat = json::array();
  for (const auto& rr : report.per_repeat) {
    per_repeat.push_back({{"accuracy", rr.accuracy},
                          {"auc", rr.auc},
                          {"confusion", {{"tp", rr.tp}, {"fp", rr.fp}, {"tn", rr.tn}, {"fn", rr.fn}}}});
  }
  json j{{"folds", report.folds},
         {"repeats", report.repeats},
         {"accuracy_mean", report.accuracy_mean},
         {"accuracy_std", report.accuracy_std},
         {"auc_mean", report.auc_mean},
         {"auc_std", report.auc_std},
         {"per_repeat", std::move(per_repeat)},
         {"parameters", params_json(report.params)},
         {"fit_seconds_total", report.fit_seconds_total},
         {"fit_seconds_mean_per_fold", report.fit_seconds_mean}};
  write_text(dir + "/report.json", j.dump(2) + "\n");

  std::string csv = "repeat,index,id,label,score,predicted\n";
  for (std::size_t r = 0; r < report.per_repeat.size(); ++r) {
    const auto& scores = report.per_repeat[r].scores;
    for (std::size_t j2 = 0; j2 < scores.size(); ++j2) {
      const std::string id = j2 < report.ids.size() ? report.ids[j2] : std::to_string(j2);
      csv += std::to_string(r) + "," + std::to_string(j2) + "," + id + "," +
             std::to_string(report.labels[j2]) + "," + std::to_string(scores[j2]) + "," +
             (scores[j2] > 0.0 ? "1" : "0") + "\n";
    }
  }
  write_text(dir + "/scores.csv", csv);

  std::string roc_csv = "fpr,tpr\n";
  for (const auto& [fpr, tpr] : report.roc_points) {
    roc_csv += std::to_string(fpr) + "," + std::to_string(tpr) + "\n";
  }
  write_text(dir + "/roc.csv", roc_csv);
}

int run(int argc, char** argv) {
  CLI::App app{"VoxelHop: successive-subspace-learning classifier for multi-channel 3D volumes"};
  app.require_subcommand(1);
  app.fallthrough();  // let --threads appear after the subcommand
  int threads = 0;
  app.add_option("--threads", threads, "worker thread cap (default: VOXELHOP_THREADS or hardware)");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "train a model from a manifest");
  std::string fit_manifest, fit_config, fit_out, fit_report_dir;
  fit_cmd->add_option("--manifest", fit_manifest, "dataset manifest JSON")->required();
  fit_cmd->add_option("--config", fit_config, "run config JSON")->required();
  fit_cmd->add_option("--out", fit_out, "output model path")->required();
  fit_cmd->add_option("--report-dir", fit_report_dir, "directory for the fit report");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "score a manifest with a trained model");
  std::string eval_manifest, eval_model, eval_report_dir;
  eval_cmd->add_option("--manifest", eval_manifest)->required();
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--report-dir", eval_report_dir, "directory for reports");

  // loocv
  auto* loocv_cmd = app.add_subcommand("loocv", "leave-one-out cross-validation");
  std::string loocv_manifest, loocv_config, loocv_report_dir;
  int loocv_repeats = 0;
  loocv_cmd->add_option("--manifest", loocv_manifest)->required();
  loocv_cmd->add_option("--config", loocv_config)->required();
  loocv_cmd->add_option("--report-dir", loocv_report_dir, "directory for reports");
  loocv_cmd->add_option("--repeats", loocv_repeats, "override the config's repeat count");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  vh::SynthParams sp;
  std::string synth_out_dir, synth_dtype = "f32";
  synth_cmd->add_option("--out-dir", synth_out_dir)->required();
  synth_cmd->add_option("--controls", sp.n_controls);
  synth_cmd->add_option("--patients", sp.n_patients);
  synth_cmd->add_option("--s", sp.s, "horizontal extent");
  synth_cmd->add_option("--k", sp.k, "vertical extent");
  synth_cmd->add_option("--channels", sp.c);
  synth_cmd->add_option("--amplitude", sp.signal_amplitude, "planted signal amplitude (0 = null dataset)");
  synth_cmd->add_option("--background", sp.background_amplitude, "smooth background amplitude");
  synth_cmd->add_option("--noise", sp.noise_sigma);
  synth_cmd->add_option("--bumps", sp.bumps);
  synth_cmd->add_option("--seed", sp.seed);
  synth_cmd->add_option("--dtype", synth_dtype, "f32 or f64");

  // resize
  auto* resize_cmd = app.add_subcommand("resize", "block-mean downsample a volume file");
  std::string resize_in, resize_out;
  int f1 = 1, f2 = 1, fv = 1;
  resize_cmd->add_option("--in", resize_in)->required();
  resize_cmd->add_option("--out", resize_out)->required();
  resize_cmd->add_option("--factor-h1", f1, "first horizontal factor")->required();
  resize_cmd->add_option("--factor-h2", f2, "second horizontal factor")->required();
  resize_cmd->add_option("--factor-v", fv, "vertical factor")->required();

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "shape-trace a config without data");
  std::string plan_config;
  int plan_s = 110, plan_k = 30, plan_c = 3;
  bool plan_json = false;
  plan_cmd->add_option("--config", plan_config)->required();
  plan_cmd->add_option("--s", plan_s, "input horizontal extent");
  plan_cmd->add_option("--k", plan_k, "input vertical extent");
  plan_cmd->add_option("--channels", plan_c);
  plan_cmd->add_flag("--json", plan_json, "emit JSON instead of a table");

  // inspect
  auto* inspect_cmd = app.add_subcommand("inspect", "dump model metadata");
  std::string inspect_model;
  inspect_cmd->add_option("--model", inspect_model)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*fit_cmd) {
    const vh::RunConfig config = vh::load_config_file(fit_config);
    const vh::Dataset dataset = vh::load_dataset(fit_manifest);
    const vh::Volume4D& first = dataset.volumes.front();
    const vh::PlanReport plan =
        vh::plan_shapes(first.s, first.k, first.c, config.stages, config.aggregation);
    if (!plan.ok) {
      throw vh::ConfigError("illegal stage schedule: " + plan.reason + " | plan: " + plan_to_json(plan).dump());
    }
    const auto t0 = std::chrono::steady_clock::now();
    const vh::TrainedModel model = vh::fit(dataset, config, threads);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    vh::save_model_file(model, fit_out);
    if (!fit_report_dir.empty()) {
      std::filesystem::create_directories(fit_report_dir);
      json report{{"samples", dataset.volumes.size()},
                  {"fit_seconds", seconds},
                  {"plan", plan_to_json(plan)},
                  {"model", model_summary(model)}};
      write_text(fit_report_dir + "/fit_report.json", report.dump(2) + "\n");
      write_energy_curves(model, fit_report_dir);
    }
    std::cout << "model written to " << fit_out << " (" << vh::count_parameters(model).total
              << " parameters)\n";
    return 0;
  }

  if (*eval_cmd) {
    const vh::TrainedModel model = vh::load_model_file(eval_model);
    const vh::Dataset dataset = vh::load_dataset(eval_manifest);
    vh::EvalReport report;
    report.folds = static_cast<int>(dataset.volumes.size());
    report.repeats = 1;
    report.labels = dataset.labels;
    report.ids = dataset.ids;
    vh::RepeatResult rr;
    rr.scores.resize(dataset.volumes.size());
    for (std::size_t j = 0; j < dataset.volumes.size(); ++j) {
      rr.scores[j] = vh::predict(model, dataset.volumes[j], threads).score;
      const bool positive = rr.scores[j] > model.threshold;
      if (dataset.labels[j] == 1) {
        positive ? ++rr.tp : ++rr.fn;
      } else {
        positive ? ++rr.fp : ++rr.tn;
      }
    }
    rr.accuracy = static_cast<double>(rr.tp + rr.tn) / static_cast<double>(dataset.volumes.size());
    rr.auc = vh::auc(rr.scores, dataset.labels);
    report.per_repeat.push_back(rr);
    report.accuracy_mean = rr.accuracy;
    report.auc_mean = rr.auc;
    report.roc_points = vh::roc(rr.scores, dataset.labels);
    report.params = vh::count_parameters(model);
    if (!eval_report_dir.empty()) write_eval_reports(report, eval_report_dir);
    std::cout << "accuracy " << rr.accuracy << "  auc " << rr.auc << "\n";
    return 0;
  }

  if (*loocv_cmd) {
    vh::RunConfig config = vh::load_config_file(loocv_config);
    if (loocv_repeats > 0) config.repeats = loocv_repeats;
    const vh::Dataset dataset = vh::load_dataset(loocv_manifest);
    const vh::EvalReport report = vh::loocv(dataset, config, threads);
    if (!loocv_report_dir.empty()) write_eval_reports(report, loocv_report_dir);
    std::cout << "loocv accuracy " << report.accuracy_mean << " +- " << report.accuracy_std << "  auc "
              << report.auc_mean << " +- " << report.auc_std << "  (" << report.folds << " folds, "
              << report.repeats << " repeats)\n";
    return 0;
  }

  if (*synth_cmd) {
    int dtype = vh::kDtypeF32;
    if (synth_dtype == "f64") {
      dtype = vh::kDtypeF64;
    } else if (synth_dtype != "f32") {
      throw vh::ConfigError("dtype must be f32 or f64");
    }
    std::filesystem::create_directories(synth_out_dir);
    std::vector<vh::ManifestEntry> entries;
    const int total = sp.n_controls + sp.n_patients;
    for (int j = 0; j < total; ++j) {
      const bool patient = j >= sp.n_controls;
      const vh::Volume4D vol = vh::synth_volume(sp, j, patient);
      const std::string id =
          (patient ? "patient_" : "control_") + std::to_string(patient ? j - sp.n_controls : j);
      const std::string name = id + ".vxh";
      vh::write_volume(synth_out_dir + "/" + name, vol, dtype);
      entries.push_back({name, patient ? 1 : 0, id});
    }
    vh::save_manifest(synth_out_dir + "/manifest.json", entries);
    std::cout << "wrote " << total << " volumes + manifest to " << synth_out_dir << "\n";
    return 0;
  }

  if (*resize_cmd) {
    const vh::VolumeData in = vh::read_volume_raw(resize_in);
    vh::write_volume_raw(resize_out, vh::resize_block_mean(in, f1, f2, fv));
    std::cout << "resized " << resize_in << " -> " << resize_out << "\n";
    return 0;
  }

  if (*plan_cmd) {
    const vh::RunConfig config = vh::load_config_file(plan_config);
    const vh::PlanReport plan = vh::plan_shapes(plan_s, plan_k, plan_c, config.stages, config.aggregation);
    if (plan_json) {
      std::cout << plan_to_json(plan).dump(2) << "\n";
    } else {
      print_plan_table(plan, std::cout);
    }
    if (!plan.ok) throw vh::ConfigError("illegal stage schedule: " + plan.reason);
    return 0;
  }

  if (*inspect_cmd) {
    const vh::TrainedModel model = vh::load_model_file(inspect_model);
    std::cout << model_summary(model).dump(2) << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const vh::Error& e) {
    json err{{"error", {{"kind", e.kind()}, {"code", e.exit_code()}, {"message", e.what()}}}};
    if (const auto* io = dynamic_cast<const vh::IoError*>(&e); io && !io->path().empty()) {
      err["error"]["path"] = io->path();
    }
    std::cerr << err.dump() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    json err{{"error", {{"kind", "internal"}, {"code", 1}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }
}
