// vvs: train, evaluate, sweep and report dual-task models.
//
// Exit codes: 0 ok, 2 config error, 3 data error, 4 run failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vvs/config.hpp"
#include "vvs/error.hpp"
#include "vvs/experiment.hpp"

namespace fs = std::filesystem;
using namespace vvs;

namespace {

constexpr int kOk = 0;
constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kRunExit = 4;

ExperimentConfig resolve_config(const std::string& path, const std::string& preset,
                                const std::vector<std::string>& overrides) {
  json doc;
  if (!path.empty()) {
    doc = to_json(load_experiment_config(path));
  } else if (preset == "full") {
    doc = to_json(ExperimentConfig::full());
  } else if (preset == "desk" || preset.empty()) {
    doc = to_json(ExperimentConfig::desk());
  } else {
    throw ConfigError("--preset", "expected desk or full");
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must look like field.path=value");
    apply_override(doc, o.substr(0, eq), o.substr(eq + 1));
  }
  return experiment_config_from_json(doc);
}

std::set<Metric> parse_metrics(const std::vector<std::string>& names) {
  std::set<Metric> out;
  for (const auto& n : names) out.insert(metric_from_string(n));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-task (contrastive + relative-position) training and ventral-stream evaluation"};
  app.require_subcommand(1);

  std::string config_path, preset;
  std::vector<std::string> overrides;
  auto add_config_opts = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)");
    sub->add_option("--preset", preset, "built-in config when no file is given: desk or full");
    sub->add_option("--set", overrides, "override a field, e.g. --set train.alpha=0.01")->take_all();
  };

  auto* train = app.add_subcommand("train", "train one model");
  add_config_opts(train);
  std::string run_dir;
  train->add_option("-o,--out", run_dir, "run directory (default: <output_dir>/<name>)");

  auto* eval = app.add_subcommand("eval", "evaluate a trained run");
  std::string eval_dir;
  std::vector<std::string> metrics{"ic", "rpp"};
  eval->add_option("run", eval_dir, "run directory")->required();
  eval->add_option("-m,--metrics", metrics, "any of ic, rpp, brainsim")->take_all();

  auto* sweep = app.add_subcommand("sweep", "train and evaluate one run per alpha");
  add_config_opts(sweep);
  std::string sweep_dir;
  std::vector<std::string> sweep_metrics{"ic", "rpp"};
  sweep->add_option("-o,--out", sweep_dir, "sweep directory (default: <output_dir>/<name>_sweep)");
  sweep->add_option("-m,--metrics", sweep_metrics, "any of ic, rpp, brainsim")->take_all();

  auto* report = app.add_subcommand("report", "rebuild CSV tables and plots from a run or sweep");
  std::string report_dir;
  report->add_option("dir", report_dir, "run or sweep directory")->required();

  auto* show = app.add_subcommand("config", "print the resolved config");
  add_config_opts(show);

  auto* synth_images = app.add_subcommand("synth-images", "write a synthetic labeled corpus as PNG class folders");
  std::string si_out;
  int si_count = 400, si_classes = 4, si_size = 32;
  std::uint64_t si_seed = 7;
  synth_images->add_option("-o,--out", si_out, "output directory")->required();
  synth_images->add_option("--count", si_count);
  synth_images->add_option("--classes", si_classes);
  synth_images->add_option("--size", si_size);
  synth_images->add_option("--seed", si_seed);

  auto* synth_neural = app.add_subcommand("synth-neural", "write a synthetic neural recording from a run's layer");
  SynthNeuralSpec sn;
  std::string sn_run, sn_out, sn_region = "V1";
  sn.stimuli.count = 300;
  sn.stimuli.seed = 303;
  synth_neural->add_option("run", sn_run, "run directory")->required();
  synth_neural->add_option("-o,--out", sn_out, "output container directory")->required();
  synth_neural->add_option("--layer", sn.layer);
  synth_neural->add_option("--neurons", sn.n_neurons);
  synth_neural->add_option("--noise-sd", sn.noise_sd);
  synth_neural->add_option("--reps", sn.n_repetitions);
  synth_neural->add_option("--seed", sn.seed);
  synth_neural->add_option("--region", sn_region);
  synth_neural->add_option("--stimuli", sn.stimuli.count, "number of synthetic stimuli");
  synth_neural->add_option("--stimuli-seed", sn.stimuli.seed);
  synth_neural->add_option("--random-features", sn.random_features, "read out random features instead (null)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigExit;
  }

  try {
    if (train->parsed()) {
      const ExperimentConfig cfg = resolve_config(config_path, preset, overrides);
      const fs::path dir = run_dir.empty() ? fs::path(cfg.output_dir) / cfg.name : fs::path(run_dir);
      cmd_train(cfg, dir, &std::cout);
      std::cout << dir.string() << '\n';
    } else if (eval->parsed()) {
      const json rep = cmd_eval(eval_dir, parse_metrics(metrics), &std::cout);
      std::cout << rep["metrics"].dump(2) << '\n';
    } else if (sweep->parsed()) {
      const ExperimentConfig cfg = resolve_config(config_path, preset, overrides);
      const fs::path dir = sweep_dir.empty() ? fs::path(cfg.output_dir) / (cfg.name + "_sweep") : fs::path(sweep_dir);
      const SweepSummary s = cmd_sweep(cfg, dir, parse_metrics(sweep_metrics), &std::cout);
      std::cout << s.csv.string() << '\n';
      if (!s.all_ok()) {
        std::cerr << "sweep: some runs failed; see " << s.csv.string() << '\n';
        return kRunExit;
      }
    } else if (report->parsed()) {
      for (const auto& p : cmd_report(report_dir)) std::cout << p.string() << '\n';
    } else if (show->parsed()) {
      std::cout << to_json(resolve_config(config_path, preset, overrides)).dump(2) << '\n';
    } else if (synth_images->parsed()) {
      const ImageSet set = synth_image_set(si_seed, si_count, si_classes, si_size);
      for (int i = 0; i < set.count(); ++i) {
        const fs::path d = fs::path(si_out) / ("class_" + std::to_string(set.labels()[i]));
        fs::create_directories(d);
        char name[32];
        std::snprintf(name, sizeof name, "%06d.png", i);
        write_png(d / name, set.view(i));
      }
      std::cout << si_out << '\n';
    } else if (synth_neural->parsed()) {
      sn.region = region_from_string(sn_region);
      const NeuralRecording rec = synth_neural_from_run(sn_run, sn, sn_out);
      std::cout << sn_out << ": " << rec.n_stimuli() << " stimuli, " << rec.n_neurons() << " neurons\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRunExit;
  }
  return kOk;
}
