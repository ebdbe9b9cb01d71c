#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vvs/config.hpp"
#include "vvs/data.hpp"

namespace vvs {

// Loads a dataset and resamples it to `size` x `size` when it differs.
ImageSet load_dataset(const DatasetSpec& spec, int size);

// Short identifier of a dataset for provenance fields.
std::string dataset_id(const DatasetSpec& spec);

// Trains one model. The run directory receives config.json (the resolved
// configuration), train_log.jsonl and checkpoints/. Progress lines go to
// `progress` when given.
std::filesystem::path cmd_train(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                                std::ostream* progress = nullptr);

enum class Metric { ic, rpp, brainsim };

Metric metric_from_string(std::string_view s);
std::string_view to_string(Metric m);

// Newest checkpoint of a run.
std::filesystem::path latest_checkpoint(const std::filesystem::path& run_dir);

// Evaluates the latest checkpoint of a run and writes report.json (merged
// with any metrics already present). Returns the report.
nlohmann::json cmd_eval(const std::filesystem::path& run_dir, const std::set<Metric>& which,
                        std::ostream* progress = nullptr);

struct SweepRun {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path run_dir;
  bool ok = false;
  std::string error;
  nlohmann::json report;
};

struct SweepSummary {
  std::vector<SweepRun> runs;
  std::filesystem::path csv;
  bool all_ok() const;
};

inline constexpr const char* kSweepSchema = "vvs.sweep.v1";

// One training + evaluation run per (alpha, seed). Writes sweep.csv (one row
// per alpha, seeds aggregated), sweep_runs.csv, sweep.json and optional SVG
// plots. Failed runs are kept with a failure marker.
SweepSummary cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       const std::set<Metric>& which, std::ostream* progress = nullptr);

// Sweep CSV text from the per-run results.
std::string sweep_csv(const std::vector<SweepRun>& runs);

// Rebuilds tables from run directories or a sweep directory: brain_scores.csv
// for a run with a brainsim report, sweep.csv/plots for a sweep. Returns the
// files written.
std::vector<std::filesystem::path> cmd_report(const std::filesystem::path& dir);

// Line plot of metric columns against alpha (categorical x axis).
std::string sweep_plot_svg(const std::vector<SweepRun>& runs, const std::string& metric);

struct SynthNeuralSpec {
  std::string layer = "layer2.0";
  int n_neurons = 50;
  double noise_sd = 0.5;
  int n_repetitions = 4;
  std::uint64_t seed = 0;
  Region region = Region::V1;
  DatasetSpec stimuli;  // defaults to a synthetic set
  // When > 0, neurons read out a random feature matrix of this width
  // instead of the model layer (null recording).
  int random_features = 0;
};

// Writes a neural container whose neurons are linear readouts of a run's
// layer activations on the given stimuli.
NeuralRecording synth_neural_from_run(const std::filesystem::path& run_dir, const SynthNeuralSpec& spec,
                                      const std::filesystem::path& out_dir);

}  // namespace vvs
