#include "vvs/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "vvs/brainsim.hpp"
#include "vvs/checkpoint.hpp"
#include "vvs/error.hpp"
#include "vvs/probes.hpp"
#include "vvs/trainer.hpp"

namespace vvs {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.flush();
  if (!out) throw Error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

std::string format_alpha(double a) {
  std::ostringstream os;
  os << std::setprecision(6) << a;
  return os.str();
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

ExperimentConfig run_config(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw DataError("run directory not found: " + run_dir.string());
  const fs::path cfg = run_dir / "config.json";
  if (!fs::exists(cfg)) throw DataError("run directory has no config.json: " + run_dir.string());
  return load_experiment_config(cfg);
}

}  // namespace

ImageSet load_dataset(const DatasetSpec& spec, int size) {
  spec.validate("dataset");
  ImageSet s;
  if (spec.kind == "synthetic") {
    s = synth_image_set(spec.seed, spec.count, spec.n_classes, spec.image_size > 0 ? spec.image_size : size);
  } else {
    const fs::path p = resolve_data_path(spec.path);
    if (!fs::exists(p)) throw DataError("dataset not found: " + p.string());
    if (spec.kind == "stl10") {
      s = load_stl10(p, stl10_split_from_string(spec.split), spec.limit);
    } else {
      s = load_image_dir(p, 0);
      if (spec.limit > 0 && spec.limit < s.count()) {
        std::vector<int> idx(spec.limit);
        for (int i = 0; i < spec.limit; ++i) idx[i] = i;
        s = s.subset(idx);
      }
    }
  }
  if (size > 0 && (s.height() != size || s.width() != size)) s = s.resized(size);
  return s;
}

std::string dataset_id(const DatasetSpec& spec) {
  std::ostringstream os;
  if (spec.kind == "synthetic") {
    os << "synthetic:seed=" << spec.seed << ",count=" << spec.count << ",classes=" << spec.n_classes
       << ",k=" << spec.image_size;
  } else if (spec.kind == "stl10") {
    os << "stl10:" << spec.path << ":" << spec.split;
    if (spec.limit > 0) os << ",limit=" << spec.limit;
  } else {
    os << "image_dir:" << spec.path;
    if (spec.limit > 0) os << ",limit=" << spec.limit;
  }
  return os.str();
}

fs::path cmd_train(const ExperimentConfig& config, const fs::path& run_dir, std::ostream* progress) {
  config.validate();
  const ImageSet images = load_dataset(config.data, config.train.backbone.input_size);
  fs::create_directories(run_dir);
  save_experiment_config(run_dir / "config.json", config);
  Trainer trainer(config.train);
  if (progress)
    *progress << "training " << run_dir.string() << ": " << images.count() << " images, "
              << config.train.epochs << " epochs, alpha=" << format_alpha(config.train.alpha)
              << ", seed=" << config.train.seed << '\n';
  const TrainResult res = trainer.train(images, run_dir);
  if (progress)
    for (const auto& e : res.epochs)
      *progress << "  epoch " << e.epoch << " total=" << fmt(e.total) << " cl=" << fmt(e.cl_loss)
                << " rpl=" << fmt(e.rpl_loss) << '\n';
  return run_dir;
}

Metric metric_from_string(std::string_view s) {
  if (s == "ic") return Metric::ic;
  if (s == "rpp") return Metric::rpp;
  if (s == "brainsim") return Metric::brainsim;
  throw ConfigError("metrics", "unknown metric '" + std::string(s) + "' (expected ic, rpp or brainsim)");
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::ic: return "ic";
    case Metric::rpp: return "rpp";
    case Metric::brainsim: return "brainsim";
  }
  return "";
}

fs::path latest_checkpoint(const fs::path& run_dir) {
  const fs::path dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) throw DataError("no checkpoints in " + run_dir.string());
  std::vector<fs::path> found;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".ckpt") found.push_back(e.path());
  if (found.empty()) throw DataError("no checkpoints in " + run_dir.string());
  std::sort(found.begin(), found.end());
  return found.back();
}

json cmd_eval(const fs::path& run_dir, const std::set<Metric>& which, std::ostream* progress) {
  const ExperimentConfig cfg = run_config(run_dir);
  if (which.empty()) throw ConfigError("metrics", "no metric requested");
  if (which.count(Metric::brainsim) && cfg.brainsim.recordings.empty())
    throw ConfigError("brainsim.recordings", "brainsim requested but no neural dataset is configured");

  const fs::path ckpt = latest_checkpoint(run_dir);
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  Model<float>& model = loaded.model;
  model.set_frozen(true);
  const int k = model.backbone_config().input_size;

  json provenance_base = {{"run_dir", run_dir.string()},
                          {"checkpoint", ckpt.filename().string()},
                          {"checkpoint_sha256", sha256_file(ckpt)},
                          {"train_seed", loaded.meta.config.seed},
                          {"alpha", loaded.meta.config.alpha},
                          {"epoch", loaded.meta.epoch}};

  const fs::path report_path = run_dir / "report.json";
  json report = fs::exists(report_path) ? read_json(report_path) : json::object();
  report["provenance"] = provenance_base;
  if (!report.contains("metrics")) report["metrics"] = json::object();

  if (which.count(Metric::ic)) {
    if (progress) *progress << "ic probe\n";
    const ImageSet train_set = load_dataset(cfg.probe.train_set, k);
    const ImageSet test_set = load_dataset(cfg.probe.test_set, k);
    if (!train_set.has_labels() || !test_set.has_labels())
      throw DataError("ic: probe datasets must be labeled");
    const Eigen::MatrixXd ftr = model.encode(train_set, false).cast<double>();
    const Eigen::MatrixXd fte = model.encode(test_set, false).cast<double>();
    const LinearProbe probe =
        fit_linear_probe(ftr, train_set.labels(), cfg.probe.options, dataset_id(cfg.probe.train_set));
    const double acc = ic_accuracy(probe, fte, test_set.labels());
    json m = {{"value", acc},
              {"train_dataset", dataset_id(cfg.probe.train_set)},
              {"dataset", dataset_id(cfg.probe.test_set)},
              {"l2", cfg.probe.options.l2},
              {"iterations", probe.iterations},
              {"converged", probe.converged}};
    if (!probe.warning.empty()) m["warning"] = probe.warning;
    report["metrics"]["ic"] = m;
  }

  if (which.count(Metric::rpp)) {
    if (progress) *progress << "rpp\n";
    const ImageSet test_set = load_dataset(cfg.probe.test_set, k);
    RppOptions ro;
    ro.seed = cfg.probe.seed;
    ro.samples_per_image = cfg.probe.rpp_samples_per_image;
    ro.block_resize = loaded.meta.config.rp_block_resize;
    const RppResult rr = rpp_evaluate(model, test_set, ro);
    std::vector<std::vector<int>> confusion(rr.confusion.rows());
    for (Eigen::Index i = 0; i < rr.confusion.rows(); ++i)
      for (Eigen::Index j = 0; j < rr.confusion.cols(); ++j) confusion[i].push_back(rr.confusion(i, j));
    report["metrics"]["rpp"] = {{"value", rr.accuracy},
                                {"independent_chance", rr.independent_chance()},
                                {"confusion", confusion},
                                {"dataset", dataset_id(cfg.probe.test_set)},
                                {"seed", cfg.probe.seed},
                                {"samples", test_set.count() * ro.samples_per_image}};
  }

  if (which.count(Metric::brainsim)) {
    std::vector<std::string> layers = cfg.brainsim.layers.empty() ? model.block_layers() : cfg.brainsim.layers;
    // Keep network order whatever the config order is.
    const auto& reg = model.layer_registry();
    for (const auto& l : layers)
      if (std::find(reg.begin(), reg.end(), l) == reg.end()) {
        std::string valid;
        for (const auto& r : reg) valid += (valid.empty() ? "" : ", ") + r;
        throw ConfigError("brainsim.layers", "unknown layer '" + l + "'; valid layers: " + valid);
      }
    std::sort(layers.begin(), layers.end(), [&](const std::string& a, const std::string& b) {
      return std::find(reg.begin(), reg.end(), a) < std::find(reg.begin(), reg.end(), b);
    });

    json regions = json::array();
    std::vector<BrainScoreReport> reports;
    for (const auto& spec : cfg.brainsim.recordings) {
      const fs::path p = resolve_data_path(spec.path);
      if (!fs::exists(p)) throw DataError("neural dataset not found: " + p.string());
      RecordingLoadOptions lo;
      lo.drop_nan_neurons = spec.drop_nan_neurons;
      const NeuralRecording rec = load_neural_recording(p, lo);
      if (progress)
        *progress << "brainsim " << to_string(rec.region()) << ": " << rec.n_stimuli() << " stimuli, "
                  << rec.n_neurons() << " neurons\n";
      const ImageSet stim = rec.stimuli().height() == k ? rec.stimuli() : rec.stimuli().resized(k);
      const auto acts = model.record_activations(stim, layers);
      const NoiseCeiling ceiling = noise_ceiling(rec, cfg.brainsim.ceiling_iterations, cfg.brainsim.cv.seed);
      LayerScoreOptions so;
      so.n_components = cfg.brainsim.n_components;
      so.max_features = cfg.brainsim.max_features;
      so.ceiling_iterations = cfg.brainsim.ceiling_iterations;
      so.projection_seed = cfg.brainsim.cv.seed;
      std::vector<std::pair<std::string, ScoreDistribution>> per_layer;
      for (const auto& l : layers) per_layer.emplace_back(l, layer_score(acts.at(l), rec, cfg.brainsim.cv, so, ceiling));
      BrainScoreReport r = model_score(rec.region(), std::move(per_layer));
      json rj = to_json(r);
      rj["dataset"] = "neural:" + spec.path;
      rj["dataset_sha256"] = sha256_file(p / "responses.bin");
      rj["cv_seed"] = cfg.brainsim.cv.seed;
      rj["median_ceiling"] = [&] {
        std::vector<double> c(ceiling.ceiling.data(), ceiling.ceiling.data() + ceiling.ceiling.size());
        std::nth_element(c.begin(), c.begin() + c.size() / 2, c.end());
        return c[c.size() / 2];
      }();
      regions.push_back(rj);
      reports.push_back(std::move(r));
    }
    report["metrics"]["brainsim"] = {{"regions", regions}, {"layers", layers}};
    write_text(run_dir / "brain_scores.csv", brain_score_csv(reports));
  }

  write_text(report_path, report.dump(2) + "\n");
  return report;
}

bool SweepSummary::all_ok() const {
  return std::all_of(runs.begin(), runs.end(), [](const SweepRun& r) { return r.ok; });
}

namespace {

struct RowStats {
  double mean = std::nan("");
  double sd = std::nan("");
};

RowStats stats(const std::vector<double>& v) {
  RowStats s;
  if (v.empty()) return s;
  double m = 0.0;
  for (double x : v) m += x;
  m /= v.size();
  s.mean = m;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  s.sd = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return s;
}

std::optional<double> metric_value(const json& report, const char* name) {
  if (!report.contains("metrics") || !report["metrics"].contains(name)) return std::nullopt;
  return report["metrics"][name]["value"].get<double>();
}

// Best-layer center and CV spread for a region, if scored.
std::optional<std::pair<double, double>> region_value(const json& report, const std::string& region) {
  if (!report.contains("metrics") || !report["metrics"].contains("brainsim")) return std::nullopt;
  for (const auto& r : report["metrics"]["brainsim"]["regions"])
    if (r["region"] == region)
      return std::make_pair(r["model_score"]["center"].get<double>(), r["model_score"]["spread"].get<double>());
  return std::nullopt;
}

const char* kRegions[] = {"V1", "V2", "V4", "IT"};

}  // namespace

std::string sweep_csv(const std::vector<SweepRun>& runs) {
  std::vector<double> alphas;
  for (const auto& r : runs)
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);

  std::ostringstream os;
  os << "# schema: " << kSweepSchema << '\n';
  os << "alpha,n_runs,status,ic,ic_spread,rpp,rpp_spread";
  for (const char* reg : kRegions) os << ',' << reg << ',' << reg << "_spread";
  os << ",seeds,run_dirs\n";
  for (double a : alphas) {
    std::vector<double> ic, rpp;
    std::vector<std::vector<double>> rc(4), rs(4);
    std::string seeds, dirs;
    bool ok = true;
    int n = 0;
    for (const auto& r : runs) {
      if (r.alpha != a) continue;
      ++n;
      seeds += (seeds.empty() ? "" : ";") + std::to_string(r.seed);
      dirs += (dirs.empty() ? "" : ";") + r.run_dir.filename().string();
      if (!r.ok) {
        ok = false;
        continue;
      }
      if (auto v = metric_value(r.report, "ic")) ic.push_back(*v);
      if (auto v = metric_value(r.report, "rpp")) rpp.push_back(*v);
      for (int i = 0; i < 4; ++i)
        if (auto v = region_value(r.report, kRegions[i])) {
          rc[i].push_back(v->first);
          rs[i].push_back(v->second);
        }
    }
    const RowStats sic = stats(ic), srpp = stats(rpp);
    os << format_alpha(a) << ',' << n << ',' << (ok ? "ok" : "FAILED") << ',' << fmt(sic.mean) << ','
       << fmt(sic.sd) << ',' << fmt(srpp.mean) << ',' << fmt(srpp.sd);
    for (int i = 0; i < 4; ++i) {
      // Spread: CV-split spread for one seed, spread over seeds otherwise.
      const RowStats c = stats(rc[i]);
      const double spread = rc[i].size() > 1 ? c.sd : stats(rs[i]).mean;
      os << ',' << fmt(c.mean) << ',' << fmt(spread);
    }
    os << ',' << seeds << ',' << dirs << '\n';
  }
  return os.str();
}

namespace {

std::string sweep_runs_csv(const std::vector<SweepRun>& runs) {
  std::ostringstream os;
  os << "# schema: " << kSweepSchema << '\n';
  os << "alpha,seed,status,ic,rpp";
  for (const char* reg : kRegions) os << ',' << reg << ',' << reg << "_spread";
  os << ",checkpoint_sha256,run_dir,error\n";
  for (const auto& r : runs) {
    os << format_alpha(r.alpha) << ',' << r.seed << ',' << (r.ok ? "ok" : "FAILED") << ',';
    if (r.ok) {
      if (auto v = metric_value(r.report, "ic")) os << fmt(*v);
      os << ',';
      if (auto v = metric_value(r.report, "rpp")) os << fmt(*v);
      for (const char* reg : kRegions) {
        if (auto v = region_value(r.report, reg))
          os << ',' << fmt(v->first) << ',' << fmt(v->second);
        else
          os << ",,";
      }
      os << ',' << r.report["provenance"].value("checkpoint_sha256", "");
    } else {
      os << ",,,,,,,,,";
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << ',' << r.run_dir.filename().string() << ',' << err << '\n';
  }
  return os.str();
}

}  // namespace

std::string sweep_plot_svg(const std::vector<SweepRun>& runs, const std::string& metric) {
  std::vector<double> alphas;
  for (const auto& r : runs)
    if (std::find(alphas.begin(), alphas.end(), r.alpha) == alphas.end()) alphas.push_back(r.alpha);
  std::vector<double> ys;
  for (double a : alphas) {
    std::vector<double> v;
    for (const auto& r : runs) {
      if (r.alpha != a || !r.ok) continue;
      if (metric == "ic" || metric == "rpp") {
        if (auto x = metric_value(r.report, metric.c_str())) v.push_back(*x);
      } else if (auto x = region_value(r.report, metric)) {
        v.push_back(x->first);
      }
    }
    ys.push_back(stats(v).mean);
  }

  const double w = 480, h = 300, left = 60, right = 20, top = 30, bottom = 50;
  double lo = 0.0, hi = 1.0;
  for (double y : ys)
    if (std::isfinite(y)) {
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  auto px = [&](std::size_t i) {
    return alphas.size() < 2 ? left + (w - left - right) / 2
                             : left + (w - left - right) * static_cast<double>(i) / (alphas.size() - 1);
  };
  auto py = [&](double y) { return top + (h - top - bottom) * (1.0 - (y - lo) / (hi - lo)); };

  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << w / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << metric
     << " vs alpha</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
     << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    os << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << v
       << "</text>\n";
  }
  for (std::size_t i = 0; i < alphas.size(); ++i)
    os << "<text x=\"" << px(i) << "\" y=\"" << h - bottom + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << format_alpha(alphas[i]) << "</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < ys.size(); ++i)
    if (std::isfinite(ys[i])) os << px(i) << ',' << py(ys[i]) << ' ';
  os << "\"/>\n";
  for (std::size_t i = 0; i < ys.size(); ++i)
    if (std::isfinite(ys[i]))
      os << "<circle cx=\"" << px(i) << "\" cy=\"" << py(ys[i]) << "\" r=\"3\" fill=\"steelblue\"/>\n";
  os << "</svg>\n";
  return os.str();
}

namespace {

void write_sweep_outputs(const fs::path& out_dir, const std::vector<SweepRun>& runs, bool plots) {
  write_text(out_dir / "sweep.csv", sweep_csv(runs));
  write_text(out_dir / "sweep_runs.csv", sweep_runs_csv(runs));
  json j = json::array();
  for (const auto& r : runs)
    j.push_back({{"alpha", r.alpha},
                 {"seed", r.seed},
                 {"run_dir", r.run_dir.filename().string()},
                 {"ok", r.ok},
                 {"error", r.error},
                 {"report", r.report}});
  write_text(out_dir / "sweep.json", json{{"schema", kSweepSchema}, {"runs", j}}.dump(2) + "\n");
  if (plots) {
    bool any_ic = false, any_rpp = false;
    std::set<std::string> regions;
    for (const auto& r : runs) {
      any_ic = any_ic || metric_value(r.report, "ic").has_value();
      any_rpp = any_rpp || metric_value(r.report, "rpp").has_value();
      for (const char* reg : kRegions)
        if (region_value(r.report, reg)) regions.insert(reg);
    }
    if (any_ic) write_text(out_dir / "plot_ic.svg", sweep_plot_svg(runs, "ic"));
    if (any_rpp) write_text(out_dir / "plot_rpp.svg", sweep_plot_svg(runs, "rpp"));
    for (const auto& reg : regions) write_text(out_dir / ("plot_" + reg + ".svg"), sweep_plot_svg(runs, reg));
  }
}

}  // namespace

SweepSummary cmd_sweep(const ExperimentConfig& config, const fs::path& out_dir, const std::set<Metric>& which,
                       std::ostream* progress) {
  if (config.sweep.alphas.empty()) throw ConfigError("sweep.alphas", "sweep list is empty");
  config.validate();
  fs::create_directories(out_dir);
  save_experiment_config(out_dir / "config.json", config);

  const std::vector<std::uint64_t> seeds =
      config.sweep.seeds.empty() ? std::vector<std::uint64_t>{config.train.seed} : config.sweep.seeds;
  SweepSummary summary;
  for (double a : config.sweep.alphas)
    for (std::uint64_t s : seeds) {
      SweepRun r;
      r.alpha = a;
      r.seed = s;
      r.run_dir = out_dir / ("alpha_" + format_alpha(a) + "_seed_" + std::to_string(s));
      summary.runs.push_back(r);
    }

  std::mutex io;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= summary.runs.size()) return;
      SweepRun& r = summary.runs[i];
      ExperimentConfig sub = config;
      sub.train.alpha = r.alpha;
      sub.train.seed = r.seed;
      sub.sweep = SweepConfig{};
      sub.name = config.name + "/" + r.run_dir.filename().string();
      try {
        cmd_train(sub, r.run_dir, nullptr);
        if (!which.empty()) r.report = cmd_eval(r.run_dir, which, nullptr);
        r.ok = true;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
      if (progress) {
        std::lock_guard<std::mutex> lock(io);
        *progress << (r.ok ? "done " : "FAILED ") << r.run_dir.filename().string();
        if (!r.ok) *progress << ": " << r.error;
        *progress << '\n';
      }
    }
  };
  const int threads = std::max(1, std::min<int>(config.sweep.parallelism, static_cast<int>(summary.runs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  write_sweep_outputs(out_dir, summary.runs, config.sweep.plots);
  summary.csv = out_dir / "sweep.csv";
  return summary;
}

std::vector<fs::path> cmd_report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<fs::path> written;
  if (fs::exists(dir / "sweep.json")) {
    const json j = read_json(dir / "sweep.json");
    std::vector<SweepRun> runs;
    for (const auto& e : j.at("runs")) {
      SweepRun r;
      r.alpha = e.at("alpha").get<double>();
      r.seed = e.at("seed").get<std::uint64_t>();
      r.run_dir = dir / e.at("run_dir").get<std::string>();
      r.ok = e.at("ok").get<bool>();
      r.error = e.at("error").get<std::string>();
      // Prefer the run's current report (it may have been re-evaluated).
      r.report = fs::exists(r.run_dir / "report.json") ? read_json(r.run_dir / "report.json") : e.at("report");
      runs.push_back(std::move(r));
    }
    write_sweep_outputs(dir, runs, true);
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("sweep", 0) == 0 || name.rfind("plot_", 0) == 0) written.push_back(e.path());
    }
    std::sort(written.begin(), written.end());
    return written;
  }
  if (fs::exists(dir / "report.json")) {
    const json rep = read_json(dir / "report.json");
    if (rep.contains("metrics") && rep["metrics"].contains("brainsim")) {
      std::vector<BrainScoreReport> reports;
      for (const auto& rj : rep["metrics"]["brainsim"]["regions"]) {
        BrainScoreReport r;
        r.region = region_from_string(rj.at("region").get<std::string>());
        r.best_layer = rj.at("best_layer").get<std::string>();
        auto dist = [](const json& d) {
          ScoreDistribution s;
          s.center = d.at("center").get<double>();
          s.spread = d.at("spread").get<double>();
          s.per_split = d.at("per_split").get<std::vector<double>>();
          return s;
        };
        r.model_score = dist(rj.at("model_score"));
        for (const auto& l : rj.at("per_layer")) r.per_layer.emplace_back(l.at("layer").get<std::string>(), dist(l));
        reports.push_back(std::move(r));
      }
      write_text(dir / "brain_scores.csv", brain_score_csv(reports));
      written.push_back(dir / "brain_scores.csv");
    }
    std::ostringstream os;
    os << "metric,value\n";
    for (const char* m : {"ic", "rpp"})
      if (auto v = metric_value(rep, m)) os << m << ',' << fmt(*v) << '\n';
    write_text(dir / "metrics.csv", os.str());
    written.push_back(dir / "metrics.csv");
    return written;
  }
  throw DataError("nothing to report in " + dir.string() + " (no sweep.json or report.json)");
}

NeuralRecording synth_neural_from_run(const fs::path& run_dir, const SynthNeuralSpec& spec,
                                      const fs::path& out_dir) {
  (void)run_config(run_dir);
  LoadedCheckpoint loaded = load_checkpoint(latest_checkpoint(run_dir));
  const int k = loaded.model.backbone_config().input_size;
  DatasetSpec ds = spec.stimuli;
  const ImageSet stim = load_dataset(ds, k);
  ActivationMatrix acts;
  if (spec.random_features > 0) {
    Rng rng = make_rng(spec.seed, {stream::kSynth, 3});
    acts.layer_name = "random";
    acts.values.resize(stim.count(), spec.random_features);
    for (Eigen::Index i = 0; i < acts.values.rows(); ++i)
      for (Eigen::Index j = 0; j < acts.values.cols(); ++j) acts.values(i, j) = static_cast<float>(normal(rng));
  } else {
    acts = loaded.model.record_activations(stim, {spec.layer}).at(spec.layer);
  }
  NeuralRecording rec = synth_neural_recording(acts, spec.n_neurons, spec.noise_sd, spec.n_repetitions,
                                               spec.seed, stim, spec.region);
  save_neural_recording(out_dir, rec);
  return rec;
}

}  // namespace vvs
