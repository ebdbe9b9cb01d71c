#include "vvs/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "vvs/error.hpp"

namespace vvs {

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  template <typename T>
  bool get(const std::string& key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      if constexpr (std::is_same_v<T, int>) {
        if (!it->is_number_integer()) throw ConfigError(field(key), "expected an integer");
      } else if constexpr (std::is_same_v<T, std::uint64_t>) {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<std::int64_t>() >= 0))
          throw ConfigError(field(key), "expected a non-negative integer");
      } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) throw ConfigError(field(key), "expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(field(key), "expected true or false");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError(field(key), "expected a string");
      }
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(field(key), e.what());
    }
    return true;
  }

  const json* sub(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

template <typename E, typename F>
E parse_enum(Reader& r, const std::string& key, E current, F from_string) {
  std::string s;
  if (!r.get(key, s)) return current;
  try {
    return from_string(s);
  } catch (const ConfigError& e) {
    throw ConfigError(r.field(key), e.what());
  }
}

}  // namespace

json to_json(const AugmentPolicy& p) {
  return {{"crop_scale_lo", p.crop_scale_lo},
          {"crop_scale_hi", p.crop_scale_hi},
          {"crop_ratio_lo", p.crop_ratio_lo},
          {"crop_ratio_hi", p.crop_ratio_hi},
          {"flip_prob", p.flip_prob},
          {"jitter",
           {{"brightness", p.jitter.brightness},
            {"contrast", p.jitter.contrast},
            {"saturation", p.jitter.saturation},
            {"hue", p.jitter.hue}}},
          {"jitter_prob", p.jitter_prob},
          {"grayscale_prob", p.grayscale_prob},
          {"output_size", p.output_size}};
}

json to_json(const BackboneConfig& c) {
  return {{"architecture", std::string(to_string(c.architecture))},
          {"feature_dim", c.feature_dim},
          {"input_size", c.input_size},
          {"width", c.width}};
}

json to_json(const HeadConfig& c) {
  return {{"projection_dim", c.projection_dim}, {"hidden_dim", c.hidden_dim}};
}

json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"momentum", c.momentum},
          {"alpha", c.alpha},
          {"temperature", c.temperature},
          {"temperature_mode", std::string(to_string(c.temperature_mode))},
          {"seed", c.seed},
          {"augment", to_json(c.augment)},
          {"backbone", to_json(c.backbone)},
          {"heads", to_json(c.heads)},
          {"checkpoint_every", c.checkpoint_every},
          {"lr_schedule", std::string(to_string(c.lr_schedule))},
          {"rp_block_resize", c.rp_block_resize},
          {"rp_branch", c.rp_branch},
          {"grad_clip_failsafe", c.grad_clip_failsafe},
          {"grad_clip_norm", c.grad_clip_norm}};
}

json to_json(const DatasetSpec& d) {
  return {{"kind", d.kind},     {"path", d.path},   {"split", d.split},         {"limit", d.limit},
          {"seed", d.seed},     {"count", d.count}, {"n_classes", d.n_classes}, {"image_size", d.image_size}};
}

json to_json(const ExperimentConfig& c) {
  json recs = json::array();
  for (const auto& r : c.brainsim.recordings)
    recs.push_back({{"path", r.path}, {"drop_nan_neurons", r.drop_nan_neurons}});
  return {{"name", c.name},
          {"train", to_json(c.train)},
          {"data", to_json(c.data)},
          {"probe",
           {{"l2", c.probe.options.l2},
            {"max_iterations", c.probe.options.max_iterations},
            {"tolerance", c.probe.options.tolerance},
            {"train_set", to_json(c.probe.train_set)},
            {"test_set", to_json(c.probe.test_set)},
            {"seed", c.probe.seed},
            {"rpp_samples_per_image", c.probe.rpp_samples_per_image}}},
          {"brainsim",
           {{"recordings", recs},
            {"layers", c.brainsim.layers},
            {"cv",
             {{"n_splits", c.brainsim.cv.n_splits},
              {"train_fraction", c.brainsim.cv.train_fraction},
              {"seed", c.brainsim.cv.seed}}},
            {"n_components", c.brainsim.n_components},
            {"max_features", c.brainsim.max_features},
            {"ceiling_iterations", c.brainsim.ceiling_iterations},
            {"stimulus_resize", c.brainsim.stimulus_resize}}},
          {"sweep",
           {{"alphas", c.sweep.alphas},
            {"seeds", c.sweep.seeds},
            {"parallelism", c.sweep.parallelism},
            {"plots", c.sweep.plots}}},
          {"output_dir", c.output_dir}};
}

AugmentPolicy augment_policy_from_json(const json& j, const std::string& prefix) {
  AugmentPolicy p;
  Reader r(j, prefix);
  r.get("crop_scale_lo", p.crop_scale_lo);
  r.get("crop_scale_hi", p.crop_scale_hi);
  r.get("crop_ratio_lo", p.crop_ratio_lo);
  r.get("crop_ratio_hi", p.crop_ratio_hi);
  r.get("flip_prob", p.flip_prob);
  if (const json* jj = r.sub("jitter")) {
    Reader rj(*jj, r.field("jitter"));
    rj.get("brightness", p.jitter.brightness);
    rj.get("contrast", p.jitter.contrast);
    rj.get("saturation", p.jitter.saturation);
    rj.get("hue", p.jitter.hue);
    rj.finish();
  }
  r.get("jitter_prob", p.jitter_prob);
  r.get("grayscale_prob", p.grayscale_prob);
  r.get("output_size", p.output_size);
  r.finish();
  return p;
}

BackboneConfig backbone_config_from_json(const json& j, const std::string& prefix) {
  BackboneConfig c;
  Reader r(j, prefix);
  c.architecture = parse_enum(r, "architecture", c.architecture, architecture_from_string);
  r.get("feature_dim", c.feature_dim);
  r.get("input_size", c.input_size);
  r.get("width", c.width);
  r.finish();
  return c;
}

HeadConfig head_config_from_json(const json& j, const std::string& prefix) {
  HeadConfig c;
  Reader r(j, prefix);
  r.get("projection_dim", c.projection_dim);
  r.get("hidden_dim", c.hidden_dim);
  r.finish();
  return c;
}

TrainConfig train_config_from_json(const json& j, const std::string& prefix) {
  TrainConfig c;
  Reader r(j, prefix);
  r.get("batch_size", c.batch_size);
  r.get("epochs", c.epochs);
  r.get("learning_rate", c.learning_rate);
  r.get("weight_decay", c.weight_decay);
  r.get("momentum", c.momentum);
  r.get("alpha", c.alpha);
  r.get("temperature", c.temperature);
  c.temperature_mode = parse_enum(r, "temperature_mode", c.temperature_mode, temperature_mode_from_string);
  r.get("seed", c.seed);
  if (const json* a = r.sub("augment")) c.augment = augment_policy_from_json(*a, r.field("augment"));
  if (const json* b = r.sub("backbone")) c.backbone = backbone_config_from_json(*b, r.field("backbone"));
  if (const json* h = r.sub("heads")) c.heads = head_config_from_json(*h, r.field("heads"));
  r.get("checkpoint_every", c.checkpoint_every);
  c.lr_schedule = parse_enum(r, "lr_schedule", c.lr_schedule, lr_schedule_from_string);
  r.get("rp_block_resize", c.rp_block_resize);
  r.get("rp_branch", c.rp_branch);
  r.get("grad_clip_failsafe", c.grad_clip_failsafe);
  r.get("grad_clip_norm", c.grad_clip_norm);
  r.finish();
  return c;
}

namespace {

DatasetSpec dataset_from_json(const json& j, const std::string& prefix) {
  DatasetSpec d;
  Reader r(j, prefix);
  r.get("kind", d.kind);
  r.get("path", d.path);
  r.get("split", d.split);
  r.get("limit", d.limit);
  r.get("seed", d.seed);
  r.get("count", d.count);
  r.get("n_classes", d.n_classes);
  r.get("image_size", d.image_size);
  r.finish();
  return d;
}

}  // namespace

void DatasetSpec::validate(const std::string& field) const {
  if (kind == "synthetic") {
    if (count <= 0) throw ConfigError(field + ".count", "must be positive");
    if (n_classes < 2) throw ConfigError(field + ".n_classes", "must be at least 2");
    if (image_size < 16 || image_size % 2 != 0)
      throw ConfigError(field + ".image_size", "must be even and at least 16");
  } else if (kind == "stl10") {
    if (path.empty()) throw ConfigError(field + ".path", "required for stl10");
    stl10_split_from_string(split);
  } else if (kind == "image_dir") {
    if (path.empty()) throw ConfigError(field + ".path", "required for image_dir");
  } else {
    throw ConfigError(field + ".kind", "expected synthetic, stl10 or image_dir");
  }
  if (limit < 0) throw ConfigError(field + ".limit", "must be non-negative");
  if (image_size < 0) throw ConfigError(field + ".image_size", "must be non-negative");
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  r.get("name", c.name);
  if (const json* t = r.sub("train")) c.train = train_config_from_json(*t, "train");
  if (const json* d = r.sub("data")) c.data = dataset_from_json(*d, "data");
  if (const json* p = r.sub("probe")) {
    Reader rp(*p, "probe");
    rp.get("l2", c.probe.options.l2);
    rp.get("max_iterations", c.probe.options.max_iterations);
    rp.get("tolerance", c.probe.options.tolerance);
    if (const json* s = rp.sub("train_set")) c.probe.train_set = dataset_from_json(*s, "probe.train_set");
    if (const json* s = rp.sub("test_set")) c.probe.test_set = dataset_from_json(*s, "probe.test_set");
    rp.get("seed", c.probe.seed);
    rp.get("rpp_samples_per_image", c.probe.rpp_samples_per_image);
    rp.finish();
  }
  if (const json* b = r.sub("brainsim")) {
    Reader rb(*b, "brainsim");
    if (const json* recs = rb.sub("recordings")) {
      if (!recs->is_array()) throw ConfigError("brainsim.recordings", "expected an array");
      for (std::size_t i = 0; i < recs->size(); ++i) {
        const std::string f = "brainsim.recordings." + std::to_string(i);
        NeuralDatasetSpec n;
        if ((*recs)[i].is_string()) {
          n.path = (*recs)[i].get<std::string>();
        } else {
          Reader rr((*recs)[i], f);
          rr.get("path", n.path);
          rr.get("drop_nan_neurons", n.drop_nan_neurons);
          rr.finish();
        }
        c.brainsim.recordings.push_back(n);
      }
    }
    if (const json* l = rb.sub("layers")) {
      if (!l->is_array()) throw ConfigError("brainsim.layers", "expected an array of names");
      for (const auto& e : *l) {
        if (!e.is_string()) throw ConfigError("brainsim.layers", "expected an array of names");
        c.brainsim.layers.push_back(e.get<std::string>());
      }
    }
    if (const json* cv = rb.sub("cv")) {
      Reader rc(*cv, "brainsim.cv");
      rc.get("n_splits", c.brainsim.cv.n_splits);
      rc.get("train_fraction", c.brainsim.cv.train_fraction);
      rc.get("seed", c.brainsim.cv.seed);
      rc.finish();
    }
    rb.get("n_components", c.brainsim.n_components);
    rb.get("max_features", c.brainsim.max_features);
    rb.get("ceiling_iterations", c.brainsim.ceiling_iterations);
    rb.get("stimulus_resize", c.brainsim.stimulus_resize);
    rb.finish();
  }
  if (const json* s = r.sub("sweep")) {
    Reader rs(*s, "sweep");
    if (const json* a = rs.sub("alphas")) {
      if (!a->is_array()) throw ConfigError("sweep.alphas", "expected an array of numbers");
      for (const auto& e : *a) {
        if (!e.is_number()) throw ConfigError("sweep.alphas", "expected an array of numbers");
        c.sweep.alphas.push_back(e.get<double>());
      }
    }
    if (const json* a = rs.sub("seeds")) {
      if (!a->is_array()) throw ConfigError("sweep.seeds", "expected an array of integers");
      for (const auto& e : *a) {
        if (!e.is_number_integer() || e.get<std::int64_t>() < 0)
          throw ConfigError("sweep.seeds", "expected an array of non-negative integers");
        c.sweep.seeds.push_back(e.get<std::uint64_t>());
      }
    }
    rs.get("parallelism", c.sweep.parallelism);
    rs.get("plots", c.sweep.plots);
    rs.finish();
  }
  r.get("output_dir", c.output_dir);
  r.finish();
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  train.validate();
  data.validate("data");
  if (!(probe.options.l2 >= 0.0)) throw ConfigError("probe.l2", "must be non-negative");
  if (probe.options.max_iterations < 1) throw ConfigError("probe.max_iterations", "must be positive");
  if (!(probe.options.tolerance > 0.0)) throw ConfigError("probe.tolerance", "must be positive");
  probe.train_set.validate("probe.train_set");
  probe.test_set.validate("probe.test_set");
  if (probe.rpp_samples_per_image < 1) throw ConfigError("probe.rpp_samples_per_image", "must be at least 1");
  brainsim.cv.validate();
  if (brainsim.n_components < 1) throw ConfigError("brainsim.n_components", "must be positive");
  if (brainsim.max_features < 0) throw ConfigError("brainsim.max_features", "must be non-negative");
  if (brainsim.ceiling_iterations < 1) throw ConfigError("brainsim.ceiling_iterations", "must be positive");
  if (brainsim.stimulus_resize != "bilinear")
    throw ConfigError("brainsim.stimulus_resize", "only bilinear is supported");
  for (std::size_t i = 0; i < brainsim.recordings.size(); ++i)
    if (brainsim.recordings[i].path.empty())
      throw ConfigError("brainsim.recordings." + std::to_string(i) + ".path", "must not be empty");
  for (std::size_t i = 0; i < sweep.alphas.size(); ++i)
    if (!(sweep.alphas[i] >= 0.0))
      throw ConfigError("sweep.alphas." + std::to_string(i), "must be non-negative");
  if (sweep.parallelism < 1) throw ConfigError("sweep.parallelism", "must be at least 1");
  if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (name.empty()) throw ConfigError("name", "must not be empty");
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.name = "desk";
  c.train = TrainConfig::desk_preset();
  c.data = DatasetSpec{};
  c.probe.train_set = DatasetSpec{};
  c.probe.train_set.seed = 101;
  c.probe.train_set.count = 2000;
  c.probe.test_set = DatasetSpec{};
  c.probe.test_set.seed = 202;
  c.probe.test_set.count = 2000;
  c.sweep.alphas = {0.0, 0.01};
  return c;
}

ExperimentConfig ExperimentConfig::full() {
  ExperimentConfig c;
  c.name = "full";
  c.train = TrainConfig::full_preset();
  c.data = DatasetSpec{"stl10", "stl10_binary", "unlabeled", 0, 0, 0, 0, 96};
  c.probe.train_set = DatasetSpec{"stl10", "stl10_binary", "train", 0, 0, 0, 0, 96};
  c.probe.test_set = DatasetSpec{"stl10", "stl10_binary", "test", 0, 0, 0, 0, 96};
  c.brainsim.recordings = {{"neural/v1", false}, {"neural/v2", false}, {"neural/v4", false}, {"neural/it", false}};
  c.sweep.alphas = reference_alpha_sweep();
  return c;
}

std::vector<double> reference_alpha_sweep() { return {0.0, 0.00002, 0.0001, 0.0005, 0.002, 0.01, 0.05}; }

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<config>", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("<config>", std::string("invalid JSON: ") + e.what());
  }
  return experiment_config_from_json(j);
}

void save_experiment_config(const std::filesystem::path& path, const ExperimentConfig& c) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << to_json(c).dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

void apply_override(json& doc, const std::string& dotted_path, const std::string& value) {
  if (dotted_path.empty()) throw ConfigError("<override>", "empty field path");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::exception&) {
    parsed = value;
  }
  json* cur = &doc;
  std::stringstream ss(dotted_path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    const bool last = i + 1 == parts.size();
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (...) {
        throw ConfigError(dotted_path, "expected an array index at '" + p + "'");
      }
      if (idx >= cur->size()) throw ConfigError(dotted_path, "array index out of range");
      cur = &(*cur)[idx];
    } else if (cur->is_object()) {
      if (!cur->contains(p)) throw ConfigError(dotted_path, "unknown field");
      cur = &(*cur)[p];
    } else {
      throw ConfigError(dotted_path, "'" + p + "' is not inside an object");
    }
    if (last) *cur = parsed;
  }
}

std::filesystem::path resolve_data_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("VVS_DATA_ROOT"); root && *root) return std::filesystem::path(root) / p;
  return p;
}

}  // namespace vvs
