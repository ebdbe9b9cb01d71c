#include "vvs/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "vvs/error.hpp"
#include "vvs/rng.hpp"

namespace vvs {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// ImageSet

ImageSet::ImageSet(int count, int channels, int height, int width, std::vector<float> pixels,
                   std::optional<std::vector<int>> labels, int n_classes,
                   std::vector<std::string> class_names)
    : count_(count),
      channels_(channels),
      height_(height),
      width_(width),
      pixels_(std::move(pixels)),
      labels_(std::move(labels)),
      n_classes_(n_classes),
      class_names_(std::move(class_names)) {
  if (count < 0 || channels <= 0 || height <= 0 || width <= 0)
    throw ShapeError("ImageSet: invalid dimensions");
  if (pixels_.size() != static_cast<std::size_t>(count) * image_size())
    throw ShapeError("ImageSet: pixel buffer does not match dimensions");
  for (float v : pixels_)
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("ImageSet: pixel value outside [0,1]");
  if (labels_) {
    if (static_cast<int>(labels_->size()) != count)
      throw ShapeError("ImageSet: label count does not match image count");
    if (n_classes_ <= 0) {
      n_classes_ = 0;
      for (int l : *labels_) n_classes_ = std::max(n_classes_, l + 1);
    }
    for (int l : *labels_)
      if (l < 0 || l >= n_classes_) throw DataError("ImageSet: label out of range");
  }
}

const std::vector<int>& ImageSet::labels() const {
  if (!labels_) throw DataError("ImageSet has no labels");
  return *labels_;
}

ImageView ImageSet::view(int i) const {
  if (i < 0 || i >= count_) throw ShapeError("ImageSet::view: index out of range");
  return {std::span<const float>(pixels_).subspan(static_cast<std::size_t>(i) * image_size(),
                                                  image_size()),
          channels_, height_, width_};
}

ImageSet ImageSet::subset(std::span<const int> indices) const {
  std::vector<float> px;
  px.reserve(indices.size() * image_size());
  std::optional<std::vector<int>> lab;
  if (labels_) lab.emplace();
  for (int i : indices) {
    auto v = view(i);
    px.insert(px.end(), v.data.begin(), v.data.end());
    if (lab) lab->push_back((*labels_)[i]);
  }
  return ImageSet(static_cast<int>(indices.size()), channels_, height_, width_, std::move(px),
                  std::move(lab), n_classes_, class_names_);
}

ImageSet ImageSet::with_labels(std::vector<int> labels, int n_classes) const {
  return ImageSet(count_, channels_, height_, width_, pixels_, std::move(labels), n_classes,
                  class_names_);
}

ImageSet ImageSet::resized(int size) const {
  if (size == height_ && size == width_) return *this;
  std::vector<float> px;
  px.reserve(static_cast<std::size_t>(count_) * channels_ * size * size);
  for (int i = 0; i < count_; ++i) {
    Image r = resize_bilinear(view(i), size, size);
    for (float& v : r.data) v = std::clamp(v, 0.0f, 1.0f);
    px.insert(px.end(), r.data.begin(), r.data.end());
  }
  return ImageSet(count_, channels_, size, size, std::move(px), labels_, n_classes_, class_names_);
}

// ---------------------------------------------------------------------------
// Regions / recordings

std::string_view to_string(Region r) {
  switch (r) {
    case Region::V1: return "V1";
    case Region::V2: return "V2";
    case Region::V4: return "V4";
    case Region::IT: return "IT";
  }
  return "?";
}

Region region_from_string(std::string_view s) {
  if (s == "V1") return Region::V1;
  if (s == "V2") return Region::V2;
  if (s == "V4") return Region::V4;
  if (s == "IT") return Region::IT;
  throw DataError("unknown region '" + std::string(s) + "' (expected V1, V2, V4 or IT)");
}

NeuralRecording::NeuralRecording(Region region, int n_stimuli, int n_neurons, int n_repetitions,
                                 std::vector<float> responses, ImageSet stimuli,
                                 std::vector<std::string> neuron_ids)
    : region_(region),
      n_stimuli_(n_stimuli),
      n_neurons_(n_neurons),
      n_repetitions_(n_repetitions),
      responses_(std::move(responses)),
      stimuli_(std::move(stimuli)),
      neuron_ids_(std::move(neuron_ids)) {
  if (n_stimuli <= 0 || n_neurons <= 0)
    throw ShapeError("NeuralRecording: need at least one stimulus and one neuron");
  if (n_repetitions < 2)
    throw DataError("NeuralRecording: at least 2 repetitions are required, got " +
                    std::to_string(n_repetitions));
  if (responses_.size() != static_cast<std::size_t>(n_stimuli) * n_neurons * n_repetitions)
    throw ShapeError("NeuralRecording: response buffer does not match shape");
  if (stimuli_.count() != 0 && stimuli_.count() != n_stimuli)
    throw ShapeError("NeuralRecording: stimulus count does not match responses");
  for (float v : responses_)
    if (!std::isfinite(v)) throw DataError("NeuralRecording: non-finite response");
  if (neuron_ids_.empty()) {
    neuron_ids_.reserve(n_neurons);
    for (int i = 0; i < n_neurons; ++i) neuron_ids_.push_back("n" + std::to_string(i));
  }
  if (static_cast<int>(neuron_ids_.size()) != n_neurons)
    throw ShapeError("NeuralRecording: neuron id count does not match");
}

Eigen::MatrixXd NeuralRecording::mean_responses() const {
  Eigen::MatrixXd m(n_stimuli_, n_neurons_);
  for (int s = 0; s < n_stimuli_; ++s)
    for (int n = 0; n < n_neurons_; ++n) {
      double acc = 0.0;
      for (int r = 0; r < n_repetitions_; ++r) acc += response(s, n, r);
      m(s, n) = acc / n_repetitions_;
    }
  return m;
}

// ---------------------------------------------------------------------------
// STL-10

Stl10Split stl10_split_from_string(std::string_view s) {
  if (s == "train") return Stl10Split::train;
  if (s == "test") return Stl10Split::test;
  if (s == "unlabeled") return Stl10Split::unlabeled;
  throw ConfigError("split", "unknown STL-10 split '" + std::string(s) + "'");
}

namespace {

const char* split_stem(Stl10Split s) {
  switch (s) {
    case Stl10Split::train: return "train";
    case Stl10Split::test: return "test";
    case Stl10Split::unlabeled: return "unlabeled";
  }
  return "";
}

std::vector<char> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<char> buf(size);
  if (size && !in.read(buf.data(), static_cast<std::streamsize>(size)))
    throw DataError("short read on " + p.string());
  return buf;
}

void write_file(const fs::path& p, const void* data, std::size_t size) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot create " + p.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw DataError("write failed on " + p.string());
}

}  // namespace

ImageSet load_stl10(const fs::path& dir, Stl10Split split, int limit) {
  const fs::path xfile = dir / (std::string(split_stem(split)) + "_X.bin");
  if (!fs::exists(xfile)) throw DataError("missing STL-10 image file " + xfile.string());
  const auto bytes = fs::file_size(xfile);
  if (bytes % kStl10RecordBytes != 0)
    throw DataError("corrupt STL-10 file " + xfile.string() + ": size " + std::to_string(bytes) +
                    " is not a multiple of " + std::to_string(kStl10RecordBytes));
  int count = static_cast<int>(bytes / kStl10RecordBytes);
  if (limit > 0) count = std::min(count, limit);

  std::optional<std::vector<int>> labels;
  if (split != Stl10Split::unlabeled) {
    const fs::path yfile = dir / (std::string(split_stem(split)) + "_y.bin");
    if (!fs::exists(yfile)) throw DataError("missing STL-10 label file " + yfile.string());
    auto ybytes = read_file(yfile);
    if (ybytes.size() != bytes / kStl10RecordBytes)
      throw DataError("STL-10 label file " + yfile.string() + " does not match image count");
    labels.emplace(count);
    for (int i = 0; i < count; ++i) {
      const int l = static_cast<unsigned char>(ybytes[i]);
      if (l < 1 || l > 10) throw DataError("STL-10 label out of range 1..10");
      (*labels)[i] = l - 1;
    }
  }

  std::ifstream in(xfile, std::ios::binary);
  if (!in) throw DataError("cannot open " + xfile.string());
  constexpr int side = kStl10Side;
  constexpr int plane = side * side;
  std::vector<float> px(static_cast<std::size_t>(count) * kStl10RecordBytes);
  std::vector<unsigned char> rec(kStl10RecordBytes);
  for (int i = 0; i < count; ++i) {
    if (!in.read(reinterpret_cast<char*>(rec.data()), kStl10RecordBytes))
      throw DataError("short read on " + xfile.string());
    float* dst = px.data() + static_cast<std::size_t>(i) * kStl10RecordBytes;
    // Planes are column-major: byte (c, x*96 + y) holds pixel (row y, col x).
    for (int c = 0; c < 3; ++c)
      for (int x = 0; x < side; ++x)
        for (int y = 0; y < side; ++y)
          dst[c * plane + y * side + x] = static_cast<float>(rec[c * plane + x * side + y]) / 255.0f;
  }
  std::vector<std::string> names;
  if (labels)
    names = {"airplane", "bird", "car", "cat", "deer", "dog", "horse", "monkey", "ship", "truck"};
  return ImageSet(count, 3, side, side, std::move(px), std::move(labels), labels ? 10 : 0,
                  std::move(names));
}

void write_stl10(const fs::path& dir, Stl10Split split, const ImageSet& images) {
  if (images.channels() != 3 || images.height() != kStl10Side || images.width() != kStl10Side)
    throw ShapeError("write_stl10: images must be 3x96x96");
  fs::create_directories(dir);
  constexpr int side = kStl10Side;
  constexpr int plane = side * side;
  std::vector<unsigned char> out(static_cast<std::size_t>(images.count()) * kStl10RecordBytes);
  for (int i = 0; i < images.count(); ++i) {
    auto v = images.view(i);
    unsigned char* rec = out.data() + static_cast<std::size_t>(i) * kStl10RecordBytes;
    for (int c = 0; c < 3; ++c)
      for (int x = 0; x < side; ++x)
        for (int y = 0; y < side; ++y)
          rec[c * plane + x * side + y] =
              static_cast<unsigned char>(std::lround(std::clamp(v.at(c, y, x), 0.0f, 1.0f) * 255.0f));
  }
  write_file(dir / (std::string(split_stem(split)) + "_X.bin"), out.data(), out.size());
  if (split != Stl10Split::unlabeled) {
    const auto& labels = images.labels();
    std::vector<unsigned char> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = static_cast<unsigned char>(labels[i] + 1);
    write_file(dir / (std::string(split_stem(split)) + "_y.bin"), y.data(), y.size());
  }
}

// ---------------------------------------------------------------------------
// Image directories

ImageSet load_image_dir(const fs::path& dir, int size) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  auto pngs_in = [](const fs::path& d) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(d)) {
      if (!e.is_regular_file()) continue;
      auto ext = e.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
      if (ext == ".png") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
  };

  std::vector<fs::path> files = pngs_in(dir);
  std::optional<std::vector<int>> labels;
  std::vector<std::string> class_names;
  if (files.empty()) {
    std::vector<fs::path> classes;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) classes.push_back(e.path());
    std::sort(classes.begin(), classes.end());
    labels.emplace();
    for (std::size_t c = 0; c < classes.size(); ++c) {
      auto f = pngs_in(classes[c]);
      if (f.empty()) continue;
      class_names.push_back(classes[c].filename().string());
      const int label = static_cast<int>(class_names.size()) - 1;
      for (auto& p : f) {
        files.push_back(p);
        labels->push_back(label);
      }
    }
  }
  if (files.empty()) throw DataError("no PNG images under " + dir.string());

  std::vector<float> px;
  int h = 0, w = 0;
  for (const auto& p : files) {
    Image img = read_png(p);
    if (size > 0) {
      img = resize_bilinear(img.view(), size, size);
      for (float& v : img.data) v = std::clamp(v, 0.0f, 1.0f);
    }
    if (h == 0) {
      h = img.height;
      w = img.width;
    } else if (img.height != h || img.width != w) {
      throw DataError("image " + p.string() + " has a different size; pass a resize target");
    }
    px.insert(px.end(), img.data.begin(), img.data.end());
  }
  const int n_classes = static_cast<int>(class_names.size());
  return ImageSet(static_cast<int>(files.size()), 3, h, w, std::move(px), std::move(labels),
                  n_classes, std::move(class_names));
}

// ---------------------------------------------------------------------------
// Neural recording container

namespace {

constexpr const char* kManifestFormat = "vvs-neural-recording";

template <typename T>
T to_little_endian(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
std::vector<T> decode_le(const std::vector<char>& bytes) {
  std::vector<T> out(bytes.size() / sizeof(T));
  std::memcpy(out.data(), bytes.data(), out.size() * sizeof(T));
  for (auto& v : out) v = to_little_endian(v);
  return out;
}

template <typename T>
std::vector<char> encode_le(std::span<const T> values) {
  std::vector<char> out(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    T v = to_little_endian(values[i]);
    std::memcpy(out.data() + i * sizeof(T), &v, sizeof(T));
  }
  return out;
}

template <typename T>
T manifest_field(const json& m, const char* key) {
  if (!m.contains(key)) throw DataError(std::string("manifest missing field '") + key + "'");
  try {
    return m.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest field '") + key + "': " + e.what());
  }
}

}  // namespace

NeuralRecording load_neural_recording(const fs::path& dir, const RecordingLoadOptions& options) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw DataError("missing " + manifest_path.string());
  json m;
  try {
    std::ifstream in(manifest_path);
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed " + manifest_path.string() + ": " + e.what());
  }

  const Region region = region_from_string(manifest_field<std::string>(m, "region"));
  const int n_stim = manifest_field<int>(m, "n_stimuli");
  int n_neur = manifest_field<int>(m, "n_neurons");
  const int n_rep = manifest_field<int>(m, "n_repetitions");
  if (manifest_field<std::string>(m, "dtype") != "float32")
    throw DataError("manifest dtype must be float32");
  if (manifest_field<std::string>(m, "byte_order") != "little-endian")
    throw DataError("manifest byte_order must be little-endian");
  if (n_rep < 2)
    throw DataError("recording has " + std::to_string(n_rep) +
                    " repetition(s); the noise ceiling needs at least 2");
  if (n_stim <= 0 || n_neur <= 0) throw DataError("manifest has empty shape");

  const fs::path bin = dir / "responses.bin";
  if (!fs::exists(bin)) throw DataError("missing " + bin.string());
  const std::size_t expected = static_cast<std::size_t>(n_stim) * n_neur * n_rep * sizeof(float);
  if (fs::file_size(bin) != expected)
    throw DataError("responses.bin holds " + std::to_string(fs::file_size(bin)) +
                    " bytes, manifest shape needs " + std::to_string(expected));
  std::vector<float> resp = decode_le<float>(read_file(bin));

  std::vector<std::string> ids;
  if (m.contains("neuron_ids")) ids = m["neuron_ids"].get<std::vector<std::string>>();
  if (!ids.empty() && static_cast<int>(ids.size()) != n_neur)
    throw DataError("manifest neuron_ids length does not match n_neurons");
  if (ids.empty())
    for (int i = 0; i < n_neur; ++i) ids.push_back("n" + std::to_string(i));

  // NaN screening: fail fast unless asked to drop affected neurons.
  std::vector<bool> bad(n_neur, false);
  for (int s = 0; s < n_stim; ++s)
    for (int n = 0; n < n_neur; ++n)
      for (int r = 0; r < n_rep; ++r)
        if (!std::isfinite(resp[(static_cast<std::size_t>(s) * n_neur + n) * n_rep + r])) bad[n] = true;
  const int n_bad = static_cast<int>(std::count(bad.begin(), bad.end(), true));
  if (n_bad > 0) {
    if (!options.drop_nan_neurons)
      throw DataError(std::to_string(n_bad) +
                      " neuron(s) have missing/NaN responses; enable drop_nan_neurons to skip them");
    const int kept = n_neur - n_bad;
    if (kept == 0) throw DataError("every neuron has NaN responses");
    std::vector<float> filtered;
    filtered.reserve(static_cast<std::size_t>(n_stim) * kept * n_rep);
    for (int s = 0; s < n_stim; ++s)
      for (int n = 0; n < n_neur; ++n) {
        if (bad[n]) continue;
        auto first = resp.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(s) * n_neur + n) * n_rep);
        filtered.insert(filtered.end(), first, first + n_rep);
      }
    std::vector<std::string> kept_ids;
    for (int n = 0; n < n_neur; ++n)
      if (!bad[n]) kept_ids.push_back(ids[n]);
    resp = std::move(filtered);
    ids = std::move(kept_ids);
    n_neur = kept;
  }

  auto stim_files = manifest_field<std::vector<std::string>>(m, "stimuli");
  if (static_cast<int>(stim_files.size()) != n_stim)
    throw DataError("manifest lists " + std::to_string(stim_files.size()) + " stimuli, expected " +
                    std::to_string(n_stim));
  std::vector<float> px;
  int h = 0, w = 0;
  for (const auto& f : stim_files) {
    Image img = read_png(dir / f);
    if (h == 0) {
      h = img.height;
      w = img.width;
    } else if (img.height != h || img.width != w) {
      throw DataError("stimulus " + f + " differs in size from the first stimulus");
    }
    px.insert(px.end(), img.data.begin(), img.data.end());
  }
  ImageSet stimuli(n_stim, 3, h, w, std::move(px));

  NeuralRecording rec(region, n_stim, n_neur, n_rep, std::move(resp), std::move(stimuli),
                      std::move(ids));

  if (m.contains("readout") && n_bad == 0) {
    const auto rows = m["readout"].at("rows").get<Eigen::Index>();
    const auto cols = m["readout"].at("cols").get<Eigen::Index>();
    const fs::path rfile = dir / "readout.bin";
    auto values = decode_le<double>(read_file(rfile));
    if (values.size() != static_cast<std::size_t>(rows * cols))
      throw DataError("readout.bin does not match manifest readout shape");
    Eigen::MatrixXd wts(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) wts(r, c) = values[static_cast<std::size_t>(r * cols + c)];
    rec.set_synthetic_readout(std::move(wts));
  }
  return rec;
}

void save_neural_recording(const fs::path& dir, const NeuralRecording& rec) {
  fs::create_directories(dir / "stimuli");
  if (rec.stimuli().count() != rec.n_stimuli())
    throw DataError("save_neural_recording: recording has no stimulus images");
  json m;
  m["format"] = kManifestFormat;
  m["version"] = 1;
  m["region"] = std::string(to_string(rec.region()));
  m["n_stimuli"] = rec.n_stimuli();
  m["n_neurons"] = rec.n_neurons();
  m["n_repetitions"] = rec.n_repetitions();
  m["dtype"] = "float32";
  m["byte_order"] = "little-endian";
  m["neuron_ids"] = rec.neuron_ids();
  std::vector<std::string> files;
  for (int i = 0; i < rec.n_stimuli(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "stimuli/%06d.png", i);
    write_png(dir / name, rec.stimuli().view(i));
    files.emplace_back(name);
  }
  m["stimuli"] = files;

  auto bytes = encode_le<float>(rec.responses());
  write_file(dir / "responses.bin", bytes.data(), bytes.size());

  const auto& wts = rec.synthetic_readout();
  if (wts.size() > 0) {
    std::vector<double> flat(static_cast<std::size_t>(wts.size()));
    for (Eigen::Index r = 0; r < wts.rows(); ++r)
      for (Eigen::Index c = 0; c < wts.cols(); ++c)
        flat[static_cast<std::size_t>(r * wts.cols() + c)] = wts(r, c);
    auto rb = encode_le<double>(flat);
    write_file(dir / "readout.bin", rb.data(), rb.size());
    m["readout"] = {{"rows", wts.rows()}, {"cols", wts.cols()}, {"dtype", "float64"}};
  }
  std::ofstream out(dir / "manifest.json");
  out << m.dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest in " + dir.string());
}

// ---------------------------------------------------------------------------
// Synthetic generators

namespace {

constexpr int kShapeCount = 10;

// Inside test in object coordinates (u, v) scaled so the shape's nominal
// radius is 1. v grows downward.
bool inside_shape(int shape, double u, double v) {
  const double au = std::abs(u), av = std::abs(v);
  const double r = std::hypot(u, v);
  switch (shape) {
    case 0: return r <= 1.0;                                       // disk
    case 1: return au <= 0.8 && av <= 0.8;                         // square
    case 2: return v >= -1.0 && v <= 0.75 && au <= (v + 1.0) * 0.5;  // triangle
    case 3: return (au <= 0.3 && av <= 1.0) || (av <= 0.3 && au <= 1.0);  // plus
    case 4: return r <= 1.0 && r >= 0.55;                          // ring
    case 5: return au + av <= 1.0;                                 // diamond
    case 6: return (u * u) / 1.0 + (v * v) / 0.3 <= 1.0;           // wide ellipse
    case 7: return r <= 1.05 && (std::abs(u - v) <= 0.35 || std::abs(u + v) <= 0.35);  // X
    case 8: return v >= 0.0 && r <= 1.0;                           // lower half disk
    case 9: return (au <= 0.3 && v >= -1.0 && v <= 0.8) || (v >= 0.5 && v <= 0.8 && u >= -0.3 && u <= 0.9);  // L
    default: return false;
  }
}

double texture_value(int texture, double u, double v) {
  switch (texture) {
    case 1: return std::fmod(std::floor((u + v + 4.0) * 3.0), 2.0) == 0.0 ? 1.0 : 0.55;  // stripes
    case 2: {
      const int a = static_cast<int>(std::floor((u + 4.0) * 2.5));
      const int b = static_cast<int>(std::floor((v + 4.0) * 2.5));
      return ((a + b) % 2 == 0) ? 1.0 : 0.55;  // checker
    }
    default: return 1.0;  // solid
  }
}

}  // namespace

ImageSet synth_image_set(std::uint64_t seed, int count, int n_classes, int k) {
  if (count <= 0) throw ConfigError("count", "must be positive");
  if (n_classes < 2) throw ConfigError("n_classes", "must be at least 2");
  if (k < 16) throw ConfigError("k", "must be at least 16");
  if (k % 2 != 0) throw ConfigError("k", "must be even so images split into quadrants");

  std::vector<float> px(static_cast<std::size_t>(count) * 3 * k * k);
  std::vector<int> labels(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = make_rng(seed, {stream::kSynth, static_cast<std::uint64_t>(i)});
    const int cls = i % n_classes;
    labels[i] = cls;
    const int shape = cls % kShapeCount;
    const int texture = (cls + cls / kShapeCount) % 3;

    // Background: linear gradient between two dark-ish colors.
    double bg0[3], bg1[3], fg[3];
    for (double& c : bg0) c = uniform(rng, 0.0, 0.45);
    for (double& c : bg1) c = uniform(rng, 0.0, 0.45);
    for (double& c : fg) c = uniform(rng, 0.55, 1.0);
    if (uniform01(rng) < 0.5) {  // swap polarity: light background, dark object
      for (int c = 0; c < 3; ++c) {
        bg0[c] = 1.0 - bg0[c];
        bg1[c] = 1.0 - bg1[c];
        fg[c] = 1.0 - fg[c];
      }
    }
    const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double gx = std::cos(angle), gy = std::sin(angle);
    const double radius = uniform(rng, 0.26, 0.36) * k;
    const double cx = 0.5 * k + uniform(rng, -1.0, 1.0) * k / 16.0;
    const double cy = 0.5 * k + uniform(rng, -1.0, 1.0) * k / 16.0;
    const double noise_amp = 0.04;

    float* dst = px.data() + static_cast<std::size_t>(i) * 3 * k * k;
    for (int y = 0; y < k; ++y) {
      for (int x = 0; x < k; ++x) {
        const double t = 0.5 + 0.5 * (((x + 0.5) / k - 0.5) * gx + ((y + 0.5) / k - 0.5) * gy) * 1.4;
        // 2x2 supersampled coverage for soft edges.
        double cover = 0.0, tex = 0.0;
        for (int sy = 0; sy < 2; ++sy)
          for (int sx = 0; sx < 2; ++sx) {
            const double u = (x + 0.25 + 0.5 * sx - cx) / radius;
            const double v = (y + 0.25 + 0.5 * sy - cy) / radius;
            if (inside_shape(shape, u, v)) {
              cover += 0.25;
              tex += 0.25 * texture_value(texture, u, v);
            }
          }
        const double shade = cover > 0.0 ? tex / cover : 1.0;
        const double jitter = noise_amp * (uniform01(rng) - 0.5);
        for (int c = 0; c < 3; ++c) {
          const double bg = bg0[c] + (bg1[c] - bg0[c]) * std::clamp(t, 0.0, 1.0);
          const double obj = bg + (fg[c] - bg) * shade;
          const double val = bg + (obj - bg) * cover + jitter;
          dst[(static_cast<std::size_t>(c) * k + y) * k + x] = quantize_u8(static_cast<float>(val));
        }
      }
    }
  }
  static const char* const kShapeNames[kShapeCount] = {"disk",    "square", "triangle", "plus",
                                                       "ring",    "diamond", "ellipse", "cross",
                                                       "halfdisk", "ell"};
  static const char* const kTextureNames[3] = {"solid", "stripes", "checker"};
  std::vector<std::string> names;
  for (int c = 0; c < n_classes; ++c)
    names.push_back(std::string(kShapeNames[c % kShapeCount]) + "-" +
                    kTextureNames[(c + c / kShapeCount) % 3]);
  return ImageSet(count, 3, k, k, std::move(px), std::move(labels), n_classes, std::move(names));
}

NeuralRecording synth_neural_recording(const ActivationMatrix& activations, int n_neurons,
                                       double noise_sd, int n_repetitions, std::uint64_t seed,
                                       const ImageSet& stimuli, Region region) {
  if (n_neurons <= 0) throw ConfigError("n_neurons", "must be positive");
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be non-negative");
  if (n_repetitions < 2) throw DataError("synth_neural_recording: n_repetitions must be >= 2");
  const Eigen::Index n_stim = activations.n_stimuli();
  const Eigen::Index n_feat = activations.n_features();
  if (n_stim < 2 || n_feat < 1) throw ShapeError("synth_neural_recording: empty activations");
  if (stimuli.count() != 0 && stimuli.count() != n_stim)
    throw ShapeError("synth_neural_recording: stimuli do not match activation rows");

  Rng rng = make_rng(seed, {stream::kSynth, 1});
  Eigen::MatrixXd w(n_feat, n_neurons);
  for (Eigen::Index c = 0; c < n_neurons; ++c)
    for (Eigen::Index r = 0; r < n_feat; ++r) w(r, c) = normal(rng);

  const Eigen::MatrixXd x = activations.values.cast<double>();
  Eigen::MatrixXd signal = x * w;
  for (Eigen::Index c = 0; c < n_neurons; ++c) {
    const double mean = signal.col(c).mean();
    const double var = (signal.col(c).array() - mean).square().sum() / static_cast<double>(n_stim - 1);
    if (var > 1e-24) {
      const double s = 1.0 / std::sqrt(var);
      w.col(c) *= s;
      signal.col(c) *= s;
    }
  }

  std::vector<float> resp(static_cast<std::size_t>(n_stim) * n_neurons * n_repetitions);
  Rng noise = make_rng(seed, {stream::kSynth, 2});
  for (Eigen::Index s = 0; s < n_stim; ++s)
    for (int n = 0; n < n_neurons; ++n)
      for (int r = 0; r < n_repetitions; ++r) {
        const double eps = noise_sd > 0.0 ? noise_sd * normal(noise) : 0.0;
        resp[(static_cast<std::size_t>(s) * n_neurons + n) * n_repetitions + r] =
            static_cast<float>(signal(s, n) + eps);
      }

  NeuralRecording rec(region, static_cast<int>(n_stim), n_neurons, n_repetitions, std::move(resp),
                      stimuli);
  rec.set_synthetic_readout(std::move(w));
  return rec;
}

}  // namespace vvs
