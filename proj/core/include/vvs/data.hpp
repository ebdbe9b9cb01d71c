#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "vvs/activations.hpp"
#include "vvs/image.hpp"

namespace vvs {

// A batch of equally sized RGB images with optional class labels.
// Pixel values are in [0,1]; storage is [count][channel][row][col].
class ImageSet {
 public:
  ImageSet() = default;
  ImageSet(int count, int channels, int height, int width, std::vector<float> pixels,
           std::optional<std::vector<int>> labels = std::nullopt, int n_classes = 0,
           std::vector<std::string> class_names = {});

  int count() const { return count_; }
  int channels() const { return channels_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t image_size() const { return static_cast<std::size_t>(channels_) * height_ * width_; }

  bool has_labels() const { return labels_.has_value(); }
  const std::vector<int>& labels() const;
  int n_classes() const { return n_classes_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<float>& pixels() const { return pixels_; }

  ImageView view(int i) const;
  Image image(int i) const { return Image(view(i)); }

  // New set holding the listed images (labels follow).
  ImageSet subset(std::span<const int> indices) const;
  // Same images, labels replaced.
  ImageSet with_labels(std::vector<int> labels, int n_classes) const;
  // Every image resampled to size x size.
  ImageSet resized(int size) const;

 private:
  int count_ = 0;
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
  std::optional<std::vector<int>> labels_;
  int n_classes_ = 0;
  std::vector<std::string> class_names_;
};

enum class Region { V1, V2, V4, IT };

std::string_view to_string(Region r);
Region region_from_string(std::string_view s);

// Stimuli x neurons x repetitions responses of one cortical region.
class NeuralRecording {
 public:
  NeuralRecording() = default;
  NeuralRecording(Region region, int n_stimuli, int n_neurons, int n_repetitions,
                  std::vector<float> responses, ImageSet stimuli,
                  std::vector<std::string> neuron_ids = {});

  Region region() const { return region_; }
  int n_stimuli() const { return n_stimuli_; }
  int n_neurons() const { return n_neurons_; }
  int n_repetitions() const { return n_repetitions_; }
  const std::vector<float>& responses() const { return responses_; }
  const ImageSet& stimuli() const { return stimuli_; }
  const std::vector<std::string>& neuron_ids() const { return neuron_ids_; }

  float response(int stimulus, int neuron, int rep) const {
    return responses_[(static_cast<std::size_t>(stimulus) * n_neurons_ + neuron) * n_repetitions_ +
                      rep];
  }

  // Repetition-averaged responses, stimuli x neurons.
  Eigen::MatrixXd mean_responses() const;

  // Readout weights (features x neurons) for recordings produced by
  // synth_neural_recording; empty otherwise.
  const Eigen::MatrixXd& synthetic_readout() const { return readout_; }
  void set_synthetic_readout(Eigen::MatrixXd w) { readout_ = std::move(w); }

 private:
  Region region_ = Region::V1;
  int n_stimuli_ = 0;
  int n_neurons_ = 0;
  int n_repetitions_ = 0;
  std::vector<float> responses_;
  ImageSet stimuli_;
  std::vector<std::string> neuron_ids_;
  Eigen::MatrixXd readout_;
};

enum class Stl10Split { train, test, unlabeled };

Stl10Split stl10_split_from_string(std::string_view s);

inline constexpr int kStl10Side = 96;
inline constexpr std::size_t kStl10RecordBytes = 3 * kStl10Side * kStl10Side;  // 27648

// Reads <dir>/{train,test,unlabeled}_X.bin (+ _y.bin for labeled splits).
// limit > 0 caps the number of decoded images.
ImageSet load_stl10(const std::filesystem::path& dir, Stl10Split split, int limit = 0);

// Writes a 96x96 set in the same binary layout. Pixels are quantized to bytes.
void write_stl10(const std::filesystem::path& dir, Stl10Split split, const ImageSet& images);

// PNG files in a directory. If the directory only holds subdirectories, each
// subdirectory (sorted by name) is a class. Images are resampled to size when
// size > 0, otherwise all files must share one size.
ImageSet load_image_dir(const std::filesystem::path& dir, int size = 0);

struct RecordingLoadOptions {
  // Drop neurons that have any NaN response instead of failing.
  bool drop_nan_neurons = false;
};

// Container: manifest.json + responses.bin (float32 LE, [stim][neuron][rep])
// + stimuli/ PNG files listed in the manifest.
NeuralRecording load_neural_recording(const std::filesystem::path& dir,
                                      const RecordingLoadOptions& options = {});
void save_neural_recording(const std::filesystem::path& dir, const NeuralRecording& rec);

// Procedural labeled corpus: one centered shape/texture family per class on
// a random gradient background. Pixels are multiples of 1/255.
ImageSet synth_image_set(std::uint64_t seed, int count, int n_classes, int k);

// Each neuron is a fixed random linear readout of the activations (scaled to
// unit signal variance across stimuli) plus i.i.d. Gaussian noise per
// repetition.
NeuralRecording synth_neural_recording(const ActivationMatrix& activations, int n_neurons,
                                       double noise_sd, int n_repetitions, std::uint64_t seed,
                                       const ImageSet& stimuli = {}, Region region = Region::V1);

}  // namespace vvs
