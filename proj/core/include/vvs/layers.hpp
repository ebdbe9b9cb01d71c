#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vvs::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MatMap = Eigen::Map<Mat<T>>;

template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

// Heap storage with SIMD alignment. Eigen reductions peel a different number
// of leading elements depending on the address, which changes float results
// from run to run with plain std::vector.
template <typename T>
using Buf = std::vector<T, Eigen::aligned_allocator<T>>;

// Convolutional activations, stored channel-major: [channel][batch][row][col].
// A channel is one contiguous row of the (channels x batch*H*W) matrix, which
// lets convolutions run as a single GEMM per layer and batch norm reduce
// along rows.
template <typename T>
struct FeatureMap {
  int channels = 0;
  int batch = 0;
  int height = 0;
  int width = 0;
  Buf<T> data;

  FeatureMap() = default;
  FeatureMap(int c, int n, int h, int w)
      : channels(c), batch(n), height(h), width(w), data(static_cast<std::size_t>(c) * n * h * w) {}

  Eigen::Index columns() const { return static_cast<Eigen::Index>(batch) * height * width; }
  MatMap<T> matrix() { return {data.data(), channels, columns()}; }
  ConstMatMap<T> matrix() const { return {data.data(), channels, columns()}; }
  T& at(int c, int n, int y, int x) {
    return data[((static_cast<std::size_t>(c) * batch + n) * height + y) * width + x];
  }
  T at(int c, int n, int y, int x) const {
    return data[((static_cast<std::size_t>(c) * batch + n) * height + y) * width + x];
  }
};

enum class Init { zeros, ones, kaiming_normal_fan_out, uniform_fan_in };

// A learnable tensor and its accumulated gradient.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  Buf<T> value;
  Buf<T> grad;
  Init init = Init::zeros;
  int fan = 0;

  Param() = default;
  Param(std::string n, std::vector<int> s, Init how = Init::zeros, int fan_size = 0);
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

// Non-learned state saved with the weights (batch-norm running moments).
template <typename T>
struct Buffer {
  std::string name;
  Buf<T> value;
};

template <typename T>
struct ParamRefs {
  std::vector<Param<T>*> params;
  std::vector<Buffer<T>*> buffers;
};

// Interface shared by the convolutional building blocks. forward() caches
// what backward() needs when train is true; backward() accumulates parameter
// gradients and returns the input gradient for the most recent forward.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual FeatureMap<T> forward(const FeatureMap<T>& x, bool train) = 0;
  virtual FeatureMap<T> backward(const FeatureMap<T>& dy) = 0;
  virtual void collect(ParamRefs<T>& refs) = 0;
  virtual int out_channels() const = 0;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding);

  FeatureMap<T> forward(const FeatureMap<T>& x, bool train) override;
  FeatureMap<T> backward(const FeatureMap<T>& dy) override;
  void collect(ParamRefs<T>& refs) override { refs.params.push_back(&weight_); }
  int out_channels() const override { return out_; }

  Param<T>& weight() { return weight_; }

 private:
  int in_, out_, kernel_, stride_, pad_;
  Param<T> weight_;  // [out, in, k, k]
  Mat<T> cols_;      // im2col of the last training input
  int in_h_ = 0, in_w_ = 0, batch_ = 0, out_h_ = 0, out_w_ = 0;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  BatchNorm2d(std::string name, int channels, T momentum = T(0.1), T eps = T(1e-5));

  FeatureMap<T> forward(const FeatureMap<T>& x, bool train) override;
  FeatureMap<T> backward(const FeatureMap<T>& dy) override;
  void collect(ParamRefs<T>& refs) override;
  int out_channels() const override { return channels_; }

 private:
  int channels_;
  T momentum_, eps_;
  Param<T> gamma_, beta_;
  Buffer<T> running_mean_, running_var_;
  FeatureMap<T> xhat_;
  Buf<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  FeatureMap<T> forward(const FeatureMap<T>& x, bool train) override;
  FeatureMap<T> backward(const FeatureMap<T>& dy) override;
  void collect(ParamRefs<T>&) override {}
  int out_channels() const override { return channels_; }

 private:
  std::vector<std::uint8_t> mask_;
  int channels_ = 0;
};

// conv -> batch norm -> ReLU.
template <typename T>
class ConvUnit final : public Layer<T> {
 public:
  ConvUnit(const std::string& name, int in_channels, int out_channels, int stride);

  FeatureMap<T> forward(const FeatureMap<T>& x, bool train) override;
  FeatureMap<T> backward(const FeatureMap<T>& dy) override;
  void collect(ParamRefs<T>& refs) override;
  int out_channels() const override { return conv_.out_channels(); }

 private:
  Conv2d<T> conv_;
  BatchNorm2d<T> bn_;
  ReLU<T> relu_;
};

// ResNet basic block: two 3x3 conv/BN pairs with an identity or 1x1
// projection shortcut, followed by ReLU on the sum.
template <typename T>
class BasicBlock final : public Layer<T> {
 public:
  BasicBlock(const std::string& name, int in_channels, int out_channels, int stride);

  FeatureMap<T> forward(const FeatureMap<T>& x, bool train) override;
  FeatureMap<T> backward(const FeatureMap<T>& dy) override;
  void collect(ParamRefs<T>& refs) override;
  int out_channels() const override { return conv2_.out_channels(); }

 private:
  Conv2d<T> conv1_;
  BatchNorm2d<T> bn1_;
  ReLU<T> relu1_;
  Conv2d<T> conv2_;
  BatchNorm2d<T> bn2_;
  std::unique_ptr<Conv2d<T>> down_conv_;
  std::unique_ptr<BatchNorm2d<T>> down_bn_;
  ReLU<T> relu_out_;
};

// Fully connected layer on row-major [batch, features] matrices.
template <typename T>
class Linear {
 public:
  Linear(std::string name, int in_features, int out_features);

  Mat<T> forward(const Mat<T>& x, bool train);
  Mat<T> backward(const Mat<T>& dy);
  void collect(ParamRefs<T>& refs);
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_, out_;
  Param<T> weight_;  // [out, in]
  Param<T> bias_;    // [out]
  Mat<T> input_;
};

// Linear -> ReLU -> Linear.
template <typename T>
class Mlp {
 public:
  Mlp(const std::string& name, int in_features, int hidden, int out_features);

  Mat<T> forward(const Mat<T>& x, bool train);
  Mat<T> backward(const Mat<T>& dy);
  void collect(ParamRefs<T>& refs);
  int in_features() const { return fc1_.in_features(); }
  int out_features() const { return fc2_.out_features(); }

 private:
  Linear<T> fc1_;
  Linear<T> fc2_;
  Mat<T> hidden_mask_;
};

// Mean over the spatial positions: [C][N][H][W] -> [N, C].
template <typename T>
Mat<T> global_avg_pool(const FeatureMap<T>& x);
template <typename T>
FeatureMap<T> global_avg_pool_backward(const Mat<T>& dy, int height, int width);

// Row-wise softmax and log-softmax, numerically stabilized.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits);
template <typename T>
Mat<T> log_softmax_rows(const Mat<T>& logits);

}  // namespace vvs::nn
