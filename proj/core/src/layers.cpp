#include "vvs/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vvs/error.hpp"

namespace vvs::nn {

template <typename T>
Param<T>::Param(std::string n, std::vector<int> s, Init how, int fan_size)
    : name(std::move(n)), shape(std::move(s)), init(how), fan(fan_size) {
  const std::size_t count =
      std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                      [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  value.assign(count, T(0));
  grad.assign(count, T(0));
  if (how == Init::ones) std::fill(value.begin(), value.end(), T(1));
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride,
                  int padding)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(padding),
      weight_(std::move(name) + ".weight", {out_channels, in_channels, kernel, kernel},
              Init::kaiming_normal_fan_out, out_channels * kernel * kernel) {}

template <typename T>
FeatureMap<T> Conv2d<T>::forward(const FeatureMap<T>& x, bool train) {
  if (x.channels != in_)
    throw ShapeError(weight_.name + ": expected " + std::to_string(in_) + " input channels, got " +
                     std::to_string(x.channels));
  const int oh = (x.height + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (x.width + 2 * pad_ - kernel_) / stride_ + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError(weight_.name + ": input smaller than kernel");

  const int rows = in_ * kernel_ * kernel_;
  const Eigen::Index cols = static_cast<Eigen::Index>(x.batch) * oh * ow;
  Mat<T> col(rows, cols);
  for (int c = 0; c < in_; ++c)
    for (int ky = 0; ky < kernel_; ++ky)
      for (int kx = 0; kx < kernel_; ++kx) {
        T* dst = col.data() + static_cast<Eigen::Index>((c * kernel_ + ky) * kernel_ + kx) * cols;
        for (int n = 0; n < x.batch; ++n) {
          const T* src = x.data.data() + (static_cast<std::size_t>(c) * x.batch + n) * x.height * x.width;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            T* drow = dst + (static_cast<Eigen::Index>(n) * oh + oy) * ow;
            if (iy < 0 || iy >= x.height) {
              std::fill(drow, drow + ow, T(0));
              continue;
            }
            const T* srow = src + static_cast<std::size_t>(iy) * x.width;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              drow[ox] = (ix >= 0 && ix < x.width) ? srow[ix] : T(0);
            }
          }
        }
      }

  FeatureMap<T> y(out_, x.batch, oh, ow);
  ConstMatMap<T> w(weight_.value.data(), out_, rows);
  y.matrix().noalias() = w * col;
  if (train) {
    cols_ = std::move(col);
    in_h_ = x.height;
    in_w_ = x.width;
    batch_ = x.batch;
    out_h_ = oh;
    out_w_ = ow;
  }
  return y;
}

template <typename T>
FeatureMap<T> Conv2d<T>::backward(const FeatureMap<T>& dy) {
  if (cols_.size() == 0) throw ShapeError(weight_.name + ": backward without a training forward");
  const int rows = in_ * kernel_ * kernel_;
  ConstMatMap<T> w(weight_.value.data(), out_, rows);
  MatMap<T> dw(weight_.grad.data(), out_, rows);
  auto g = dy.matrix();
  dw.noalias() += g * cols_.transpose();
  Mat<T> dcol = w.transpose() * g;

  FeatureMap<T> dx(in_, batch_, in_h_, in_w_);
  const Eigen::Index cols = dcol.cols();
  for (int c = 0; c < in_; ++c)
    for (int ky = 0; ky < kernel_; ++ky)
      for (int kx = 0; kx < kernel_; ++kx) {
        const T* src = dcol.data() + static_cast<Eigen::Index>((c * kernel_ + ky) * kernel_ + kx) * cols;
        for (int n = 0; n < batch_; ++n) {
          T* dst = dx.data.data() + (static_cast<std::size_t>(c) * batch_ + n) * in_h_ * in_w_;
          for (int oy = 0; oy < out_h_; ++oy) {
            const int iy = oy * stride_ + ky - pad_;
            if (iy < 0 || iy >= in_h_) continue;
            const T* srow = src + (static_cast<Eigen::Index>(n) * out_h_ + oy) * out_w_;
            T* drow = dst + static_cast<std::size_t>(iy) * in_w_;
            for (int ox = 0; ox < out_w_; ++ox) {
              const int ix = ox * stride_ + kx - pad_;
              if (ix >= 0 && ix < in_w_) drow[ix] += srow[ox];
            }
          }
        }
      }
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::string name, int channels, T momentum, T eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_(name + ".weight", {channels}, Init::ones),
      beta_(name + ".bias", {channels}, Init::zeros),
      running_mean_{name + ".running_mean", Buf<T>(channels, T(0))},
      running_var_{name + ".running_var", Buf<T>(channels, T(1))} {}

template <typename T>
void BatchNorm2d<T>::collect(ParamRefs<T>& refs) {
  refs.params.push_back(&gamma_);
  refs.params.push_back(&beta_);
  refs.buffers.push_back(&running_mean_);
  refs.buffers.push_back(&running_var_);
}

template <typename T>
FeatureMap<T> BatchNorm2d<T>::forward(const FeatureMap<T>& x, bool train) {
  if (x.channels != channels_) throw ShapeError(gamma_.name + ": channel mismatch");
  FeatureMap<T> y(x.channels, x.batch, x.height, x.width);
  const Eigen::Index m = x.columns();
  auto xm = x.matrix();
  auto ym = y.matrix();
  if (!train) {
    for (int c = 0; c < channels_; ++c) {
      const T inv = T(1) / std::sqrt(running_var_.value[c] + eps_);
      const T scale = gamma_.value[c] * inv;
      const T shift = beta_.value[c] - running_mean_.value[c] * scale;
      ym.row(c) = (xm.row(c).array() * scale + shift).matrix();
    }
    return y;
  }
  xhat_ = FeatureMap<T>(x.channels, x.batch, x.height, x.width);
  inv_std_.assign(channels_, T(0));
  auto xh = xhat_.matrix();
  for (int c = 0; c < channels_; ++c) {
    const T mean = xm.row(c).mean();
    const T var = (xm.row(c).array() - mean).square().sum() / static_cast<T>(m);
    const T inv = T(1) / std::sqrt(var + eps_);
    inv_std_[c] = inv;
    xh.row(c) = ((xm.row(c).array() - mean) * inv).matrix();
    ym.row(c) = (xh.row(c).array() * gamma_.value[c] + beta_.value[c]).matrix();
    const T unbiased = m > 1 ? var * static_cast<T>(m) / static_cast<T>(m - 1) : var;
    running_mean_.value[c] = (T(1) - momentum_) * running_mean_.value[c] + momentum_ * mean;
    running_var_.value[c] = (T(1) - momentum_) * running_var_.value[c] + momentum_ * unbiased;
  }
  return y;
}

template <typename T>
FeatureMap<T> BatchNorm2d<T>::backward(const FeatureMap<T>& dy) {
  if (inv_std_.empty()) throw ShapeError(gamma_.name + ": backward without a training forward");
  FeatureMap<T> dx(dy.channels, dy.batch, dy.height, dy.width);
  const T m = static_cast<T>(dy.columns());
  auto g = dy.matrix();
  auto xh = xhat_.matrix();
  auto d = dx.matrix();
  for (int c = 0; c < channels_; ++c) {
    const T sum_dy = g.row(c).sum();
    const T sum_dy_xhat = (g.row(c).array() * xh.row(c).array()).sum();
    gamma_.grad[c] += sum_dy_xhat;
    beta_.grad[c] += sum_dy;
    const T k = gamma_.value[c] * inv_std_[c] / m;
    d.row(c) = (k * (m * g.row(c).array() - sum_dy - xh.row(c).array() * sum_dy_xhat)).matrix();
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU

template <typename T>
FeatureMap<T> ReLU<T>::forward(const FeatureMap<T>& x, bool train) {
  FeatureMap<T> y = x;
  channels_ = x.channels;
  if (train) mask_.resize(x.data.size());
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    const bool on = y.data[i] > T(0);
    if (!on) y.data[i] = T(0);
    if (train) mask_[i] = on;
  }
  return y;
}

template <typename T>
FeatureMap<T> ReLU<T>::backward(const FeatureMap<T>& dy) {
  if (mask_.size() != dy.data.size()) throw ShapeError("ReLU: backward shape mismatch");
  FeatureMap<T> dx = dy;
  for (std::size_t i = 0; i < dx.data.size(); ++i)
    if (!mask_[i]) dx.data[i] = T(0);
  return dx;
}

// ---------------------------------------------------------------------------
// ConvUnit / BasicBlock

template <typename T>
ConvUnit<T>::ConvUnit(const std::string& name, int in_channels, int out_channels, int stride)
    : conv_(name + ".conv", in_channels, out_channels, 3, stride, 1),
      bn_(name + ".bn", out_channels) {}

template <typename T>
FeatureMap<T> ConvUnit<T>::forward(const FeatureMap<T>& x, bool train) {
  return relu_.forward(bn_.forward(conv_.forward(x, train), train), train);
}

template <typename T>
FeatureMap<T> ConvUnit<T>::backward(const FeatureMap<T>& dy) {
  return conv_.backward(bn_.backward(relu_.backward(dy)));
}

template <typename T>
void ConvUnit<T>::collect(ParamRefs<T>& refs) {
  conv_.collect(refs);
  bn_.collect(refs);
}

template <typename T>
BasicBlock<T>::BasicBlock(const std::string& name, int in_channels, int out_channels, int stride)
    : conv1_(name + ".conv1", in_channels, out_channels, 3, stride, 1),
      bn1_(name + ".bn1", out_channels),
      conv2_(name + ".conv2", out_channels, out_channels, 3, 1, 1),
      bn2_(name + ".bn2", out_channels) {
  if (stride != 1 || in_channels != out_channels) {
    down_conv_ = std::make_unique<Conv2d<T>>(name + ".downsample.0", in_channels, out_channels, 1,
                                             stride, 0);
    down_bn_ = std::make_unique<BatchNorm2d<T>>(name + ".downsample.1", out_channels);
  }
}

template <typename T>
FeatureMap<T> BasicBlock<T>::forward(const FeatureMap<T>& x, bool train) {
  FeatureMap<T> main = bn2_.forward(
      conv2_.forward(relu1_.forward(bn1_.forward(conv1_.forward(x, train), train), train), train),
      train);
  if (down_conv_) {
    FeatureMap<T> sc = down_bn_->forward(down_conv_->forward(x, train), train);
    main.matrix() += sc.matrix();
  } else {
    main.matrix() += x.matrix();
  }
  return relu_out_.forward(main, train);
}

template <typename T>
FeatureMap<T> BasicBlock<T>::backward(const FeatureMap<T>& dy) {
  FeatureMap<T> g = relu_out_.backward(dy);
  FeatureMap<T> dx = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
  if (down_conv_) {
    FeatureMap<T> ds = down_conv_->backward(down_bn_->backward(g));
    dx.matrix() += ds.matrix();
  } else {
    dx.matrix() += g.matrix();
  }
  return dx;
}

template <typename T>
void BasicBlock<T>::collect(ParamRefs<T>& refs) {
  conv1_.collect(refs);
  bn1_.collect(refs);
  conv2_.collect(refs);
  bn2_.collect(refs);
  if (down_conv_) {
    down_conv_->collect(refs);
    down_bn_->collect(refs);
  }
}

// ---------------------------------------------------------------------------
// Linear / Mlp

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features)
    : in_(in_features),
      out_(out_features),
      weight_(name + ".weight", {out_features, in_features}, Init::uniform_fan_in, in_features),
      bias_(name + ".bias", {out_features}, Init::uniform_fan_in, in_features) {}

template <typename T>
Mat<T> Linear<T>::forward(const Mat<T>& x, bool train) {
  if (x.cols() != in_)
    throw ShapeError(weight_.name + ": expected " + std::to_string(in_) + " features, got " +
                     std::to_string(x.cols()));
  ConstMatMap<T> w(weight_.value.data(), out_, in_);
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), out_);
  Mat<T> y = x * w.transpose();
  y.rowwise() += b;
  if (train) input_ = x;
  return y;
}

template <typename T>
Mat<T> Linear<T>::backward(const Mat<T>& dy) {
  if (input_.rows() != dy.rows()) throw ShapeError(weight_.name + ": backward batch mismatch");
  ConstMatMap<T> w(weight_.value.data(), out_, in_);
  MatMap<T> dw(weight_.grad.data(), out_, in_);
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> db(bias_.grad.data(), out_);
  dw.noalias() += dy.transpose() * input_;
  db += dy.colwise().sum();
  return dy * w;
}

template <typename T>
void Linear<T>::collect(ParamRefs<T>& refs) {
  refs.params.push_back(&weight_);
  refs.params.push_back(&bias_);
}

template <typename T>
Mlp<T>::Mlp(const std::string& name, int in_features, int hidden, int out_features)
    : fc1_(name + ".0", in_features, hidden), fc2_(name + ".2", hidden, out_features) {}

template <typename T>
Mat<T> Mlp<T>::forward(const Mat<T>& x, bool train) {
  Mat<T> h = fc1_.forward(x, train);
  Mat<T> mask = (h.array() > T(0)).template cast<T>();
  h = h.cwiseProduct(mask);
  if (train) hidden_mask_ = std::move(mask);
  return fc2_.forward(h, train);
}

template <typename T>
Mat<T> Mlp<T>::backward(const Mat<T>& dy) {
  Mat<T> dh = fc2_.backward(dy);
  dh = dh.cwiseProduct(hidden_mask_);
  return fc1_.backward(dh);
}

template <typename T>
void Mlp<T>::collect(ParamRefs<T>& refs) {
  fc1_.collect(refs);
  fc2_.collect(refs);
}

// ---------------------------------------------------------------------------
// Pooling / softmax

template <typename T>
Mat<T> global_avg_pool(const FeatureMap<T>& x) {
  const int hw = x.height * x.width;
  Mat<T> out(x.batch, x.channels);
  for (int c = 0; c < x.channels; ++c)
    for (int n = 0; n < x.batch; ++n) {
      const T* p = x.data.data() + (static_cast<std::size_t>(c) * x.batch + n) * hw;
      T acc = T(0);
      for (int i = 0; i < hw; ++i) acc += p[i];
      out(n, c) = acc / static_cast<T>(hw);
    }
  return out;
}

template <typename T>
FeatureMap<T> global_avg_pool_backward(const Mat<T>& dy, int height, int width) {
  FeatureMap<T> dx(static_cast<int>(dy.cols()), static_cast<int>(dy.rows()), height, width);
  const int hw = height * width;
  const T inv = T(1) / static_cast<T>(hw);
  for (int c = 0; c < dx.channels; ++c)
    for (int n = 0; n < dx.batch; ++n) {
      T* p = dx.data.data() + (static_cast<std::size_t>(c) * dx.batch + n) * hw;
      std::fill(p, p + hw, dy(n, c) * inv);
    }
  return dx;
}

template <typename T>
Mat<T> log_softmax_rows(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    const T lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = (logits.row(r).array() - lse).matrix();
  }
  return out;
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const T mx = logits.row(r).maxCoeff();
    auto e = (logits.row(r).array() - mx).exp();
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

#define VVS_INSTANTIATE(T)                                                         \
  template struct Param<T>;                                                        \
  template class Conv2d<T>;                                                        \
  template class BatchNorm2d<T>;                                                   \
  template class ReLU<T>;                                                          \
  template class ConvUnit<T>;                                                      \
  template class BasicBlock<T>;                                                    \
  template class Linear<T>;                                                        \
  template class Mlp<T>;                                                           \
  template Mat<T> global_avg_pool<T>(const FeatureMap<T>&);                        \
  template FeatureMap<T> global_avg_pool_backward<T>(const Mat<T>&, int, int);     \
  template Mat<T> softmax_rows<T>(const Mat<T>&);                                  \
  template Mat<T> log_softmax_rows<T>(const Mat<T>&);

VVS_INSTANTIATE(float)
VVS_INSTANTIATE(double)

#undef VVS_INSTANTIATE

}  // namespace vvs::nn
