#include "vvs/model.hpp"

#include <algorithm>
#include <cmath>

#include "vvs/error.hpp"
#include "vvs/rng.hpp"

namespace vvs {

std::string_view to_string(Architecture a) {
  return a == Architecture::resnet18 ? "resnet18" : "tiny_conv";
}

Architecture architecture_from_string(std::string_view s) {
  if (s == "resnet18") return Architecture::resnet18;
  if (s == "tiny_conv") return Architecture::tiny_conv;
  throw ConfigError("backbone.architecture",
                    "unknown architecture '" + std::string(s) + "' (resnet18 or tiny_conv)");
}

void BackboneConfig::validate() const {
  if (feature_dim <= 0) throw ConfigError("backbone.feature_dim", "must be positive");
  if (input_size < 8) throw ConfigError("backbone.input_size", "must be at least 8");
  if (architecture == Architecture::resnet18 && feature_dim != 512)
    throw ConfigError("backbone.feature_dim", "resnet18 emits 512 features");
  if (architecture == Architecture::tiny_conv && width <= 0)
    throw ConfigError("backbone.width", "must be positive");
}

void HeadConfig::validate() const {
  if (projection_dim <= 0) throw ConfigError("heads.projection_dim", "must be positive");
  if (hidden_dim <= 0) throw ConfigError("heads.hidden_dim", "must be positive");
}

template <typename T>
struct Model<T>::Impl {
  std::unique_ptr<nn::Layer<T>> stem;
  std::vector<std::unique_ptr<nn::Layer<T>>> stages;  // registry order after the stem
  nn::Mlp<T> projection;
  nn::Mlp<T> rp_head;
  int pooled_h = 0, pooled_w = 0;

  Impl(int n, const HeadConfig& h)
      : projection("projection", n, h.hidden_dim, h.projection_dim),
        rp_head("rp_head", 2 * n, h.hidden_dim, HeadConfig::rp_classes) {}
};

template <typename T>
Model<T>::Model(const BackboneConfig& backbone, const HeadConfig& heads, std::uint64_t init_seed)
    : backbone_cfg_(backbone), head_cfg_(heads) {
  backbone.validate();
  heads.validate();
  impl_ = std::make_unique<Impl>(backbone.feature_dim, heads);
  registry_ = {"stem",     "layer1.0", "layer1.1", "layer2.0", "layer2.1",
               "layer3.0", "layer3.1", "layer4.0", "layer4.1"};

  if (backbone.architecture == Architecture::resnet18) {
    // 3x3 stem without max-pool for small inputs.
    impl_->stem = std::make_unique<nn::ConvUnit<T>>("stem", 3, 64, 1);
    const int widths[4] = {64, 128, 256, 512};
    int in = 64;
    for (int s = 0; s < 4; ++s) {
      for (int b = 0; b < 2; ++b) {
        const std::string name = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
        const int stride = (b == 0 && s > 0) ? 2 : 1;
        impl_->stages.push_back(std::make_unique<nn::BasicBlock<T>>(name, in, widths[s], stride));
        in = widths[s];
      }
    }
  } else {
    const int w = backbone.width;
    impl_->stem = std::make_unique<nn::ConvUnit<T>>("stem", 3, w, 1);
    const int widths[4] = {w, 2 * w, 4 * w, backbone.feature_dim};
    int in = w;
    for (int s = 0; s < 4; ++s) {
      for (int b = 0; b < 2; ++b) {
        const std::string name = "layer" + std::to_string(s + 1) + "." + std::to_string(b);
        impl_->stages.push_back(std::make_unique<nn::ConvUnit<T>>(name, in, widths[s], b == 0 ? 2 : 1));
        in = widths[s];
      }
    }
  }

  auto refs = parameters(ModelPart::all);
  for (std::size_t i = 0; i < refs.params.size(); ++i) {
    nn::Param<T>& p = *refs.params[i];
    Rng rng = make_rng(init_seed, {stream::kInit, i});
    switch (p.init) {
      case nn::Init::kaiming_normal_fan_out: {
        const double sd = std::sqrt(2.0 / p.fan);
        for (auto& v : p.value) v = static_cast<T>(normal(rng, 0.0, sd));
        break;
      }
      case nn::Init::uniform_fan_in: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(p.fan));
        for (auto& v : p.value) v = static_cast<T>(uniform(rng, -bound, bound));
        break;
      }
      case nn::Init::ones: std::fill(p.value.begin(), p.value.end(), T(1)); break;
      case nn::Init::zeros: std::fill(p.value.begin(), p.value.end(), T(0)); break;
    }
  }
}

template <typename T>
Model<T>::Model(Model&&) noexcept = default;
template <typename T>
Model<T>& Model<T>::operator=(Model&&) noexcept = default;
template <typename T>
Model<T>::~Model() = default;

template <typename T>
std::vector<std::string> Model<T>::block_layers() const {
  return {registry_.begin() + 1, registry_.end()};
}

template <typename T>
void Model<T>::require_trainable(bool train) const {
  if (train && frozen_) throw Error("model is frozen; training-mode calls are not allowed");
}

template <typename T>
nn::FeatureMap<T> Model<T>::to_input(std::span<const Image> images, bool allow_half_size) const {
  int k = backbone_cfg_.input_size;
  if (allow_half_size && !images.empty() && images[0].height == k / 2) k /= 2;
  const int n = static_cast<int>(images.size());
  nn::FeatureMap<T> x(3, n, k, k);
  for (int i = 0; i < n; ++i) {
    const Image& img = images[i];
    if (img.channels != 3 || img.height != k || img.width != k)
      throw ShapeError("encode: expected 3x" + std::to_string(k) + "x" + std::to_string(k) +
                       " images, got " + std::to_string(img.channels) + "x" +
                       std::to_string(img.height) + "x" + std::to_string(img.width));
    for (int c = 0; c < 3; ++c)
      std::copy(img.data.begin() + static_cast<std::ptrdiff_t>(c) * k * k,
                img.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * k * k,
                x.data.begin() + (static_cast<std::ptrdiff_t>(c) * n + i) * k * k);
  }
  return x;
}

template <typename T>
nn::FeatureMap<T> Model<T>::to_input(const ImageSet& images, int first, int count) const {
  const int k = backbone_cfg_.input_size;
  if (images.channels() != 3 || images.height() != k || images.width() != k)
    throw ShapeError("encode: expected 3x" + std::to_string(k) + "x" + std::to_string(k) +
                     " images, got " + std::to_string(images.channels()) + "x" +
                     std::to_string(images.height()) + "x" + std::to_string(images.width()));
  nn::FeatureMap<T> x(3, count, k, k);
  for (int i = 0; i < count; ++i) {
    auto v = images.view(first + i);
    for (int c = 0; c < 3; ++c)
      std::copy(v.data.begin() + static_cast<std::ptrdiff_t>(c) * k * k,
                v.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * k * k,
                x.data.begin() + (static_cast<std::ptrdiff_t>(c) * count + i) * k * k);
  }
  return x;
}

template <typename T>
nn::Mat<T> Model<T>::run_backbone(nn::FeatureMap<T> x, bool train,
                                  std::map<std::string, nn::FeatureMap<T>>* taps) {
  x = impl_->stem->forward(x, train);
  if (taps && taps->count("stem")) (*taps)["stem"] = x;
  for (std::size_t s = 0; s < impl_->stages.size(); ++s) {
    x = impl_->stages[s]->forward(x, train);
    if (taps && taps->count(registry_[s + 1])) (*taps)[registry_[s + 1]] = x;
  }
  if (train) {
    impl_->pooled_h = x.height;
    impl_->pooled_w = x.width;
  }
  return nn::global_avg_pool(x);
}

template <typename T>
nn::Mat<T> Model<T>::encode(std::span<const Image> images, bool train, bool allow_half_size) {
  require_trainable(train);
  if (images.empty()) throw ShapeError("encode: empty batch");
  return run_backbone(to_input(images, allow_half_size), train);
}

template <typename T>
nn::Mat<T> Model<T>::encode(const ImageSet& images, bool train) {
  require_trainable(train);
  if (images.count() == 0) throw ShapeError("encode: empty batch");
  if (train) return run_backbone(to_input(images, 0, images.count()), true);
  // Evaluation is per-sample, so chunking only bounds memory.
  constexpr int kChunk = 256;
  nn::Mat<T> out(images.count(), feature_dim());
  for (int first = 0; first < images.count(); first += kChunk) {
    const int count = std::min(kChunk, images.count() - first);
    out.middleRows(first, count) = run_backbone(to_input(images, first, count), false);
  }
  return out;
}

template <typename T>
void Model<T>::encode_backward(const nn::Mat<T>& dfeatures) {
  if (impl_->pooled_h == 0) throw ShapeError("encode_backward without a training forward");
  nn::FeatureMap<T> g = nn::global_avg_pool_backward(dfeatures, impl_->pooled_h, impl_->pooled_w);
  for (auto it = impl_->stages.rbegin(); it != impl_->stages.rend(); ++it) g = (*it)->backward(g);
  impl_->stem->backward(g);
}

template <typename T>
nn::Mat<T> Model<T>::project(const nn::Mat<T>& features, bool train) {
  require_trainable(train);
  return impl_->projection.forward(features, train);
}

template <typename T>
nn::Mat<T> Model<T>::project_backward(const nn::Mat<T>& dprojections) {
  return impl_->projection.backward(dprojections);
}

template <typename T>
nn::Mat<T> Model<T>::rp_logits(const nn::Mat<T>& feat_a, const nn::Mat<T>& feat_b, bool train) {
  require_trainable(train);
  if (feat_a.rows() != feat_b.rows())
    throw ShapeError("classify_rp: batch sizes differ (" + std::to_string(feat_a.rows()) + " vs " +
                     std::to_string(feat_b.rows()) + ")");
  if (feat_a.cols() != feature_dim() || feat_b.cols() != feature_dim())
    throw ShapeError("classify_rp: feature dimension mismatch");
  nn::Mat<T> cat(feat_a.rows(), 2 * feature_dim());
  cat.leftCols(feature_dim()) = feat_a;
  cat.rightCols(feature_dim()) = feat_b;
  return impl_->rp_head.forward(cat, train);
}

template <typename T>
std::pair<nn::Mat<T>, nn::Mat<T>> Model<T>::rp_logits_backward(const nn::Mat<T>& dlogits) {
  nn::Mat<T> dcat = impl_->rp_head.backward(dlogits);
  return {dcat.leftCols(feature_dim()), dcat.rightCols(feature_dim())};
}

template <typename T>
nn::Mat<T> Model<T>::classify_rp(const nn::Mat<T>& feat_a, const nn::Mat<T>& feat_b) {
  return nn::softmax_rows<T>(rp_logits(feat_a, feat_b, false));
}

template <typename T>
std::map<std::string, ActivationMatrix> Model<T>::record_activations(
    const ImageSet& images, const std::vector<std::string>& layer_names, int batch_size) {
  for (const auto& name : layer_names) {
    if (std::find(registry_.begin(), registry_.end(), name) == registry_.end()) {
      std::string valid;
      for (const auto& r : registry_) valid += (valid.empty() ? "" : ", ") + r;
      throw ShapeError("unknown layer '" + name + "'; valid layers: " + valid);
    }
  }
  if (batch_size <= 0) throw ShapeError("record_activations: batch size must be positive");
  std::map<std::string, ActivationMatrix> out;
  for (const auto& name : layer_names) out[name].layer_name = name;

  const int total = images.count();
  for (int first = 0; first < total; first += batch_size) {
    const int count = std::min(batch_size, total - first);
    std::map<std::string, nn::FeatureMap<T>> taps;
    for (const auto& name : layer_names) taps[name];
    run_backbone(to_input(images, first, count), /*train=*/false, &taps);
    for (auto& [name, fm] : taps) {
      const int hw = fm.height * fm.width;
      const Eigen::Index feats = static_cast<Eigen::Index>(fm.channels) * hw;
      Eigen::MatrixXf& dst = out[name].values;
      if (dst.size() == 0) dst.resize(total, feats);
      for (int i = 0; i < count; ++i)
        for (int c = 0; c < fm.channels; ++c) {
          const T* src = fm.data.data() + (static_cast<std::size_t>(c) * fm.batch + i) * hw;
          for (int p = 0; p < hw; ++p)
            dst(first + i, static_cast<Eigen::Index>(c) * hw + p) = static_cast<float>(src[p]);
        }
    }
  }
  return out;
}

template <typename T>
nn::ParamRefs<T> Model<T>::parameters(ModelPart part) {
  nn::ParamRefs<T> refs;
  if (part == ModelPart::backbone || part == ModelPart::all) {
    impl_->stem->collect(refs);
    for (auto& s : impl_->stages) s->collect(refs);
  }
  if (part == ModelPart::projection || part == ModelPart::all) impl_->projection.collect(refs);
  if (part == ModelPart::rp_head || part == ModelPart::all) impl_->rp_head.collect(refs);
  return refs;
}

template <typename T>
std::size_t Model<T>::parameter_count(ModelPart part) const {
  auto refs = const_cast<Model<T>*>(this)->parameters(part);
  std::size_t n = 0;
  for (auto* p : refs.params) n += p->size();
  return n;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto* p : parameters(ModelPart::all).params) p->zero_grad();
}

template <typename T>
template <typename U>
void Model<T>::copy_to(Model<U>& other) const {
  if (!(other.backbone_config() == backbone_cfg_) || !(other.head_config() == head_cfg_))
    throw ShapeError("copy_to: architecture mismatch");
  auto src = const_cast<Model<T>*>(this)->parameters(ModelPart::all);
  auto dst = other.parameters(ModelPart::all);
  for (std::size_t i = 0; i < src.params.size(); ++i)
    std::transform(src.params[i]->value.begin(), src.params[i]->value.end(),
                   dst.params[i]->value.begin(), [](T v) { return static_cast<U>(v); });
  for (std::size_t i = 0; i < src.buffers.size(); ++i)
    std::transform(src.buffers[i]->value.begin(), src.buffers[i]->value.end(),
                   dst.buffers[i]->value.begin(), [](T v) { return static_cast<U>(v); });
}

template class Model<float>;
template class Model<double>;
template void Model<float>::copy_to<double>(Model<double>&) const;
template void Model<double>::copy_to<float>(Model<float>&) const;
template void Model<float>::copy_to<float>(Model<float>&) const;

}  // namespace vvs
