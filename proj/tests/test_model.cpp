#include <doctest.h>

#include <numeric>

#include "grad_check.hpp"
#include "vvs/data.hpp"
#include "vvs/error.hpp"
#include "vvs/model.hpp"

using namespace vvs;

namespace {

BackboneConfig tiny(int k = 32) {
  BackboneConfig b;
  b.architecture = Architecture::tiny_conv;
  b.width = 4;
  b.feature_dim = 16;
  b.input_size = k;
  return b;
}

HeadConfig heads() {
  HeadConfig h;
  h.projection_dim = 6;
  h.hidden_dim = 10;
  return h;
}

std::vector<Image> images_of(const ImageSet& s) {
  std::vector<Image> out;
  for (int i = 0; i < s.count(); ++i) out.push_back(s.image(i));
  return out;
}

// Parameter count from the architecture definition, walked independently of
// the model code: conv weights out*in*9, batch-norm 2*out, linear out*in+out.
std::size_t expected_backbone(const BackboneConfig& b) {
  auto conv_bn = [](std::size_t in, std::size_t out, std::size_t k = 3) { return out * in * k * k + 2 * out; };
  if (b.architecture == Architecture::tiny_conv) {
    const std::size_t w = b.width;
    const std::size_t widths[4] = {w, 2 * w, 4 * w, static_cast<std::size_t>(b.feature_dim)};
    std::size_t n = conv_bn(3, w), in = w;
    for (std::size_t out : widths) {
      n += conv_bn(in, out) + conv_bn(out, out);
      in = out;
    }
    return n;
  }
  std::size_t n = conv_bn(3, 64), in = 64;
  for (std::size_t out : {64, 128, 256, 512}) {
    for (int blk = 0; blk < 2; ++blk) {
      n += conv_bn(in, out) + conv_bn(out, out);
      if (in != out) n += conv_bn(in, out, 1);
      in = out;
    }
  }
  return n;
}

std::size_t mlp(std::size_t in, std::size_t hidden, std::size_t out) { return in * hidden + hidden + hidden * out + out; }

}  // namespace

TEST_CASE("encode: shape, determinism, size check") {
  Model<float> m(tiny(), heads(), 1);
  std::vector<Image> zeros(2, Image(3, 32, 32, 0.0f));
  const auto f = m.encode(zeros);
  CHECK(f.rows() == 2);
  CHECK(f.cols() == 16);
  CHECK(f.row(0) == f.row(1));
  CHECK(f.allFinite());

  const ImageSet s = synth_image_set(1, 5, 2, 32);
  const auto a = m.encode(s);
  const auto b = m.encode(s);
  CHECK(a.rows() == 5);
  CHECK(a == b);
  CHECK(m.encode(images_of(s)) == a);

  std::vector<Image> wrong(1, Image(3, 30, 30, 0.0f));
  CHECK_THROWS_AS(m.encode(wrong), ShapeError);
}

TEST_CASE("project and classify_rp contracts") {
  Model<float> m(tiny(), heads(), 2);
  nn::Mat<float> f(4, 16);
  f.setRandom();
  f.row(1) = f.row(0);
  const auto p = m.project(f);
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 6);
  CHECK(p.row(0) == p.row(1));
  CHECK(p.allFinite());

  nn::Mat<float> fa(3, 16), fb(3, 16);
  fa.setRandom();
  fb.setRandom();
  const auto probs = m.classify_rp(fa, fb);
  CHECK(probs.rows() == 3);
  CHECK(probs.cols() == 8);
  for (int i = 0; i < 3; ++i) {
    CHECK(probs.row(i).sum() == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(probs.row(i).minCoeff() >= 0.0f);
  }
  const auto swapped = m.classify_rp(fb, fa);
  CHECK((swapped - probs).cwiseAbs().maxCoeff() > 1e-6f);
  nn::Mat<float> short_b(2, 16);
  short_b.setRandom();
  CHECK_THROWS_AS(m.classify_rp(fa, short_b), ShapeError);
}

TEST_CASE("layer registry and recorded activations") {
  BackboneConfig rb;
  rb.architecture = Architecture::resnet18;
  rb.feature_dim = 512;
  rb.input_size = 32;
  Model<float> resnet(rb, HeadConfig{}, 0);
  const std::vector<std::string> blocks = {"layer1.0", "layer1.1", "layer2.0", "layer2.1",
                                           "layer3.0", "layer3.1", "layer4.0", "layer4.1"};
  CHECK(resnet.block_layers() == blocks);
  CHECK(resnet.layer_registry().front() == "stem");
  CHECK(resnet.layer_registry().size() == 9);

  Model<float> m(tiny(), heads(), 3);
  const ImageSet s = synth_image_set(2, 10, 2, 32);
  const auto acts = m.record_activations(s, {"layer2.1"});
  CHECK(acts.at("layer2.1").n_stimuli() == 10);
  CHECK(acts.at("layer2.1").n_features() == 8 * 8 * 8);
  try {
    m.record_activations(s, {"layer9"});
    FAIL("expected an error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer4.1") != std::string::npos);
  }

  const ImageSet many = synth_image_set(4, 40, 3, 32);
  const auto one = m.record_activations(many, {"stem", "layer3.0"}, 1);
  const auto chunk = m.record_activations(many, {"stem", "layer3.0"}, 32);
  for (const char* name : {"stem", "layer3.0"})
    CHECK((one.at(name).values - chunk.at(name).values).cwiseAbs().maxCoeff() <= 1e-5f);
  // Flattened as (channel, row, col): feature c*H*W + y*W + x.
  CHECK(one.at("stem").n_features() == 4 * 32 * 32);
}

TEST_CASE("parameter counts match the configs") {
  const BackboneConfig b = tiny();
  Model<float> m(b, heads(), 0);
  CHECK(m.parameter_count(ModelPart::backbone) == expected_backbone(b));
  CHECK(m.parameter_count(ModelPart::projection) == mlp(16, 10, 6));
  CHECK(m.parameter_count(ModelPart::rp_head) == mlp(32, 10, 8));

  BackboneConfig rb;
  rb.architecture = Architecture::resnet18;
  rb.feature_dim = 512;
  rb.input_size = 32;
  Model<float> r(rb, HeadConfig{}, 0);
  CHECK(r.parameter_count(ModelPart::backbone) == expected_backbone(rb));
  CHECK(r.parameter_count(ModelPart::backbone) == 11168832u);
  CHECK(r.parameter_count(ModelPart::projection) == mlp(512, 512, 128));
  CHECK(r.parameter_count(ModelPart::rp_head) == mlp(1024, 512, 8));

  BackboneConfig bad = rb;
  bad.feature_dim = 256;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("frozen models refuse training-mode calls") {
  Model<float> m(tiny(), heads(), 0);
  m.set_frozen(true);
  std::vector<Image> imgs(2, Image(3, 32, 32, 0.5f));
  CHECK_THROWS_AS(m.encode(imgs, true), Error);
  CHECK_NOTHROW(m.encode(imgs, false));
}

TEST_CASE("precision copies agree in evaluation mode") {
  Model<float> m(tiny(), heads(), 9);
  Model<double> d(tiny(), heads(), 0);
  m.copy_to(d);
  const ImageSet s = synth_image_set(3, 4, 2, 32);
  const auto ff = m.encode(s);
  const auto fd = d.encode(s);
  CHECK((ff.cast<double>() - fd).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("finite differences agree with back-propagation") {
  const gradcheck::Result r = gradcheck::run();
  MESSAGE("parameters " << r.parameters << ", relative error " << r.relative_error << ", worst tensor "
                        << r.worst_tensor << " " << r.worst_tensor_error);
  CHECK(r.parameters <= 10000);
  CHECK(r.relative_error < 1e-3);
}
