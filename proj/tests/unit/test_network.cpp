#include <doctest.h>

#include <random>
#include <sstream>

#include "adsm/network.hpp"
#include "oracles.hpp"

using namespace adsm;

namespace {

std::vector<int> kernels(const NetworkSpec& spec) {
  std::vector<int> k;
  for (const LayerSpec& l : spec.layers) k.push_back(l.kind == LayerKind::Deconv ? -l.kernel : l.kernel);
  return k;
}

}  // namespace

TEST_CASE("presets expand to the tabulated kernel lists") {
  CHECK(kernels(parse_network_config("4Conv@37")) == std::vector<int>{10, 10, 10, 10});
  CHECK(kernels(parse_network_config("37-3Conv")) == std::vector<int>{13, 13, 13});
  CHECK(kernels(parse_network_config("37-1Deconv(5)&4Conv")) ==
        std::vector<int>{-5, 11, 11, 11, 11});
  CHECK(kernels(parse_network_config("1Deconv(5)&4Conv@37")) ==
        std::vector<int>{-5, 11, 11, 11, 11});
  CHECK(kernels(parse_network_config("37-1Deconv(3)-4Conv")) == std::vector<int>{-3, 11, 11, 10, 10});
  const NetworkSpec s = parse_network_config("37-4Conv");
  REQUIRE(s.patch_size);
  CHECK(*s.patch_size == 37);
  // conv layers carry BN+ReLU except the last, which is bare
  for (std::size_t i = 0; i + 1 < s.layers.size(); ++i) {
    CHECK(s.layers[i].batch_norm);
    CHECK(s.layers[i].relu);
  }
  CHECK_FALSE(s.layers.back().batch_norm);
  CHECK_FALSE(s.layers.back().relu);
}

TEST_CASE("every 37-pixel preset except the three-deconv one reduces to 1x1") {
  const auto names = preset_names();
  CHECK(names.size() == 10);
  for (const std::string& name : names) {
    const NetworkSpec spec = parse_network_config(name);
    const std::vector<int> chain = size_chain(spec, 37);
    if (name == "37-3Deconv&6Conv") {
      CHECK(chain.back() == 7);
    } else {
      CHECK_MESSAGE(chain.back() == 1, name);
    }
  }
}

TEST_CASE("size chains") {
  CHECK(size_chain(parse_network_config("37-4Conv"), 37) == std::vector<int>{37, 28, 19, 10, 1});
  CHECK(size_chain(parse_network_config("37-1Deconv(5)&4Conv"), 37) ==
        std::vector<int>{37, 41, 31, 21, 11, 1});
  CHECK(size_chain(parse_network_config("37-3Conv"), 37) == std::vector<int>{37, 25, 13, 1});
  CHECK_THROWS_AS(size_chain(parse_network_config("2Conv(20)"), 37), GeometryError);
}

TEST_CASE("grammar networks") {
  const NetworkSpec s = parse_network_config("1Deconv(3) & 2Conv(8) @13");
  CHECK(kernels(s) == std::vector<int>{-3, 8, 8});
  CHECK(*s.patch_size == 13);
  CHECK(s.layers[0].batch_norm);
  CHECK_FALSE(s.layers[0].relu);
  CHECK(s.layers[1].relu);
  CHECK_FALSE(s.layers[2].batch_norm);
  CHECK_FALSE(parse_network_config("3Conv(5)").patch_size);
  CHECK_THROWS_AS(parse_network_config("0Conv"), ParseError);
  CHECK_THROWS_AS(parse_network_config("0Conv(3)"), ParseError);
  CHECK_THROWS_AS(parse_network_config(""), ParseError);
  CHECK_THROWS_AS(parse_network_config("2Pool(3)"), ParseError);
  CHECK_THROWS_AS(parse_network_config("2Conv(3)&"), ParseError);
  CHECK_THROWS_AS(parse_network_config("29-4Conv"), ParseError);  // preset kernels only fit 37
}

TEST_CASE("build_network wires channels 1 -> C -> ... -> C") {
  const FeatureExtractor net = build_network("37-1Deconv(5)&4Conv", 16, 3);
  CHECK(net.input_channels() == 1);
  CHECK(net.output_channels() == 16);
  CHECK(net.patch_size() == 37);
  CHECK(validate_geometry(net, 37) == 1);
  // weights within the uniform bound of the first layer
  const auto& first = std::get<DeconvLayer>(net.layers()[0]);
  const double bound = std::sqrt(6.0 / ((1 + 16) * 25.0));
  for (double w : first.weights) CHECK(std::abs(w) <= bound);
  CHECK_FALSE(first.has_bias());
  CHECK(std::holds_alternative<BatchNorm>(net.layers()[1]));
  // last linear layer has a bias since no BN follows
  CHECK(std::get<ConvLayer>(net.layers().back()).has_bias());
}

TEST_CASE("feature shapes of the deconv preset at full width") {
  const FeatureExtractor net = build_network("37-1Deconv(5)&4Conv", 64, 1);
  std::mt19937_64 rng(2);
  const Tensor patch = oracle::random_tensor(37, 37, 1, rng);
  const Tensor strip = oracle::random_tensor(37, 237, 1, rng);
  const Tensor left = extract_features(net, patch);
  const Tensor right = extract_features(net, strip);
  CHECK(left.height() == 1);
  CHECK(left.width() == 1);
  CHECK(left.channels() == 64);
  CHECK(right.height() == 1);
  CHECK(right.width() == 201);
  CHECK(right.channels() == 64);
  CHECK_THROWS_AS(extract_features(net, oracle::random_tensor(36, 40, 1, rng)), GeometryError);
  CHECK_THROWS_AS(extract_features(net, oracle::random_tensor(37, 30, 1, rng)), GeometryError);
}

TEST_CASE("both branches produce identical features for the same patch") {
  const FeatureExtractor net = build_network("1Deconv(3)&2Conv(8)", 8, 4);
  std::mt19937_64 rng(9);
  const Tensor patch = oracle::random_tensor(13, 13, 1, rng);
  const FeatureExtractor copy = net;
  CHECK(extract_features(net, patch) == extract_features(copy, patch));
}

TEST_CASE("conv-only networks are fully convolutional: strip column n is sub-window n") {
  std::mt19937_64 rng(12);
  for (const char* cfg : {"3Conv(5)", "2Conv(4)&1Conv(7)", "4Conv(3)"}) {
    const FeatureExtractor net = build_network(cfg, 6, 5);
    const int p = net.patch_size();
    const Tensor strip = oracle::random_tensor(p, p + 20, 1, rng);
    const Tensor out = extract_features(net, strip);
    REQUIRE(out.width() == 21);
    for (int n = 0; n <= 20; ++n) {
      const Tensor single = extract_features(net, strip.crop(0, n, p, p));
      CHECK(oracle::max_abs_diff(single.at(0, 0), out.at(0, n)) <= 1e-12);
    }
  }
}

TEST_CASE("similarity scores") {
  Tensor right(1, 2, 2);
  right(0, 0, 0) = 3;
  right(0, 0, 1) = 4;
  right(0, 1, 0) = 5;
  right(0, 1, 1) = 6;
  const std::vector<double> left = {1, 2};
  CHECK(similarity_scores(left, right) == std::vector<double>{11, 17});
  const std::vector<double> e1 = {1, 0};
  CHECK(similarity_scores(e1, right) == std::vector<double>{3, 5});
  const std::vector<double> scaled = {2.5, 5};
  const auto r = similarity_scores(scaled, right);
  CHECK(r[0] == doctest::Approx(2.5 * 11));
  CHECK(r[1] == doctest::Approx(2.5 * 17));
  const Tensor same(1, 4, 2, 0.5);
  const auto flat = similarity_scores(left, same);
  for (double v : flat) CHECK(v == flat[0]);
  const std::vector<double> wrong = {1, 2, 3};
  CHECK_THROWS_AS(similarity_scores(wrong, right), ShapeError);
}

TEST_CASE("parameter counts") {
  CHECK(count_parameters(FeatureExtractor({ConvLayer({3}, 1, 64, true)})) == 640);
  CHECK(count_parameters(FeatureExtractor({ConvLayer({3}, 1, 64, false), BatchNorm(64)})) ==
        576 + 128);
  CHECK(count_parameters(FeatureExtractor()) == 0);
  // 37-4Conv at 64 channels: 1*100*64 + 128, 2 x (64*100*64 + 128), 64*100*64 + 64
  CHECK(count_parameters(build_network("37-4Conv")) == 6400 + 128 + 2 * (409600 + 128) + 409600 + 64);
}

TEST_CASE("channel chains are validated") {
  CHECK_THROWS_AS(FeatureExtractor({ConvLayer({3}, 1, 4, false), ConvLayer({3}, 5, 4, true)}),
                  ShapeError);
  CHECK_THROWS_AS(FeatureExtractor({ConvLayer({3}, 1, 4, false), BatchNorm(3)}), ShapeError);
}

TEST_CASE("weights round trip byte for byte") {
  const FeatureExtractor net = build_network("1Deconv(3)&2Conv(8)", 5, 7);
  std::ostringstream a;
  save_weights(a, net);
  std::istringstream in(a.str());
  const FeatureExtractor back = load_weights(in);
  std::ostringstream b;
  save_weights(b, back);
  CHECK(a.str() == b.str());
  CHECK(a.str().substr(0, 4) == "ADSM");
  // float32 storage: reloaded parameters equal the float-rounded originals
  const auto p0 = net.parameters();
  const auto p1 = back.parameters();
  REQUIRE(p0.size() == p1.size());
  for (std::size_t i = 0; i < p0.size(); ++i)
    for (std::size_t j = 0; j < p0[i].size(); ++j)
      CHECK(p1[i][j] == static_cast<double>(static_cast<float>(p0[i][j])));
  // the reloaded network computes the same thing up to float rounding of weights
  std::mt19937_64 rng(1);
  const Tensor patch = oracle::random_tensor(13, 13, 1, rng);
  CHECK(oracle::max_abs_diff(net.forward(patch).values(), back.forward(patch).values()) < 1e-5);
}

TEST_CASE("corrupt weights files are rejected") {
  std::istringstream bad_magic("XXXX");
  CHECK_THROWS_AS(load_weights(bad_magic), IoError);
  const FeatureExtractor net = build_network("2Conv(3)", 2, 1);
  std::ostringstream out;
  save_weights(out, net);
  std::string bytes = out.str();
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_weights(truncated), IoError);
  bytes[4] = 99;  // unknown version
  std::istringstream versioned(bytes);
  CHECK_THROWS_AS(load_weights(versioned), IoError);
}
