#include "adsm/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <random>
#include <regex>
#include <type_traits>

namespace adsm {
namespace {

LayerSpec conv(int k, bool hidden = true) { return {LayerKind::Conv, k, hidden, hidden}; }
LayerSpec deconv(int k, bool relu = false) { return {LayerKind::Deconv, k, true, relu}; }

std::vector<LayerSpec> repeat(int n, int k) {
  std::vector<LayerSpec> out(static_cast<std::size_t>(n), conv(k));
  return out;
}

std::vector<LayerSpec> finish(std::vector<LayerSpec> layers) {
  layers.back().batch_norm = false;
  layers.back().relu = false;
  return layers;
}

std::vector<LayerSpec> concat(std::initializer_list<std::vector<LayerSpec>> parts) {
  std::vector<LayerSpec> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

// Layer stacks of the 37-pixel configurations.
const std::map<std::string, std::vector<LayerSpec>, std::less<>>& presets() {
  static const std::map<std::string, std::vector<LayerSpec>, std::less<>> table = {
      {"3Conv", finish(repeat(3, 13))},
      {"4Conv", finish(repeat(4, 10))},
      {"6Conv", finish(concat({repeat(2, 9), repeat(2, 7), repeat(2, 5)}))},
      {"7Conv", finish(concat({repeat(4, 7), repeat(3, 5)}))},
      {"9Conv", finish(repeat(9, 5))},
      {"11Conv", finish(concat({repeat(7, 5), repeat(4, 3)}))},
      {"1Deconv(5)&4Conv", finish(concat({{deconv(5)}, repeat(4, 11)}))},
      {"1Deconv(3)&4Conv", finish(concat({{deconv(3)}, repeat(2, 11), repeat(2, 10)}))},
      {"2Deconv&6Conv",
       finish(concat({{deconv(3), deconv(5)}, repeat(3, 9), repeat(3, 7)}))},
      // Printed with five conv rows; the sixth Conv7 completes the "6Conv" stack. Its geometry
      // ends at 7 for a 37 input and is reported as failing, not corrected.
      {"3Deconv&6Conv",
       finish(concat({{deconv(3, true), deconv(5, true), deconv(7, true)}, repeat(3, 9),
                      repeat(3, 7)}))},
  };
  return table;
}

constexpr int kPresetPatch = 37;

std::vector<LayerSpec> parse_stages(const std::string& body) {
  static const std::regex stage(R"((\d+)(Deconv|Conv)\((\d+)\))");
  std::vector<LayerSpec> layers;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const std::size_t amp = body.find('&', pos);
    const std::string token = body.substr(pos, amp == std::string::npos ? std::string::npos : amp - pos);
    std::smatch m;
    if (!std::regex_match(token, m, stage)) {
      throw ParseError("malformed network stage '" + token + "'");
    }
    const int count = std::stoi(m[1]);
    const int k = std::stoi(m[3]);
    if (count < 1) throw ParseError("stage '" + token + "' has no layers");
    if (k < 1) throw ParseError("stage '" + token + "' has a zero kernel");
    for (int i = 0; i < count; ++i) {
      layers.push_back(m[2] == "Deconv" ? deconv(k) : conv(k));
    }
    if (amp == std::string::npos) break;
    pos = amp + 1;
  }
  return finish(std::move(layers));
}

int parse_patch(const std::string& digits, std::string_view text) {
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError("bad patch size in '" + std::string(text) + "'");
  }
  const int p = std::stoi(digits);
  if (p < 1) throw ParseError("patch size must be positive in '" + std::string(text) + "'");
  return p;
}

template <typename F>
void for_each_linear(const FeatureExtractor& extractor, F&& fn) {
  for (const Layer& layer : extractor.layers()) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) fn(LayerKind::Conv, c->geometry);
    if (const auto* d = std::get_if<DeconvLayer>(&layer)) fn(LayerKind::Deconv, d->geometry);
  }
}

int apply_size(LayerKind kind, int size, const Geometry& g) {
  return kind == LayerKind::Conv ? conv_output_size(size, g) : deconv_output_size(size, g);
}

int layer_out_channels(const Layer& layer, int in) {
  return std::visit(
      [in](const auto& l) -> int {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_base_of_v<FilterBank, T>) {
          return l.out_channels;
        } else if constexpr (std::is_same_v<T, BatchNorm>) {
          return l.channels;
        } else {
          return in;
        }
      },
      layer);
}

}  // namespace

NetworkSpec parse_network_config(std::string_view text) {
  std::string body(text);
  body.erase(std::remove_if(body.begin(), body.end(), [](unsigned char c) { return std::isspace(c); }),
             body.end());
  if (body.empty()) throw ParseError("empty network configuration");

  NetworkSpec spec;
  spec.name = body;
  if (const auto at = body.rfind('@'); at != std::string::npos) {
    spec.patch_size = parse_patch(body.substr(at + 1), text);
    body.erase(at);
  } else if (const auto dash = body.find('-');
             dash != std::string::npos && dash > 0 &&
             body.find_first_not_of("0123456789") == dash) {
    spec.patch_size = parse_patch(body.substr(0, dash), text);
    body.erase(0, dash + 1);
  }
  std::replace(body.begin(), body.end(), '-', '&');

  if (const auto it = presets().find(body); it != presets().end()) {
    if (spec.patch_size && *spec.patch_size != kPresetPatch) {
      throw ParseError("preset '" + body + "' is defined for " + std::to_string(kPresetPatch) +
                       "-pixel patches; give explicit kernels for patch size " +
                       std::to_string(*spec.patch_size));
    }
    spec.patch_size = kPresetPatch;
    spec.layers = it->second;
    return spec;
  }
  spec.layers = parse_stages(body);
  return spec;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  for (const auto& [name, layers] : presets()) names.push_back(std::to_string(kPresetPatch) + "-" + name);
  return names;
}

FeatureExtractor::FeatureExtractor(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) return;
  int channels = input_channels();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const bool ok = std::visit(
        [channels](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_base_of_v<FilterBank, T>) return l.in_channels == channels;
          else if constexpr (std::is_same_v<T, BatchNorm>) return l.channels == channels;
          else return l.channels == 0 || l.channels == channels;
        },
        layers_[i]);
    if (!ok) {
      throw ShapeError("channel chain broken at layer " + std::to_string(i));
    }
    if (auto* r = std::get_if<ReLU>(&layers_[i])) r->channels = channels;
    channels = layer_out_channels(layers_[i], channels);
  }
}

int FeatureExtractor::input_channels() const {
  for (const Layer& layer : layers_) {
    if (const auto* f = std::get_if<ConvLayer>(&layer)) return f->in_channels;
    if (const auto* f = std::get_if<DeconvLayer>(&layer)) return f->in_channels;
    if (const auto* b = std::get_if<BatchNorm>(&layer)) return b->channels;
  }
  return 1;
}

int FeatureExtractor::output_channels() const {
  int channels = input_channels();
  for (const Layer& layer : layers_) channels = layer_out_channels(layer, channels);
  return channels;
}

int FeatureExtractor::patch_size() const {
  std::vector<std::pair<LayerKind, Geometry>> linear;
  for_each_linear(*this, [&](LayerKind k, const Geometry& g) { linear.emplace_back(k, g); });
  int size = 1;
  for (auto it = linear.rbegin(); it != linear.rend(); ++it) {
    const auto& [kind, g] = *it;
    if (g.stride != 1 || g.padding != 0) {
      throw GeometryError("patch size is only defined for stride-1, unpadded layers");
    }
    size = kind == LayerKind::Conv ? size + g.kernel - 1 : size - g.kernel + 1;
    if (size < 1) throw GeometryError("no input size reduces this network to a single cell");
  }
  return size;
}

Tensor FeatureExtractor::forward(const Tensor& x) const {
  Tensor t = x;
  for (const Layer& layer : layers_) {
    t = std::visit(
        [&t](const auto& l) -> Tensor {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<T, ConvLayer>) return conv_forward(t, l);
          else if constexpr (std::is_same_v<T, DeconvLayer>) return deconv_forward(t, l);
          else if constexpr (std::is_same_v<T, BatchNorm>) return batchnorm_forward(t, l);
          else return relu_forward(t);
        },
        layer);
  }
  return t;
}

std::vector<std::span<double>> FeatureExtractor::parameters() {
  std::vector<std::span<double>> out;
  for (Layer& layer : layers_) {
    std::visit(
        [&out](auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_base_of_v<FilterBank, T>) {
            out.emplace_back(l.weights);
            if (l.has_bias()) out.emplace_back(l.bias);
          } else if constexpr (std::is_same_v<T, BatchNorm>) {
            out.emplace_back(l.gamma);
            out.emplace_back(l.beta);
          }
        },
        layer);
  }
  return out;
}

std::vector<std::span<const double>> FeatureExtractor::parameters() const {
  auto mutable_views = const_cast<FeatureExtractor*>(this)->parameters();
  return {mutable_views.begin(), mutable_views.end()};
}

FeatureExtractor build_network(const NetworkSpec& spec, int channels, std::uint64_t seed) {
  if (spec.layers.empty()) throw ParseError("network has no layers");
  if (channels < 1) throw ShapeError("channel width must be positive");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  int in = 1;
  for (const LayerSpec& ls : spec.layers) {
    const Geometry g{ls.kernel, 1, 0};
    const int out = channels;
    const double fan = static_cast<double>(in + out) * ls.kernel * ls.kernel;
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan), std::sqrt(6.0 / fan));
    FilterBank bank(g, in, out, !ls.batch_norm);
    for (double& w : bank.weights) w = dist(rng);
    if (ls.kind == LayerKind::Deconv) {
      DeconvLayer d;
      static_cast<FilterBank&>(d) = std::move(bank);
      layers.emplace_back(std::move(d));
    } else {
      ConvLayer c;
      static_cast<FilterBank&>(c) = std::move(bank);
      layers.emplace_back(std::move(c));
    }
    if (ls.batch_norm) layers.emplace_back(BatchNorm(out));
    if (ls.relu) layers.emplace_back(ReLU{out});
    in = out;
  }
  return FeatureExtractor(std::move(layers));
}

FeatureExtractor build_network(std::string_view config, int channels, std::uint64_t seed) {
  return build_network(parse_network_config(config), channels, seed);
}

std::vector<int> size_chain(const FeatureExtractor& extractor, int input_size) {
  if (input_size < 1) throw GeometryError("input size must be positive");
  std::vector<int> chain{input_size};
  for_each_linear(extractor, [&](LayerKind kind, const Geometry& g) {
    chain.push_back(apply_size(kind, chain.back(), g));
  });
  return chain;
}

std::vector<int> size_chain(const NetworkSpec& spec, int input_size) {
  if (input_size < 1) throw GeometryError("input size must be positive");
  std::vector<int> chain{input_size};
  for (const LayerSpec& ls : spec.layers) {
    chain.push_back(apply_size(ls.kind, chain.back(), Geometry{ls.kernel, 1, 0}));
  }
  return chain;
}

int validate_geometry(const FeatureExtractor& extractor, int input_size) {
  return size_chain(extractor, input_size).back();
}

Tensor extract_features(const FeatureExtractor& extractor, const Tensor& patch) {
  if (patch.width() < patch.height()) {
    throw GeometryError("patch width must be at least its height");
  }
  const int rows = validate_geometry(extractor, patch.height());
  if (rows != 1) {
    throw GeometryError("patch height " + std::to_string(patch.height()) + " reduces to " +
                        std::to_string(rows) + " rows, expected 1");
  }
  validate_geometry(extractor, patch.width());
  return extractor.forward(patch);
}

std::vector<double> similarity_scores(std::span<const double> left, const Tensor& right) {
  if (right.height() != 1 || static_cast<std::size_t>(right.channels()) != left.size()) {
    throw ShapeError("similarity: expected a 1 x N x " + std::to_string(left.size()) +
                     " right output");
  }
  std::vector<double> r(static_cast<std::size_t>(right.width()), 0.0);
  for (int n = 0; n < right.width(); ++n) {
    const auto column = right.at(0, n);
    double s = 0.0;
    for (std::size_t c = 0; c < left.size(); ++c) s += left[c] * column[c];
    r[n] = s;
  }
  return r;
}

std::uint64_t count_parameters(const FeatureExtractor& extractor) {
  std::uint64_t total = 0;
  for (const Layer& layer : extractor.layers()) {
    std::visit(
        [&total](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_base_of_v<FilterBank, T>) {
            total += static_cast<std::uint64_t>(l.in_channels) * l.geometry.kernel *
                     l.geometry.kernel * l.out_channels;
            total += l.bias.size();
          } else if constexpr (std::is_same_v<T, BatchNorm>) {
            total += 2 * static_cast<std::uint64_t>(l.channels);
          }
        },
        layer);
  }
  return total;
}

}  // namespace adsm
