#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adsm/layers.hpp"

namespace adsm {

inline constexpr int kDefaultChannels = 64;

enum class LayerKind : std::uint8_t { Conv = 1, Deconv = 2, BatchNorm = 3, ReLU = 4 };

/// One linear stage of a network description, before weights exist.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;  // Conv or Deconv
  int kernel = 1;
  bool batch_norm = false;
  bool relu = false;

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  std::string name;
  std::vector<LayerSpec> layers;
  std::optional<int> patch_size;  // set by "@N" suffixes and "N-" preset prefixes
};

/// Parses either a named preset ("37-4Conv", "4Conv@37", "37-1Deconv(5)&4Conv", ...) or the
/// stage grammar
///   network := stage ("&" stage)* ["@" PATCH]
///   stage   := COUNT "Deconv(" K ")" | COUNT "Conv(" K ")"
/// Grammar networks put BN after every deconv, BN+ReLU after every conv, nothing after the last.
NetworkSpec parse_network_config(std::string_view text);

/// Names of the built-in presets from the configuration tables.
std::vector<std::string> preset_names();

/// Siamese branch: an ordered stack of conv / deconv / batch-norm / ReLU layers. Both branches
/// share this one object.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  explicit FeatureExtractor(std::vector<Layer> layers);

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  bool empty() const { return layers_.empty(); }

  int input_channels() const;
  int output_channels() const;

  /// Spatial input size for which the stack ends in a single cell, assuming every layer has
  /// stride 1 and padding 0. Throws GeometryError otherwise.
  int patch_size() const;

  /// Inference forward pass (BN uses running statistics).
  Tensor forward(const Tensor& x) const;

  /// Views of every learnable array in canonical order: per layer weights, bias, gamma, beta.
  std::vector<std::span<double>> parameters();
  std::vector<std::span<const double>> parameters() const;

 private:
  std::vector<Layer> layers_;
};

/// Builds weights for `spec`: uniform in +-sqrt(6 / (fan_in + fan_out)), zero bias, unit BN.
FeatureExtractor build_network(const NetworkSpec& spec, int channels = kDefaultChannels,
                               std::uint64_t seed = 1);
FeatureExtractor build_network(std::string_view config, int channels = kDefaultChannels,
                               std::uint64_t seed = 1);

/// Spatial size after each linear layer, starting with the input; throws GeometryError on any
/// non-positive or non-integral intermediate size.
std::vector<int> size_chain(const FeatureExtractor& extractor, int input_size);
std::vector<int> size_chain(const NetworkSpec& spec, int input_size);

/// Final spatial size of a square input of side `input_size`.
int validate_geometry(const FeatureExtractor& extractor, int input_size);

/// Runs one branch; a W x H patch gives 1 x 1 x C, a (W+200) x H strip gives 1 x 201 x C.
Tensor extract_features(const FeatureExtractor& extractor, const Tensor& patch);

/// r_n = <left, right[n]> for every column n of a 1 x N x C right output.
std::vector<double> similarity_scores(std::span<const double> left, const Tensor& right);

/// Conv/deconv: in * k * k * out, plus out when no BN follows; BN: 2 * channels.
std::uint64_t count_parameters(const FeatureExtractor& extractor);

// Weights file: "ADSM", u32 version, u32 record count, then per record a type byte and six u32
// fields (k, s, p, in, out, bias count) followed by little-endian float32 payload.
inline constexpr std::uint32_t kWeightsVersion = 1;

void save_weights(std::ostream& out, const FeatureExtractor& extractor);
FeatureExtractor load_weights(std::istream& in);
void save_weights(const std::filesystem::path& path, const FeatureExtractor& extractor);
FeatureExtractor load_weights(const std::filesystem::path& path);

}  // namespace adsm
