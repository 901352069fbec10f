#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <type_traits>

#include "adsm/network.hpp"

namespace adsm {
namespace {

static_assert(std::endian::native == std::endian::little,
              "weights I/O assumes a little-endian host");

constexpr char kMagic[4] = {'A', 'D', 'S', 'M'};

struct RecordHeader {
  LayerKind kind;
  std::uint32_t kernel = 0;
  std::uint32_t stride = 0;
  std::uint32_t padding = 0;
  std::uint32_t in_channels = 0;
  std::uint32_t out_channels = 0;
  std::uint32_t bias_count = 0;
};

void put_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_floats(std::ostream& out, const std::vector<double>& values) {
  for (double v : values) {
    const float f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
  }
}

void put_float(std::ostream& out, double v) { put_floats(out, {v}); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated weights file");
  return v;
}

double get_float(std::istream& in) {
  float f = 0;
  if (!in.read(reinterpret_cast<char*>(&f), sizeof f)) throw IoError("truncated weights file");
  return f;
}

void get_floats(std::istream& in, std::vector<double>& values) {
  for (double& v : values) v = get_float(in);
}

void put_header(std::ostream& out, const RecordHeader& h) {
  out.put(static_cast<char>(h.kind));
  for (std::uint32_t v : {h.kernel, h.stride, h.padding, h.in_channels, h.out_channels, h.bias_count}) {
    put_u32(out, v);
  }
}

RecordHeader filter_header(LayerKind kind, const FilterBank& f) {
  return {kind,
          static_cast<std::uint32_t>(f.geometry.kernel),
          static_cast<std::uint32_t>(f.geometry.stride),
          static_cast<std::uint32_t>(f.geometry.padding),
          static_cast<std::uint32_t>(f.in_channels),
          static_cast<std::uint32_t>(f.out_channels),
          static_cast<std::uint32_t>(f.bias.size())};
}

FilterBank read_filter(std::istream& in, const RecordHeader& h) {
  constexpr std::uint32_t kLimit = 1u << 16;
  if (h.kernel == 0 || h.stride == 0 || h.in_channels == 0 || h.out_channels == 0 ||
      h.kernel > kLimit || h.in_channels > kLimit || h.out_channels > kLimit) {
    throw IoError("weights file: implausible layer header");
  }
  if (h.bias_count != 0 && h.bias_count != h.out_channels) {
    throw IoError("weights file: bias count does not match output channels");
  }
  FilterBank f(Geometry{static_cast<int>(h.kernel), static_cast<int>(h.stride),
                        static_cast<int>(h.padding)},
               static_cast<int>(h.in_channels), static_cast<int>(h.out_channels),
               h.bias_count != 0);
  get_floats(in, f.weights);
  get_floats(in, f.bias);
  return f;
}

}  // namespace

void save_weights(std::ostream& out, const FeatureExtractor& extractor) {
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(extractor.layers().size()));
  int channels = extractor.input_channels();
  for (const Layer& layer : extractor.layers()) {
    std::visit(
        [&](const auto& l) {
          using T = std::decay_t<decltype(l)>;
          if constexpr (std::is_base_of_v<FilterBank, T>) {
            const LayerKind kind =
                std::is_same_v<T, ConvLayer> ? LayerKind::Conv : LayerKind::Deconv;
            put_header(out, filter_header(kind, l));
            put_floats(out, l.weights);
            put_floats(out, l.bias);
            channels = l.out_channels;
          } else if constexpr (std::is_same_v<T, BatchNorm>) {
            const auto c = static_cast<std::uint32_t>(l.channels);
            put_header(out, {LayerKind::BatchNorm, 0, 0, 0, c, c, 0});
            put_floats(out, l.gamma);
            put_floats(out, l.beta);
            put_floats(out, l.running_mean);
            put_floats(out, l.running_var);
            put_float(out, l.epsilon);
            put_float(out, l.momentum);
          } else {
            const auto c = static_cast<std::uint32_t>(channels);
            put_header(out, {LayerKind::ReLU, 0, 0, 0, c, c, 0});
          }
        },
        layer);
  }
  if (!out) throw IoError("failed writing weights");
}

FeatureExtractor load_weights(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw IoError("not an ADSM weights file");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kWeightsVersion) {
    throw IoError("unsupported weights version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(in);
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < count; ++i) {
    const int tag = in.get();
    if (tag == std::char_traits<char>::eof()) throw IoError("truncated weights file");
    RecordHeader h{static_cast<LayerKind>(tag)};
    h.kernel = get_u32(in);
    h.stride = get_u32(in);
    h.padding = get_u32(in);
    h.in_channels = get_u32(in);
    h.out_channels = get_u32(in);
    h.bias_count = get_u32(in);
    switch (h.kind) {
      case LayerKind::Conv: {
        ConvLayer c;
        static_cast<FilterBank&>(c) = read_filter(in, h);
        layers.emplace_back(std::move(c));
        break;
      }
      case LayerKind::Deconv: {
        DeconvLayer d;
        static_cast<FilterBank&>(d) = read_filter(in, h);
        layers.emplace_back(std::move(d));
        break;
      }
      case LayerKind::BatchNorm: {
        if (h.in_channels == 0 || h.in_channels > (1u << 16)) {
          throw IoError("weights file: implausible batch-norm width");
        }
        BatchNorm bn(static_cast<int>(h.in_channels));
        get_floats(in, bn.gamma);
        get_floats(in, bn.beta);
        get_floats(in, bn.running_mean);
        get_floats(in, bn.running_var);
        bn.epsilon = get_float(in);
        bn.momentum = get_float(in);
        layers.emplace_back(std::move(bn));
        break;
      }
      case LayerKind::ReLU:
        layers.emplace_back(ReLU{static_cast<int>(h.in_channels)});
        break;
      default:
        throw IoError("weights file: unknown layer tag " + std::to_string(tag));
    }
  }
  return FeatureExtractor(std::move(layers));
}

void save_weights(const std::filesystem::path& path, const FeatureExtractor& extractor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_weights(out, extractor);
}

FeatureExtractor load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file " + path.string());
  return load_weights(in);
}

}  // namespace adsm
