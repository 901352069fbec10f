#include "adsm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <type_traits>

namespace adsm {
namespace {

FeatureExtractor zeroed_copy(const FeatureExtractor& extractor) {
  FeatureExtractor copy = extractor;
  for (auto view : copy.parameters()) std::fill(view.begin(), view.end(), 0.0);
  return copy;
}

// Activations kept for the reverse pass: inputs[l][i] is the input of layer l for tensor i.
struct Trace {
  std::vector<std::vector<Tensor>> inputs;
  std::vector<BatchStatistics> stats;  // per layer; filled for BN layers in Batch mode
};

std::vector<Tensor> forward_all(const FeatureExtractor& extractor, std::vector<Tensor> batch,
                                NormMode mode, Trace* trace) {
  const auto& layers = extractor.layers();
  if (trace != nullptr) {
    trace->inputs.clear();
    trace->stats.assign(layers.size(), {});
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<Tensor> next;
    next.reserve(batch.size());
    if (const auto* bn = std::get_if<BatchNorm>(&layers[l]); bn != nullptr && mode == NormMode::Batch) {
      BatchStatistics stats = batch_statistics(batch);
      for (const Tensor& t : batch) next.push_back(batchnorm_apply(t, *bn, stats));
      if (trace != nullptr) trace->stats[l] = std::move(stats);
    } else {
      for (const Tensor& t : batch) {
        next.push_back(std::visit(
            [&t](const auto& layer) -> Tensor {
              using T = std::decay_t<decltype(layer)>;
              if constexpr (std::is_same_v<T, ConvLayer>) return conv_forward(t, layer);
              else if constexpr (std::is_same_v<T, DeconvLayer>) return deconv_forward(t, layer);
              else if constexpr (std::is_same_v<T, BatchNorm>) return batchnorm_forward(t, layer);
              else return relu_forward(t);
            },
            layers[l]));
      }
    }
    if (trace != nullptr) trace->inputs.push_back(std::move(batch));
    batch = std::move(next);
  }
  return batch;
}

std::vector<Tensor> stack_inputs(std::span<const TrainingSample> samples) {
  std::vector<Tensor> inputs;
  inputs.reserve(2 * samples.size());
  for (const auto& s : samples) inputs.push_back(s.left_patch);
  for (const auto& s : samples) inputs.push_back(s.right_strip);
  return inputs;
}

void check_outputs(const Tensor& left, const Tensor& right, const TrainingSample& sample) {
  if (left.height() != 1 || left.width() != 1) {
    throw GeometryError("left branch did not reduce to a single cell");
  }
  if (right.height() != 1 || static_cast<std::size_t>(right.width()) != sample.label.size()) {
    throw GeometryError("right branch width does not match the label length");
  }
}

// Reverse pass of the BN layer over the whole batch; returns input gradients.
std::vector<Tensor> batchnorm_backward(const std::vector<Tensor>& inputs,
                                       const std::vector<Tensor>& grad_out, const BatchNorm& bn,
                                       const BatchStatistics* batch_stats, BatchNorm& grad) {
  const int c = bn.channels;
  const bool batch_mode = batch_stats != nullptr;
  const std::vector<double>& mean = batch_mode ? batch_stats->mean : bn.running_mean;
  const std::vector<double>& var = batch_mode ? batch_stats->variance : bn.running_var;
  std::vector<double> inv_std(static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) inv_std[i] = 1.0 / std::sqrt(var[i] + bn.epsilon);

  std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0);
  std::vector<double> sum_dy_xhat(static_cast<std::size_t>(c), 0.0);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto x = inputs[t].values();
    auto dy = grad_out[t].values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int ch = static_cast<int>(i % c);
      const double xhat = (x[i] - mean[ch]) * inv_std[ch];
      sum_dy[ch] += dy[i];
      sum_dy_xhat[ch] += dy[i] * xhat;
    }
  }
  for (int i = 0; i < c; ++i) {
    grad.gamma[i] += sum_dy_xhat[i];
    grad.beta[i] += sum_dy[i];
  }

  std::vector<Tensor> grad_in;
  grad_in.reserve(inputs.size());
  const double n = batch_mode ? static_cast<double>(batch_stats->count) : 1.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    Tensor g(inputs[t].height(), inputs[t].width(), c);
    auto x = inputs[t].values();
    auto dy = grad_out[t].values();
    auto dx = g.values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const int ch = static_cast<int>(i % c);
      const double scale = bn.gamma[ch] * inv_std[ch];
      if (batch_mode) {
        const double xhat = (x[i] - mean[ch]) * inv_std[ch];
        dx[i] = scale / n * (n * dy[i] - sum_dy[ch] - xhat * sum_dy_xhat[ch]);
      } else {
        dx[i] = scale * dy[i];
      }
    }
    grad_in.push_back(std::move(g));
  }
  return grad_in;
}

struct HeadResult {
  double loss = 0.0;
  Tensor grad_left;
  Tensor grad_right;
};

// Dot-product head, softmax and clamped cross-entropy, with the exact gradient w.r.t. both
// branch outputs.
HeadResult head(const Tensor& left, const Tensor& right, const std::vector<double>& label,
                double scale) {
  const auto left_vec = left.at(0, 0);
  const std::vector<double> scores = similarity_scores(left_vec, right);
  const std::vector<double> p = softmax(scores);
  HeadResult out;
  out.loss = cross_entropy(p, label);

  // d/dr_k of -sum_j g_j ln p_j over entries above the clamp = p_k G - g_k.
  double active_mass = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] >= kLogClamp) active_mass += label[j];
  }
  std::vector<double> dr(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    dr[k] = scale * (p[k] * active_mass - (p[k] >= kLogClamp ? label[k] : 0.0));
  }
  const int c = left.channels();
  out.grad_left = Tensor(1, 1, c);
  out.grad_right = Tensor(1, right.width(), c);
  for (int n = 0; n < right.width(); ++n) {
    const auto column = right.at(0, n);
    for (int ch = 0; ch < c; ++ch) {
      out.grad_left(0, 0, ch) += dr[n] * column[ch];
      out.grad_right(0, n, ch) = dr[n] * left_vec[ch];
    }
  }
  return out;
}

}  // namespace

std::vector<double> make_label() {
  std::vector<double> label(kCandidateCount, 0.0);
  label[kCenterIndex] = 0.5;
  label[kCenterIndex - 1] = label[kCenterIndex + 1] = 0.2;
  label[kCenterIndex - 2] = label[kCenterIndex + 2] = 0.05;
  return label;
}

std::vector<double> softmax(std::span<const double> scores) {
  if (scores.empty()) return {};
  const double peak = *std::max_element(scores.begin(), scores.end());
  std::vector<double> p(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp(scores[i] - peak);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double cross_entropy(std::span<const double> probabilities, std::span<const double> ground_truth) {
  if (probabilities.size() != ground_truth.size()) {
    throw ShapeError("cross_entropy: vector lengths differ");
  }
  double loss = 0.0;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    if (ground_truth[j] != 0.0) {
      loss -= ground_truth[j] * std::log(std::max(probabilities[j], kLogClamp));
    }
  }
  return loss;
}

std::vector<PatchLocation> enumerate_patch_pairs(const StereoFrame& frame, int patch_size,
                                                 int frame_index) {
  const ImagePlane& left = frame.left;
  const ImagePlane& right = frame.right;
  const DisparityMap& gt = frame.ground_truth;
  if (left.width() != right.width() || left.height() != right.height() ||
      gt.width() != left.width() || gt.height() != left.height()) {
    throw ShapeError("left, right and ground truth must share one size");
  }
  if (patch_size < 1) throw GeometryError("patch size must be positive");
  const int half = patch_size / 2;
  const int strip = patch_size + kStripExtra;
  std::vector<PatchLocation> out;
  for (int y = half; y - half + patch_size <= left.height(); ++y) {
    for (int x = half; x - half + patch_size <= left.width(); ++x) {
      if (!gt.valid(x, y)) continue;
      const int d = static_cast<int>(std::lround(gt.disparity(x, y)));
      const int strip_x0 = x - d - half - kCenterIndex;
      if (strip_x0 < 0 || strip_x0 + strip > right.width()) continue;
      out.push_back({frame_index, x, y, d});
    }
  }
  return out;
}

TrainingSample make_sample(const StereoFrame& frame, const PatchLocation& loc, int patch_size) {
  const int half = patch_size / 2;
  TrainingSample s;
  s.left_patch = crop_to_tensor(frame.left, loc.x - half, loc.y - half, patch_size, patch_size);
  s.right_strip = crop_to_tensor(frame.right, loc.x - loc.disparity - half - kCenterIndex,
                                 loc.y - half, patch_size + kStripExtra, patch_size);
  s.label = make_label();
  return s;
}

std::vector<TrainingSample> generate_patch_pairs(const ImagePlane& left, const ImagePlane& right,
                                                 const DisparityMap& ground_truth, int patch_size) {
  const StereoFrame frame{left, right, ground_truth};
  std::vector<TrainingSample> out;
  for (const PatchLocation& loc : enumerate_patch_pairs(frame, patch_size)) {
    out.push_back(make_sample(frame, loc, patch_size));
  }
  return out;
}

FramePatchSource::FramePatchSource(std::vector<StereoFrame> frames, int patch_size)
    : frames_(std::move(frames)), patch_size_(patch_size) {
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    auto locs = enumerate_patch_pairs(frames_[i], patch_size, static_cast<int>(i));
    locations_.insert(locations_.end(), locs.begin(), locs.end());
  }
}

TrainingSample FramePatchSource::sample(std::size_t index) const {
  const PatchLocation& loc = locations_.at(index);
  return make_sample(frames_[static_cast<std::size_t>(loc.frame)], loc, patch_size_);
}

Gradients zero_gradients(const FeatureExtractor& extractor) { return {zeroed_copy(extractor)}; }

LossReport evaluate_sample(const FeatureExtractor& extractor, const TrainingSample& sample) {
  const Tensor left = extractor.forward(sample.left_patch);
  const Tensor right = extractor.forward(sample.right_strip);
  check_outputs(left, right, sample);
  LossReport report;
  report.probabilities = softmax(similarity_scores(left.at(0, 0), right));
  report.loss = cross_entropy(report.probabilities, sample.label);
  return report;
}

BatchPass forward_backward(const FeatureExtractor& extractor, std::span<const TrainingSample> batch,
                           NormMode mode, bool average) {
  if (batch.empty()) throw ShapeError("empty minibatch");
  const std::size_t b = batch.size();
  Trace trace;
  std::vector<Tensor> outputs = forward_all(extractor, stack_inputs(batch), mode, &trace);

  const double scale = average ? 1.0 / static_cast<double>(b) : 1.0;
  BatchPass pass;
  pass.gradients = zero_gradients(extractor);
  std::vector<Tensor> grads(2 * b);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    check_outputs(outputs[i], outputs[b + i], batch[i]);
    HeadResult h = head(outputs[i], outputs[b + i], batch[i].label, scale);
    total += h.loss;
    grads[i] = std::move(h.grad_left);
    grads[b + i] = std::move(h.grad_right);
  }
  pass.loss = total / static_cast<double>(b);

  const auto& layers = extractor.layers();
  auto& grad_layers = pass.gradients.buffer.layers();
  for (std::size_t l = layers.size(); l-- > 0;) {
    const std::vector<Tensor>& inputs = trace.inputs[l];
    if (const auto* bn = std::get_if<BatchNorm>(&layers[l])) {
      const BatchStatistics* stats = mode == NormMode::Batch ? &trace.stats[l] : nullptr;
      grads = batchnorm_backward(inputs, grads, *bn, stats, std::get<BatchNorm>(grad_layers[l]));
      continue;
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      grads[i] = std::visit(
          [&](const auto& layer) -> Tensor {
            using T = std::decay_t<decltype(layer)>;
            if constexpr (std::is_same_v<T, ConvLayer>) {
              return conv_backward(inputs[i], layer, grads[i], std::get<ConvLayer>(grad_layers[l]));
            } else if constexpr (std::is_same_v<T, DeconvLayer>) {
              return deconv_backward(inputs[i], layer, grads[i],
                                     std::get<DeconvLayer>(grad_layers[l]));
            } else if constexpr (std::is_same_v<T, ReLU>) {
              return relu_backward(inputs[i], grads[i]);
            } else {
              return grads[i];
            }
          },
          layers[l]);
    }
  }

  if (mode == NormMode::Batch) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (std::holds_alternative<BatchNorm>(layers[l])) pass.norm_stats.push_back(trace.stats[l]);
    }
  }
  return pass;
}

double batch_loss(const FeatureExtractor& extractor, std::span<const TrainingSample> batch,
                  NormMode mode) {
  if (batch.empty()) throw ShapeError("empty minibatch");
  const std::size_t b = batch.size();
  const std::vector<Tensor> outputs = forward_all(extractor, stack_inputs(batch), mode, nullptr);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    check_outputs(outputs[i], outputs[b + i], batch[i]);
    total += cross_entropy(softmax(similarity_scores(outputs[i].at(0, 0), outputs[b + i])),
                           batch[i].label);
  }
  return total / static_cast<double>(b);
}

Gradients backward(const TrainingSample& sample, const FeatureExtractor& extractor, NormMode mode) {
  return forward_backward(extractor, std::span<const TrainingSample>(&sample, 1), mode, false)
      .gradients;
}

TrainingResult train(const SampleSource& dataset, FeatureExtractor& extractor,
                     const TrainerConfig& config, const IterationCallback& on_iteration) {
  if (dataset.size() == 0) throw Error("training dataset is empty");
  if (config.batch_size < 1) throw Error("batch size must be >= 1");
  if (config.iterations < 1) throw Error("iteration count must be >= 1");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::vector<std::vector<double>> velocity;
  for (auto view : extractor.parameters()) velocity.emplace_back(view.size(), 0.0);

  const auto batch_size = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size),
                                                dataset.size());
  // The rate drops once decay_at of the iterations have completed.
  const double decay_after = config.decay_at * config.iterations;

  TrainingResult result;
  result.loss_trace.reserve(static_cast<std::size_t>(config.iterations));
  std::vector<TrainingSample> batch;
  for (int it = 0; it < config.iterations; ++it) {
    batch.clear();
    while (batch.size() < batch_size) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(dataset.sample(order[cursor++]));
    }

    BatchPass pass = forward_backward(extractor, batch, config.norm_mode, true);
    result.loss_trace.push_back(pass.loss);

    const double rate =
        it >= decay_after ? config.learning_rate * config.decay_factor : config.learning_rate;
    auto params = extractor.parameters();
    auto grads = pass.gradients.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p].size(); ++i) {
        velocity[p][i] = config.momentum * velocity[p][i] + grads[p][i];
        params[p][i] -= rate * velocity[p][i];
      }
    }
    std::size_t norm_index = 0;
    for (Layer& layer : extractor.layers()) {
      if (auto* bn = std::get_if<BatchNorm>(&layer); bn != nullptr && !pass.norm_stats.empty()) {
        update_running_statistics(*bn, pass.norm_stats[norm_index++]);
      }
    }
    if (on_iteration) on_iteration(it, pass.loss, extractor);
  }
  return result;
}

std::vector<double> moving_average(std::span<const double> values, int window) {
  if (window < 1) throw Error("moving-average window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<std::size_t>(window)) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min<std::size_t>(i + 1, window));
  }
  return out;
}

int predicted_candidate(const FeatureExtractor& extractor, const TrainingSample& sample) {
  const Tensor left = extractor.forward(sample.left_patch);
  const Tensor right = extractor.forward(sample.right_strip);
  const std::vector<double> r = similarity_scores(left.at(0, 0), right);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
}

FrameSplit split_frames(std::size_t frame_count, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(frame_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::lround(train_fraction * frame_count));
  FrameSplit split;
  split.train.assign(order.begin(), order.begin() + std::min(n_train, frame_count));
  split.validation.assign(order.begin() + std::min(n_train, frame_count), order.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace adsm
