#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "adsm/imaging.hpp"
#include "adsm/network.hpp"

namespace adsm {

/// Candidate positions scored per left patch (q-100 ... q+100).
inline constexpr int kCandidateCount = 201;
/// Index of the true match inside the candidate vector.
inline constexpr int kCenterIndex = 100;
/// Extra columns of the right strip beyond the patch width.
inline constexpr int kStripExtra = kCandidateCount - 1;
/// Floor applied to probabilities before taking the log.
inline constexpr double kLogClamp = 1e-12;

struct TrainingSample {
  Tensor left_patch;           // H x W x 1
  Tensor right_strip;          // H x (W + 200) x 1
  std::vector<double> label;   // 201 entries, smoothed around index 100
};

struct StereoFrame {
  ImagePlane left;
  ImagePlane right;
  DisparityMap ground_truth;
};

/// Pixel whose left window and right strip both fit inside their images.
struct PatchLocation {
  int frame = 0;
  int x = 0;
  int y = 0;
  int disparity = 0;  // rounded ground truth
};

/// 0.5 at index 100, 0.2 at 99/101, 0.05 at 98/102, zero elsewhere.
std::vector<double> make_label();

/// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> scores);

/// -sum_j gt_j ln(max(p_j, 1e-12)).
double cross_entropy(std::span<const double> probabilities, std::span<const double> ground_truth);

/// Every valid-ground-truth pixel of `frame` whose windows fit, in row-major order.
std::vector<PatchLocation> enumerate_patch_pairs(const StereoFrame& frame, int patch_size,
                                                 int frame_index = 0);

TrainingSample make_sample(const StereoFrame& frame, const PatchLocation& location, int patch_size);

/// All patch pairs of one rectified frame, materialized.
std::vector<TrainingSample> generate_patch_pairs(const ImagePlane& left, const ImagePlane& right,
                                                 const DisparityMap& ground_truth, int patch_size);

/// Random-access view over training samples.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual TrainingSample sample(std::size_t index) const = 0;
};

class SampleVector final : public SampleSource {
 public:
  explicit SampleVector(std::vector<TrainingSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  TrainingSample sample(std::size_t index) const override { return samples_.at(index); }
  const std::vector<TrainingSample>& samples() const { return samples_; }

 private:
  std::vector<TrainingSample> samples_;
};

/// Cuts samples on demand from whole frames, so full-size datasets never sit in memory as
/// patches.
class FramePatchSource final : public SampleSource {
 public:
  FramePatchSource(std::vector<StereoFrame> frames, int patch_size);
  std::size_t size() const override { return locations_.size(); }
  TrainingSample sample(std::size_t index) const override;
  int patch_size() const { return patch_size_; }

 private:
  std::vector<StereoFrame> frames_;
  std::vector<PatchLocation> locations_;
  int patch_size_;
};

enum class NormMode {
  Inference,  // BN uses running statistics
  Batch,      // BN uses statistics pooled over the whole minibatch, both branches
};

/// Learnable-parameter gradients, laid out like the extractor they belong to.
struct Gradients {
  FeatureExtractor buffer;
  std::vector<std::span<double>> parameters() { return buffer.parameters(); }
  std::vector<std::span<const double>> parameters() const { return buffer.parameters(); }
};

Gradients zero_gradients(const FeatureExtractor& extractor);

struct LossReport {
  double loss = 0.0;
  std::vector<double> probabilities;
};

/// Inference-mode loss of one sample.
LossReport evaluate_sample(const FeatureExtractor& extractor, const TrainingSample& sample);

struct BatchPass {
  double loss = 0.0;                          // mean over samples
  Gradients gradients;                        // of the mean (or sum) loss
  std::vector<BatchStatistics> norm_stats;    // one per BN layer, Batch mode only
};

/// Forward + reverse pass over a minibatch.
BatchPass forward_backward(const FeatureExtractor& extractor, std::span<const TrainingSample> batch,
                           NormMode mode, bool average = true);

/// Mean loss only; used by finite-difference checks.
double batch_loss(const FeatureExtractor& extractor, std::span<const TrainingSample> batch,
                  NormMode mode);

/// Exact gradient of the single-sample loss.
Gradients backward(const TrainingSample& sample, const FeatureExtractor& extractor,
                   NormMode mode = NormMode::Inference);

struct TrainerConfig {
  int batch_size = 128;
  int iterations = 40000;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double decay_at = 0.75;     // fraction of iterations after which the rate is scaled
  double decay_factor = 0.1;
  std::uint64_t seed = 1;
  NormMode norm_mode = NormMode::Batch;
};

struct TrainingResult {
  std::vector<double> loss_trace;  // one mean minibatch loss per iteration
};

using IterationCallback =
    std::function<void(int iteration, double loss, const FeatureExtractor& extractor)>;

/// Minibatch SGD with momentum; deterministic for a given seed.
TrainingResult train(const SampleSource& dataset, FeatureExtractor& extractor,
                     const TrainerConfig& config, const IterationCallback& on_iteration = {});

/// Trailing moving average with the given window (shorter at the start).
std::vector<double> moving_average(std::span<const double> values, int window);

/// Index of the highest-scoring candidate for a sample (100 is the true match).
int predicted_candidate(const FeatureExtractor& extractor, const TrainingSample& sample);

struct FrameSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded random split of frame indices, `train_fraction` of them (rounded) for training.
FrameSplit split_frames(std::size_t frame_count, double train_fraction, std::uint64_t seed);

}  // namespace adsm
