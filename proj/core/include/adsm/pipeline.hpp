#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adsm/cost_volume.hpp"
#include "adsm/errors.hpp"
#include "adsm/evaluation.hpp"
#include "adsm/imaging.hpp"
#include "adsm/network.hpp"
#include "adsm/sgm.hpp"
#include "adsm/training.hpp"

namespace adsm {

enum class CostSource { Census, Sad, Learned };

CostSource parse_cost_source(std::string_view name);
std::string_view to_string(CostSource source);

struct PipelineConfig {
  CostSource cost = CostSource::Census;
  std::filesystem::path weights;  // required for the learned cost
  int max_disparity = 127;
  Penalties penalties;
  double consistency_threshold = 1.0;
  bool subpixel = true;
  bool fill = true;
  int census_window = 7;
  int sad_window = 5;
  std::optional<std::filesystem::path> dsi_dump;

  /// Throws DomainError / GeometryError for inconsistent settings.
  void validate() const;
};

/// Failure inside one named stage of the matching pipeline.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct MatchResult {
  DisparityMap disparity;  // full image size
  CostVolume raw_costs;    // before aggregation
  std::vector<StageTiming> timings;
};

/// Runs cost -> aggregation -> WTA -> subpixel -> right view -> consistency -> fill -> pad.
/// `extractor` is required for the learned cost and ignored otherwise.
MatchResult match(const ImagePlane& left, const ImagePlane& right, const PipelineConfig& config,
                  const FeatureExtractor* extractor = nullptr);

/// File-level matching: reads both views, writes a 16-bit disparity PNG (and the DSI dump when
/// configured). Outputs appear only once every stage has succeeded.
MatchResult match_images(const std::filesystem::path& left_path,
                         const std::filesystem::path& right_path,
                         const std::filesystem::path& output_path, const PipelineConfig& config,
                         std::ostream* log = nullptr);

struct ManifestEntry {
  std::filesystem::path left;
  std::filesystem::path right;
  std::filesystem::path ground_truth;
};

/// One "left right ground_truth" triple per line; '#' starts a comment; relative paths resolve
/// against the manifest's directory. Throws on empty manifests and missing files.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

StereoFrame load_frame(const ManifestEntry& entry);

struct TrainingOptions {
  std::string network = "37-1Deconv(5)&4Conv";
  int channels = kDefaultChannels;
  TrainerConfig trainer;
  double train_fraction = 0.75;
  int checkpoint_interval = 0;  // 0 disables checkpoints
  int validation_samples = 1000;
  std::filesystem::path weights_out = "weights.adsm";
  std::optional<std::filesystem::path> loss_csv;
};

struct TrainingSummary {
  std::vector<double> loss_trace;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  double validation_loss = 0.0;
  double validation_top1 = 0.0;  // fraction of samples ranked exactly at the true position
};

TrainingSummary run_training(const std::filesystem::path& manifest_path,
                             const TrainingOptions& options, std::ostream* log = nullptr);

struct InspectReport {
  std::string name;
  int input_size = 0;
  std::vector<int> sizes;        // input size followed by each linear layer's output
  std::vector<std::string> layer_labels;
  std::uint64_t parameters = 0;
  bool geometry_ok = false;      // chain ends in a 1x1 output
};

InspectReport inspect(std::string_view network_config, int channels = kDefaultChannels,
                      int default_patch = 37);
void print_inspect_report(std::ostream& out, const InspectReport& report);

/// Compares estimate and ground truth PNGs. Both paths are files, or both are directories whose
/// same-named PNGs are paired. Counts accumulate across pairs.
ErrorReport evaluate_paths(const std::filesystem::path& estimate,
                           const std::filesystem::path& ground_truth,
                           const std::vector<double>& thresholds = kDefaultThresholds);

/// Writes through a sibling temporary file and renames it into place.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(const std::filesystem::path&)>& writer);

}  // namespace adsm
