#include "adsm/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "adsm/disparity.hpp"
#include "adsm/png_io.hpp"

namespace adsm {
namespace fs = std::filesystem;

CostSource parse_cost_source(std::string_view name) {
  if (name == "census") return CostSource::Census;
  if (name == "sad") return CostSource::Sad;
  if (name == "learned") return CostSource::Learned;
  throw ParseError("unknown cost source '" + std::string(name) + "'");
}

std::string_view to_string(CostSource source) {
  switch (source) {
    case CostSource::Census: return "census";
    case CostSource::Sad: return "sad";
    case CostSource::Learned: return "learned";
  }
  return "?";
}

void PipelineConfig::validate() const {
  if (max_disparity < 1) throw DomainError("maximum disparity must be at least 1");
  adsm::validate(penalties);
  if (!(consistency_threshold >= 0.0)) {
    throw DomainError("consistency threshold must be non-negative");
  }
  if (cost == CostSource::Learned && weights.empty()) {
    throw DomainError("the learned cost needs a weights file");
  }
  if (cost == CostSource::Census && (census_window < 3 || census_window % 2 == 0)) {
    throw GeometryError("census window must be odd and at least 3");
  }
  if (cost == CostSource::Sad && (sad_window < 1 || sad_window % 2 == 0)) {
    throw GeometryError("SAD window must be odd and positive");
  }
}

namespace {

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <class F>
  auto run(const std::string& stage, F&& body) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(body())>) {
        body();
        record(stage, start);
      } else {
        auto result = body();
        record(stage, start);
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(stage, e.what());
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    sink_.push_back({stage, elapsed.count()});
  }

  std::vector<StageTiming>& sink_;
};

}  // namespace

MatchResult match(const ImagePlane& left, const ImagePlane& right, const PipelineConfig& config,
                  const FeatureExtractor* extractor) {
  config.validate();
  if (left.width() != right.width() || left.height() != right.height()) {
    throw StageError("load", "left and right images differ in size");
  }
  MatchResult result;
  StageClock clock(result.timings);

  result.raw_costs = clock.run("cost", [&] {
    switch (config.cost) {
      case CostSource::Census:
        return build_dsi_census(left, right, config.census_window, config.max_disparity);
      case CostSource::Sad:
        return build_dsi_sad(left, right, config.sad_window, config.max_disparity);
      case CostSource::Learned:
        if (extractor == nullptr) throw DomainError("learned cost requested without a network");
        return build_dsi_learned(left, right, *extractor, config.max_disparity);
    }
    throw DomainError("unknown cost source");
  });

  const CostVolume aggregated =
      clock.run("aggregate", [&] { return aggregate_all(result.raw_costs, config.penalties); });

  DisparityMap left_map = clock.run("wta", [&] { return wta(aggregated); });
  if (config.subpixel) {
    left_map = clock.run("subpixel", [&] { return subpixel_refine(aggregated, left_map); });
  }
  const DisparityMap right_map = clock.run("right_view", [&] {
    const CostVolume right_volume = derive_right_dsi(aggregated);
    DisparityMap m = wta(right_volume);
    return config.subpixel ? subpixel_refine(right_volume, m) : m;
  });
  const ValidityMask consistent = clock.run("consistency", [&] {
    return consistency_check(left_map, right_map, config.consistency_threshold);
  });
  DisparityMap cleaned = clock.run("fill", [&] {
    if (config.fill) return fill_invalid(left_map, consistent);
    DisparityMap m = left_map;
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (!consistent(x, y)) m.invalidate(x, y);
      }
    }
    return m;
  });
  result.disparity = clock.run(
      "pad", [&] { return pad_to_full(cleaned, left.width(), left.height()); });
  return result;
}

void write_atomically(const fs::path& path, const std::function<void(const fs::path&)>& writer) {
  fs::path tmp = path;
  tmp += ".partial";
  try {
    writer(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw;
  }
}

namespace {

ImagePlane load_view(const fs::path& path) {
  try {
    return normalize(read_png8(path));
  } catch (const std::exception& e) {
    throw StageError("load", e.what());
  }
}

}  // namespace

MatchResult match_images(const fs::path& left_path, const fs::path& right_path,
                         const fs::path& output_path, const PipelineConfig& config,
                         std::ostream* log) {
  try {
    config.validate();
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  std::optional<FeatureExtractor> extractor;
  if (config.cost == CostSource::Learned) {
    try {
      extractor = load_weights(config.weights);
    } catch (const std::exception& e) {
      throw StageError("weights", e.what());
    }
  }
  const ImagePlane left = load_view(left_path);
  const ImagePlane right = load_view(right_path);

  MatchResult result = match(left, right, config, extractor ? &*extractor : nullptr);

  StageClock clock(result.timings);
  const Image16 encoded = clock.run("encode", [&] { return encode_kitti_disparity(result.disparity); });
  clock.run("write", [&] {
    if (config.dsi_dump) {
      write_atomically(*config.dsi_dump, [&](const fs::path& p) { write_dsi(p, result.raw_costs); });
    }
    write_atomically(output_path, [&](const fs::path& p) { write_png16(p, encoded); });
  });

  if (log != nullptr) {
    double total = 0.0;
    for (const StageTiming& t : result.timings) {
      *log << std::left << std::setw(12) << t.stage << std::right << std::fixed
           << std::setprecision(3) << t.seconds << " s\n";
      total += t.seconds;
    }
    *log << std::left << std::setw(12) << "total" << std::right << total << " s\n"
         << std::defaultfloat;
  }
  return result;
}

std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path candidate(p);
    return candidate.is_absolute() ? candidate : base / candidate;
  };
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.empty()) continue;
    if (parts.size() != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 'left right ground_truth'");
    }
    ManifestEntry e{resolve(parts[0]), resolve(parts[1]), resolve(parts[2])};
    for (const fs::path& p : {e.left, e.right, e.ground_truth}) {
      if (!fs::is_regular_file(p)) throw IoError("missing file " + p.string());
    }
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw ParseError("manifest " + path.string() + " lists no frames");
  return entries;
}

StereoFrame load_frame(const ManifestEntry& entry) {
  StereoFrame frame{normalize(read_png8(entry.left)), normalize(read_png8(entry.right)),
                    read_kitti_disparity(entry.ground_truth)};
  if (frame.left.width() != frame.right.width() || frame.left.height() != frame.right.height() ||
      frame.left.width() != frame.ground_truth.width() ||
      frame.left.height() != frame.ground_truth.height()) {
    throw ShapeError("frame " + entry.left.string() + " has mismatched image sizes");
  }
  return frame;
}

TrainingSummary run_training(const fs::path& manifest_path, const TrainingOptions& options,
                             std::ostream* log) {
  // Everything that can fail on input is checked before the first iteration.
  const std::vector<ManifestEntry> entries = read_manifest(manifest_path);
  const NetworkSpec spec = parse_network_config(options.network);
  FeatureExtractor extractor = build_network(spec, options.channels, options.trainer.seed);
  const int patch = extractor.patch_size();
  if (spec.patch_size && *spec.patch_size != patch) {
    throw GeometryError("network does not reduce a " + std::to_string(*spec.patch_size) +
                        " patch to 1x1");
  }
  if (options.trainer.batch_size < 1 || options.trainer.iterations < 1) {
    throw DomainError("batch size and iteration count must be positive");
  }

  std::vector<StereoFrame> frames;
  frames.reserve(entries.size());
  for (const ManifestEntry& e : entries) frames.push_back(load_frame(e));

  const FrameSplit split = split_frames(frames.size(), options.train_fraction, options.trainer.seed);
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<StereoFrame> out;
    for (std::size_t i : idx) out.push_back(frames[i]);
    return out;
  };
  const FramePatchSource train_set(pick(split.train), patch);
  const FramePatchSource validation_set(pick(split.validation), patch);
  if (train_set.size() == 0) throw DomainError("training frames yield no patch pairs");

  TrainingSummary summary;
  summary.train_samples = train_set.size();
  summary.validation_samples = validation_set.size();

  const int report_every = std::max(1, options.trainer.iterations / 20);
  auto on_iteration = [&](int it, double loss, const FeatureExtractor& current) {
    const int done = it + 1;
    if (log != nullptr && (done % report_every == 0 || done == options.trainer.iterations)) {
      *log << "iteration " << done << " loss " << loss << '\n';
    }
    if (options.checkpoint_interval > 0 && done % options.checkpoint_interval == 0 &&
        done != options.trainer.iterations) {
      fs::path ckpt = options.weights_out;
      ckpt += ".iter" + std::to_string(done);
      write_atomically(ckpt, [&](const fs::path& p) { save_weights(p, current); });
    }
  };
  summary.loss_trace = train(train_set, extractor, options.trainer, on_iteration).loss_trace;

  write_atomically(options.weights_out, [&](const fs::path& p) { save_weights(p, extractor); });

  if (options.loss_csv) {
    const std::vector<double> smooth = moving_average(summary.loss_trace, 100);
    write_atomically(*options.loss_csv, [&](const fs::path& p) {
      std::ofstream out(p);
      out << "iteration,loss,smoothed_loss\n" << std::setprecision(9);
      for (std::size_t i = 0; i < summary.loss_trace.size(); ++i) {
        out << i + 1 << ',' << summary.loss_trace[i] << ',' << smooth[i] << '\n';
      }
      if (!out) throw IoError("failed writing " + p.string());
    });
  }

  const std::size_t n_val =
      std::min(validation_set.size(), static_cast<std::size_t>(std::max(0, options.validation_samples)));
  if (n_val > 0) {
    // Evenly spaced samples keep the estimate deterministic and cheap.
    double loss = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n_val; ++i) {
      const TrainingSample s = validation_set.sample(i * validation_set.size() / n_val);
      const LossReport r = evaluate_sample(extractor, s);
      loss += r.loss;
      const auto best = std::max_element(r.probabilities.begin(), r.probabilities.end());
      if (best - r.probabilities.begin() == kCenterIndex) ++hits;
    }
    summary.validation_loss = loss / static_cast<double>(n_val);
    summary.validation_top1 = static_cast<double>(hits) / static_cast<double>(n_val);
  }
  return summary;
}

InspectReport inspect(std::string_view network_config, int channels, int default_patch) {
  const NetworkSpec spec = parse_network_config(network_config);
  InspectReport report;
  report.name = spec.name;
  report.input_size = spec.patch_size.value_or(default_patch);
  report.sizes.push_back(report.input_size);
  bool ok = true;
  for (const LayerSpec& layer : spec.layers) {
    const bool deconv = layer.kind == LayerKind::Deconv;
    report.layer_labels.push_back((deconv ? "Deconv(" : "Conv(") + std::to_string(layer.kernel) +
                                  ")");
    if (!ok) continue;
    const int in = report.sizes.back();
    const int out = deconv ? deconv_output_size(in, {layer.kernel}) : in - layer.kernel + 1;
    if (out < 1) {
      ok = false;
      continue;
    }
    report.sizes.push_back(out);
  }
  report.geometry_ok = ok && report.sizes.back() == 1;
  report.parameters = count_parameters(build_network(spec, channels));
  return report;
}

void print_inspect_report(std::ostream& out, const InspectReport& report) {
  out << "network     " << report.name << '\n';
  out << "input       " << report.input_size << 'x' << report.input_size << '\n';
  for (std::size_t i = 0; i < report.layer_labels.size(); ++i) {
    out << "  " << std::left << std::setw(10) << report.layer_labels[i] << std::right;
    if (i + 1 < report.sizes.size()) {
      out << report.sizes[i] << " -> " << report.sizes[i + 1] << '\n';
    } else {
      out << "invalid size\n";
    }
  }
  out << "chain       ";
  for (std::size_t i = 0; i < report.sizes.size(); ++i) {
    out << (i ? "->" : "") << report.sizes[i];
  }
  out << '\n';
  out << "parameters  " << report.parameters << '\n';
  out << "geometry    " << (report.geometry_ok ? "PASS" : "FAIL") << " (output "
      << report.sizes.back() << "x" << report.sizes.back() << ", expected 1x1)\n";
}

ErrorReport evaluate_paths(const fs::path& estimate, const fs::path& ground_truth,
                           const std::vector<double>& thresholds) {
  if (fs::is_regular_file(estimate) && fs::is_regular_file(ground_truth)) {
    return n_pixel_error(read_kitti_disparity(estimate), read_kitti_disparity(ground_truth),
                         thresholds);
  }
  if (!fs::is_directory(estimate) || !fs::is_directory(ground_truth)) {
    throw IoError("evaluation needs two files or two directories");
  }
  std::vector<fs::path> names;
  for (const auto& entry : fs::directory_iterator(ground_truth)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename());
    }
  }
  std::sort(names.begin(), names.end());
  ErrorReport total;
  std::size_t paired = 0;
  for (const fs::path& name : names) {
    const fs::path est = estimate / name;
    if (!fs::is_regular_file(est)) continue;
    total += n_pixel_error(read_kitti_disparity(est), read_kitti_disparity(ground_truth / name),
                           thresholds);
    ++paired;
  }
  if (paired == 0) throw IoError("no estimate matches a ground-truth file by name");
  return total;
}

}  // namespace adsm
