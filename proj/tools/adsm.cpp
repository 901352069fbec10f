// adsm: train, match, evaluate and inspect stereo matching networks.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "adsm/evaluation.hpp"
#include "adsm/pipeline.hpp"
#include "adsm/png_io.hpp"

namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  fs::path manifest;
  adsm::TrainingOptions options;
  std::string loss_csv;
};

struct MatchArgs {
  fs::path left;
  fs::path right;
  fs::path output = "disparity.png";
  std::string cost = "census";
  std::string dump_dsi;
  bool no_subpixel = false;
  bool no_fill = false;
  bool quiet = false;
  std::uint64_t seed = 1;  // matching has no randomness; kept so flags match other subcommands
  adsm::PipelineConfig config;
};

struct EvalArgs {
  fs::path estimate;
  fs::path ground_truth;
  std::vector<double> thresholds = adsm::kDefaultThresholds;
  std::string csv;
};

struct InspectArgs {
  std::string network;
  int channels = adsm::kDefaultChannels;
  int patch = 37;
};

struct StereogramArgs {
  fs::path out_dir;
  int width = 128;
  int height = 128;
  int background = 0;
  int foreground = 12;
  std::vector<int> rect;  // x0 y0 w h; defaults to the central half
  std::uint64_t seed = 1;
};

int run_train(const TrainArgs& args) {
  adsm::TrainingOptions options = args.options;
  if (!args.loss_csv.empty()) options.loss_csv = args.loss_csv;
  const adsm::TrainingSummary s = adsm::run_training(args.manifest, options, &std::cerr);
  std::cout << "train_samples " << s.train_samples << '\n'
            << "validation_samples " << s.validation_samples << '\n'
            << "final_loss " << (s.loss_trace.empty() ? 0.0 : s.loss_trace.back()) << '\n'
            << "validation_loss " << s.validation_loss << '\n'
            << "validation_top1 " << s.validation_top1 << '\n'
            << "weights " << options.weights_out.string() << '\n';
  return 0;
}

int run_match(MatchArgs args) {
  args.config.cost = adsm::parse_cost_source(args.cost);
  args.config.subpixel = !args.no_subpixel;
  args.config.fill = !args.no_fill;
  if (!args.dump_dsi.empty()) args.config.dsi_dump = args.dump_dsi;
  adsm::match_images(args.left, args.right, args.output, args.config,
                     args.quiet ? nullptr : &std::cerr);
  return 0;
}

int run_eval(const EvalArgs& args) {
  const adsm::ErrorReport report =
      adsm::evaluate_paths(args.estimate, args.ground_truth, args.thresholds);
  adsm::write_error_table(std::cout, report);
  if (!args.csv.empty()) {
    adsm::write_atomically(args.csv, [&](const fs::path& p) {
      std::ofstream out(p);
      adsm::write_error_csv(out, report);
      if (!out) throw adsm::IoError("failed writing " + p.string());
    });
  }
  return 0;
}

int run_inspect(const InspectArgs& args) {
  adsm::print_inspect_report(std::cout, adsm::inspect(args.network, args.channels, args.patch));
  return 0;
}

int run_stereogram(const StereogramArgs& args) {
  std::vector<int> rect = args.rect;
  if (rect.empty()) rect = {args.width / 4, args.height / 4, args.width / 2, args.height / 2};
  if (rect.size() != 4) throw adsm::ParseError("--rect takes four values: x0 y0 width height");
  const adsm::Plane<int> field = adsm::two_plane_field(
      args.width, args.height, args.background, args.foreground, rect[0], rect[1], rect[2], rect[3]);
  const adsm::Stereogram s = adsm::make_random_dot_stereogram(field, args.seed);
  fs::create_directories(args.out_dir);
  adsm::write_atomically(args.out_dir / "left.png",
                         [&](const fs::path& p) { adsm::write_png8(p, s.left); });
  adsm::write_atomically(args.out_dir / "right.png",
                         [&](const fs::path& p) { adsm::write_png8(p, s.right); });
  adsm::write_atomically(args.out_dir / "disparity.png",
                         [&](const fs::path& p) { adsm::write_kitti_disparity(p, s.ground_truth); });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense stereo matching with learned or classic costs and semi-global aggregation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a patch-matching network from a manifest");
  train_cmd->add_option("manifest", train.manifest, "Text file of 'left right disparity' lines")
      ->required();
  train_cmd->add_option("--network", train.options.network, "Preset name or layer grammar")
      ->capture_default_str();
  train_cmd->add_option("--channels", train.options.channels, "Feature channels per layer")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train.options.trainer.batch_size, "Minibatch size")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--iterations", train.options.trainer.iterations, "SGD iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.options.trainer.learning_rate, "Initial learning rate")
      ->capture_default_str();
  train_cmd->add_option("--momentum", train.options.trainer.momentum)->capture_default_str();
  train_cmd->add_option("--seed", train.options.trainer.seed)->capture_default_str();
  train_cmd->add_option("--train-fraction", train.options.train_fraction,
                        "Share of frames used for training; the rest validate")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--checkpoint-every", train.options.checkpoint_interval,
                        "Write weights every N iterations (0 = never)")
      ->capture_default_str();
  train_cmd->add_option("--validation-samples", train.options.validation_samples)
      ->capture_default_str();
  train_cmd->add_option("-o,--out", train.options.weights_out, "Weights file")
      ->capture_default_str();
  train_cmd->add_option("--loss-csv", train.loss_csv, "Per-iteration loss trace");

  MatchArgs match;
  auto* match_cmd = app.add_subcommand("match", "Compute a disparity map for a rectified pair");
  match_cmd->add_option("left", match.left)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("right", match.right)->required()->check(CLI::ExistingFile);
  match_cmd->add_option("-o,--out", match.output, "16-bit disparity PNG")->capture_default_str();
  match_cmd->add_option("--cost", match.cost, "Matching cost")
      ->capture_default_str()
      ->check(CLI::IsMember({"census", "sad", "learned"}));
  match_cmd->add_option("--weights", match.config.weights, "Network weights for --cost learned");
  match_cmd->add_option("--dmax", match.config.max_disparity, "Largest disparity searched")
      ->capture_default_str();
  match_cmd->add_option("--p1", match.config.penalties.p1, "Small-change penalty")
      ->capture_default_str();
  match_cmd->add_option("--p2", match.config.penalties.p2, "Large-change penalty")
      ->capture_default_str();
  match_cmd->add_option("--consistency-threshold", match.config.consistency_threshold)
      ->capture_default_str();
  match_cmd->add_option("--census-window", match.config.census_window)->capture_default_str();
  match_cmd->add_option("--sad-window", match.config.sad_window)->capture_default_str();
  match_cmd->add_flag("--no-subpixel", match.no_subpixel, "Keep integer disparities");
  match_cmd->add_flag("--no-fill", match.no_fill, "Leave inconsistent pixels invalid");
  match_cmd->add_option("--dump-dsi", match.dump_dsi, "Also write the raw cost volume");
  match_cmd->add_option("--seed", match.seed, "Ignored; matching is deterministic");
  match_cmd->add_flag("-q,--quiet", match.quiet, "Suppress stage timings");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "n-pixel error of estimates against ground truth");
  eval_cmd->add_option("estimate", eval.estimate, "Disparity PNG or directory")->required();
  eval_cmd->add_option("ground_truth", eval.ground_truth, "Disparity PNG or directory")
      ->required();
  eval_cmd->add_option("--thresholds", eval.thresholds)->capture_default_str();
  eval_cmd->add_option("--csv", eval.csv, "Write the report as CSV");

  InspectArgs insp;
  auto* inspect_cmd = app.add_subcommand("inspect", "Layer sizes and parameter count of a network");
  inspect_cmd->add_option("network", insp.network, "Preset name or layer grammar")->required();
  inspect_cmd->add_option("--channels", insp.channels)->capture_default_str();
  inspect_cmd->add_option("--patch", insp.patch, "Input size when the config names none")
      ->capture_default_str();

  StereogramArgs sg;
  auto* sg_cmd = app.add_subcommand("stereogram", "Write a random-dot test pair with ground truth");
  sg_cmd->add_option("out_dir", sg.out_dir)->required();
  sg_cmd->add_option("--width", sg.width)->capture_default_str()->check(CLI::PositiveNumber);
  sg_cmd->add_option("--height", sg.height)->capture_default_str()->check(CLI::PositiveNumber);
  sg_cmd->add_option("--background", sg.background)->capture_default_str();
  sg_cmd->add_option("--foreground", sg.foreground)->capture_default_str();
  sg_cmd->add_option("--rect", sg.rect, "Foreground rectangle: x0 y0 width height")
      ->expected(4);
  sg_cmd->add_option("--seed", sg.seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(train);
    if (*match_cmd) return run_match(match);
    if (*eval_cmd) return run_eval(eval);
    if (*inspect_cmd) return run_inspect(insp);
    if (*sg_cmd) return run_stereogram(sg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
