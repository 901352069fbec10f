#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "adsm/pipeline.hpp"
#include "adsm/png_io.hpp"

using namespace adsm;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("adsm_test_pipeline_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int modal_disparity(const DisparityMap& m) {
  std::map<long, int> counts;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.valid(x, y)) ++counts[std::lround(m.disparity(x, y))];
  return static_cast<int>(
      std::max_element(counts.begin(), counts.end(),
                       [](const auto& a, const auto& b) { return a.second < b.second; })
          ->first);
}

void write_stereogram(const fs::path& dir, const Plane<int>& field, std::uint64_t seed) {
  const Stereogram s = make_random_dot_stereogram(field, seed);
  write_png8(dir / "left.png", s.left);
  write_png8(dir / "right.png", s.right);
  write_kitti_disparity(dir / "gt.png", s.ground_truth);
}

}  // namespace

TEST_CASE("cost source names") {
  CHECK(parse_cost_source("census") == CostSource::Census);
  CHECK(parse_cost_source("sad") == CostSource::Sad);
  CHECK(parse_cost_source("learned") == CostSource::Learned);
  CHECK(to_string(CostSource::Sad) == "sad");
  CHECK_THROWS_AS(parse_cost_source("ssd"), ParseError);
}

TEST_CASE("config validation") {
  PipelineConfig c;
  CHECK(c.max_disparity == 127);
  CHECK(c.consistency_threshold == 1.0);
  CHECK_NOTHROW(c.validate());
  c.max_disparity = 0;
  CHECK_THROWS(c.validate());
  c = PipelineConfig{};
  c.penalties = {200, 100};
  CHECK_THROWS(c.validate());
  c = PipelineConfig{};
  c.cost = CostSource::Learned;
  CHECK_THROWS(c.validate());
}

TEST_CASE("identical views give an all-zero valid map") {
  const Stereogram s = make_random_dot_stereogram(Plane<int>(48, 24, 0), 4);
  PipelineConfig c;
  c.max_disparity = 16;
  const MatchResult r = match(normalize(s.left), normalize(s.right), c);
  CHECK(r.disparity.valid_count() == 48u * 24u);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 48; ++x) CHECK(r.disparity.disparity(x, y) == 0.0);
  CHECK(r.timings.size() >= 7);
}

TEST_CASE("a constant shift of 7 is the modal disparity, for census and SAD") {
  const Stereogram s = make_random_dot_stereogram(Plane<int>(80, 30, 7), 5);
  for (CostSource cost : {CostSource::Census, CostSource::Sad}) {
    PipelineConfig c;
    c.cost = cost;
    c.max_disparity = 20;
    const MatchResult r = match(normalize(s.left), normalize(s.right), c);
    CHECK(modal_disparity(r.disparity) == 7);
  }
}

TEST_CASE("without filling, rejected pixels stay invalid") {
  const Stereogram s = make_random_dot_stereogram(Plane<int>(60, 20, 5), 6);
  PipelineConfig c;
  c.max_disparity = 10;
  c.fill = false;
  const MatchResult r = match(normalize(s.left), normalize(s.right), c);
  // the first five columns have no true correspondence; most of them fail the cross-check
  std::size_t rejected = 0;
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 5; ++x) rejected += r.disparity.valid(x, y) ? 0 : 1;
  CHECK(rejected > 50);
  CHECK(r.disparity.valid_count() < 1200);
  c.fill = true;
  CHECK(match(normalize(s.left), normalize(s.right), c).disparity.valid_count() == 1200);
}

TEST_CASE("learned cost pipeline pads back to full size") {
  const Stereogram s = make_random_dot_stereogram(Plane<int>(40, 20, 3), 7);
  const FeatureExtractor net = build_network("2Conv(3)", 4, 2);
  PipelineConfig c;
  c.cost = CostSource::Learned;
  c.weights = "unused-in-memory";
  c.max_disparity = 6;
  const MatchResult r = match(normalize(s.left), normalize(s.right), c, &net);
  CHECK(r.raw_costs.cols() == 36);
  CHECK(r.raw_costs.rows() == 16);
  CHECK(r.disparity.width() == 40);
  CHECK(r.disparity.height() == 20);
  CHECK_THROWS_AS(match(normalize(s.left), normalize(s.right), c, nullptr), StageError);
}

TEST_CASE("file-level matching writes outputs, is deterministic, and leaves nothing on failure") {
  const fs::path dir = fresh_dir("match");
  write_stereogram(dir, two_plane_field(64, 40, 2, 9, 16, 10, 24, 20), 8);
  PipelineConfig c;
  c.max_disparity = 16;
  c.dsi_dump = dir / "dsi.bin";
  std::ostringstream log;
  match_images(dir / "left.png", dir / "right.png", dir / "a.png", c, &log);
  CHECK(log.str().find("aggregate") != std::string::npos);
  CHECK(log.str().find("total") != std::string::npos);
  CHECK(fs::exists(dir / "dsi.bin"));
  {
    std::ifstream in(dir / "dsi.bin", std::ios::binary);
    const CostVolume v = read_dsi(in);
    CHECK(v.rows() == 40);
    CHECK(v.levels() == 17);
  }
  c.dsi_dump.reset();
  match_images(dir / "left.png", dir / "right.png", dir / "b.png", c);
  CHECK(slurp(dir / "a.png") == slurp(dir / "b.png"));
  const ErrorReport rep = evaluate_paths(dir / "a.png", dir / "gt.png", {1.0});
  CHECK(rep.percent(0) < 5.0);

  PipelineConfig learned = c;
  learned.cost = CostSource::Learned;
  learned.weights = dir / "missing.adsm";
  learned.dsi_dump = dir / "never.bin";
  try {
    match_images(dir / "left.png", dir / "right.png", dir / "never.png", learned);
    FAIL("expected a failure");
  } catch (const StageError& e) {
    CHECK(e.stage() == "weights");
  }
  CHECK_FALSE(fs::exists(dir / "never.png"));
  CHECK_FALSE(fs::exists(dir / "never.bin"));
  CHECK_THROWS_AS(match_images(dir / "nope.png", dir / "right.png", dir / "never.png", c), StageError);
  CHECK_FALSE(fs::exists(dir / "never.png"));
  // too-large disparity for the encoder is reported with its stage
  for (const auto& entry : fs::directory_iterator(dir))
    CHECK(entry.path().extension() != ".partial");
}

TEST_CASE("manifests") {
  const fs::path dir = fresh_dir("manifest");
  write_stereogram(dir, Plane<int>(30, 30, 2), 1);
  {
    std::ofstream(dir / "ok.txt") << "# frames\nleft.png right.png gt.png\n\n";
    std::ofstream(dir / "empty.txt") << "# nothing here\n";
    std::ofstream(dir / "short.txt") << "left.png right.png\n";
    std::ofstream(dir / "missing.txt") << "left.png right.png nope.png\n";
  }
  const auto entries = read_manifest(dir / "ok.txt");
  REQUIRE(entries.size() == 1);
  CHECK(entries[0].left == dir / "left.png");
  CHECK_THROWS_AS(read_manifest(dir / "empty.txt"), ParseError);
  CHECK_THROWS_AS(read_manifest(dir / "short.txt"), ParseError);
  CHECK_THROWS_AS(read_manifest(dir / "missing.txt"), IoError);
  CHECK_THROWS_AS(read_manifest(dir / "absent.txt"), IoError);
  const StereoFrame f = load_frame(entries[0]);
  CHECK(f.ground_truth.valid_count() == 28u * 30u);
}

TEST_CASE("training runs are byte-reproducible and write checkpoints and a loss trace") {
  const fs::path dir = fresh_dir("train");
  std::ofstream manifest(dir / "frames.txt");
  for (int i = 0; i < 4; ++i) {
    const fs::path sub = dir / ("f" + std::to_string(i));
    fs::create_directories(sub);
    write_stereogram(sub, Plane<int>(230, 12, 3 + i), 10 + i);
    manifest << sub.filename().string() << "/left.png " << sub.filename().string() << "/right.png "
             << sub.filename().string() << "/gt.png\n";
  }
  manifest.close();
  TrainingOptions opt;
  opt.network = "2Conv(3)";
  opt.channels = 4;
  opt.trainer.batch_size = 8;
  opt.trainer.iterations = 6;
  opt.checkpoint_interval = 3;
  opt.validation_samples = 20;
  opt.weights_out = dir / "a.adsm";
  opt.loss_csv = dir / "loss.csv";
  const TrainingSummary s = run_training(dir / "frames.txt", opt);
  CHECK(s.loss_trace.size() == 6);
  CHECK(s.train_samples > 0);
  CHECK(s.validation_samples > 0);
  CHECK(fs::exists(dir / "a.adsm.iter3"));
  CHECK_FALSE(fs::exists(dir / "a.adsm.iter6"));
  std::ifstream csv(dir / "loss.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "iteration,loss,smoothed_loss");
  opt.weights_out = dir / "b.adsm";
  opt.loss_csv.reset();
  run_training(dir / "frames.txt", opt);
  CHECK(slurp(dir / "a.adsm") == slurp(dir / "b.adsm"));
  CHECK(load_weights(dir / "a.adsm").patch_size() == 5);

  std::ofstream(dir / "empty.txt") << "";
  opt.weights_out = dir / "c.adsm";
  CHECK_THROWS(run_training(dir / "empty.txt", opt));
  CHECK_FALSE(fs::exists(dir / "c.adsm"));
  opt.network = "2Conv(3)@7";
  CHECK_THROWS_AS(run_training(dir / "frames.txt", opt), GeometryError);
}

TEST_CASE("inspect reports") {
  const InspectReport a = inspect("37-4Conv");
  CHECK(a.sizes == std::vector<int>{37, 28, 19, 10, 1});
  CHECK(a.geometry_ok);
  const InspectReport b = inspect("37-1Deconv(5)&4Conv");
  CHECK(b.sizes == std::vector<int>{37, 41, 31, 21, 11, 1});
  CHECK(b.geometry_ok);
  const InspectReport c = inspect("37-3Deconv&6Conv");
  CHECK(c.sizes.back() == 7);
  CHECK_FALSE(c.geometry_ok);
  std::ostringstream out;
  print_inspect_report(out, c);
  CHECK(out.str().find("FAIL") != std::string::npos);
  CHECK(out.str().find("37->39->43->49->41->33->25->19->13->7") != std::string::npos);
  const InspectReport d = inspect("3Conv(20)", 8, 29);
  CHECK_FALSE(d.geometry_ok);
  std::ostringstream out2;
  print_inspect_report(out2, d);
  CHECK(out2.str().find("invalid size") != std::string::npos);
  CHECK_THROWS_AS(inspect("banana"), ParseError);
}

TEST_CASE("evaluation over directories pairs files by name") {
  const fs::path est = fresh_dir("eval_est");
  const fs::path gt = fresh_dir("eval_gt");
  DisparityMap g(4, 1), e(4, 1);
  for (int x = 0; x < 4; ++x) {
    g.set(x, 0, 10);
    e.set(x, 0, x == 0 ? 20 : 10);
  }
  write_kitti_disparity(gt / "000000_10.png", g);
  write_kitti_disparity(gt / "000001_10.png", g);
  write_kitti_disparity(est / "000000_10.png", e);
  write_kitti_disparity(est / "000001_10.png", g);
  const ErrorReport r = evaluate_paths(est, gt);
  CHECK(r.total_pixels == 8);
  CHECK(r.percent(0) == 12.5);
  CHECK_THROWS_AS(evaluate_paths(est, gt / "000000_10.png"), IoError);
  const fs::path lonely = fresh_dir("eval_none");
  CHECK_THROWS_AS(evaluate_paths(lonely, gt), IoError);
}
