#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mstaog/error.hpp"
#include "mstaog/inference.hpp"
#include "mstaog/learning.hpp"
#include "support.hpp"

using namespace mstaog;

TEST_CASE("linear SVM: hard-margin solution of two points") {
  MatX x(2, 2);
  x << 1, 0, -1, 0;
  const std::vector<int> y{1, -1};
  const LinearSvm svm = train_linear_svm(x, y, 1e3);
  CHECK((svm.weights - Vec2(1, 0)).norm() < 1e-6);
  CHECK(std::abs(svm.bias) < 1e-6);
  CHECK(svm.decision(Vec2(2, 5)) > 0);
}

TEST_CASE("linear SVM separates a separable cloud with unit margins") {
  std::mt19937_64 rng(51);
  std::normal_distribution<Scalar> n(0, 1);
  MatX x(60, 3);
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2 ? 1 : -1;
    x.row(i) << n(rng), n(rng), n(rng);
    x(i, 0) = label * (1.5 + std::abs(x(i, 0)));
    y.push_back(label);
  }
  const LinearSvm svm = train_linear_svm(x, y, 1e3);
  for (int i = 0; i < 60; ++i) CHECK(y[i] * svm.decision(x.row(i).transpose()) >= 1 - 1e-6);
  CHECK_THROWS_AS(train_linear_svm(x, std::vector<int>{1}, 1), SizeError);
  CHECK_THROWS_AS(train_linear_svm(x, y, 0), ConfigError);
}

TEST_CASE("linear SVM: duplicating the data halves the effective C") {
  std::mt19937_64 rng(52);
  std::normal_distribution<Scalar> n(0, 1);
  MatX x(40, 4);
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = n(rng);
    y.push_back(x(i, 0) + 0.5 * n(rng) > 0 ? 1 : -1);
  }
  MatX twice(80, 4);
  twice << x, x;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  const LinearSvm a = train_linear_svm(x, y, 0.5, 1e-12, 1000000);
  const LinearSvm b = train_linear_svm(twice, y2, 0.25, 1e-12, 1000000);
  CHECK((a.weights - b.weights).norm() < 1e-6);
  CHECK(std::abs(a.bias - b.bias) < 1e-6);

  std::vector<int> random_labels;
  for (int i = 0; i < 40; ++i) random_labels.push_back(n(rng) > 0 ? 1 : -1);
  const LinearSvm r = train_linear_svm(x, random_labels, 1);
  CHECK(r.weights.allFinite());
  CHECK(std::isfinite(r.bias));
}

namespace {

constexpr int kChannels = 4;

/// One-child pose on 2x2 windows; the child sits one cell down-right of the
/// root in both bins.
PoseModel blank_pose() {
  PoseModel p;
  p.coupling = ViewCoupling::Independent;
  p.bin_centers = uniform_view_bins(2);
  p.active = {true, true};
  p.channels = kChannels;
  p.root.width = p.root.height = 2;
  p.root.allocate(2, kChannels);
  PartModel c;
  c.part_id = 1;
  c.width = c.height = 2;
  c.allocate(2, kChannels);
  for (int b = 0; b < 2; ++b) {
    OffsetGaussian2D<Scalar> g;
    g.mean = Vec2(4, 4);
    g.covariance = Mat2::Identity() * 16;
    c.view_offsets.push_back(g);
  }
  p.children.push_back(c);
  return p;
}

struct ToySet {
  std::vector<FeaturePyramid> pyramids;
  std::vector<TrainExample> positives, negatives;
};

/// Positives carry a block of channel 0 under the root and of channel 1
/// under the child; negatives are weak noise.
ToySet separable_set(std::mt19937_64& rng, int npos, int nneg) {
  ToySet s;
  s.pyramids.reserve(npos + nneg);
  std::uniform_int_distribution<int> cell(0, 4);
  for (int i = 0; i < npos + nneg; ++i) {
    FeaturePyramid f = testing::random_pyramid(7, 7, kChannels, rng);
    f.levels[0].hog.data *= 0.05;
    f.levels[0].hof.data *= 0.05;
    if (i < npos) {
      for (int y = 2; y < 4; ++y)
        for (int x = 2; x < 4; ++x) f.levels[0].hog.at(y, x, 0) = 1;
      for (int y = 3; y < 5; ++y)
        for (int x = 3; x < 5; ++x) f.levels[0].hog.at(y, x, 1) = 1;
    }
    s.pyramids.push_back(std::move(f));
  }
  for (int i = 0; i < npos + nneg; ++i) {
    TrainExample ex;
    ex.features = &s.pyramids[i];
    if (i < npos) {
      ex.root = {2, 2};
      ex.parts = {{3, 3}};
      ex.theta = uniform_view_bins(2)[0];
      s.positives.push_back(ex);
    } else {
      ex.label = -1;
      ex.root = {cell(rng), cell(rng)};
      s.negatives.push_back(ex);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("train_pose separates a toy set and never increases the objective within a stage") {
  std::mt19937_64 rng(53);
  const ToySet s = separable_set(rng, 12, 24);
  TrainingConfig cfg;
  cfg.C = 10;
  cfg.epochs = 20;
  cfg.bootstrap_rounds = 0;
  cfg.latent_iterations = 4;
  cfg.search_radius = 1;
  const TrainResult r = train_pose(blank_pose(), s.positives, s.negatives, {}, cfg);
  REQUIRE(r.objective.size() == 4);
  for (std::size_t i = 1; i < r.objective.size(); ++i)
    if (r.objective_stage[i] == r.objective_stage[i - 1]) CHECK(r.objective[i] <= r.objective[i - 1] + 1e-9);
  for (Scalar v : r.positive_scores) CHECK(v > 0);
  for (const auto& n : s.negatives) {
    DetectOptions opt;
    opt.max_detections = 0;
    const FrameDetections d = detect_frame(*n.features, r.model, opt);
    CHECK(d.pose_map.levels[0].scores(n.root.y, n.root.x) < 0);
  }
  CHECK(r.negatives_used == 24);
  CHECK(r.slacks.size() == 12);
  CHECK(r.mean_hinge < 0.1);
}

TEST_CASE("train_pose: bootstrap rounds add hard negatives") {
  std::mt19937_64 rng(54);
  const ToySet s = separable_set(rng, 6, 6);
  std::vector<const FeaturePyramid*> pool;
  for (int i = 6; i < 12; ++i) pool.push_back(&s.pyramids[i]);
  TrainingConfig cfg;
  cfg.epochs = 3;
  cfg.bootstrap_rounds = 1;
  cfg.latent_iterations = 2;
  cfg.hard_negatives = 4;
  cfg.hard_negative_stride = 1;
  const TrainResult r = train_pose(blank_pose(), s.positives, s.negatives, pool, cfg);
  REQUIRE(r.bootstrap_added.size() == 1);
  CHECK(r.bootstrap_added[0] <= 4);
  CHECK(r.negatives_used == 6 + r.bootstrap_added[0]);
  for (std::size_t i = 0; i < r.objective.size(); ++i) CHECK(std::isfinite(r.objective[i]));
}

TEST_CASE("train_pose rejects degenerate inputs") {
  std::mt19937_64 rng(55);
  const ToySet s = separable_set(rng, 2, 2);
  TrainingConfig cfg;
  CHECK_THROWS_AS(train_pose(blank_pose(), {}, s.negatives, {}, cfg), DegenerateError);
  CHECK_THROWS_AS(train_pose(blank_pose(), s.positives, {}, {}, cfg), DegenerateError);
  cfg.C = 0;
  CHECK_THROWS_AS(train_pose(blank_pose(), s.positives, s.negatives, {}, cfg), ConfigError);
  cfg.C = 1;
  std::vector<TrainExample> missing = s.positives;
  missing[0].parts.clear();
  CHECK_THROWS_AS(train_pose(blank_pose(), missing, s.negatives, {}, cfg), SizeError);
}

TEST_CASE("latent_objective: the C-dependent term is the hinge loss at fixed latents") {
  std::mt19937_64 rng(56);
  const ToySet s = separable_set(rng, 5, 0);
  PoseModel m = blank_pose();
  testing::randomize(m.root, rng, 0.3);
  testing::randomize(m.children[0], rng, 0.3);
  m.bias = 0.2;
  TrainingConfig one, two;
  one.C = 1;
  two.C = 2;
  Scalar hinge = 0;
  for (const auto& p : s.positives)
    hinge += std::max<Scalar>(0, 1 - example_score(m, *p.features, 0, 0, p.root, p.parts));
  const Scalar a = latent_objective(m, s.positives, {}, one), b = latent_objective(m, s.positives, {}, two);
  CHECK(b - a == doctest::Approx(hinge).epsilon(1e-9));
  CHECK(a - hinge > 0);
}

namespace {

ActionTrainingVideo one_hot_video(int label, std::mt19937_64& rng) {
  std::normal_distribution<Scalar> n(0, 0.05);
  ActionTrainingVideo v;
  v.label = label;
  for (int p = 0; p < 3; ++p) {
    Pyramid73 x;
    for (int i = 0; i < kPyramidDims; ++i) x[i] = n(rng);
    if (p == label) x[0] += 1;
    v.pose_pyramids.push_back(x);
  }
  LowResFeature f;
  f.histogram = VecX::Constant(kIntensityBins, 1.0 / kIntensityBins);
  f.size = Vec2(0.3 + 0.1 * label, 0.8);
  v.lowres = {f, f};
  return v;
}

}  // namespace

TEST_CASE("train_action: each action fires on its own class") {
  std::mt19937_64 rng(57);
  std::vector<ActionTrainingVideo> videos;
  for (int i = 0; i < 18; ++i) videos.push_back(one_hot_video(i % 3, rng));
  const std::vector<std::string> vocab{"a", "b", "c"};
  const std::vector<int> ids{10, 11, 12};
  TrainingConfig cfg;
  cfg.action_C = 10;
  for (bool lowres : {false, true}) {
    const auto actions = train_action(videos, vocab, ids, cfg, lowres);
    REQUIRE(actions.size() == 3);
    for (const auto& a : actions) {
      CHECK(a.pose_ids == ids);
      CHECK(a.lowres.size() == (lowres ? 2u : 0u));
      CHECK(a.weights.size() == kPyramidDims * Eigen::Index(3 + a.lowres.size()));
    }
    for (const auto& v : videos) {
      int best = -1;
      Scalar top = -1e300;
      for (const auto& a : actions) {
        const Scalar s = a.weights.dot(action_features(v.pose_pyramids, v.lowres, a)) + a.bias;
        if (s > top) {
          top = s;
          best = a.label;
        }
      }
      CHECK(best == v.label);
    }
  }
}

TEST_CASE("train_action rejects single-class and mislabeled input") {
  std::mt19937_64 rng(58);
  std::vector<ActionTrainingVideo> videos{one_hot_video(0, rng), one_hot_video(0, rng)};
  const std::vector<std::string> vocab{"a", "b", "c"};
  const std::vector<int> ids{0, 1, 2};
  CHECK_THROWS_AS(train_action(videos, vocab, ids, TrainingConfig{}), DegenerateError);
  videos[1].label = 7;
  CHECK_THROWS_AS(train_action(videos, vocab, ids, TrainingConfig{}), SizeError);
  CHECK_THROWS_AS(train_action({}, vocab, ids, TrainingConfig{}), DegenerateError);
}
