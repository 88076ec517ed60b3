#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "mstaog/error.hpp"
#include "mstaog/inference.hpp"
#include "mstaog/synth.hpp"
#include "support.hpp"

using namespace mstaog;
constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();

namespace {

MatX random_grid(int rows, int cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<Scalar> u(-3, 3);
  MatX m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

/// max over child cells of child + deformation, by enumeration.
MatX brute_dt(const MatX& child, const OffsetGaussian2D<Scalar>& g) {
  MatX out(child.rows(), child.cols());
  for (int y0 = 0; y0 < child.rows(); ++y0)
    for (int x0 = 0; x0 < child.cols(); ++x0) {
      Scalar best = -kInf;
      for (int y = 0; y < child.rows(); ++y)
        for (int x = 0; x < child.cols(); ++x)
          best = std::max(best, child(y, x) + deformation_score(Vec2(x0, y0), Vec2(x, y), g));
      out(y0, x0) = best;
    }
  return out;
}

ResponseMap constant_map(int rows, int cols, Scalar v) { return ResponseMap::from_grid(MatX::Constant(rows, cols, v)); }

}  // namespace

TEST_CASE("1D distance transform against enumeration") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<Scalar> u(-2, 2), a(0.05, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 9;
    std::vector<Scalar> f(n), out(n);
    std::vector<int> arg(n);
    for (auto& v : f) v = u(rng);
    if (trial % 7 == 0) f[0] = -kInf;
    const Scalar curv = a(rng), shift = u(rng);
    distance_transform_1d(f, curv, shift, out, arg);
    for (int i = 0; i < n; ++i) {
      Scalar best = -kInf;
      for (int p = 0; p < n; ++p) {
        const Scalar d = Scalar(p - i) - shift;
        best = std::max(best, f[p] - curv * d * d);
      }
      if (best == -kInf) {
        CHECK(out[i] == -kInf);
        continue;
      }
      CHECK(out[i] == doctest::Approx(best).epsilon(1e-12));
      const Scalar d = Scalar(arg[i] - i) - shift;
      CHECK(f[arg[i]] - curv * d * d == doctest::Approx(best).epsilon(1e-12));
    }
  }
  std::vector<Scalar> out(1);
  std::vector<int> arg(1);
  CHECK_THROWS_AS(distance_transform_1d(std::vector<Scalar>{1.0}, 0, 0, out, arg), NumericError);
}

TEST_CASE("distance transform: uniform child map") {
  OffsetGaussian2D<Scalar> g;
  g.mean = Vec2(1.2, -0.8);
  g.covariance << 0.5, 0, 0, 2;
  const MatX child = MatX::Constant(7, 7, 2.5);
  const DistanceTransform dt = distance_transform(child, g);
  // Cells where the rounded mean stays on the grid reach the constant up to
  // the rounding residual.
  for (int y = 1; y < 7; ++y)
    for (int x = 0; x < 5; ++x) {
      CHECK(dt.arg_x(y, x) - x == 1);
      CHECK(dt.arg_y(y, x) - y == -1);
      const Scalar residual = -(0.2 * 0.2) / 0.5 - (0.2 * 0.2) / 2;
      CHECK(dt.scores(y, x) == doctest::Approx(2.5 + residual));
    }
}

TEST_CASE("distance transform: a single peak moves by the mean offset") {
  OffsetGaussian2D<Scalar> g;
  g.mean = Vec2(2, 1);
  g.covariance = Mat2::Identity() * 0.1;
  MatX child = MatX::Zero(7, 7);
  child(4, 5) = 10;
  const DistanceTransform dt = distance_transform(child, g);
  Eigen::Index r, c;
  dt.scores.maxCoeff(&r, &c);
  CHECK(r == 3);
  CHECK(c == 3);
  CHECK(dt.scores(3, 3) == 10);
  CHECK((dt.scores - brute_dt(child, g)).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("distance transform equals enumeration on random 5x5 maps") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<Scalar> u(-2, 2), v(0.1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const MatX child = random_grid(5, 5, rng);
    OffsetGaussian2D<Scalar> g;
    g.mean = Vec2(u(rng), u(rng));
    g.covariance = Vec2(v(rng), v(rng)).asDiagonal();
    const DistanceTransform dt = distance_transform(child, g);
    CHECK((dt.scores - brute_dt(child, g)).cwiseAbs().maxCoeff() == 0);
    CHECK(dt.dropped_correlation == 0);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x)
        CHECK(child(dt.arg_y(y, x), dt.arg_x(y, x)) +
                  deformation_score(Vec2(x, y), Vec2(dt.arg_x(y, x), dt.arg_y(y, x)), g) ==
              dt.scores(y, x));
  }
}

TEST_CASE("distance transform with correlated covariance") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<Scalar> u(-2, 2), v(0.2, 4), r(-0.9, 0.9);
  for (int trial = 0; trial < 30; ++trial) {
    const MatX child = random_grid(6, 5, rng);
    OffsetGaussian2D<Scalar> g;
    g.mean = Vec2(u(rng), u(rng));
    const Scalar a = v(rng), d = v(rng), rho = r(rng);
    g.covariance << a, rho * std::sqrt(a * d), rho * std::sqrt(a * d), d;
    const DistanceTransform exact = distance_transform(child, g, CorrelationMode::Exact);
    CHECK((exact.scores - brute_dt(child, g)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(exact.dropped_correlation == 0);
    const DistanceTransform drop = distance_transform(child, g, CorrelationMode::Drop);
    CHECK(drop.dropped_correlation == doctest::Approx(std::abs(rho)));
    OffsetGaussian2D<Scalar> diag = g;
    diag.covariance(0, 1) = diag.covariance(1, 0) = 0;
    // The fast path keeps the diagonal of the precision, not of the covariance.
    const Mat2 p = g.covariance.inverse();
    diag.covariance = Vec2(1 / p(0, 0), 1 / p(1, 1)).asDiagonal();
    CHECK((drop.scores - brute_dt(child, diag)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("part responses: delta, matched and zero templates") {
  std::mt19937_64 rng(34);
  const FeaturePyramid f = testing::random_pyramid(6, 7, 3, rng);
  PoseModel pose;
  pose.bin_centers = {0};
  pose.active = {true};
  pose.channels = 3;
  PartModel part;
  part.width = 2;
  part.height = 2;
  part.allocate(1, 3);
  CHECK(part_response(f, part, pose, 0).levels[0].scores.cwiseAbs().maxCoeff() == 0);

  part.appearance[0](1, 3 + 2) = 1;  // cell (1, 1) of the window, channel 2
  const MatX r = part_response(f, part, pose, 0).levels[0].scores;
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) {
      const Scalar expected = (y + 1 < 6 && x + 1 < 7) ? f.levels[0].hog.at(y + 1, x + 1, 2) : 0;
      CHECK(r(y, x) == expected);
    }

  PartModel matched = part;
  matched.appearance[0] = extract_window(f.levels[0].hog, {3, 2}, part);
  matched.motion[0] = extract_window(f.levels[0].hof, {3, 2}, part);
  Eigen::Index br, bc;
  part_response(f, matched, pose, 0).levels[0].scores.maxCoeff(&br, &bc);
  CHECK(br == 2);
  CHECK(bc == 3);
  CHECK_THROWS_AS(part_response(f, part, pose, 1), SizeError);
}

TEST_CASE("detect_frame: zero features and zero templates give the bias") {
  std::mt19937_64 rng(35);
  PoseModel pose = testing::toy_pose(2, 3, 2, ViewCoupling::Shared, rng);
  for (auto* p : {&pose.root, &pose.children[0], &pose.children[1]})
    for (auto* set : {&p->appearance, &p->motion})
      for (auto& t : *set) t.setZero();
  FeaturePyramid f = testing::random_pyramid(6, 6, 2, rng);
  f.levels[0].hog.data.setZero();
  f.levels[0].hof.data.setZero();
  // Zero-mean children sit exactly on the root, so deformation is zero too.
  for (auto& c : pose.children) c.offset.mean.setZero();
  const FrameDetections d = detect_frame(f, pose);
  CHECK((d.pose_map.levels[0].scores.array() - pose.bias).abs().maxCoeff() < 1e-12);
}

TEST_CASE("detect_frame equals enumeration and detections re-score") {
  std::mt19937_64 rng(36);
  for (ViewCoupling coupling : {ViewCoupling::Shared, ViewCoupling::Independent}) {
    PoseModel pose = testing::toy_pose(2, 10, 2, coupling, rng);
    pose.active[7] = false;
    const FeaturePyramid f = testing::random_pyramid(5, 5, 2, rng);
    DetectOptions opt;
    opt.correlation = CorrelationMode::Exact;
    opt.threshold = -kInf;
    opt.max_detections = 100;
    opt.nms_overlap = 1;
    const FrameDetections d = detect_frame(f, pose, opt);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        const PoseScore ref = pose_score({x, y}, f.levels[0], f.cell, pose);
        CHECK(d.pose_map.levels[0].scores(y, x) == doctest::Approx(ref.score).epsilon(1e-9));
        CHECK(d.best_bin[0](y, x) != 7);
      }
    REQUIRE(d.detections.size() == 25);
    for (const auto& det : d.detections) {
      CHECK(view_score([&] {
              std::vector<Cell> at{det.root};
              at.insert(at.end(), det.parts.begin(), det.parts.end());
              return at;
            }(),
                       f.levels[0], f.cell, pose, pose.bin_centers[det.bin]) == doctest::Approx(det.score).epsilon(1e-6));
    }
    for (std::size_t i = 1; i < d.detections.size(); ++i) CHECK(d.detections[i - 1].score >= d.detections[i].score);
  }
}

TEST_CASE("non-maximum suppression keeps the best of overlapping boxes") {
  std::vector<Detection> dets(3);
  dets[0].score = 1;
  dets[0].box = {0, 0, 10, 10};
  dets[1].score = 3;
  dets[1].box = {1, 1, 10, 10};
  dets[2].score = 2;
  dets[2].box = {30, 30, 10, 10};
  const auto kept = non_maximum_suppression(dets, 0.5);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].score == 3);
  CHECK(kept[1].score == 2);
}

TEST_CASE("estimate_view") {
  std::vector<Detection> d(1);
  d[0].bin = 2;
  d[0].score = 0.3;
  CHECK(estimate_view(d) == 2);
  d.push_back(d[0]);
  d[1].bin = 1;
  CHECK(estimate_view(d) == 1);
  CHECK_THROWS_AS(estimate_view(std::vector<Detection>{}), SizeError);
}

namespace {

/// Entry index of level-1 cell (t, y, x) with k cells per axis.
int entry(int k, int t, int y, int x) { return (k == 1 ? 0 : k == 2 ? 1 : 9) + (t * k + y) * k + x; }

}  // namespace

TEST_CASE("pyramid_pool: constant maps") {
  std::vector<ResponseMap> maps(5, constant_map(3, 4, 1.5));
  const Pyramid73 p = pyramid_pool(maps);
  CHECK((p.array() - 1.5).abs().maxCoeff() == 0);
  CHECK(p.size() == 73);
}

TEST_CASE("pyramid_pool: an impulse appears once per level") {
  std::vector<ResponseMap> maps(8, constant_map(8, 8, 0));
  maps[5].levels[0].scores(6, 1) = 9;
  const Pyramid73 p = pyramid_pool(maps);
  CHECK((p.array() == 9).count() == 3);
  CHECK(p[entry(1, 0, 0, 0)] == 9);
  CHECK(p[entry(2, 1, 1, 0)] == 9);
  CHECK(p[entry(4, 2, 3, 0)] == 9);
}

TEST_CASE("pyramid_pool: entries are maxima over their cells") {
  std::mt19937_64 rng(37);
  std::uniform_int_distribution<int> dim(1, 9), len(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const int frames = len(rng), rows = dim(rng), cols = dim(rng);
    std::vector<ResponseMap> maps;
    for (int t = 0; t < frames; ++t) maps.push_back(ResponseMap::from_grid(random_grid(rows, cols, rng)));
    const Pyramid73 p = pyramid_pool(maps);
    const int extent = std::max(frames, 4);
    Pyramid73 ref = Pyramid73::Constant(-kInf);
    for (int k : {1, 2, 4})
      for (int t = 0; t < extent; ++t)
        for (int y = 0; y < rows; ++y)
          for (int x = 0; x < cols; ++x) {
            const int idx = entry(k, t * k / extent, y * k / rows, x * k / cols);
            ref[idx] = std::max(ref[idx], maps[std::min(t, frames - 1)].levels[0].scores(y, x));
          }
    Scalar lo = kInf;
    for (const auto& m : maps) lo = std::min(lo, m.levels[0].scores.minCoeff());
    for (int i = 0; i < 73; ++i)
      if (ref[i] == -kInf) ref[i] = lo;
    CHECK((p - ref).cwiseAbs().maxCoeff() == 0);
  }
  CHECK_THROWS_AS(pyramid_pool(std::vector<ResponseMap>{}), SizeError);
}

TEST_CASE("standardized maps and low-resolution maps") {
  PoseModel pose;
  pose.response_mean = 2;
  pose.response_std = 4;
  const ResponseMap s = standardized(constant_map(2, 2, 10), pose);
  CHECK(s.levels[0].scores(1, 1) == 2);
  LowResNode node;
  node.kind = LowResKind::BoxSize;
  node.weights = Vec2(1, 1);
  LowResFeature f;
  f.size = Vec2(0.25, 0.5);
  const auto maps = lowres_maps(std::vector<LowResFeature>{f, f}, node);
  REQUIRE(maps.size() == 2);
  CHECK(maps[1].levels[0].scores.rows() == 4);
  CHECK(maps[1].levels[0].scores(3, 3) == 0.75);
}

TEST_CASE("classify: a single action wins") {
  std::mt19937_64 rng(38);
  ModelArchive ar;
  ar.features.cell = 4;
  ar.features.scales = 1;
  PoseModel pose = testing::toy_pose(1, 2, kDescriptorChannels, ViewCoupling::Shared, rng);
  ar.poses.push_back(pose);
  ActionModel a;
  a.label = 2;
  a.name = "only";
  a.pose_ids = {0};
  a.weights = VecX::Ones(kPyramidDims);
  ar.actions.push_back(a);
  ar.vocabulary = {"a", "b", "only"};
  VideoSample v;
  v.id = "v";
  std::uniform_real_distribution<Scalar> u(0, 255);
  for (int t = 0; t < 3; ++t) {
    Image img(32, 32);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = u(rng);
    v.frames.push_back(img);
  }
  const Classification c = classify(v, ar);
  CHECK(c.label == 2);
  CHECK(c.scores.size() == 1);
}

TEST_CASE("a detector built from rendered views recovers the rendering view") {
  // Root-only detector whose per-bin template is the mean HOG of a figure
  // rendered at that bin's view; test frames come from another subject.
  // Orthographic renderings of a left-right symmetric figure at theta and
  // pi - theta coincide, so bin 3 (108 deg) and bin 2 (72 deg) are twins.
  const int bins = kDefaultViewBins, frames = 16, w = 48, h = 64, cell = 4;
  PoseModel pose;
  pose.coupling = ViewCoupling::Independent;
  pose.bin_centers = uniform_view_bins(bins);
  pose.active.assign(bins, true);
  pose.root.width = w / cell - 2;
  pose.root.height = h / cell - 2;
  pose.root.allocate(bins, kDescriptorChannels);
  auto hog_frames = [&](int subject, Scalar view) {
    std::vector<FeatureMap> out;
    const RenderCamera cam{view, 30, Vec2(w / 2.0, h - 6.0)};
    for (const auto& body : synth_motion(1, subject, frames, 3))
      out.push_back(compute_hog(render_stick_figure(project_joints(to_camera(body, view), cam), w, h, 60, 200), cell));
    return out;
  };
  for (int b = 0; b < bins; ++b) {
    MatX mean = MatX::Zero(pose.root.height, pose.root.width * kDescriptorChannels);
    for (const auto& m : hog_frames(1, pose.bin_centers[b])) mean += m.data / frames;
    pose.root.appearance[b] = mean.array() - mean.mean();
  }
  const int target = 3, twin = 2;
  int hits = 0;
  std::vector<Detection> dets;
  for (const auto& m : hog_frames(4, pose.bin_centers[target])) {
    FeaturePyramid f;
    f.cell = cell;
    f.frame_width = w;
    f.frame_height = h;
    FeatureLevel lv;
    lv.hog = m;
    lv.hof = m;
    lv.hof.data.setZero();
    f.levels.push_back(lv);
    const FrameDetections d = detect_frame(f, pose);
    hits += d.best_bin[0](0, 0) == target || d.best_bin[0](0, 0) == twin;
    Detection det;
    det.bin = d.best_bin[0](0, 0);
    det.score = d.pose_map.levels[0].scores(0, 0);
    dets.push_back(det);
  }
  CHECK(hits >= int(0.9 * frames));
  const int view = estimate_view(dets);
  CHECK((view == target || view == twin));
}
