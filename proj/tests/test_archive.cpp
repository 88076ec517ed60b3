#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "mstaog/archive.hpp"
#include "mstaog/error.hpp"
#include "support.hpp"

using namespace mstaog;

namespace {

ModelArchive sample_archive(std::mt19937_64& rng) {
  ModelArchive a;
  a.features.cell = 4;
  a.features.scales = 3;
  a.parts = default_parts();
  a.vocabulary = {"walk", "wave"};
  for (int i = 0; i < 2; ++i) {
    PoseModel p = testing::toy_pose(2, 4, kDescriptorChannels,
                                    i == 0 ? ViewCoupling::Shared : ViewCoupling::Independent, rng);
    p.id = 10 + i;
    p.label = i;
    p.items = {1000, 2001};
    p.active[1] = false;
    p.cameras = {{1.5, 2.5, 0.25}};
    p.response_mean = 0.125;
    p.response_std = 3.5;
    quantize_to_float(p);
    a.poses.push_back(p);
  }
  std::normal_distribution<Scalar> n(0, 1);
  for (int c = 0; c < 2; ++c) {
    ActionModel m;
    m.label = c;
    m.name = a.vocabulary[c];
    m.pose_ids = {10, 11};
    m.lowres.push_back({LowResKind::BoxSize, Vec2(n(rng), n(rng)), n(rng)});
    m.weights = VecX::NullaryExpr(3 * kPyramidDims, [&] { return n(rng); });
    m.bias = n(rng);
    quantize_to_float(m);
    a.actions.push_back(m);
  }
  return a;
}

void check_equal(const PartModel& a, const PartModel& b) {
  CHECK(a.part_id == b.part_id);
  CHECK(a.width == b.width);
  CHECK(a.height == b.height);
  CHECK(a.anchor_x == b.anchor_x);
  CHECK(a.anchor_y == b.anchor_y);
  REQUIRE(a.appearance.size() == b.appearance.size());
  for (std::size_t k = 0; k < a.appearance.size(); ++k) {
    CHECK(a.appearance[k] == b.appearance[k]);
    CHECK(a.motion[k] == b.motion[k]);
  }
  CHECK(a.offset.mean == b.offset.mean);
  CHECK(a.offset.variance == b.offset.variance);
  REQUIRE(a.view_offsets.size() == b.view_offsets.size());
  for (std::size_t k = 0; k < a.view_offsets.size(); ++k) {
    CHECK(a.view_offsets[k].mean == b.view_offsets[k].mean);
    CHECK(a.view_offsets[k].covariance == b.view_offsets[k].covariance);
  }
}

}  // namespace

TEST_CASE("archives round-trip exactly after quantization") {
  std::mt19937_64 rng(61);
  const ModelArchive a = sample_archive(rng);
  testing::TempDir dir("archive");
  save_archive(a, dir.path());
  const ModelArchive b = load_archive(dir.path());
  CHECK(b.features.cell == 4);
  CHECK(b.features.scales == 3);
  CHECK(b.vocabulary == a.vocabulary);
  REQUIRE(b.parts.size() == a.parts.size());
  for (std::size_t i = 0; i < a.parts.size(); ++i) CHECK(b.parts[i].joints == a.parts[i].joints);
  REQUIRE(b.poses.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const PoseModel &p = a.poses[i], &q = b.poses[i];
    CHECK(q.id == p.id);
    CHECK(q.label == p.label);
    CHECK(q.items == p.items);
    CHECK(q.coupling == p.coupling);
    CHECK(q.bin_centers == p.bin_centers);
    CHECK(q.active == p.active);
    CHECK(q.k1 == p.k1);
    CHECK(q.bias == p.bias);
    CHECK(q.response_std == p.response_std);
    REQUIRE(q.cameras.size() == 1);
    CHECK(q.cameras[0].theta == p.cameras[0].theta);
    check_equal(q.root, p.root);
    REQUIRE(q.children.size() == p.children.size());
    for (std::size_t c = 0; c < p.children.size(); ++c) check_equal(q.children[c], p.children[c]);
  }
  REQUIRE(b.actions.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(b.actions[i].name == a.actions[i].name);
    CHECK(b.actions[i].weights == a.actions[i].weights);
    CHECK(b.actions[i].bias == a.actions[i].bias);
    REQUIRE(b.actions[i].lowres.size() == 1);
    CHECK(b.actions[i].lowres[0].kind == LowResKind::BoxSize);
    CHECK(b.actions[i].lowres[0].weights == a.actions[i].lowres[0].weights);
  }
  // Saving the loaded archive reproduces the files byte for byte.
  testing::TempDir again("archive");
  save_archive(b, again.path());
  CHECK(testing::read_bytes(dir / "index.json") == testing::read_bytes(again / "index.json"));
  CHECK(testing::read_bytes(dir / "weights.bin") == testing::read_bytes(again / "weights.bin"));
}

TEST_CASE("archive loading errors") {
  std::mt19937_64 rng(62);
  testing::TempDir dir("archive");
  CHECK_THROWS_AS(load_archive(dir.path()), IngestError);
  save_archive(sample_archive(rng), dir.path());
  std::string index = testing::read_bytes(dir / "index.json");
  const auto at = index.find("\"version\": 1");
  REQUIRE(at != std::string::npos);
  index.replace(at, 12, "\"version\": 9");
  {
    std::ofstream out(dir / "index.json", std::ios::binary);
    out << index;
  }
  CHECK_THROWS_AS(load_archive(dir.path()), IngestError);
  {
    std::ofstream out(dir / "index.json", std::ios::binary);
    out << "{not json";
  }
  CHECK_THROWS_AS(load_archive(dir.path()), ParseError);
}

TEST_CASE("archives referencing missing poses are rejected") {
  std::mt19937_64 rng(63);
  ModelArchive a = sample_archive(rng);
  a.actions[0].pose_ids = {10, 99};
  testing::TempDir dir("archive");
  CHECK_THROWS_AS(save_archive(a, dir.path()), ConfigError);
}
