#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "mstaog/error.hpp"
#include "mstaog/pipeline.hpp"
#include "mstaog/synth.hpp"

using namespace mstaog;

namespace {

SynthConfig corpus_config() {
  SynthConfig c;
  c.classes = 2;
  c.views_deg = {0};
  c.subjects = 4;
  c.frames = 16;
  c.width = 48;
  c.height = 64;
  c.pixels_per_meter = 28;
  return c;
}

RunConfig run_config() {
  RunConfig r;
  r.features.cell = 4;
  r.features.scales = 1;
  r.features.flow.iterations = 10;
  r.features.flow.levels = 1;
  r.view_bins = 4;
  r.mining.distance_scale = 0.05;
  r.mining.frame_stride = 2;
  r.mining.max_poses_per_class = 1;
  r.training.negatives = 30;
  r.training.epochs = 2;
  r.training.bootstrap_rounds = 0;
  r.training.latent_iterations = 1;
  r.training.max_positives = 20;
  r.jobs = 1;
  return r;
}

const Dataset& corpus() {
  static const Dataset d = generate_corpus(corpus_config());
  return d;
}

}  // namespace

TEST_CASE("mining covers every class and the dictionary round-trips through JSON") {
  TrainLog log;
  const RunConfig cfg = run_config();
  const MinedDictionary dict = mine_dataset(corpus(), cfg, log);
  std::set<int> labels;
  for (const auto& p : dict.poses) labels.insert(p.label);
  CHECK(labels == std::set<int>{0, 1});
  CHECK(dict.items.size() == default_parts().size());
  CHECK(!log.records().empty());

  const auto j = dictionary_to_json(dict, corpus().vocabulary);
  const MinedDictionary back = dictionary_from_json(j);
  CHECK(dictionary_to_json(back, corpus().vocabulary) == j);
  REQUIRE(back.poses.size() == dict.poses.size());
  for (std::size_t i = 0; i < dict.poses.size(); ++i) CHECK(back.poses[i].pose == dict.poses[i].pose);
  CHECK(format_pose_table(dict, corpus().vocabulary).find("support") != std::string::npos);

  auto broken = j;
  broken["poses"][0]["items"][0][1] = 999;
  CHECK_THROWS_AS(dictionary_from_json(broken), IngestError);
}

TEST_CASE("training and evaluation on a small corpus") {
  TrainLog log;
  const RunConfig cfg = run_config();
  FeatureCache cache(cfg.features, 1);
  const ModelArchive archive = train_pipeline(corpus(), cfg, cache, log);
  CHECK(archive.actions.size() == 2);
  CHECK(!archive.poses.empty());
  CHECK_NOTHROW(archive.validate());
  for (const auto& p : archive.poses) {
    CHECK(p.bins() == 4);
    CHECK(p.response_std > 0);
  }
  const EvalReport r = evaluate(archive, corpus(), cache, 1);
  CHECK(r.confusion.total() == int(corpus().size()));
  for (const auto& v : r.videos) {
    CHECK(v.scores.size() == 2);
    for (Scalar s : v.scores) CHECK(std::isfinite(s));
  }
  // Training videos are classified better than chance.
  CHECK(r.confusion.accuracy() > 0.5);

  Dataset other = corpus();
  other.samples.resize(1);
  other.samples[0].action = "jump";
  CHECK_THROWS_AS(evaluate(archive, other, cache, 1), ConfigError);
}

TEST_CASE("pipeline input errors") {
  TrainLog log;
  const RunConfig cfg = run_config();
  Dataset bare = corpus();
  for (auto& s : bare.samples) s.skeletons.clear();
  CHECK_THROWS_AS(mine_dataset(bare, cfg, log), DegenerateError);
  FeatureCache cache(cfg.features, 1);
  CHECK_THROWS_AS(train_pipeline(Dataset{}, cfg, cache, log), DegenerateError);
  FeatureConfig other = cfg.features;
  other.cell = 8;
  FeatureCache mismatched(other, 1);
  CHECK_THROWS_AS(train_pipeline(corpus(), cfg, mismatched, log), ConfigError);
  MinedDictionary empty;
  CHECK_THROWS_AS(train_pipeline(corpus(), cfg, cache, log, &empty), DegenerateError);
}
