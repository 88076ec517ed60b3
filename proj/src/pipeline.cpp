#include "mstaog/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mstaog/archive.hpp"
#include "mstaog/error.hpp"
#include "mstaog/inference.hpp"
#include "mstaog/learning.hpp"
#include "mstaog/parallel.hpp"

namespace mstaog {

namespace fs = std::filesystem;
using nlohmann::json;

TrainLog::TrainLog(const fs::path& file) : out_(std::make_unique<std::ofstream>(file)) {
  if (!*out_) throw IngestError("cannot write log " + file.string());
}

void TrainLog::write(const std::string& stage, json record) {
  std::lock_guard lock(mutex_);
  record["stage"] = stage;
  if (out_) *out_ << record.dump() << '\n' << std::flush;
  records_.push_back(std::move(record));
}

std::shared_ptr<const VideoFeatures> FeatureCache::get(const VideoSample& video) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = entries_.find(video.id); it != entries_.end()) return it->second;
  }
  auto f = std::make_shared<const VideoFeatures>(compute_video_features(video, cfg_));
  std::lock_guard lock(mutex_);
  return entries_.emplace(video.id, std::move(f)).first->second;
}

void FeatureCache::prefetch(const Dataset& d) {
  std::vector<const VideoSample*> missing;
  {
    std::lock_guard lock(mutex_);
    for (const auto& s : d.samples)
      if (!entries_.count(s.id)) missing.push_back(&s);
  }
  std::vector<std::shared_ptr<const VideoFeatures>> out(missing.size());
  parallel_for(missing.size(), jobs_, [&](std::size_t i) {
    out[i] = std::make_shared<const VideoFeatures>(compute_video_features(*missing[i], cfg_));
  });
  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < missing.size(); ++i) entries_.emplace(missing[i]->id, out[i]);
}

std::vector<MiningVideo> mining_videos(const Dataset& d) {
  std::vector<MiningVideo> out;
  for (const auto& s : d.samples)
    if (s.has_skeletons()) out.push_back({s.label, normalize_sequence(s.skeletons)});
  return out;
}

namespace {

PoseCandidate best_single_item(const ItemTable& items, const ActivationTable& table, int label,
                               Scalar* support, Scalar* disc) {
  PoseCandidate best;
  Scalar best_disc = -1;
  for (int k = 0; k < int(items.size()); ++k)
    for (int i = 0; i < int(items[k].size()); ++i) {
      PoseCandidate p{{{k, i}}};
      const auto sd = support_and_discrimination(table.activations(p), table.labels(), table.classes());
      if (std::isfinite(sd.discrimination[label]) && sd.discrimination[label] > best_disc) {
        best_disc = sd.discrimination[label];
        best = p;
        *support = sd.support[label];
        *disc = sd.discrimination[label];
      }
    }
  return best;
}

json joint_set_json(const JointSet& s) {
  json pos = json::array(), mot = json::array();
  for (const auto& p : s.positions) pos.push_back({p.x(), p.y(), p.z()});
  for (const auto& m : s.motions) mot.push_back({m.x(), m.y(), m.z()});
  return {{"positions", pos}, {"motions", mot}, {"visible", s.visible}};
}

JointSet joint_set_from(const json& j) {
  JointSet s;
  for (const auto& p : j.at("positions")) s.positions.emplace_back(p.at(0), p.at(1), p.at(2));
  for (const auto& m : j.at("motions")) s.motions.emplace_back(m.at(0), m.at(1), m.at(2));
  s.visible = j.at("visible").get<std::vector<bool>>();
  if (s.motions.size() != s.positions.size() || s.visible.size() != s.positions.size())
    throw IngestError("dictionary: joint set arrays differ in length");
  return s;
}

}  // namespace

MinedDictionary mine_dataset(const Dataset& train, const RunConfig& cfg, TrainLog& log) {
  const auto videos = mining_videos(train);
  if (videos.empty()) throw DegenerateError("mining: no training video has skeletons");
  const auto& parts = default_parts();
  const MiningConfig& mc = cfg.mining;
  const int stride = std::max(1, mc.frame_stride);

  MinedDictionary dict;
  dict.items.resize(parts.size());
  parallel_for(parts.size(), cfg.jobs, [&](std::size_t k) {
    std::vector<JointSet> examples;
    for (const auto& v : videos)
      for (std::size_t t = 0; t < v.skeletons.size(); t += stride)
        examples.push_back(joint_set(v.skeletons[t], parts[k].joints));
    dict.items[k] = cluster_parts(examples, int(k), mc);
  });
  for (std::size_t k = 0; k < parts.size(); ++k) {
    json sizes = json::array();
    for (const auto& it : dict.items[k]) sizes.push_back(it.members);
    log.write("cluster", {{"part", parts[k].name}, {"items", dict.items[k].size()}, {"members", sizes}});
  }

  const ActivationTable table(dict.items, parts, videos, mc);
  MiningTrace trace;
  auto mined = mine_poses(dict.items, table, mc, &trace);
  log.write("mine", {{"poses", mined.size()},
                     {"examined", trace.examined},
                     {"monotonicity_violations", trace.monotonicity_violations}});
  const auto& items = dict.items;
  auto pruned = prune_similar(
      std::move(mined),
      [&](const MinedPose& a, const MinedPose& b) { return pose_distance(a.pose, b.pose, items, mc); }, mc);
  dict.poses = cap_per_class(std::move(pruned), mc);

  // Every class with videos keeps at least one pose.
  std::vector<int> labels(table.labels().begin(), table.labels().end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  for (int c : labels) {
    const bool covered = std::any_of(dict.poses.begin(), dict.poses.end(),
                                     [&](const MinedPose& p) { return p.label == c; });
    if (covered) continue;
    MinedPose p;
    p.label = c;
    p.pose = best_single_item(dict.items, table, c, &p.support, &p.discrimination);
    if (p.pose.items.empty()) continue;
    log.write("mine_fallback", {{"label", c}, {"support", p.support}, {"discrimination", p.discrimination}});
    dict.poses.push_back(std::move(p));
  }
  log.write("prune", {{"poses", dict.poses.size()}});
  return dict;
}

json dictionary_to_json(const MinedDictionary& dict, const std::vector<std::string>& vocabulary) {
  json j;
  j["items"] = json::array();
  for (std::size_t k = 0; k < dict.items.size(); ++k) {
    json list = json::array();
    for (const auto& it : dict.items[k])
      list.push_back({{"part", it.part}, {"index", it.index}, {"members", it.members},
                      {"mean", joint_set_json(it.mean)}});
    j["items"].push_back(std::move(list));
  }
  j["poses"] = json::array();
  for (const auto& p : dict.poses) {
    json refs = json::array();
    for (const auto& r : p.pose.items) refs.push_back({r.part, r.item});
    j["poses"].push_back({{"label", p.label},
                          {"action", p.label >= 0 && p.label < int(vocabulary.size()) ? vocabulary[p.label] : ""},
                          {"items", refs},
                          {"support", p.support},
                          {"discrimination", p.discrimination}});
  }
  return j;
}

MinedDictionary dictionary_from_json(const json& j) {
  MinedDictionary d;
  try {
    for (const auto& list : j.at("items")) {
      std::vector<PartItem> items;
      for (const auto& it : list)
        items.push_back({it.at("part"), it.at("index"), joint_set_from(it.at("mean")), it.at("members")});
      d.items.push_back(std::move(items));
    }
    for (const auto& p : j.at("poses")) {
      MinedPose m;
      m.label = p.at("label");
      m.support = p.at("support");
      m.discrimination = p.at("discrimination");
      for (const auto& r : p.at("items")) {
        const ItemRef ref{r.at(0), r.at(1)};
        if (ref.part < 0 || ref.part >= int(d.items.size()) || ref.item < 0 ||
            ref.item >= int(d.items[ref.part].size()))
          throw IngestError("dictionary: pose references a missing item");
        m.pose.items.push_back(ref);
      }
      d.poses.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw IngestError(std::string("dictionary: ") + e.what());
  }
  return d;
}

std::string format_pose_table(const MinedDictionary& dict, const std::vector<std::string>& vocabulary) {
  const auto& parts = default_parts();
  std::ostringstream os;
  os << std::left << std::setw(6) << "pose" << std::setw(14) << "class" << std::setw(10) << "support"
     << std::setw(10) << "disc" << "items\n";
  for (std::size_t i = 0; i < dict.poses.size(); ++i) {
    const auto& p = dict.poses[i];
    const std::string name =
        p.label >= 0 && p.label < int(vocabulary.size()) ? vocabulary[p.label] : std::to_string(p.label);
    os << std::setw(6) << i << std::setw(14) << name << std::fixed << std::setprecision(3) << std::setw(10)
       << p.support << std::setw(10) << p.discrimination;
    os.unsetf(std::ios::fixed);
    for (std::size_t r = 0; r < p.pose.items.size(); ++r) {
      const auto& ref = p.pose.items[r];
      os << (r ? " " : "")
         << (ref.part < int(parts.size()) ? parts[ref.part].name : std::to_string(ref.part)) << ':'
         << ref.item;
    }
    os << '\n';
  }
  return os.str();
}

namespace {

struct TrainVideo {
  const VideoSample* sample = nullptr;
  std::shared_ptr<const VideoFeatures> features;
  std::vector<Skeleton3D> normalized;
  Scalar theta = 0;
};

Scalar median(std::vector<Scalar> v) {
  if (v.empty()) throw DegenerateError("median of an empty set");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + h, v.end());
  return v[h];
}

Vec2 anchor_pixel(const Joints2D& j2, const PartDefinition& part) {
  Vec2 c = Vec2::Zero();
  for (int j : part.joints) c += j2[j];
  return c / Scalar(part.joints.size());
}

Cell to_cell(const Vec2& px, Scalar scale, int cell) {
  return {int(std::lround(pixel_to_cell(px.x(), scale, cell))),
          int(std::lround(pixel_to_cell(px.y(), scale, cell)))};
}

bool inside(const FeatureMap& m, Cell c) { return c.x >= 0 && c.y >= 0 && c.x < m.cols && c.y < m.rows; }

int nearest_bin(const std::vector<Scalar>& centers, Scalar theta) {
  int best = 0;
  for (int k = 1; k < int(centers.size()); ++k)
    if (angular_distance(theta, centers[k]) < angular_distance(theta, centers[best])) best = k;
  return best;
}

struct Positive {
  const TrainVideo* video = nullptr;
  std::size_t frame = 0;
  Scalar distance = 0;
};

/// Frames of class-c videos whose skeleton lies within eta of the pose; a
/// video without such a frame contributes nothing unless no video does, in
/// which case each video contributes its closest frame.
std::vector<Positive> harvest(const MinedPose& pose, const ItemTable& items,
                              const std::vector<TrainVideo>& videos, const RunConfig& cfg) {
  const auto& parts = default_parts();
  std::vector<Positive> within, closest;
  for (const auto& v : videos) {
    if (v.sample->label != pose.label || v.sample->joints2d.size() < v.normalized.size()) continue;
    Positive best{&v, 0, std::numeric_limits<Scalar>::infinity()};
    for (std::size_t t = 0; t < v.normalized.size(); ++t) {
      const Scalar d =
          pose_frame_distance(pose.pose, items, parts, v.normalized[t], cfg.mining) / cfg.mining.distance_scale;
      if (d < cfg.training.eta) within.push_back({&v, t, d});
      if (d < best.distance) best = {&v, t, d};
    }
    if (std::isfinite(best.distance)) closest.push_back(best);
  }
  std::vector<Positive>& out = within.empty() ? closest : within;
  std::stable_sort(out.begin(), out.end(),
                   [](const Positive& a, const Positive& b) { return a.distance < b.distance; });
  if (int(out.size()) > cfg.training.max_positives) out.resize(cfg.training.max_positives);
  return out;
}

/// Log records of one worker, flushed in a fixed order afterwards.
struct Notes {
  std::vector<std::pair<std::string, json>> records;
  void write(const std::string& stage, json record) { records.emplace_back(stage, std::move(record)); }
};

struct PoseTraining {
  bool trained = false;
  PoseModel model;
  TrainResult result;
  int positives = 0;
};

PoseTraining train_one(const MinedPose& mined, int id, const ItemTable& items,
                       const std::vector<TrainVideo>& videos, const RunConfig& cfg, Notes& log) {
  const auto& parts = default_parts();
  const int cell = cfg.features.cell;
  PoseTraining out;
  const auto pos = harvest(mined, items, videos, cfg);
  if (pos.empty()) {
    log.write("pose_skipped", {{"pose", id}, {"reason", "no annotated positives"}});
    return out;
  }

  std::vector<int> child_parts;
  for (const auto& r : mined.pose.items)
    if (r.part != 0 && std::find(child_parts.begin(), child_parts.end(), r.part) == child_parts.end())
      child_parts.push_back(r.part);
  std::vector<int> used{0};
  used.insert(used.end(), child_parts.begin(), child_parts.end());

  PoseModel m;
  m.id = id;
  m.label = mined.label;
  for (const auto& r : mined.pose.items) m.items.push_back(r.part * 1000 + r.item);
  m.coupling = cfg.coupling;
  m.bin_centers = uniform_view_bins(cfg.view_bins);
  m.channels = kDescriptorChannels;

  // Scaled orthographic cameras from the 2D/3D anchor correspondences.
  std::vector<Scalar> k1s, k2s;
  std::map<int, std::pair<std::vector<Scalar>, std::vector<Scalar>>> per_camera;
  std::map<int, Scalar> camera_theta;
  for (const auto& p : pos) {
    const auto& s3 = p.video->normalized[p.frame];
    const auto& j2 = p.video->sample->joints2d[p.frame];
    const Vec3 r3 = part_anchor(s3, parts[0]);
    const Vec2 r2 = anchor_pixel(j2, parts[0]);
    std::vector<Vec3> a3;
    std::vector<Vec2> a2;
    for (std::size_t k = 1; k < parts.size(); ++k) {
      a3.push_back(part_anchor(s3, parts[k]) - r3);
      const Vec2 d = anchor_pixel(j2, parts[k]) - r2;
      a2.emplace_back(d.x(), -d.y());
    }
    try {
      const auto fit = fit_projection<Scalar>(a3, a2, p.video->theta);
      k1s.push_back(fit.k1);
      k2s.push_back(fit.k2);
      auto& cam = per_camera[p.video->sample->camera];
      cam.first.push_back(fit.k1);
      cam.second.push_back(fit.k2);
      camera_theta[p.video->sample->camera] = p.video->theta;
    } catch (const NumericError&) {
    }
  }
  if (k1s.empty()) {
    log.write("pose_skipped", {{"pose", id}, {"reason", "camera fit failed"}});
    return out;
  }
  m.k1 = median(k1s);
  m.k2 = median(k2s);
  for (const auto& [camera, ks] : per_camera)
    m.cameras.push_back({median(ks.first), median(ks.second), camera_theta[camera]});

  // Windows cover the median projected extent of each part plus one cell.
  auto make_part = [&](int part_id) {
    std::vector<Scalar> ws, hs;
    for (const auto& p : pos) {
      const auto& j2 = p.video->sample->joints2d[p.frame];
      Scalar x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
      for (int j : parts[part_id].joints) {
        x0 = std::min(x0, j2[j].x());
        x1 = std::max(x1, j2[j].x());
        y0 = std::min(y0, j2[j].y());
        y1 = std::max(y1, j2[j].y());
      }
      ws.push_back(x1 - x0);
      hs.push_back(y1 - y0);
    }
    auto cells = [&](Scalar px) {
      return std::clamp(int(std::ceil((px + cell) / cell)), cfg.training.min_window, cfg.training.max_window);
    };
    PartModel pm;
    pm.part_id = part_id;
    pm.width = cells(median(ws));
    pm.height = cells(median(hs));
    pm.anchor_x = pm.width / 2;
    pm.anchor_y = pm.height / 2;
    pm.allocate(m.bins(), m.channels);
    return pm;
  };
  m.root = make_part(0);
  std::vector<Skeleton3D> pos_skeletons;
  for (const auto& p : pos) pos_skeletons.push_back(p.video->normalized[p.frame]);
  const auto offsets = estimate_offsets<Scalar>(pos_skeletons, parts, cfg.training.sigma0);
  for (int k : child_parts) {
    PartModel pm = make_part(k);
    pm.offset = offsets[k];
    m.children.push_back(std::move(pm));
  }

  // Annotated latent values; positives live on the finest level.
  std::vector<TrainExample> positives;
  std::vector<int> bin_of;
  std::vector<Positive> kept;
  for (const auto& p : pos) {
    const FeaturePyramid& f = p.video->features->frames.at(p.frame);
    const auto& j2 = p.video->sample->joints2d[p.frame];
    const FeatureLevel& lv = f.levels.at(0);
    TrainExample ex;
    ex.features = &f;
    ex.level = 0;
    ex.theta = p.video->theta;
    ex.root = to_cell(anchor_pixel(j2, parts[0]), lv.scale, f.cell);
    bool ok = inside(lv.hog, ex.root);
    for (int k : child_parts) {
      ex.parts.push_back(to_cell(anchor_pixel(j2, parts[k]), lv.scale, f.cell));
      ok = ok && inside(lv.hog, ex.parts.back());
    }
    if (!ok) continue;
    positives.push_back(std::move(ex));
    kept.push_back(p);
    bin_of.push_back(nearest_bin(m.bin_centers, p.video->theta));
  }
  if (positives.empty()) {
    log.write("pose_skipped", {{"pose", id}, {"reason", "positives outside the feature grid"}});
    return out;
  }

  if (m.coupling == ViewCoupling::Shared) {
    m.active.assign(m.bins(), true);
  } else {
    m.active.assign(m.bins(), false);
    for (int b : bin_of) m.active[b] = true;
    const Mat2 cov = Vec2(m.k1 * m.k1, m.k2 * m.k2).asDiagonal() * (cfg.training.sigma0 * cfg.training.sigma0);
    for (std::size_t i = 0; i < m.children.size(); ++i) {
      std::vector<Vec2> sum(m.bins(), Vec2::Zero());
      std::vector<int> count(m.bins(), 0);
      Vec2 all = Vec2::Zero();
      for (std::size_t n = 0; n < positives.size(); ++n) {
        const auto& j2 = kept[n].video->sample->joints2d[kept[n].frame];
        const Vec2 d = anchor_pixel(j2, parts[child_parts[i]]) - anchor_pixel(j2, parts[0]);
        sum[bin_of[n]] += d;
        count[bin_of[n]] += 1;
        all += d;
      }
      all /= Scalar(positives.size());
      m.children[i].view_offsets.resize(m.bins());
      for (int b = 0; b < m.bins(); ++b)
        m.children[i].view_offsets[b] = {count[b] ? Vec2(sum[b] / count[b]) : all, cov};
    }
  }

  // Negatives: windows on frames of other classes, half at the person.
  std::vector<const TrainVideo*> others;
  for (const auto& v : videos)
    if (v.sample->label != mined.label) others.push_back(&v);
  if (others.empty()) {
    log.write("pose_skipped", {{"pose", id}, {"reason", "no negative videos"}});
    return out;
  }
  std::mt19937_64 rng(cfg.training.seed * 1000003ULL + std::uint64_t(id));
  std::vector<TrainExample> negatives;
  const int wanted = cfg.training.negatives;
  for (int n = 0, attempts = 0; n < wanted && attempts < 20 * wanted; ++attempts) {
    const TrainVideo& v = *others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, v.features->frames.size() - 1)(rng);
    const FeaturePyramid& f = v.features->frames[t];
    TrainExample ex;
    ex.features = &f;
    ex.label = -1;
    if (n % 2 == 0 && t < v.sample->joints2d.size()) {
      ex.level = 0;
      const Cell c = to_cell(anchor_pixel(v.sample->joints2d[t], parts[0]), f.levels[0].scale, f.cell);
      std::uniform_int_distribution<int> jitter(-1, 1);
      ex.root = {c.x + jitter(rng), c.y + jitter(rng)};
    } else {
      ex.level = std::uniform_int_distribution<int>(0, int(f.levels.size()) - 1)(rng);
      const FeatureMap& g = f.levels[ex.level].hog;
      if (g.empty()) continue;
      ex.root = {std::uniform_int_distribution<int>(0, g.cols - 1)(rng),
                 std::uniform_int_distribution<int>(0, g.rows - 1)(rng)};
    }
    if (!inside(f.levels[ex.level].hog, ex.root)) continue;
    negatives.push_back(ex);
    ++n;
  }
  std::vector<const FeaturePyramid*> bootstrap;
  for (const TrainVideo* v : others)
    for (const auto& f : v->features->frames) bootstrap.push_back(&f);

  TrainingConfig tc = cfg.training;
  tc.seed = cfg.training.seed + std::uint64_t(id);
  out.result = train_pose(std::move(m), positives, std::move(negatives), bootstrap, tc);
  out.model = out.result.model;
  quantize_to_float(out.model);
  out.trained = true;
  out.positives = int(positives.size());
  log.write("pose", {{"pose", id},
                     {"label", mined.label},
                     {"positives", out.positives},
                     {"negatives", out.result.negatives_used},
                     {"bootstrap_added", out.result.bootstrap_added},
                     {"objective", out.result.objective},
                     {"objective_stage", out.result.objective_stage},
                     {"mean_hinge", out.result.mean_hinge},
                     {"k1", out.model.k1},
                     {"k2", out.model.k2}});
  return out;
}

}  // namespace

ModelArchive train_pipeline(const Dataset& train, const RunConfig& cfg, FeatureCache& cache, TrainLog& log,
                            const MinedDictionary* dictionary) {
  cfg.validate();
  if (train.empty()) throw DegenerateError("train: empty training set");
  const FeatureConfig& fc = cache.config();
  if (fc.cell != cfg.features.cell || fc.scales != cfg.features.scales || fc.scale_step != cfg.features.scale_step)
    throw ConfigError("train: feature cache configuration differs from the run configuration");

  MinedDictionary mined;
  if (dictionary) mined = *dictionary;
  else mined = mine_dataset(train, cfg, log);
  if (mined.poses.empty()) throw DegenerateError("train: no poses were mined");

  cache.prefetch(train);
  std::vector<TrainVideo> videos;
  for (const auto& s : train.samples) {
    TrainVideo v;
    v.sample = &s;
    v.features = cache.get(s);
    if (s.has_skeletons()) {
      Normalization n;
      v.normalized = normalize_sequence(s.skeletons, &n);
      v.theta = view_angle_of(n);
    }
    videos.push_back(std::move(v));
  }

  std::vector<PoseTraining> trained(mined.poses.size());
  std::vector<Notes> notes(mined.poses.size());
  parallel_for(mined.poses.size(), cfg.jobs, [&](std::size_t i) {
    trained[i] = train_one(mined.poses[i], int(i), mined.items, videos, cfg, notes[i]);
  });
  for (auto& n : notes)
    for (auto& [stage, record] : n.records) log.write(stage, std::move(record));

  // Raw pose maps of every training video, reused for validation and pooling.
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < trained.size(); ++i)
    if (trained[i].trained) ids.push_back(i);
  if (ids.empty()) throw DegenerateError("train: no pose detector could be trained");
  DetectOptions opt;
  opt.max_detections = 0;
  opt.backtrack = false;
  std::vector<std::vector<std::vector<ResponseMap>>> maps(ids.size(), std::vector<std::vector<ResponseMap>>(videos.size()));
  parallel_for(ids.size() * videos.size(), cfg.jobs, [&](std::size_t job) {
    const std::size_t p = job / videos.size(), v = job % videos.size();
    for (const auto& f : videos[v].features->frames)
      maps[p][v].push_back(detect_frame(f, trained[ids[p]].model, opt).pose_map);
  });

  std::vector<Scalar> aps;
  for (std::size_t p = 0; p < ids.size(); ++p) {
    std::vector<Scalar> scores;
    std::vector<int> positive;
    Scalar sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < videos.size(); ++v) {
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      for (const auto& map : maps[p][v])
        for (const auto& lv : map.levels)
          for (Eigen::Index i = 0; i < lv.scores.size(); ++i) {
            const Scalar x = lv.scores.data()[i];
            if (!std::isfinite(x)) continue;
            best = std::max(best, x);
            sum += x;
            sq += x * x;
            ++count;
          }
      scores.push_back(best);
      positive.push_back(videos[v].sample->label == trained[ids[p]].model.label ? 1 : 0);
    }
    auto& model = trained[ids[p]].model;
    if (count > 0) {
      model.response_mean = sum / Scalar(count);
      const Scalar var = std::max<Scalar>(0, sq / Scalar(count) - model.response_mean * model.response_mean);
      model.response_std = var > 1e-24 ? std::sqrt(var) : 1;
    }
    aps.push_back(average_precision(scores, positive));
  }
  auto keep = prune_by_validation(aps, cfg.mining);
  if (keep.empty()) keep.push_back(std::size_t(std::max_element(aps.begin(), aps.end()) - aps.begin()));
  log.write("validation", {{"average_precision", aps}, {"kept", keep}});

  ModelArchive archive;
  archive.features = fc;
  archive.parts = default_parts();
  archive.vocabulary = train.vocabulary;
  std::vector<int> pose_ids;
  for (std::size_t k : keep) {
    archive.poses.push_back(trained[ids[k]].model);
    pose_ids.push_back(archive.poses.back().id);
  }

  std::vector<ActionTrainingVideo> action_videos(videos.size());
  for (std::size_t v = 0; v < videos.size(); ++v) {
    auto& av = action_videos[v];
    av.label = videos[v].sample->label;
    av.lowres = videos[v].features->lowres;
    for (std::size_t k : keep) {
      const PoseModel& pose = trained[ids[k]].model;
      std::vector<ResponseMap> std_maps;
      for (const auto& map : maps[k][v]) std_maps.push_back(standardized(map, pose));
      av.pose_pyramids.push_back(pyramid_pool(std_maps));
    }
  }
  archive.actions = train_action(action_videos, archive.vocabulary, pose_ids, cfg.training, cfg.use_lowres);
  for (auto& a : archive.actions) quantize_to_float(a);
  archive.validate();
  log.write("actions", {{"actions", archive.actions.size()}, {"poses", pose_ids}});
  return archive;
}

EvalReport evaluate(const ModelArchive& archive, const Dataset& test, FeatureCache& cache, int jobs) {
  std::vector<int> truth;
  for (const auto& s : test.samples) {
    const auto it = std::find(archive.vocabulary.begin(), archive.vocabulary.end(), s.action);
    if (it == archive.vocabulary.end())
      throw ConfigError("evaluate: action '" + s.action + "' is not in the model vocabulary");
    truth.push_back(int(it - archive.vocabulary.begin()));
  }
  cache.prefetch(test);
  std::vector<VideoResult> results(test.size());
  parallel_for(test.size(), jobs, [&](std::size_t i) {
    const auto& s = test.samples[i];
    const auto c = classify(*cache.get(s), archive);
    VideoResult& r = results[i];
    r.id = s.id;
    r.truth = truth[i];
    r.predicted = c.label;
    r.scores.assign(archive.vocabulary.size(), -std::numeric_limits<Scalar>::infinity());
    for (std::size_t a = 0; a < archive.actions.size(); ++a) r.scores[archive.actions[a].label] = c.scores[a];
  });
  return make_report(archive.vocabulary, std::move(results));
}

}  // namespace mstaog
