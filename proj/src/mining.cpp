#include "mstaog/mining.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "mstaog/error.hpp"

namespace mstaog {

SimilarityTransform fit_similarity(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) throw SizeError("fit_similarity: joint count mismatch");
  if (src.empty()) throw SizeError("fit_similarity: empty joint set");
  const Scalar n = Scalar(src.size());
  Vec3 ms = Vec3::Zero(), md = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ms += src[i];
    md += dst[i];
  }
  ms /= n;
  md /= n;
  SimilarityTransform t;
  Mat3 cov = Mat3::Zero(), spread = Mat3::Zero();
  Scalar var = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - ms, b = dst[i] - md;
    cov += b * a.transpose();
    spread += a * a.transpose();
    var += a.squaredNorm();
  }
  cov /= n;
  var /= n;
  bool degenerate = src.size() < 3 || !(var > 1e-18);
  if (!degenerate) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(spread / n);
    // Collinear joints leave the rotation about their line undetermined.
    degenerate = es.eigenvalues()(1) <= 1e-10 * es.eigenvalues()(2);
  }
  if (degenerate) {
    t.degenerate = true;
    t.translation = md - ms;
    return t;
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 s = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0) s(2) = -1;
  t.rotation = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
  t.scale = svd.singularValues().dot(s) / var;
  t.translation = md - t.scale * t.rotation * ms;
  return t;
}

JointSet joint_set(const Skeleton3D& s, std::span<const int> joints) {
  JointSet out;
  for (int j : joints) {
    out.positions.push_back(s.joints[j].position);
    out.motions.push_back(s.joints[j].motion);
    out.visible.push_back(s.joints[j].visible);
  }
  return out;
}

Scalar part_distance(const JointSet& s, const JointSet& r, const MiningConfig& cfg) {
  if (s.size() != r.size() || s.motions.size() != r.motions.size() || s.visible.size() != r.visible.size())
    throw SizeError("part_distance: joint count mismatch");
  const SimilarityTransform t = fit_similarity(r.positions, s.positions);
  Scalar d = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const Scalar h = s.visible[j] != r.visible[j] ? cfg.visibility_penalty : 0;
    d += ((s.positions[j] - t.apply(r.positions[j])).squaredNorm() +
          (s.motions[j] - t.apply_linear(r.motions[j])).squaredNorm()) *
         (1 + h);
  }
  return d;
}

Scalar symmetric_distance(const JointSet& s, const JointSet& r, const MiningConfig& cfg) {
  return (part_distance(s, r, cfg) + part_distance(r, s, cfg)) / 2;
}

namespace {

constexpr Scalar kSpectrumFloor = 1e-3;

/// Lloyd iterations from farthest-point seeds; deterministic.
std::vector<int> kmeans(const MatX& x, int k) {
  const int n = int(x.rows());
  std::vector<int> seeds{0};
  VecX dist = (x.rowwise() - x.row(0)).rowwise().squaredNorm();
  while (int(seeds.size()) < k) {
    Eigen::Index far;
    dist.maxCoeff(&far);
    seeds.push_back(int(far));
    dist = dist.cwiseMin((x.rowwise() - x.row(far)).rowwise().squaredNorm());
  }
  MatX centers(k, x.cols());
  for (int c = 0; c < k; ++c) centers.row(c) = x.row(seeds[c]);
  std::vector<int> label(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      Eigen::Index best;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (label[i] != int(best)) {
        label[i] = int(best);
        changed = true;
      }
    }
    if (!changed) break;
    MatX sum = MatX::Zero(k, x.cols());
    VecX count = VecX::Zero(k);
    for (int i = 0; i < n; ++i) {
      sum.row(label[i]) += x.row(i);
      count[label[i]] += 1;
    }
    for (int c = 0; c < k; ++c)
      if (count[c] > 0) centers.row(c) = sum.row(c) / count[c];
  }
  return label;
}

}  // namespace

std::vector<PartItem> cluster_parts(std::span<const JointSet> examples, int part,
                                    const MiningConfig& cfg) {
  const int n = int(examples.size());
  if (n < 2) throw DegenerateError("cluster_parts: need at least two examples");
  MatX d = MatX::Zero(n, n);
  std::vector<Scalar> off;
  off.reserve(std::size_t(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      d(i, j) = d(j, i) = symmetric_distance(examples[i], examples[j], cfg);
      off.push_back(d(i, j));
    }
  std::nth_element(off.begin(), off.begin() + off.size() / 2, off.end());
  const Scalar median = off[off.size() / 2];
  std::vector<int> label(n, 0);
  int k = 1;
  if (median > 0) {
    MatX w = (-d.array() / median).exp().matrix();
    const VecX inv_sqrt = w.rowwise().sum().cwiseInverse().cwiseSqrt();
    const MatX norm = inv_sqrt.asDiagonal() * w * inv_sqrt.asDiagonal();
    // Gaps are log-ratios of the normalized-affinity spectrum, descending.
    // With a median bandwidth two balanced clusters pin the between affinity
    // at exp(-1), so the additive gap of I - norm always favours k = 1.
    Eigen::SelfAdjointEigenSolver<MatX> es(norm);
    const VecX mu = es.eigenvalues().reverse().cwiseMax(kSpectrumFloor);
    const int kmax = std::min(cfg.max_clusters, n - 1);
    Scalar gap = -1;
    for (int c = 1; c <= kmax; ++c)
      if (std::log(mu[c - 1] / mu[c]) > gap) {
        gap = std::log(mu[c - 1] / mu[c]);
        k = c;
      }
    if (k > 1) {
      MatX emb(n, k);
      for (int c = 0; c < k; ++c) emb.col(c) = es.eigenvectors().col(n - 1 - c);
      for (int i = 0; i < n; ++i) {
        const Scalar r = emb.row(i).norm();
        if (r > 0) emb.row(i) /= r;
      }
      label = kmeans(emb, k);
    }
  } else if (cfg.max_clusters < 1) {
    k = 0;
  }
  // Items are numbered in order of their first member.
  std::vector<int> order;
  for (int i = 0; i < n; ++i)
    if (std::find(order.begin(), order.end(), label[i]) == order.end()) order.push_back(label[i]);
  std::vector<PartItem> items;
  for (int c : order) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (label[i] == c) members.push_back(i);
    if (int(members.size()) < cfg.cluster_floor) continue;
    PartItem item;
    item.part = part;
    item.index = int(items.size());
    item.members = int(members.size());
    const std::size_t joints = examples[members[0]].size();
    item.mean.positions.assign(joints, Vec3::Zero());
    item.mean.motions.assign(joints, Vec3::Zero());
    std::vector<int> visible(joints, 0);
    for (int i : members)
      for (std::size_t j = 0; j < joints; ++j) {
        item.mean.positions[j] += examples[i].positions[j];
        item.mean.motions[j] += examples[i].motions[j];
        visible[j] += examples[i].visible[j] ? 1 : 0;
      }
    for (std::size_t j = 0; j < joints; ++j) {
      item.mean.positions[j] /= Scalar(members.size());
      item.mean.motions[j] /= Scalar(members.size());
      item.mean.visible.push_back(2 * visible[j] >= int(members.size()));
    }
    items.push_back(std::move(item));
  }
  return items;
}

bool PoseCandidate::contains(const PoseCandidate& other) const {
  return std::includes(items.begin(), items.end(), other.items.begin(), other.items.end());
}

Scalar pose_frame_distance(const PoseCandidate& pose, const ItemTable& items,
                           std::span<const PartDefinition> parts, const Skeleton3D& frame,
                           const MiningConfig& cfg) {
  Scalar d = 0;
  for (const auto& ref : pose.items)
    d += part_distance(items.at(ref.part).at(ref.item).mean, joint_set(frame, parts[ref.part].joints), cfg);
  return d;
}

Scalar activation(const PoseCandidate& pose, const ItemTable& items,
                  std::span<const PartDefinition> parts, std::span<const Skeleton3D> video,
                  const MiningConfig& cfg) {
  if (video.empty()) throw DegenerateError("activation: video has no skeletons");
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (const auto& frame : video) best = std::min(best, pose_frame_distance(pose, items, parts, frame, cfg));
  return std::exp(-best / cfg.distance_scale);
}

SupportDiscrimination support_and_discrimination(std::span<const Scalar> activations,
                                                 std::span<const int> labels, int classes) {
  if (activations.size() != labels.size()) throw SizeError("support: label count mismatch");
  VecX sum = VecX::Zero(classes), count = VecX::Zero(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw SizeError("support: label out of range");
    sum[labels[i]] += activations[i];
    count[labels[i]] += 1;
  }
  SupportDiscrimination out;
  out.support = VecX::Constant(classes, std::numeric_limits<Scalar>::quiet_NaN());
  out.discrimination = out.support;
  Scalar total = 0;
  for (int c = 0; c < classes; ++c)
    if (count[c] > 0) {
      out.support[c] = sum[c] / count[c];
      total += out.support[c];
    }
  for (int c = 0; c < classes; ++c)
    if (count[c] > 0) {
      const Scalar others = total - out.support[c];
      out.discrimination[c] =
          others > 0 ? out.support[c] / others : std::numeric_limits<Scalar>::infinity();
    }
  return out;
}

ActivationTable::ActivationTable(const ItemTable& items, std::span<const PartDefinition> parts,
                                 std::span<const MiningVideo> videos, const MiningConfig& cfg) {
  const int stride = std::max(1, cfg.frame_stride);
  dist_.resize(items.size());
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (!items[k].empty() && k >= parts.size()) throw SizeError("activation table: part out of range");
    for (const auto& item : items[k]) {
      std::vector<VecX> per_video;
      for (const auto& v : videos) {
        if (v.skeletons.empty()) throw DegenerateError("activation: video has no skeletons");
        VecX d((v.skeletons.size() + stride - 1) / stride);
        for (std::size_t t = 0, i = 0; t < v.skeletons.size(); t += stride, ++i)
          d[i] = part_distance(item.mean, joint_set(v.skeletons[t], parts[k].joints), cfg);
        per_video.push_back(std::move(d));
      }
      dist_[k].push_back(std::move(per_video));
    }
  }
  scale_ = cfg.distance_scale;
  for (const auto& v : videos) {
    labels_.push_back(v.label);
    classes_ = std::max(classes_, v.label + 1);
  }
}

Scalar ActivationTable::activation(const PoseCandidate& pose, std::size_t video) const {
  if (pose.items.empty()) return 1;
  VecX total = dist_.at(pose.items[0].part).at(pose.items[0].item).at(video);
  for (std::size_t i = 1; i < pose.items.size(); ++i)
    total += dist_.at(pose.items[i].part).at(pose.items[i].item).at(video);
  return std::exp(-total.minCoeff() / scale_);
}

std::vector<Scalar> ActivationTable::activations(const PoseCandidate& pose) const {
  std::vector<Scalar> out(labels_.size());
  for (std::size_t v = 0; v < labels_.size(); ++v) out[v] = activation(pose, v);
  return out;
}

std::vector<MinedPose> mine_poses(const ItemTable& items, const ActivationTable& table,
                                  const MiningConfig& cfg, MiningTrace* trace) {
  MiningTrace local;
  MiningTrace& tr = trace ? *trace : local;
  const int classes = table.classes();
  int parts_with_items = 0;
  for (const auto& list : items) parts_with_items += list.empty() ? 0 : 1;
  const int max_level = cfg.max_level > 0 ? std::min(cfg.max_level, parts_with_items) : parts_with_items;

  std::vector<MinedPose> out;
  for (int c = 0; c < classes; ++c) {
    if (std::find(table.labels().begin(), table.labels().end(), c) == table.labels().end()) continue;
    std::map<std::vector<ItemRef>, SupportDiscrimination> frequent;
    std::vector<std::vector<ItemRef>> level;
    auto evaluate = [&](const std::vector<ItemRef>& set) {
      ++tr.examined;
      const auto act = table.activations(PoseCandidate{set});
      return support_and_discrimination(act, table.labels(), classes);
    };
    for (int k = 0; k < int(items.size()); ++k)
      for (int i = 0; i < int(items[k].size()); ++i) {
        std::vector<ItemRef> set{{k, i}};
        auto sd = evaluate(set);
        if (sd.support[c] >= cfg.support) {
          frequent.emplace(set, sd);
          level.push_back(set);
        }
      }
    for (int size = 2; size <= max_level && !level.empty(); ++size) {
      std::vector<std::vector<ItemRef>> next;
      std::sort(level.begin(), level.end());
      for (std::size_t a = 0; a < level.size(); ++a)
        for (std::size_t b = a + 1; b < level.size(); ++b) {
          if (!std::equal(level[a].begin(), level[a].end() - 1, level[b].begin())) break;
          if (level[a].back().part >= level[b].back().part) continue;
          std::vector<ItemRef> cand = level[a];
          cand.push_back(level[b].back());
          // Downward closure: every subset of size - 1 must be frequent.
          bool closed = true;
          Scalar subset_support = std::numeric_limits<Scalar>::infinity();
          for (std::size_t drop = 0; drop < cand.size() && closed; ++drop) {
            std::vector<ItemRef> sub = cand;
            sub.erase(sub.begin() + drop);
            auto it = frequent.find(sub);
            if (it == frequent.end()) closed = false;
            else subset_support = std::min(subset_support, it->second.support[c]);
          }
          if (!closed) continue;
          auto sd = evaluate(cand);
          if (sd.support[c] > subset_support * (1 + 1e-12)) ++tr.monotonicity_violations;
          if (sd.support[c] >= cfg.support) {
            frequent.emplace(cand, sd);
            next.push_back(cand);
          }
        }
      level = std::move(next);
    }
    std::vector<std::pair<std::vector<ItemRef>, SupportDiscrimination>> survivors;
    for (const auto& [set, sd] : frequent)
      if (sd.discrimination[c] >= cfg.discrimination) survivors.emplace_back(set, sd);
    for (const auto& [set, sd] : survivors) {
      const PoseCandidate p{set};
      bool maximal = true;
      for (const auto& [other, osd] : survivors)
        if (other.size() > set.size() && PoseCandidate{other}.contains(p)) {
          maximal = false;
          break;
        }
      if (maximal) out.push_back({p, c, sd.support[c], sd.discrimination[c]});
    }
  }
  return out;
}

Scalar pose_distance(const PoseCandidate& a, const PoseCandidate& b, const ItemTable& items,
                     const MiningConfig& cfg) {
  Scalar d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.items.size() || j < b.items.size()) {
    if (j == b.items.size() || (i < a.items.size() && a.items[i].part < b.items[j].part)) {
      d += cfg.missing_part_penalty;
      ++i;
    } else if (i == a.items.size() || b.items[j].part < a.items[i].part) {
      d += cfg.missing_part_penalty;
      ++j;
    } else {
      if (a.items[i].item != b.items[j].item) {
        const auto& list = items.at(a.items[i].part);
        d += symmetric_distance(list.at(a.items[i].item).mean, list.at(b.items[j].item).mean, cfg) /
             cfg.distance_scale;
      }
      ++i;
      ++j;
    }
  }
  return d;
}

std::vector<MinedPose> prune_similar(std::vector<MinedPose> poses, const PoseDistanceFn& dist,
                                     const MiningConfig& cfg) {
  std::stable_sort(poses.begin(), poses.end(), [](const MinedPose& a, const MinedPose& b) {
    return a.discrimination > b.discrimination;
  });
  std::vector<MinedPose> kept;
  std::vector<bool> removed(poses.size(), false);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(poses[i]);
    for (std::size_t j = i + 1; j < poses.size(); ++j)
      if (!removed[j] && dist(poses[i], poses[j]) < cfg.similarity) removed[j] = true;
  }
  return kept;
}

std::vector<std::size_t> prune_by_validation(std::span<const Scalar> scores,
                                             const MiningConfig& cfg) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] >= cfg.validation_floor) keep.push_back(i);
  return keep;
}

std::vector<MinedPose> cap_per_class(std::vector<MinedPose> poses, const MiningConfig& cfg) {
  if (cfg.max_poses_per_class <= 0) return poses;
  std::vector<std::size_t> order(poses.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return poses[a].discrimination > poses[b].discrimination;
  });
  std::map<int, int> count;
  std::vector<bool> keep(poses.size(), false);
  for (std::size_t i : order)
    if (count[poses[i].label]++ < cfg.max_poses_per_class) keep[i] = true;
  std::vector<MinedPose> out;
  for (std::size_t i = 0; i < poses.size(); ++i)
    if (keep[i]) out.push_back(std::move(poses[i]));
  return out;
}

Scalar average_precision(std::span<const Scalar> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw SizeError("average_precision: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Scalar hits = 0, ap = 0;
  for (std::size_t r = 0; r < order.size(); ++r)
    if (positive[order[r]]) {
      hits += 1;
      ap += hits / Scalar(r + 1);
    }
  return hits > 0 ? ap / hits : 0;
}

}  // namespace mstaog
