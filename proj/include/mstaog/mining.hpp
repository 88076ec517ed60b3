#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mstaog/core.hpp"
#include "mstaog/types.hpp"

namespace mstaog {

/// Least-squares similarity dst ~ scale * rotation * src + translation.
struct SimilarityTransform {
  Scalar scale = 1;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  bool degenerate = false;  ///< translation-only fallback was used

  Vec3 apply(const Vec3& p) const { return scale * rotation * p + translation; }
  Vec3 apply_linear(const Vec3& v) const { return scale * rotation * v; }
};

/// Closed-form (Umeyama) fit. Fewer than three joints or (near) collinear
/// joints fall back to a translation-only fit with `degenerate` set.
SimilarityTransform fit_similarity(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Joints of one part (or of a whole pose) in one frame.
struct JointSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> motions;
  std::vector<bool> visible;

  std::size_t size() const { return positions.size(); }
};

JointSet joint_set(const Skeleton3D& s, std::span<const int> joints);

struct MiningConfig {
  Scalar visibility_penalty = 1;  ///< a
  int cluster_floor = 5;
  int max_clusters = 8;
  Scalar support = 0.3;
  Scalar discrimination = 2.0;
  Scalar similarity = 0.5;        ///< set-cover pruning distance
  Scalar missing_part_penalty = 1.0;
  /// tau: activations are exp(-D / tau) and pose distances are in units of tau.
  Scalar distance_scale = 1.0;
  Scalar validation_floor = 0.0;  ///< minimum detector average precision
  int frame_stride = 1;
  int max_level = 0;              ///< 0: up to one item per part
  int max_poses_per_class = 0;    ///< 0: keep every pose
};

/// D_k(s, r): squared residuals of positions and motions after aligning r to
/// s with a similarity fitted on positions, each joint weighted by (1 + h),
/// h = a when the visibilities of the joint differ.
Scalar part_distance(const JointSet& s, const JointSet& r, const MiningConfig& cfg);

/// (D(s, r) + D(r, s)) / 2.
Scalar symmetric_distance(const JointSet& s, const JointSet& r, const MiningConfig& cfg);

struct PartItem {
  int part = 0;
  int index = 0;
  JointSet mean;  ///< mean joint positions and motions of the cluster
  int members = 0;
};

/// Normalized-cut spectral clustering of the examples of one part with the
/// affinity exp(-Dbar / median Dbar); the cluster count maximizes the eigengap
/// up to cfg.max_clusters. Clusters smaller than cfg.cluster_floor are dropped.
std::vector<PartItem> cluster_parts(std::span<const JointSet> examples, int part,
                                    const MiningConfig& cfg);

/// Per-part item lists, indexed by part id.
using ItemTable = std::vector<std::vector<PartItem>>;

struct ItemRef {
  int part = 0;
  int item = 0;
  friend auto operator<=>(const ItemRef&, const ItemRef&) = default;
};

/// A set of part items, at most one per part, sorted by part.
struct PoseCandidate {
  std::vector<ItemRef> items;

  bool contains(const PoseCandidate& other) const;
  friend bool operator==(const PoseCandidate&, const PoseCandidate&) = default;
};

/// A labeled skeleton video prepared for mining (normalized skeletons).
struct MiningVideo {
  int label = 0;
  std::vector<Skeleton3D> skeletons;
};

/// Distance between a pose configuration and one frame: the sum of the part
/// distances of its items.
Scalar pose_frame_distance(const PoseCandidate& pose, const ItemTable& items,
                           std::span<const PartDefinition> parts, const Skeleton3D& frame,
                           const MiningConfig& cfg);

/// exp(-min_t D(p_P, p_P^t) / tau).
Scalar activation(const PoseCandidate& pose, const ItemTable& items,
                  std::span<const PartDefinition> parts, std::span<const Skeleton3D> video,
                  const MiningConfig& cfg);

struct SupportDiscrimination {
  VecX support;         ///< per class; NaN for classes without videos
  VecX discrimination;  ///< per class
};

/// Supp(c) = mean activation over class-c videos; Disc(c) = Supp(c) / sum of
/// the other classes' supports. Classes without videos are excluded.
SupportDiscrimination support_and_discrimination(std::span<const Scalar> activations,
                                                 std::span<const int> labels, int classes);

struct MinedPose {
  PoseCandidate pose;
  int label = 0;
  Scalar support = 0;
  Scalar discrimination = 0;
};

/// Cached per-item, per-video, per-frame distances used by the lattice walk.
class ActivationTable {
 public:
  ActivationTable(const ItemTable& items, std::span<const PartDefinition> parts,
                  std::span<const MiningVideo> videos, const MiningConfig& cfg);

  Scalar activation(const PoseCandidate& pose, std::size_t video) const;
  std::vector<Scalar> activations(const PoseCandidate& pose) const;
  std::span<const int> labels() const { return labels_; }
  int classes() const { return classes_; }

 private:
  std::vector<std::vector<std::vector<VecX>>> dist_;  // part, item, video -> frames
  std::vector<int> labels_;
  int classes_ = 0;
  Scalar scale_ = 1;
};

struct MiningTrace {
  std::size_t examined = 0;
  std::size_t monotonicity_violations = 0;
};

/// Level-wise (Apriori) search of frequent and discriminative part-item sets
/// per class, followed by removal of non-maximal poses.
std::vector<MinedPose> mine_poses(const ItemTable& items, const ActivationTable& table,
                                  const MiningConfig& cfg, MiningTrace* trace = nullptr);

/// Configuration distance between two poses: symmetric item distances on
/// shared parts (in units of tau) plus a fixed penalty per part present in
/// only one of them.
Scalar pose_distance(const PoseCandidate& a, const PoseCandidate& b, const ItemTable& items,
                     const MiningConfig& cfg);

using PoseDistanceFn = std::function<Scalar(const MinedPose&, const MinedPose&)>;

/// Greedy set cover: take the most discriminative remaining pose and drop
/// every pose closer than cfg.similarity to it.
std::vector<MinedPose> prune_similar(std::vector<MinedPose> poses, const PoseDistanceFn& dist,
                                     const MiningConfig& cfg);

/// Keeps poses whose validation score reaches cfg.validation_floor.
std::vector<std::size_t> prune_by_validation(std::span<const Scalar> scores,
                                             const MiningConfig& cfg);

/// Keeps at most cfg.max_poses_per_class poses per class, by discrimination.
std::vector<MinedPose> cap_per_class(std::vector<MinedPose> poses, const MiningConfig& cfg);

/// Average precision of scores against binary labels.
Scalar average_precision(std::span<const Scalar> scores, std::span<const int> positive);

}  // namespace mstaog
