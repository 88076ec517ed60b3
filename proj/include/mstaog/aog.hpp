#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "mstaog/features.hpp"
#include "mstaog/geometry.hpp"
#include "mstaog/types.hpp"

namespace mstaog {

inline constexpr int kDefaultViewBins = 10;
inline constexpr int kPyramidDims = 73;

using Pyramid73 = Eigen::Matrix<Scalar, kPyramidDims, 1>;

/// M view-bin centers uniformly spaced on [0, 2pi).
std::vector<Scalar> uniform_view_bins(int m = kDefaultViewBins);

/// Wrapped angular distance min(|a-b|, 2pi-|a-b|).
Scalar angular_distance(Scalar a, Scalar b);

/// exp(-d^2(theta, theta_m)).
Scalar interp_weight(Scalar theta, Scalar theta_m);

/// How the view nodes of a pose relate to each other.
enum class ViewCoupling {
  Shared,      ///< one 3D geometry projected per view, templates interpolated
  Independent  ///< per-view templates and 2D geometry (mixture-of-DPM baseline)
};

/// Appearance (HOG) and motion (HOF) templates of one part for every view
/// bin, plus its geometry relative to the root part.
struct PartModel {
  int part_id = 0;
  int width = 1;   ///< window size in cells
  int height = 1;
  int anchor_x = 0;  ///< anchor cell inside the window
  int anchor_y = 0;
  std::vector<MatX> appearance;  ///< per bin: height x (width * channels)
  std::vector<MatX> motion;
  OffsetGaussian3D<Scalar> offset;
  /// Independent coupling only: per-bin 2D offset in frame pixels (image
  /// axes, y down).
  std::vector<OffsetGaussian2D<Scalar>> view_offsets;

  int bins() const { return int(appearance.size()); }
  /// Zero templates for `bins` views.
  void allocate(int bins, int channels);
};

struct PoseModel {
  int id = 0;
  int label = -1;  ///< action the pose was mined for
  std::vector<int> items;  ///< mined part items, encoded as part * 1000 + item
  ViewCoupling coupling = ViewCoupling::Shared;
  std::vector<Scalar> bin_centers;
  std::vector<bool> active;  ///< bins that take part in the OR node
  PartModel root;
  std::vector<PartModel> children;
  std::vector<ProjectionParams<Scalar>> cameras;  ///< fitted per training camera
  Scalar k1 = 1, k2 = 1;  ///< projection scales used at test time (px per unit)
  Scalar bias = 0;
  Scalar response_mean = 0;
  Scalar response_std = 1;
  int channels = kDescriptorChannels;

  int bins() const { return int(bin_centers.size()); }
  /// Rows: bins m, columns: template bins k. Row-normalized interpolation
  /// weights for Shared coupling, identity otherwise.
  MatX interpolation() const;
  /// Interpolation weights of an arbitrary view angle over the bins.
  VecX interpolation_at(Scalar theta) const;
  /// Deformation Gaussian of child `i` under bin `m`, in cells of a level
  /// with the given scale (image axes, y down).
  OffsetGaussian2D<Scalar> child_offset(int i, int m, Scalar scale, int cell) const;
  OffsetGaussian2D<Scalar> child_offset_at(int i, Scalar theta, Scalar scale, int cell) const;
};

enum class LowResKind { Intensity, BoxSize };

/// Frame-level linear node on one low-resolution feature.
struct LowResNode {
  LowResKind kind = LowResKind::Intensity;
  VecX weights;
  Scalar bias = 0;

  Scalar score(const LowResFeature& f) const;
};

struct ActionModel {
  int label = 0;
  std::string name;
  std::vector<int> pose_ids;
  std::vector<LowResNode> lowres;
  VecX weights;  ///< 73 x (pose_ids.size() + lowres.size())
  Scalar bias = 0;
};

struct ModelArchive {
  FeatureConfig features;
  std::vector<PartDefinition> parts;
  std::vector<std::string> vocabulary;
  std::vector<PoseModel> poses;
  std::vector<ActionModel> actions;

  const PoseModel& pose(int id) const;
  /// Throws ConfigError when an action references a missing pose or a weight
  /// vector has the wrong length.
  void validate() const;
};

/// Window of a feature map anchored at `anchor`, zero outside the map.
MatX extract_window(const FeatureMap& map, Cell anchor, const PartModel& part);

/// Convex combination over bins of per-bin template responses.
Scalar part_appearance_score(const MatX& patch, const PartModel& part,
                             const PoseModel& pose, Scalar theta);
Scalar part_motion_score(const MatX& patch, const PartModel& part,
                         const PoseModel& pose, Scalar theta);
Scalar part_score(const MatX& app_patch, const MatX& mot_patch, const PartModel& part,
                  const PoseModel& pose, Scalar theta);

/// Score of the view node at angle `theta` with the root at locations[0] and
/// child i at locations[i + 1], all in cells of `level`.
Scalar view_score(std::span<const Cell> locations, const FeatureLevel& level, int cell,
                  const PoseModel& pose, Scalar theta);

struct PoseScore {
  Scalar score = 0;
  int bin = 0;
  std::vector<Cell> locations;
};

/// OR node: max over active view bins and over all child placements on the
/// level grid. Ties resolve toward the lower bin and the first placement in
/// row-major order.
PoseScore pose_score(Cell root, const FeatureLevel& level, int cell, const PoseModel& pose);

/// Linear action node over pooled pose and low-resolution pyramids.
Scalar action_score(std::span<const Pyramid73> pose_pyramids,
                    std::span<const Pyramid73> lowres_pyramids, const ActionModel& action);

}  // namespace mstaog
