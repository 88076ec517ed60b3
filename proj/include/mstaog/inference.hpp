#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "mstaog/aog.hpp"
#include "mstaog/features.hpp"
#include "mstaog/geometry.hpp"

namespace mstaog {

/// Score field over the cells of every scale level of one frame.
struct ResponseMap {
  struct Level {
    Scalar scale = 1;
    MatX scores;
  };
  std::vector<Level> levels;
  int frame_width = 0;
  int frame_height = 0;
  int cell = 1;
  /// Cell index of the first grid column, in cells of the level; HOG grids
  /// start one cell in from the border.
  Scalar cell_origin = 1;

  /// Single-level map whose cells are unit pixels starting at 0.
  static ResponseMap from_grid(const MatX& scores);
};

using IndexMap = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DistanceTransform {
  MatX scores;
  IndexMap arg_x;  ///< maximizing child column for every output cell
  IndexMap arg_y;
  Scalar dropped_correlation = 0;  ///< |rho| ignored by the fast path
};

enum class CorrelationMode {
  Drop,  ///< off-diagonal precision dropped, |rho| reported
  Exact  ///< sheared per-row envelopes, exact for any SPD covariance
};

/// out(v0) = max over vi of child(vi) + deformation_score(v0, vi, g) on the
/// grid of `child` (x = column, y = row). Axis-aligned Gaussians use the
/// separable lower-envelope algorithm in O(cells).
DistanceTransform distance_transform(const MatX& child, const OffsetGaussian2D<Scalar>& g,
                                     CorrelationMode mode = CorrelationMode::Drop);

/// One-dimensional max-convolution with -a (q - p)^2 at real query points
/// q_i = i + shift; a > 0.
void distance_transform_1d(std::span<const Scalar> f, Scalar a, Scalar shift,
                           std::span<Scalar> out, std::span<int> arg);

/// Cross-correlation of a template with a map; the template is placed with
/// its anchor on each cell and zero padding is used outside the map.
MatX correlate(const FeatureMap& map, const MatX& tmpl, int width, int anchor_x, int anchor_y);

/// Response of a part under view bin m at every level where its window fits.
/// Levels where the template is larger than the map are returned empty.
ResponseMap part_response(const FeaturePyramid& features, const PartModel& part,
                          const PoseModel& pose, int bin);

/// Responses for every bin at once: raw per-bin template responses are
/// computed once and blended with the interpolation matrix.
std::vector<ResponseMap> part_responses(const FeaturePyramid& features, const PartModel& part,
                                        const PoseModel& pose);

struct Detection {
  int pose_id = 0;
  int level = 0;
  Scalar scale = 1;
  Cell root;
  int bin = 0;
  std::vector<Cell> parts;  ///< child locations
  Scalar score = 0;
  BoundingBox box;  ///< root window in frame pixels
};

struct FrameDetections {
  ResponseMap pose_map;          ///< max over bins, per level
  std::vector<IndexMap> best_bin; ///< argmax bin per level
  std::vector<Detection> detections;
};

struct DetectOptions {
  Scalar threshold = 0;
  Scalar nms_overlap = 0.5;
  int max_detections = 10;
  CorrelationMode correlation = CorrelationMode::Drop;
  bool backtrack = true;  ///< recover part locations for detections
};

/// Pose map and detections for one frame.
FrameDetections detect_frame(const FeaturePyramid& features, const PoseModel& pose,
                             const DetectOptions& opt = {});

/// Per-frame results for every frame of a video.
std::vector<FrameDetections> detect_poses(const VideoFeatures& video, const PoseModel& pose,
                                          const DetectOptions& opt = {});

/// View bin of the highest-scoring detection; ties go to the lower bin.
int estimate_view(std::span<const Detection> detections);

/// Greedy non-maximum suppression on root boxes (intersection over union).
std::vector<Detection> non_maximum_suppression(std::vector<Detection> dets, Scalar overlap);

/// Max-pooling over a 1 + 2x2x2 + 4x4x4 spatio-temporal pyramid. Entries are
/// ordered level by level, then t, y, x. Sequences shorter than 4 frames
/// repeat their last frame; empty cells take the global minimum.
Pyramid73 pyramid_pool(std::span<const ResponseMap> maps);

/// Pose map standardized with the pose's response statistics.
ResponseMap standardized(const ResponseMap& map, const PoseModel& pose);

/// Low-resolution node responses as constant 4x4 maps, one per frame.
std::vector<ResponseMap> lowres_maps(std::span<const LowResFeature> features,
                                     const LowResNode& node);

struct Classification {
  int label = -1;
  std::vector<Scalar> scores;  ///< per action, indexed like archive.actions
};

/// Pooled pyramids of every pose in the archive for one video.
std::vector<Pyramid73> pose_pyramids(const VideoFeatures& video, const ModelArchive& archive);

/// Classification from precomputed pose pyramids (indexed by pose position in
/// archive.poses).
Classification classify_pyramids(std::span<const Pyramid73> pose_pyr,
                                 std::span<const LowResFeature> lowres,
                                 const ModelArchive& archive);

Classification classify(const VideoFeatures& video, const ModelArchive& archive);
Classification classify(const VideoSample& video, const ModelArchive& archive);

}  // namespace mstaog
