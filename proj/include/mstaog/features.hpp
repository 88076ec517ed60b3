#pragma once

#include <vector>

#include "mstaog/core.hpp"
#include "mstaog/image.hpp"
#include "mstaog/types.hpp"

namespace mstaog {

/// Dense grid of per-cell descriptors. `data` has one row per cell row and
/// `cols * channels` columns, so a window row is a contiguous segment.
struct FeatureMap {
  int rows = 0;
  int cols = 0;
  int channels = 0;
  int cell = 0;
  MatX data;

  Scalar at(int y, int x, int c) const { return data(y, x * channels + c); }
  Scalar& at(int y, int x, int c) { return data(y, x * channels + c); }
  bool empty() const { return rows == 0 || cols == 0; }
};

/// Channels of both HOG and HOF descriptors: 9 orientation/motion bins summed
/// over the four block normalizations, followed by the four block energies.
inline constexpr int kHistogramBins = 9;
inline constexpr int kDescriptorChannels = kHistogramBins + 4;
/// Per-component cap of a clipped block-normalized histogram entry.
inline constexpr Scalar kBlockClip = 0.2;

/// Gradient-orientation histograms (9 unsigned bins) with 2x2-cell block L2
/// normalization (eps 1e-4). The output grid drops one border cell on each
/// side: floor(size / cell) - 2 cells per axis.
FeatureMap compute_hog(const Image& frame, int cell);

struct FlowField {
  Image u;
  Image v;
  int width() const { return int(u.cols()); }
  int height() const { return int(u.rows()); }
};

struct FlowConfig {
  Scalar alpha = 10;
  int iterations = 100;
  int levels = 3;        ///< coarse-to-fine pyramid levels
  int warps = 2;         ///< warping passes per level
  Scalar max_magnitude = 16;
};

/// Coarse-to-fine Horn-Schunck flow such that frame_t1(x + u, y + v) ~ frame_t(x, y).
FlowField compute_flow(const Image& frame_t, const Image& frame_t1,
                       const FlowConfig& cfg = {});

/// Flow histograms: 8 orientation bins (bin 0 centered on +x, i.e. rightward)
/// plus a no-motion bin for magnitudes below `threshold`; same grid geometry
/// and normalization as compute_hog.
FeatureMap compute_hof(const FlowField& flow, int cell, Scalar threshold = 0.25);

inline constexpr int kIntensityBins = 16;

struct LowResFeature {
  VecX histogram;           ///< L1-normalized intensity histogram of the box
  Vec2 size = Vec2::Zero(); ///< box (width, height) divided by frame height
};

LowResFeature compute_lowres(const Image& frame, const BoundingBox& box,
                             int bins = kIntensityBins);

struct FeatureConfig {
  int cell = 8;
  int scales = 5;
  Scalar scale_step = 1.4142135623730951;  ///< downsampling factor between levels
  Scalar hof_threshold = 0.25;
  FlowConfig flow;
};

/// HOG and HOF maps of one frame at one image scale.
struct FeatureLevel {
  Scalar scale = 1;  ///< image scale factor relative to the frame
  FeatureMap hog;
  FeatureMap hof;
};

struct FeaturePyramid {
  int frame_width = 0;
  int frame_height = 0;
  int cell = 0;
  std::vector<FeatureLevel> levels;
};

FeaturePyramid compute_pyramid(const Image& frame, const FlowField& flow,
                               const FeatureConfig& cfg);

/// Rescales a flow field spatially and in magnitude.
FlowField rescale_flow(const FlowField& flow, Scalar factor);

/// Conversions between frame pixels and trimmed-grid cells at a level.
inline Scalar cell_to_pixel(Scalar c, Scalar scale, int cell) {
  return (c + 1.5) * cell / scale;
}
inline Scalar pixel_to_cell(Scalar px, Scalar scale, int cell) {
  return px * scale / cell - 1.5;
}

/// Features of every frame of a video: motion at frame t is the flow from
/// t-1 to t (frame 0 uses the flow from 0 to 1).
struct VideoFeatures {
  std::vector<FeaturePyramid> frames;
  std::vector<LowResFeature> lowres;
};

VideoFeatures compute_video_features(const VideoSample& video, const FeatureConfig& cfg);

}  // namespace mstaog
