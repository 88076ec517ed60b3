#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "mstaog/aog.hpp"
#include "mstaog/core.hpp"
#include "mstaog/features.hpp"

namespace mstaog::testing {

/// Directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("mstaog_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline FeatureMap random_map(int rows, int cols, int channels, std::mt19937_64& rng,
                             Scalar lo = -1, Scalar hi = 1) {
  std::uniform_real_distribution<Scalar> u(lo, hi);
  FeatureMap m;
  m.rows = rows;
  m.cols = cols;
  m.channels = channels;
  m.cell = 4;
  m.data.resize(rows, Eigen::Index(cols) * channels);
  for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = u(rng);
  return m;
}

/// Single-level pyramid of random HOG and HOF maps.
inline FeaturePyramid random_pyramid(int rows, int cols, int channels, std::mt19937_64& rng,
                                     Scalar scale = 1) {
  FeaturePyramid p;
  p.cell = 4;
  p.frame_width = int((cols + 2) * 4 / scale);
  p.frame_height = int((rows + 2) * 4 / scale);
  FeatureLevel lv;
  lv.scale = scale;
  lv.hog = random_map(rows, cols, channels, rng);
  lv.hof = random_map(rows, cols, channels, rng);
  p.levels.push_back(std::move(lv));
  return p;
}

inline void randomize(PartModel& part, std::mt19937_64& rng, Scalar amplitude = 1) {
  std::uniform_real_distribution<Scalar> u(-amplitude, amplitude);
  for (auto* set : {&part.appearance, &part.motion})
    for (auto& t : *set)
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
}

/// Root plus `children` parts, every window w x h with its anchor at the
/// top-left cell, random templates for `bins` uniformly spaced bins.
inline PoseModel toy_pose(int children, int bins, int channels, ViewCoupling coupling,
                          std::mt19937_64& rng, int w = 2, int h = 2) {
  std::uniform_real_distribution<Scalar> u(-1, 1), pos(0.2, 1.0);
  PoseModel p;
  p.coupling = coupling;
  p.bin_centers = uniform_view_bins(bins);
  p.active.assign(bins, true);
  p.channels = channels;
  p.k1 = 8;
  p.k2 = 9;
  p.bias = u(rng);
  auto make = [&](int id) {
    PartModel part;
    part.part_id = id;
    part.width = w;
    part.height = h;
    part.allocate(bins, channels);
    randomize(part, rng);
    return part;
  };
  p.root = make(0);
  for (int i = 0; i < children; ++i) {
    PartModel c = make(i + 1);
    c.offset.mean = Vec3(u(rng), u(rng), u(rng)) * 0.5;
    c.offset.variance = Vec3(pos(rng), pos(rng), pos(rng)) * 0.05;
    for (int b = 0; b < bins; ++b) {
      OffsetGaussian2D<Scalar> g;
      g.mean = Vec2(u(rng), u(rng)) * 8;
      const Scalar a = 4 + 8 * pos(rng), d = 4 + 8 * pos(rng), r = 0.6 * u(rng);
      g.covariance << a, r * std::sqrt(a * d), r * std::sqrt(a * d), d;
      c.view_offsets.push_back(g);
    }
    p.children.push_back(std::move(c));
  }
  return p;
}

/// Skeleton with every joint at a distinct, non-degenerate position.
inline Skeleton3D random_skeleton(std::mt19937_64& rng, Scalar spread = 0.3) {
  std::normal_distribution<Scalar> n(0, spread);
  Skeleton3D s;
  for (auto& j : s.joints) {
    j.position = Vec3(n(rng), n(rng), n(rng));
    j.motion = Vec3(n(rng), n(rng), n(rng)) * 0.1;
  }
  return s;
}

}  // namespace mstaog::testing
