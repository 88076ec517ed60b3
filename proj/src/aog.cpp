#include "mstaog/aog.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mstaog/error.hpp"

namespace mstaog {

std::vector<Scalar> uniform_view_bins(int m) {
  if (m < 1) throw ConfigError("view bin count must be at least 1");
  std::vector<Scalar> bins(m);
  for (int i = 0; i < m; ++i) bins[i] = 2 * std::numbers::pi * i / m;
  return bins;
}

Scalar angular_distance(Scalar a, Scalar b) {
  const Scalar d = std::abs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, 2 * std::numbers::pi - d);
}

Scalar interp_weight(Scalar theta, Scalar theta_m) {
  const Scalar d = angular_distance(theta, theta_m);
  return std::exp(-d * d);
}

void PartModel::allocate(int bins, int channels) {
  appearance.assign(bins, MatX::Zero(height, Eigen::Index(width) * channels));
  motion.assign(bins, MatX::Zero(height, Eigen::Index(width) * channels));
}

namespace {

int nearest_bin(const std::vector<Scalar>& centers, Scalar theta) {
  int best = 0;
  for (int k = 1; k < int(centers.size()); ++k)
    if (angular_distance(theta, centers[k]) < angular_distance(theta, centers[best])) best = k;
  return best;
}

/// View-plane pixels (u right, v up) to level cells (x right, y down).
OffsetGaussian2D<Scalar> to_cells(const OffsetGaussian2D<Scalar>& g, Scalar factor, bool flip_v) {
  OffsetGaussian2D<Scalar> out;
  const Scalar sv = flip_v ? -1 : 1;
  out.mean = Vec2(g.mean.x(), sv * g.mean.y()) * factor;
  out.covariance = g.covariance * factor * factor;
  out.covariance(0, 1) *= sv;
  out.covariance(1, 0) *= sv;
  return out;
}

}  // namespace

MatX PoseModel::interpolation() const {
  const int m = bins();
  if (coupling == ViewCoupling::Independent) return MatX::Identity(m, m);
  MatX w(m, m);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < m; ++k) w(i, k) = interp_weight(bin_centers[i], bin_centers[k]);
    w.row(i) /= w.row(i).sum();
  }
  return w;
}

VecX PoseModel::interpolation_at(Scalar theta) const {
  const int m = bins();
  if (m == 0) throw ConfigError("pose has no view bins");
  VecX w = VecX::Zero(m);
  if (coupling == ViewCoupling::Independent) {
    w[nearest_bin(bin_centers, theta)] = 1;
    return w;
  }
  for (int k = 0; k < m; ++k) w[k] = interp_weight(theta, bin_centers[k]);
  return w / w.sum();
}

OffsetGaussian2D<Scalar> PoseModel::child_offset(int i, int m, Scalar scale, int cell) const {
  if (coupling == ViewCoupling::Independent)
    return to_cells(children.at(i).view_offsets.at(m), scale / cell, false);
  return child_offset_at(i, bin_centers.at(m), scale, cell);
}

OffsetGaussian2D<Scalar> PoseModel::child_offset_at(int i, Scalar theta, Scalar scale,
                                                    int cell) const {
  if (coupling == ViewCoupling::Independent)
    return child_offset(i, nearest_bin(bin_centers, theta), scale, cell);
  const auto g = project_offset(children.at(i).offset, ProjectionParams<Scalar>{k1, k2, theta});
  return to_cells(g, scale / cell, true);
}

Scalar LowResNode::score(const LowResFeature& f) const {
  const VecX& x = kind == LowResKind::Intensity ? f.histogram : VecX(f.size);
  if (x.size() != weights.size()) throw SizeError("low-resolution node: feature size mismatch");
  return weights.dot(x) + bias;
}

const PoseModel& ModelArchive::pose(int id) const {
  for (const auto& p : poses)
    if (p.id == id) return p;
  throw ConfigError("unknown pose id " + std::to_string(id));
}

void ModelArchive::validate() const {
  for (const auto& a : actions) {
    for (int id : a.pose_ids) pose(id);
    const auto expected = Eigen::Index(kPyramidDims) * Eigen::Index(a.pose_ids.size() + a.lowres.size());
    if (a.weights.size() != expected)
      throw ConfigError("action '" + a.name + "': weight length " + std::to_string(a.weights.size()) +
                        " != " + std::to_string(expected));
  }
  for (const auto& p : poses) {
    if (p.bins() < 1) throw ConfigError("pose " + std::to_string(p.id) + " has no view bins");
    if (int(p.active.size()) != p.bins())
      throw ConfigError("pose " + std::to_string(p.id) + ": active mask size mismatch");
    auto check = [&](const PartModel& part) {
      if (part.bins() != p.bins() || int(part.motion.size()) != p.bins())
        throw ConfigError("pose " + std::to_string(p.id) + ": template count mismatch");
      for (int m = 0; m < p.bins(); ++m)
        if (part.appearance[m].rows() != part.height ||
            part.appearance[m].cols() != Eigen::Index(part.width) * p.channels ||
            part.motion[m].rows() != part.height || part.motion[m].cols() != part.appearance[m].cols())
          throw ConfigError("pose " + std::to_string(p.id) + ": template dimensions differ");
    };
    check(p.root);
    for (const auto& c : p.children) {
      check(c);
      if (p.coupling == ViewCoupling::Independent && int(c.view_offsets.size()) != p.bins())
        throw ConfigError("pose " + std::to_string(p.id) + ": per-view offsets missing");
    }
  }
}

MatX extract_window(const FeatureMap& map, Cell anchor, const PartModel& part) {
  const int c = map.channels;
  MatX out = MatX::Zero(part.height, Eigen::Index(part.width) * c);
  const int y0 = anchor.y - part.anchor_y, x0 = anchor.x - part.anchor_x;
  for (int dy = 0; dy < part.height; ++dy) {
    const int y = y0 + dy;
    if (y < 0 || y >= map.rows) continue;
    const int xa = std::max(x0, 0), xb = std::min(x0 + part.width, map.cols);
    if (xa >= xb) continue;
    out.row(dy).segment(Eigen::Index(xa - x0) * c, Eigen::Index(xb - xa) * c) =
        map.data.row(y).segment(Eigen::Index(xa) * c, Eigen::Index(xb - xa) * c);
  }
  return out;
}

namespace {

Scalar interpolated_response(const MatX& patch, const std::vector<MatX>& templates,
                             const VecX& w) {
  Scalar s = 0;
  for (int k = 0; k < int(templates.size()); ++k) {
    if (w[k] == 0) continue;
    if (templates[k].rows() != patch.rows() || templates[k].cols() != patch.cols())
      throw SizeError("template and patch dimensions differ");
    s += w[k] * templates[k].cwiseProduct(patch).sum();
  }
  return s;
}

}  // namespace

Scalar part_appearance_score(const MatX& patch, const PartModel& part, const PoseModel& pose,
                             Scalar theta) {
  if (part.bins() != pose.bins()) throw SizeError("part and pose bin counts differ");
  return interpolated_response(patch, part.appearance, pose.interpolation_at(theta));
}

Scalar part_motion_score(const MatX& patch, const PartModel& part, const PoseModel& pose,
                         Scalar theta) {
  if (int(part.motion.size()) != pose.bins()) throw SizeError("part and pose bin counts differ");
  return interpolated_response(patch, part.motion, pose.interpolation_at(theta));
}

Scalar part_score(const MatX& app_patch, const MatX& mot_patch, const PartModel& part,
                  const PoseModel& pose, Scalar theta) {
  return part_appearance_score(app_patch, part, pose, theta) +
         part_motion_score(mot_patch, part, pose, theta);
}

namespace {

Scalar part_score_at(const FeatureLevel& level, Cell at, const PartModel& part,
                     const PoseModel& pose, Scalar theta) {
  return part_score(extract_window(level.hog, at, part), extract_window(level.hof, at, part), part,
                    pose, theta);
}

Vec2 as_vec(Cell c) { return Vec2(c.x, c.y); }

}  // namespace

Scalar view_score(std::span<const Cell> locations, const FeatureLevel& level, int cell,
                  const PoseModel& pose, Scalar theta) {
  if (locations.size() != pose.children.size() + 1)
    throw SizeError("view_score: expected one location per part");
  Scalar s = part_score_at(level, locations[0], pose.root, pose, theta) + pose.bias;
  for (std::size_t i = 0; i < pose.children.size(); ++i) {
    s += part_score_at(level, locations[i + 1], pose.children[i], pose, theta);
    s += deformation_score(as_vec(locations[0]), as_vec(locations[i + 1]),
                           pose.child_offset_at(int(i), theta, level.scale, cell));
  }
  return s;
}

PoseScore pose_score(Cell root, const FeatureLevel& level, int cell, const PoseModel& pose) {
  if (pose.bins() < 1) throw ConfigError("pose_score: pose has no view bins");
  PoseScore best;
  bool found = false;
  const int rows = level.hog.rows, cols = level.hog.cols;
  for (int m = 0; m < pose.bins(); ++m) {
    if (!pose.active.empty() && !pose.active[m]) continue;
    const Scalar theta = pose.bin_centers[m];
    std::vector<Cell> locs{root};
    Scalar s = part_score_at(level, root, pose.root, pose, theta) + pose.bias;
    for (std::size_t i = 0; i < pose.children.size(); ++i) {
      const auto g = pose.child_offset(int(i), m, level.scale, cell);
      Scalar bi = -std::numeric_limits<Scalar>::infinity();
      Cell arg;
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
          const Scalar v = part_score_at(level, {x, y}, pose.children[i], pose, theta) +
                           deformation_score(as_vec(root), Vec2(x, y), g);
          if (v > bi) {
            bi = v;
            arg = {x, y};
          }
        }
      s += bi;
      locs.push_back(arg);
    }
    if (!found || s > best.score) {
      best = {s, m, std::move(locs)};
      found = true;
    }
  }
  if (!found) throw ConfigError("pose_score: no active view bin");
  return best;
}

Scalar action_score(std::span<const Pyramid73> pose_pyramids,
                    std::span<const Pyramid73> lowres_pyramids, const ActionModel& action) {
  const auto n = Eigen::Index(pose_pyramids.size() + lowres_pyramids.size());
  if (action.weights.size() != n * kPyramidDims)
    throw SizeError("action_score: weight length does not match the pyramid count");
  Scalar s = action.bias;
  Eigen::Index k = 0;
  for (const auto& p : pose_pyramids) s += action.weights.segment<kPyramidDims>(kPyramidDims * k++).dot(p);
  for (const auto& p : lowres_pyramids)
    s += action.weights.segment<kPyramidDims>(kPyramidDims * k++).dot(p);
  return s;
}

}  // namespace mstaog
