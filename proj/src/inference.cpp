#include "mstaog/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mstaog/error.hpp"

namespace mstaog {

namespace {
constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
}

ResponseMap ResponseMap::from_grid(const MatX& scores) {
  ResponseMap r;
  r.levels.push_back({1, scores});
  r.frame_width = int(scores.cols());
  r.frame_height = int(scores.rows());
  r.cell = 1;
  r.cell_origin = 0;
  return r;
}

void distance_transform_1d(std::span<const Scalar> f, Scalar a, Scalar shift,
                           std::span<Scalar> out, std::span<int> arg) {
  const int n = int(f.size()), nq = int(out.size());
  if (n == 0) throw SizeError("distance_transform_1d: empty input");
  if (!(a > 0)) throw NumericError("distance_transform_1d: curvature must be positive");
  if (arg.size() != out.size()) throw SizeError("distance_transform_1d: output size mismatch");
  // Lower envelope of p -> -f(p) + a (q - p)^2, written as a q^2 - 2 a p q + (a p^2 - f(p)).
  std::vector<int> v(n);
  std::vector<Scalar> z(n + 1);
  auto h = [&](int p) { return a * Scalar(p) * p - f[p]; };
  int k = -1;
  for (int p = 0; p < n; ++p) {
    if (f[p] == -kInf) continue;
    if (k < 0) {
      v[0] = p;
      z[0] = -kInf;
      z[1] = kInf;
      k = 0;
      continue;
    }
    Scalar s;
    for (;;) {
      s = (h(p) - h(v[k])) / (2 * a * (p - v[k]));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[0] = p;  // k == 0 and the new parabola dominates everywhere
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = p;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), -kInf);
    std::fill(arg.begin(), arg.end(), 0);
    return;
  }
  auto value = [&](int p, int i) {
    const Scalar d = Scalar(p - i) - shift;
    return f[p] - a * d * d;
  };
  int j = 0;
  for (int i = 0; i < nq; ++i) {
    const Scalar q = i + shift;
    while (z[j + 1] < q) ++j;
    // Rounding in the breakpoints can misassign queries next to a breakpoint.
    int best = v[j];
    Scalar bv = value(best, i);
    for (int c : {j - 1, j + 1}) {
      if (c < 0 || c > k) continue;
      const Scalar cv = value(v[c], i);
      if (cv > bv || (cv == bv && v[c] < best)) {
        best = v[c];
        bv = cv;
      }
    }
    out[i] = bv;
    arg[i] = best;
  }
}

DistanceTransform distance_transform(const MatX& child, const OffsetGaussian2D<Scalar>& g,
                                     CorrelationMode mode) {
  const int rows = int(child.rows()), cols = int(child.cols());
  if (rows == 0 || cols == 0) throw SizeError("distance_transform: empty map");
  const Mat2& s = g.covariance;
  const Scalar det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  if (!(s(0, 0) > 0) || !(det > 0)) throw NumericError("distance_transform: covariance is not SPD");
  // Precision entries, computed as deformation_score does.
  const Scalar pxx = s(1, 1) / det, pyy = s(0, 0) / det, pxy = -s(0, 1) / det;
  const Scalar mx = g.mean.x(), my = g.mean.y();

  DistanceTransform out;
  out.scores.resize(rows, cols);
  out.arg_x.resize(rows, cols);
  out.arg_y.resize(rows, cols);
  if (mode == CorrelationMode::Drop) out.dropped_correlation = std::abs(s(0, 1)) / std::sqrt(s(0, 0) * s(1, 1));
  const bool exact_shear = pxy != 0 && mode == CorrelationMode::Exact;
  if (!exact_shear) {
    // Separable passes: rows then columns.
    MatX g1(rows, cols);
    IndexMap ax(rows, cols);
    std::vector<Scalar> buf(std::max(rows, cols)), res(std::max(rows, cols));
    std::vector<int> arg(std::max(rows, cols));
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) buf[x] = child(y, x);
      distance_transform_1d({buf.data(), std::size_t(cols)}, pxx, mx, {res.data(), std::size_t(cols)},
                            {arg.data(), std::size_t(cols)});
      for (int x = 0; x < cols; ++x) {
        g1(y, x) = res[x];
        ax(y, x) = arg[x];
      }
    }
    for (int x = 0; x < cols; ++x) {
      for (int y = 0; y < rows; ++y) buf[y] = g1(y, x);
      distance_transform_1d({buf.data(), std::size_t(rows)}, pyy, my, {res.data(), std::size_t(rows)},
                            {arg.data(), std::size_t(rows)});
      for (int y = 0; y < rows; ++y) {
        out.arg_y(y, x) = arg[y];
        out.arg_x(y, x) = ax(arg[y], x);
      }
    }
  } else {
    // a (dx + (b/a) dy)^2 + (c - b^2/a) dy^2: every source row is a 1D
    // transform with a shift that depends on the row distance.
    const Scalar ratio = pxy / pxx, rest = pyy - pxy * pxy / pxx;
    std::vector<Scalar> buf(cols), res(cols);
    std::vector<int> arg(cols);
    MatX best = MatX::Constant(rows, cols, -kInf);
    for (int y = 0; y < rows; ++y) {
      for (int x = 0; x < cols; ++x) buf[x] = child(y, x);
      for (int y0 = 0; y0 < rows; ++y0) {
        const Scalar dy = Scalar(y - y0) - my;
        distance_transform_1d(buf, pxx, mx - ratio * dy, res, arg);
        for (int x0 = 0; x0 < cols; ++x0) {
          const Scalar v = res[x0] - rest * dy * dy;
          if (v > best(y0, x0)) {
            best(y0, x0) = v;
            out.arg_x(y0, x0) = arg[x0];
            out.arg_y(y0, x0) = y;
          }
        }
      }
    }
  }
  // Scores are re-evaluated at the argmax with the quadratic form in use.
  const Scalar cross = (mode == CorrelationMode::Exact) ? pxy : 0;
  for (int y0 = 0; y0 < rows; ++y0)
    for (int x0 = 0; x0 < cols; ++x0) {
      const int xi = out.arg_x(y0, x0), yi = out.arg_y(y0, x0);
      const Scalar dx = Scalar(xi - x0) - mx, dy = Scalar(yi - y0) - my;
      out.scores(y0, x0) = child(yi, xi) + (-pxx * dx * dx - pyy * dy * dy - 2 * cross * dx * dy);
    }
  return out;
}

MatX correlate(const FeatureMap& map, const MatX& tmpl, int width, int anchor_x, int anchor_y) {
  const int c = map.channels;
  if (tmpl.cols() != Eigen::Index(width) * c) throw SizeError("correlate: template width mismatch");
  const int height = int(tmpl.rows());
  MatX out = MatX::Zero(map.rows, map.cols);
  for (int y = 0; y < map.rows; ++y)
    for (int dy = 0; dy < height; ++dy) {
      const int yy = y - anchor_y + dy;
      if (yy < 0 || yy >= map.rows) continue;
      const auto trow = tmpl.row(dy);
      const auto mrow = map.data.row(yy);
      for (int x = 0; x < map.cols; ++x) {
        const int x0 = x - anchor_x;
        const int a = std::max(0, -x0), b = std::min(width, map.cols - x0);
        if (a >= b) continue;
        out(y, x) += trow.segment(Eigen::Index(a) * c, Eigen::Index(b - a) * c)
                         .dot(mrow.segment(Eigen::Index(x0 + a) * c, Eigen::Index(b - a) * c));
      }
    }
  return out;
}

namespace {

bool fits(const FeatureLevel& level, const PartModel& part) {
  return part.width <= level.hog.cols && part.height <= level.hog.rows;
}

ResponseMap empty_like(const FeaturePyramid& f) {
  ResponseMap r;
  r.frame_width = f.frame_width;
  r.frame_height = f.frame_height;
  r.cell = f.cell;
  r.cell_origin = 1;
  return r;
}

}  // namespace

std::vector<ResponseMap> part_responses(const FeaturePyramid& features, const PartModel& part,
                                        const PoseModel& pose) {
  const int m = pose.bins();
  if (part.bins() != m) throw SizeError("part_responses: part and pose bin counts differ");
  const MatX w = pose.interpolation();
  std::vector<ResponseMap> out(m, empty_like(features));
  for (const auto& level : features.levels) {
    std::vector<MatX> raw(m);
    const bool ok = fits(level, part);
    for (int k = 0; k < m && ok; ++k) {
      bool used = false;
      for (int r = 0; r < m; ++r) used |= w(r, k) != 0 && (pose.active.empty() || pose.active[r]);
      if (!used) continue;
      raw[k] = correlate(level.hog, part.appearance[k], part.width, part.anchor_x, part.anchor_y) +
               correlate(level.hof, part.motion[k], part.width, part.anchor_x, part.anchor_y);
    }
    for (int r = 0; r < m; ++r) {
      ResponseMap::Level lv{level.scale, MatX()};
      if (ok && (pose.active.empty() || pose.active[r])) {
        lv.scores = MatX::Zero(level.hog.rows, level.hog.cols);
        for (int k = 0; k < m; ++k)
          if (w(r, k) != 0) lv.scores += w(r, k) * raw[k];
      }
      out[r].levels.push_back(std::move(lv));
    }
  }
  return out;
}

ResponseMap part_response(const FeaturePyramid& features, const PartModel& part,
                          const PoseModel& pose, int bin) {
  if (bin < 0 || bin >= pose.bins()) throw SizeError("part_response: bin out of range");
  PoseModel one = pose;
  one.active.assign(pose.bins(), false);
  one.active[bin] = true;
  return std::move(part_responses(features, part, one)[bin]);
}

std::vector<Detection> non_maximum_suppression(std::vector<Detection> dets, Scalar overlap) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (auto& d : dets) {
    bool suppressed = false;
    for (const auto& k : kept) {
      const Scalar ix = std::max(0.0, std::min(d.box.x + d.box.width, k.box.x + k.box.width) -
                                          std::max(d.box.x, k.box.x));
      const Scalar iy = std::max(0.0, std::min(d.box.y + d.box.height, k.box.y + k.box.height) -
                                          std::max(d.box.y, k.box.y));
      const Scalar inter = ix * iy;
      const Scalar uni = d.box.area() + k.box.area() - inter;
      if (uni > 0 && inter / uni > overlap) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

FrameDetections detect_frame(const FeaturePyramid& features, const PoseModel& pose,
                             const DetectOptions& opt) {
  const int m = pose.bins();
  if (m < 1) throw ConfigError("detect_frame: pose has no view bins");
  const std::size_t n = pose.children.size();
  const auto root = part_responses(features, pose.root, pose);
  std::vector<std::vector<ResponseMap>> child;
  for (const auto& c : pose.children) child.push_back(part_responses(features, c, pose));

  FrameDetections out;
  out.pose_map = empty_like(features);
  std::vector<Detection> candidates;
  for (std::size_t l = 0; l < features.levels.size(); ++l) {
    const auto& level = features.levels[l];
    ResponseMap::Level pl{level.scale, MatX()};
    IndexMap bins;
    bool usable = !root[0].levels.empty();
    for (int b = 0; b < m && usable; ++b)
      if (pose.active.empty() || pose.active[b]) {
        usable = root[b].levels[l].scores.size() > 0;
        for (std::size_t i = 0; i < n && usable; ++i) usable = child[i][b].levels[l].scores.size() > 0;
      }
    if (!usable) {
      out.pose_map.levels.push_back(std::move(pl));
      out.best_bin.emplace_back();
      continue;
    }
    const int rows = level.hog.rows, cols = level.hog.cols;
    pl.scores = MatX::Constant(rows, cols, -kInf);
    bins = IndexMap::Zero(rows, cols);
    std::vector<std::vector<DistanceTransform>> dts(m);
    for (int b = 0; b < m; ++b) {
      if (!pose.active.empty() && !pose.active[b]) continue;
      MatX s = root[b].levels[l].scores.array() + pose.bias;
      for (std::size_t i = 0; i < n; ++i) {
        dts[b].push_back(distance_transform(child[i][b].levels[l].scores,
                                            pose.child_offset(int(i), b, level.scale, features.cell),
                                            opt.correlation));
        s += dts[b].back().scores;
      }
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x)
          if (s(y, x) > pl.scores(y, x)) {
            pl.scores(y, x) = s(y, x);
            bins(y, x) = b;
          }
    }
    if (opt.max_detections > 0) {
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
          if (!(pl.scores(y, x) > opt.threshold)) continue;
          Detection d;
          d.pose_id = pose.id;
          d.level = int(l);
          d.scale = level.scale;
          d.root = {x, y};
          d.bin = bins(y, x);
          d.score = pl.scores(y, x);
          const Scalar unit = Scalar(features.cell) / level.scale;
          d.box = {(x - pose.root.anchor_x + 1) * unit, (y - pose.root.anchor_y + 1) * unit,
                   pose.root.width * unit, pose.root.height * unit};
          if (opt.backtrack)
            for (std::size_t i = 0; i < n; ++i)
              d.parts.push_back({dts[d.bin][i].arg_x(y, x), dts[d.bin][i].arg_y(y, x)});
          candidates.push_back(std::move(d));
        }
    }
    out.pose_map.levels.push_back(std::move(pl));
    out.best_bin.push_back(std::move(bins));
  }
  if (opt.max_detections > 0) {
    out.detections = non_maximum_suppression(std::move(candidates), opt.nms_overlap);
    if (int(out.detections.size()) > opt.max_detections) out.detections.resize(opt.max_detections);
  }
  return out;
}

std::vector<FrameDetections> detect_poses(const VideoFeatures& video, const PoseModel& pose,
                                          const DetectOptions& opt) {
  std::vector<FrameDetections> out;
  out.reserve(video.frames.size());
  for (const auto& f : video.frames) out.push_back(detect_frame(f, pose, opt));
  return out;
}

int estimate_view(std::span<const Detection> detections) {
  if (detections.empty()) throw SizeError("estimate_view: no detections");
  const Detection* best = &detections[0];
  for (const auto& d : detections)
    if (d.score > best->score || (d.score == best->score && d.bin < best->bin)) best = &d;
  return best->bin;
}

Pyramid73 pyramid_pool(std::span<const ResponseMap> maps) {
  if (maps.empty()) throw SizeError("pyramid_pool: empty sequence");
  Pyramid73 out = Pyramid73::Constant(-kInf);
  const int frames = int(maps.size());
  const int extent_t = std::max(frames, 4);
  Scalar global_min = kInf;
  // Frame t of the padded sequence is frame min(t, frames - 1).
  for (int t = 0; t < extent_t; ++t) {
    const ResponseMap& map = maps[std::min(t, frames - 1)];
    for (const auto& lv : map.levels) {
      const int rows = int(lv.scores.rows()), cols = int(lv.scores.cols());
      for (int y = 0; y < rows; ++y)
        for (int x = 0; x < cols; ++x) {
          const Scalar v = lv.scores(y, x);
          if (!std::isfinite(v)) continue;
          global_min = std::min(global_min, v);
          out[0] = std::max(out[0], v);
          for (int k : {2, 4}) {
            const int ct = t * k / extent_t, cy = y * k / rows, cx = x * k / cols;
            const int idx = (k == 2 ? 1 : 9) + (ct * k + cy) * k + cx;
            out[idx] = std::max(out[idx], v);
          }
        }
    }
  }
  if (!std::isfinite(global_min)) throw SizeError("pyramid_pool: no finite responses");
  for (int i = 0; i < kPyramidDims; ++i)
    if (out[i] == -kInf) out[i] = global_min;
  return out;
}

ResponseMap standardized(const ResponseMap& map, const PoseModel& pose) {
  ResponseMap out = map;
  const Scalar sd = pose.response_std > 0 ? pose.response_std : 1;
  for (auto& lv : out.levels) lv.scores = (lv.scores.array() - pose.response_mean) / sd;
  return out;
}

std::vector<ResponseMap> lowres_maps(std::span<const LowResFeature> features,
                                     const LowResNode& node) {
  std::vector<ResponseMap> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(ResponseMap::from_grid(MatX::Constant(4, 4, node.score(f))));
  return out;
}

std::vector<Pyramid73> pose_pyramids(const VideoFeatures& video, const ModelArchive& archive) {
  DetectOptions opt;
  opt.max_detections = 0;
  opt.backtrack = false;
  std::vector<Pyramid73> out;
  for (const auto& pose : archive.poses) {
    std::vector<ResponseMap> maps;
    maps.reserve(video.frames.size());
    for (const auto& f : video.frames) maps.push_back(standardized(detect_frame(f, pose, opt).pose_map, pose));
    out.push_back(pyramid_pool(maps));
  }
  return out;
}

Classification classify_pyramids(std::span<const Pyramid73> pose_pyr,
                                 std::span<const LowResFeature> lowres,
                                 const ModelArchive& archive) {
  if (pose_pyr.size() != archive.poses.size())
    throw SizeError("classify: one pyramid per archived pose expected");
  if (archive.actions.empty()) throw ConfigError("classify: archive has no actions");
  std::map<int, std::size_t> index;
  for (std::size_t i = 0; i < archive.poses.size(); ++i) index[archive.poses[i].id] = i;
  Classification c;
  int best = -1;
  for (std::size_t a = 0; a < archive.actions.size(); ++a) {
    const auto& action = archive.actions[a];
    std::vector<Pyramid73> p, lr;
    for (int id : action.pose_ids) {
      auto it = index.find(id);
      if (it == index.end()) throw ConfigError("classify: unknown pose id " + std::to_string(id));
      p.push_back(pose_pyr[it->second]);
    }
    for (const auto& node : action.lowres) {
      const auto maps = lowres_maps(lowres, node);
      lr.push_back(pyramid_pool(maps));
    }
    c.scores.push_back(action_score(p, lr, action));
    if (best < 0 || c.scores[a] > c.scores[best] ||
        (c.scores[a] == c.scores[best] && action.name < archive.actions[best].name))
      best = int(a);
  }
  c.label = archive.actions[best].label;
  return c;
}

Classification classify(const VideoFeatures& video, const ModelArchive& archive) {
  return classify_pyramids(pose_pyramids(video, archive), video.lowres, archive);
}

Classification classify(const VideoSample& video, const ModelArchive& archive) {
  return classify(compute_video_features(video, archive.features), archive);
}

}  // namespace mstaog
