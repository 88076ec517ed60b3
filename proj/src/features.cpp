#include "mstaog/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mstaog/error.hpp"

namespace mstaog {

namespace {

constexpr Scalar kBlockEps = 1e-4;
// Weights of the projected descriptor: bin sums over the four normalizations
// and per-block energies.
constexpr Scalar kBinWeight = 0.5;
constexpr Scalar kEnergyWeight = 0.2357;

/// Per-cell histograms -> block-normalized, projected descriptors on the
/// interior cells.
FeatureMap normalize_blocks(const std::vector<Scalar>& hist, int ny, int nx, int bins, int cell) {
  FeatureMap out;
  out.cell = cell;
  out.channels = kDescriptorChannels;
  out.rows = std::max(0, ny - 2);
  out.cols = std::max(0, nx - 2);
  out.data = MatX::Zero(out.rows, Eigen::Index(out.cols) * out.channels);
  if (out.empty()) return out;
  std::vector<Scalar> energy(std::size_t(ny) * nx, 0);
  for (int i = 0; i < ny * nx; ++i)
    for (int b = 0; b < bins; ++b) energy[i] += hist[std::size_t(i) * bins + b] * hist[std::size_t(i) * bins + b];
  // norm2 of the 2x2 block whose top-left cell is (y, x)
  auto block = [&](int y, int x) {
    return energy[y * nx + x] + energy[y * nx + x + 1] + energy[(y + 1) * nx + x] +
           energy[(y + 1) * nx + x + 1];
  };
  for (int y = 1; y < ny - 1; ++y)
    for (int x = 1; x < nx - 1; ++x) {
      const Scalar* h = &hist[(std::size_t(y) * nx + x) * bins];
      const Scalar n[4] = {1 / std::sqrt(block(y - 1, x - 1) + kBlockEps * kBlockEps),
                           1 / std::sqrt(block(y - 1, x) + kBlockEps * kBlockEps),
                           1 / std::sqrt(block(y, x - 1) + kBlockEps * kBlockEps),
                           1 / std::sqrt(block(y, x) + kBlockEps * kBlockEps)};
      Scalar e[4] = {0, 0, 0, 0};
      for (int b = 0; b < bins; ++b) {
        Scalar sum = 0;
        for (int k = 0; k < 4; ++k) {
          const Scalar v = std::min(h[b] * n[k], kBlockClip);
          sum += v;
          e[k] += v;
        }
        out.at(y - 1, x - 1, b) = kBinWeight * sum;
      }
      for (int k = 0; k < 4; ++k) out.at(y - 1, x - 1, kHistogramBins + k) = kEnergyWeight * e[k];
    }
  return out;
}

Image gradient_x(const Image& img) {
  const int w = int(img.cols()), h = int(img.rows());
  Image g(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g(y, x) = (img(y, std::min(x + 1, w - 1)) - img(y, std::max(x - 1, 0))) / 2;
  return g;
}

Image gradient_y(const Image& img) {
  const int w = int(img.cols()), h = int(img.rows());
  Image g(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      g(y, x) = (img(std::min(y + 1, h - 1), x) - img(std::max(y - 1, 0), x)) / 2;
  return g;
}

/// 4-neighbour average with replicated borders.
Image neighbour_mean(const Image& f) {
  const int w = int(f.cols()), h = int(f.rows());
  Image out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(y, x) = (f(y, std::max(x - 1, 0)) + f(y, std::min(x + 1, w - 1)) +
                   f(std::max(y - 1, 0), x) + f(std::min(y + 1, h - 1), x)) / 4;
  return out;
}

Image warp(const Image& img, const Image& u, const Image& v) {
  Image out(img.rows(), img.cols());
  for (int y = 0; y < img.rows(); ++y)
    for (int x = 0; x < img.cols(); ++x) out(y, x) = sample_bilinear(img, x + u(y, x), y + v(y, x));
  return out;
}

}  // namespace

FeatureMap compute_hog(const Image& frame, int cell) {
  if (cell <= 0) throw SizeError("compute_hog: non-positive cell size");
  const int nx = int(frame.cols()) / cell, ny = int(frame.rows()) / cell;
  if (nx < 3 || ny < 3) throw SizeError("compute_hog: frame smaller than 3x3 cells");
  const Image gx = gradient_x(frame), gy = gradient_y(frame);
  std::vector<Scalar> hist(std::size_t(nx) * ny * kHistogramBins, 0);
  const Scalar bin_width = std::numbers::pi / kHistogramBins;
  for (int y = 0; y < ny * cell; ++y)
    for (int x = 0; x < nx * cell; ++x) {
      const Scalar mag = std::hypot(gx(y, x), gy(y, x));
      if (mag == 0) continue;
      Scalar a = std::atan2(gy(y, x), gx(y, x));
      if (a < 0) a += std::numbers::pi;
      // Bins are centered at (b + 0.5) * bin_width; votes split linearly.
      const Scalar pos = a / bin_width - 0.5;
      const int b0 = int(std::floor(pos));
      const Scalar f = pos - b0;
      Scalar* h = &hist[(std::size_t(y / cell) * nx + x / cell) * kHistogramBins];
      h[(b0 + kHistogramBins) % kHistogramBins] += (1 - f) * mag;
      h[(b0 + 1) % kHistogramBins] += f * mag;
    }
  return normalize_blocks(hist, ny, nx, kHistogramBins, cell);
}

FlowField compute_flow(const Image& frame_t, const Image& frame_t1, const FlowConfig& cfg) {
  if (frame_t.rows() != frame_t1.rows() || frame_t.cols() != frame_t1.cols())
    throw SizeError("compute_flow: frame sizes differ");
  if (frame_t.size() == 0) throw SizeError("compute_flow: empty frame");
  std::vector<Image> p0{frame_t}, p1{frame_t1};
  for (int l = 1; l < cfg.levels; ++l) {
    if (p0.back().cols() < 16 || p0.back().rows() < 16) break;
    const int w = int(p0.back().cols() + 1) / 2, h = int(p0.back().rows() + 1) / 2;
    p0.push_back(resize(p0.back(), w, h));
    p1.push_back(resize(p1.back(), w, h));
  }
  const Scalar alpha2 = cfg.alpha * cfg.alpha;
  Image u, v;
  for (int l = int(p0.size()) - 1; l >= 0; --l) {
    const Image& i0 = p0[l];
    const Image& i1 = p1[l];
    const int w = int(i0.cols()), h = int(i0.rows());
    if (u.size() == 0) {
      u = Image::Zero(h, w);
      v = Image::Zero(h, w);
    } else {
      const Scalar fx = Scalar(w) / u.cols(), fy = Scalar(h) / u.rows();
      u = resize(u, w, h) * fx;
      v = resize(v, w, h) * fy;
    }
    const Image gx0 = gradient_x(i0), gy0 = gradient_y(i0);
    for (int pass = 0; pass < std::max(1, cfg.warps); ++pass) {
      const Image i1w = warp(i1, u, v);
      const Image ix = (gradient_x(i1w) + gx0) / 2, iy = (gradient_y(i1w) + gy0) / 2;
      const Image it = i1w - i0;
      const Image denom = alpha2 + ix.square() + iy.square();
      const Image u0 = u, v0 = v;
      for (int k = 0; k < cfg.iterations; ++k) {
        const Image ub = neighbour_mean(u), vb = neighbour_mean(v);
        const Image r = (ix * (ub - u0) + iy * (vb - v0) + it) / denom;
        u = ub - ix * r;
        v = vb - iy * r;
      }
    }
  }
  if (cfg.max_magnitude > 0) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const Scalar m = std::hypot(u.data()[i], v.data()[i]);
      if (m > cfg.max_magnitude) {
        u.data()[i] *= cfg.max_magnitude / m;
        v.data()[i] *= cfg.max_magnitude / m;
      }
    }
  }
  return {u, v};
}

FeatureMap compute_hof(const FlowField& flow, int cell, Scalar threshold) {
  if (cell <= 0) throw SizeError("compute_hof: non-positive cell size");
  if (flow.u.rows() != flow.v.rows() || flow.u.cols() != flow.v.cols())
    throw SizeError("compute_hof: flow components differ in size");
  const int nx = flow.width() / cell, ny = flow.height() / cell;
  if (nx < 3 || ny < 3) throw SizeError("compute_hof: flow smaller than 3x3 cells");
  constexpr int directions = kHistogramBins - 1;
  std::vector<Scalar> hist(std::size_t(nx) * ny * kHistogramBins, 0);
  const Scalar bin_width = 2 * std::numbers::pi / directions;
  for (int y = 0; y < ny * cell; ++y)
    for (int x = 0; x < nx * cell; ++x) {
      const Scalar du = flow.u(y, x), dv = flow.v(y, x);
      const Scalar mag = std::hypot(du, dv);
      Scalar* h = &hist[(std::size_t(y / cell) * nx + x / cell) * kHistogramBins];
      if (mag < threshold) {
        h[directions] += threshold;
        continue;
      }
      Scalar a = std::atan2(dv, du);
      if (a < 0) a += 2 * std::numbers::pi;
      // Bin b is centered at b * bin_width.
      const Scalar pos = a / bin_width;
      const int b0 = int(std::floor(pos));
      const Scalar f = pos - b0;
      h[b0 % directions] += (1 - f) * mag;
      h[(b0 + 1) % directions] += f * mag;
    }
  return normalize_blocks(hist, ny, nx, kHistogramBins, cell);
}

LowResFeature compute_lowres(const Image& frame, const BoundingBox& box, int bins) {
  if (bins <= 0) throw SizeError("compute_lowres: non-positive bin count");
  if (frame.size() == 0) throw SizeError("compute_lowres: empty frame");
  const int x0 = std::clamp(int(std::floor(box.x)), 0, int(frame.cols()));
  const int y0 = std::clamp(int(std::floor(box.y)), 0, int(frame.rows()));
  const int x1 = std::clamp(int(std::ceil(box.x + box.width)), 0, int(frame.cols()));
  const int y1 = std::clamp(int(std::ceil(box.y + box.height)), 0, int(frame.rows()));
  LowResFeature f;
  f.histogram = VecX::Zero(bins);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const int b = std::clamp(int(frame(y, x) * bins / 256.0), 0, bins - 1);
      f.histogram[b] += 1;
    }
  const Scalar total = f.histogram.sum();
  if (total > 0) f.histogram /= total;
  f.size = Vec2(box.width, box.height) / Scalar(frame.rows());
  return f;
}

FlowField rescale_flow(const FlowField& flow, Scalar factor) {
  if (factor == 1) return flow;
  const int w = std::max(1, int(std::lround(flow.width() * factor)));
  const int h = std::max(1, int(std::lround(flow.height() * factor)));
  return {resize(flow.u, w, h) * factor, resize(flow.v, w, h) * factor};
}

FeaturePyramid compute_pyramid(const Image& frame, const FlowField& flow, const FeatureConfig& cfg) {
  if (cfg.cell <= 0 || cfg.scales <= 0 || !(cfg.scale_step > 1))
    throw ConfigError("compute_pyramid: invalid feature configuration");
  if (flow.width() != frame.cols() || flow.height() != frame.rows())
    throw SizeError("compute_pyramid: flow and frame sizes differ");
  FeaturePyramid p;
  p.frame_width = int(frame.cols());
  p.frame_height = int(frame.rows());
  p.cell = cfg.cell;
  for (int l = 0; l < cfg.scales; ++l) {
    const Scalar scale = std::pow(cfg.scale_step, -l);
    const int w = int(std::lround(frame.cols() * scale)), h = int(std::lround(frame.rows() * scale));
    if (w / cfg.cell < 3 || h / cfg.cell < 3) break;
    FeatureLevel level;
    level.scale = scale;
    const Image img = l == 0 ? frame : resize(frame, w, h);
    const FlowField f = l == 0 ? flow
                               : FlowField{resize(flow.u, w, h) * scale, resize(flow.v, w, h) * scale};
    level.hog = compute_hog(img, cfg.cell);
    level.hof = compute_hof(f, cfg.cell, cfg.hof_threshold);
    p.levels.push_back(std::move(level));
  }
  if (p.levels.empty()) throw SizeError("compute_pyramid: frame smaller than 3x3 cells");
  return p;
}

VideoFeatures compute_video_features(const VideoSample& video, const FeatureConfig& cfg) {
  const std::size_t n = video.num_frames();
  if (n == 0) throw IngestError("video " + video.id + " has no frames");
  VideoFeatures out;
  out.frames.reserve(n);
  Image prev = video.frame(0);
  Image next = n > 1 ? video.frame(1) : prev;
  FlowField flow = n > 1 ? compute_flow(prev, next, cfg.flow)
                         : FlowField{Image::Zero(prev.rows(), prev.cols()),
                                     Image::Zero(prev.rows(), prev.cols())};
  for (std::size_t t = 0; t < n; ++t) {
    const Image cur = t == 0 ? prev : (t == 1 ? next : video.frame(t));
    if (t >= 2) flow = compute_flow(prev, cur, cfg.flow);
    out.frames.push_back(compute_pyramid(cur, flow, cfg));
    const BoundingBox box = t < video.boxes.size()
                                ? video.boxes[t]
                                : BoundingBox{0, 0, Scalar(cur.cols()), Scalar(cur.rows())};
    out.lowres.push_back(compute_lowres(cur, box));
    prev = cur;
  }
  return out;
}

}  // namespace mstaog
