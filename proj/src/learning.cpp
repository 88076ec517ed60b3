#include "mstaog/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mstaog/error.hpp"
#include "mstaog/inference.hpp"

namespace mstaog {

namespace {

constexpr Scalar kInf = std::numeric_limits<Scalar>::infinity();
// Lower clip of the offset precisions: standard deviation at most one torso length.
constexpr Scalar kMinPrecision = 1.0;

int nearest_bin(const PoseModel& m, Scalar theta) {
  int best = 0;
  for (int k = 1; k < m.bins(); ++k)
    if (angular_distance(theta, m.bin_centers[k]) < angular_distance(theta, m.bin_centers[best])) best = k;
  return best;
}

bool bin_active(const PoseModel& m, int b) { return m.active.empty() || m.active[b]; }

const PartModel& part_of(const PoseModel& m, int p) { return p == 0 ? m.root : m.children[p - 1]; }
PartModel& part_of(PoseModel& m, int p) { return p == 0 ? m.root : m.children[p - 1]; }

// Deformation parameters are precisions in normalized skeleton units:
// Shared: per child the three 3D axes; Independent: per child and bin the
// two view-plane axes.
template <typename Fn>
void for_each_precision(PoseModel& m, Fn&& fn) {
  for (auto& c : m.children) {
    if (m.coupling == ViewCoupling::Shared) {
      for (int j = 0; j < 3; ++j) {
        Scalar lam = 1 / c.offset.variance[j];
        fn(lam);
        c.offset.variance[j] = 1 / lam;
      }
    } else {
      for (int b = 0; b < m.bins(); ++b) {
        if (!bin_active(m, b)) continue;
        auto& cov = c.view_offsets[b].covariance;
        const Scalar kx = m.k1 * m.k1, ky = m.k2 * m.k2;
        Scalar lx = kx / cov(0, 0), ly = ky / cov(1, 1);
        fn(lx);
        fn(ly);
        cov(0, 0) = kx / lx;
        cov(1, 1) = ky / ly;
        cov(0, 1) = cov(1, 0) = 0;
      }
    }
  }
}

Scalar param_sqnorm(const PoseModel& m) {
  Scalar s = m.bias * m.bias;
  for (int p = 0; p <= int(m.children.size()); ++p) {
    const auto& part = part_of(m, p);
    for (int k = 0; k < m.bins(); ++k) s += part.appearance[k].squaredNorm() + part.motion[k].squaredNorm();
  }
  PoseModel& mm = const_cast<PoseModel&>(m);
  for_each_precision(mm, [&](Scalar& lam) { s += lam * lam; });
  return s;
}

void scale_params(PoseModel& m, Scalar f) {
  m.bias *= f;
  for (int p = 0; p <= int(m.children.size()); ++p) {
    auto& part = part_of(m, p);
    for (int k = 0; k < m.bins(); ++k) {
      part.appearance[k] *= f;
      part.motion[k] *= f;
    }
  }
  for_each_precision(m, [&](Scalar& lam) { lam *= f; });
}

void clip_precisions(PoseModel& m, const TrainingConfig& cfg) {
  const Scalar hi = 1 / cfg.sigma_min;
  for_each_precision(m, [&](Scalar& lam) { lam = std::clamp(lam, kMinPrecision, hi); });
}

/// A fully specified configuration: patches of every part, bin, displacements.
struct Placement {
  int level = 0;
  int bin = 0;
  std::vector<Cell> locs;  // root, then children
  std::vector<MatX> app, mot;
  Scalar score = 0;
};

Vec2 as_vec(Cell c) { return Vec2(c.x, c.y); }

class Scorer {
 public:
  Scorer(const PoseModel& m) : m_(m), w_(m.interpolation()) {}

  const MatX& weights() const { return w_; }

  /// Raw per-bin responses of a part at a location.
  VecX raw(const FeatureLevel& level, int p, Cell at, MatX* app = nullptr, MatX* mot = nullptr) const {
    const auto& part = part_of(m_, p);
    MatX a = extract_window(level.hog, at, part), b = extract_window(level.hof, at, part);
    VecX r(m_.bins());
    for (int k = 0; k < m_.bins(); ++k)
      r[k] = part.appearance[k].cwiseProduct(a).sum() + part.motion[k].cwiseProduct(b).sum();
    if (app) *app = std::move(a);
    if (mot) *mot = std::move(b);
    return r;
  }

  Scalar deformation(int child, int bin, Scalar scale, int cell, Cell root, Cell at) const {
    return deformation_score(as_vec(root), as_vec(at), m_.child_offset(child, bin, scale, cell));
  }

  /// Best placement over bins in `bins`, roots in `roots` and child cells
  /// chosen by `child_cells(i, bin, root)`.
  template <typename ChildCells>
  Placement best(const FeaturePyramid& f, int level, const std::vector<int>& bins,
                 const std::vector<Cell>& roots, ChildCells&& child_cells) const {
    const FeatureLevel& lv = f.levels.at(level);
    Placement best;
    best.score = -kInf;
    const int n = int(m_.children.size());
    for (Cell r : roots) {
      const VecX r0 = raw(lv, 0, r);
      for (int b : bins) {
        Scalar s = w_.row(b).dot(r0) + m_.bias;
        std::vector<Cell> locs{r};
        for (int i = 0; i < n && s > -kInf; ++i) {
          Scalar bi = -kInf;
          Cell arg;
          for (Cell c : child_cells(i, b, r)) {
            const Scalar v = w_.row(b).dot(cached_raw(lv, i + 1, c)) +
                             deformation(i, b, lv.scale, f.cell, r, c);
            if (v > bi) {
              bi = v;
              arg = c;
            }
          }
          s += bi;
          locs.push_back(arg);
        }
        if (s > best.score) {
          best.score = s;
          best.bin = b;
          best.locs = std::move(locs);
          best.level = level;
        }
      }
    }
    cache_.clear();
    return best;
  }

  void fill_patches(const FeaturePyramid& f, Placement& pl) const {
    const FeatureLevel& lv = f.levels.at(pl.level);
    pl.app.resize(pl.locs.size());
    pl.mot.resize(pl.locs.size());
    for (std::size_t p = 0; p < pl.locs.size(); ++p) {
      const auto& part = part_of(m_, int(p));
      pl.app[p] = extract_window(lv.hog, pl.locs[p], part);
      pl.mot[p] = extract_window(lv.hof, pl.locs[p], part);
    }
  }

 private:
  const VecX& cached_raw(const FeatureLevel& lv, int p, Cell c) const {
    const long key = (long(p) << 40) | (long(c.y + 100000) << 20) | long(c.x + 100000);
    for (auto& [k, v] : cache_)
      if (k == key) return v;
    cache_.emplace_back(key, raw(lv, p, c));
    return cache_.back().second;
  }

  const PoseModel& m_;
  MatX w_;
  mutable std::vector<std::pair<long, VecX>> cache_;
};

std::vector<Cell> neighbourhood(Cell c, int radius, const FeatureMap& grid) {
  std::vector<Cell> out;
  for (int y = c.y - radius; y <= c.y + radius; ++y)
    for (int x = c.x - radius; x <= c.x + radius; ++x)
      if (y >= 0 && x >= 0 && y < grid.rows && x < grid.cols) out.push_back({x, y});
  if (out.empty()) out.push_back({std::clamp(c.x, 0, grid.cols - 1), std::clamp(c.y, 0, grid.rows - 1)});
  return out;
}

std::vector<int> active_bins(const PoseModel& m) {
  std::vector<int> b;
  for (int k = 0; k < m.bins(); ++k)
    if (bin_active(m, k)) b.push_back(k);
  return b;
}

Cell rounded_mean_location(const PoseModel& m, int child, int bin, Scalar scale, int cell, Cell root) {
  const Vec2 mu = m.child_offset(child, bin, scale, cell).mean;
  return {root.x + int(std::lround(mu.x())), root.y + int(std::lround(mu.y()))};
}

/// Negative: root fixed, maximize over bins and child cells near the mean.
Placement negative_placement(const Scorer& sc, const PoseModel& m, const TrainExample& ex,
                             const TrainingConfig& cfg) {
  const auto& f = *ex.features;
  const auto& lv = f.levels.at(ex.level);
  return sc.best(f, ex.level, active_bins(m), {ex.root}, [&](int i, int b, Cell r) {
    return neighbourhood(rounded_mean_location(m, i, b, lv.scale, f.cell, r), cfg.search_radius, lv.hog);
  });
}

/// Positive at its fixed latent values.
Placement fixed_placement(const Scorer& sc, const PoseModel& m, const TrainExample& ex) {
  const auto& f = *ex.features;
  const int bin = nearest_bin(m, ex.theta);
  return sc.best(f, ex.level, {bin}, {ex.root}, [&](int i, int, Cell) {
    return std::vector<Cell>{ex.parts.at(i)};
  });
}

/// Latent step: bins within the view radius of the annotation, root and
/// children within the search radius of their annotated cells.
Placement latent_placement(const Scorer& sc, const PoseModel& m, const TrainExample& annotation,
                           const TrainingConfig& cfg) {
  const auto& f = *annotation.features;
  const auto& lv = f.levels.at(annotation.level);
  const int b0 = nearest_bin(m, annotation.theta);
  std::vector<int> bins;
  for (int d = -cfg.view_radius; d <= cfg.view_radius; ++d) {
    const int b = ((b0 + d) % m.bins() + m.bins()) % m.bins();
    if (bin_active(m, b) && std::find(bins.begin(), bins.end(), b) == bins.end()) bins.push_back(b);
  }
  std::sort(bins.begin(), bins.end());
  if (bins.empty()) bins.push_back(b0);
  return sc.best(f, annotation.level, bins, neighbourhood(annotation.root, cfg.search_radius, lv.hog),
                 [&](int i, int, Cell) { return neighbourhood(annotation.parts.at(i), cfg.search_radius, lv.hog); });
}

/// Adds eta * y * dS/dparams at a placement.
void apply_gradient(PoseModel& m, const MatX& w, const FeaturePyramid& f, const Placement& pl,
                    Scalar step) {
  const int bins = m.bins();
  for (std::size_t p = 0; p < pl.locs.size(); ++p) {
    auto& part = part_of(m, int(p));
    for (int k = 0; k < bins; ++k) {
      const Scalar c = w(pl.bin, k);
      if (c == 0) continue;
      part.appearance[k] += (step * c) * pl.app[p];
      part.motion[k] += (step * c) * pl.mot[p];
    }
  }
  m.bias += step;
  const Scalar scale = f.levels.at(pl.level).scale;
  const Scalar fc = scale / f.cell;
  for (std::size_t i = 0; i < m.children.size(); ++i) {
    auto& child = m.children[i];
    const auto g = m.child_offset(int(i), pl.bin, scale, f.cell);
    const Vec2 d = as_vec(pl.locs[i + 1]) - as_vec(pl.locs[0]) - g.mean;
    if (m.coupling == ViewCoupling::Shared) {
      const Scalar th = m.bin_centers[pl.bin], c = std::cos(th), s = std::sin(th);
      const Scalar sxx = g.covariance(0, 0), syy = g.covariance(1, 1);
      Vec3 lam = child.offset.variance.cwiseInverse();
      // dS/dlambda_j = -((Q^T P d)_j)^2 / lambda_j^2, Q in level cells.
      const Scalar ax = fc * m.k1 * d.x() / sxx, ay = fc * m.k2 * d.y() / syy;
      const Vec3 qpd(c * ax, ay, -s * ax);
      for (int j = 0; j < 3; ++j) lam[j] += step * (-(qpd[j] * qpd[j]) / (lam[j] * lam[j]));
      lam = lam.cwiseMax(1e-12);
      child.offset.variance = lam.cwiseInverse();
    } else {
      auto& cov = child.view_offsets[pl.bin].covariance;
      const Scalar kx = m.k1 * m.k1, ky = m.k2 * m.k2;
      Scalar lx = kx / cov(0, 0), ly = ky / cov(1, 1);
      lx += step * (-d.x() * d.x() / (fc * fc * kx));
      ly += step * (-d.y() * d.y() / (fc * fc * ky));
      cov(0, 0) = kx / std::max(lx, 1e-12);
      cov(1, 1) = ky / std::max(ly, 1e-12);
    }
  }
}

Scalar hinge(Scalar margin) { return std::max<Scalar>(0, 1 - margin); }

}  // namespace

Scalar example_score(const PoseModel& model, const FeaturePyramid& features, int level, int bin,
                     Cell root, std::span<const Cell> parts) {
  std::vector<Cell> locs{root};
  locs.insert(locs.end(), parts.begin(), parts.end());
  return view_score(locs, features.levels.at(level), features.cell, model, model.bin_centers.at(bin));
}

namespace {

/// Score of a placement, evaluated from its patches.
Scalar placement_score(const PoseModel& m, const MatX& w, const FeaturePyramid& f, const Placement& pl) {
  Scalar s = m.bias;
  for (std::size_t p = 0; p < pl.locs.size(); ++p) {
    const auto& part = part_of(m, int(p));
    for (int k = 0; k < m.bins(); ++k) {
      const Scalar c = w(pl.bin, k);
      if (c != 0)
        s += c * (part.appearance[k].cwiseProduct(pl.app[p]).sum() +
                  part.motion[k].cwiseProduct(pl.mot[p]).sum());
    }
  }
  const Scalar scale = f.levels.at(pl.level).scale;
  for (std::size_t i = 0; i < m.children.size(); ++i)
    s += deformation_score(as_vec(pl.locs[0]), as_vec(pl.locs[i + 1]),
                           m.child_offset(int(i), pl.bin, scale, f.cell));
  return s;
}

struct State {
  std::vector<TrainExample> pos_examples;  // latent values of the positives
  std::vector<Placement> pos;              // with patches
};

Scalar full_objective(const PoseModel& m, const State& st, std::span<const TrainExample> negatives,
                      const TrainingConfig& cfg, Scalar* hinge_total = nullptr) {
  const MatX w = m.interpolation();
  Scorer sc(m);
  Scalar h = 0;
  for (std::size_t n = 0; n < st.pos.size(); ++n)
    h += hinge(placement_score(m, w, *st.pos_examples[n].features, st.pos[n]));
  for (const auto& ex : negatives) h += hinge(-negative_placement(sc, m, ex, cfg).score);
  if (hinge_total) *hinge_total = h;
  return 0.5 * param_sqnorm(m) + cfg.C * h;
}

void check_examples(const PoseModel& m, std::span<const TrainExample> ex, bool positive) {
  for (const auto& e : ex) {
    if (!e.features) throw SizeError("training example without features");
    if (e.level < 0 || e.level >= int(e.features->levels.size()))
      throw SizeError("training example level out of range");
    if (positive && e.parts.size() != m.children.size())
      throw SizeError("positive example must annotate every child part");
  }
}

}  // namespace

Scalar latent_objective(const PoseModel& model, std::span<const TrainExample> positives,
                        std::span<const TrainExample> negatives, const TrainingConfig& cfg) {
  check_examples(model, positives, true);
  check_examples(model, negatives, false);
  Scorer sc(model);
  State st;
  for (const auto& p : positives) {
    st.pos_examples.push_back(p);
    Placement pl = fixed_placement(sc, model, p);
    sc.fill_patches(*p.features, pl);
    st.pos.push_back(std::move(pl));
  }
  return full_objective(model, st, negatives, cfg);
}

TrainResult train_pose(PoseModel init, std::span<const TrainExample> positives,
                       std::vector<TrainExample> negatives,
                       std::span<const FeaturePyramid* const> bootstrap, const TrainingConfig& cfg) {
  if (positives.empty()) throw DegenerateError("train_pose: no positive examples");
  if (negatives.empty()) throw DegenerateError("train_pose: no negative examples");
  if (!(cfg.C > 0)) throw ConfigError("train_pose: C must be positive");
  if (init.bins() < 1) throw ConfigError("train_pose: pose has no view bins");
  check_examples(init, positives, true);
  check_examples(init, negatives, false);
  if (init.active.empty()) init.active.assign(init.bins(), true);
  clip_precisions(init, cfg);

  TrainResult result;
  PoseModel& m = result.model;
  m = std::move(init);
  std::mt19937_64 rng(cfg.seed);
  long t = 0;
  State st;
  st.pos_examples.assign(positives.begin(), positives.end());

  auto latent_step = [&](bool use_annotation) {
    Scorer sc(m);
    st.pos.clear();
    for (std::size_t n = 0; n < positives.size(); ++n) {
      Placement pl = use_annotation ? fixed_placement(sc, m, positives[n])
                                    : latent_placement(sc, m, positives[n], cfg);
      sc.fill_patches(*positives[n].features, pl);
      auto& ex = st.pos_examples[n];
      ex.level = pl.level;
      ex.root = pl.locs[0];
      ex.parts.assign(pl.locs.begin() + 1, pl.locs.end());
      ex.theta = m.bin_centers[pl.bin];
      st.pos.push_back(std::move(pl));
    }
  };

  auto convex_step = [&]() -> Scalar {
    const Scalar before = full_objective(m, st, negatives, cfg);
    if (!std::isfinite(before)) throw NumericError("train_pose: non-finite objective");
    const PoseModel saved = m;
    const long saved_t = t;
    const std::size_t np = st.pos.size(), nn = negatives.size();
    const Scalar lambda = 1 / (cfg.C * Scalar(np + nn));
    const Scalar radius = 1 / std::sqrt(lambda);
    const MatX w = m.interpolation();
    std::vector<std::size_t> order(np + nn);
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < cfg.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t idx : order) {
        ++t;
        const Scalar eta = 1 / (lambda * Scalar(t));
        Placement neg;
        const Placement* pl;
        const FeaturePyramid* f;
        Scalar y;
        if (idx < np) {
          pl = &st.pos[idx];
          f = st.pos_examples[idx].features;
          y = 1;
        } else {
          const auto& ex = negatives[idx - np];
          Scorer sc(m);
          neg = negative_placement(sc, m, ex, cfg);
          sc.fill_patches(*ex.features, neg);
          pl = &neg;
          f = ex.features;
          y = -1;
        }
        const Scalar s = placement_score(m, w, *f, *pl);
        scale_params(m, 1 - eta * lambda);
        clip_precisions(m, cfg);
        if (y * s < 1) apply_gradient(m, w, *f, *pl, eta * y);
        const Scalar norm = std::sqrt(param_sqnorm(m));
        if (norm > radius) scale_params(m, radius / norm);
        clip_precisions(m, cfg);
      }
    }
    const Scalar after = full_objective(m, st, negatives, cfg);
    if (!std::isfinite(after)) throw NumericError("train_pose: non-finite objective");
    if (after > before) {
      m = saved;
      t = saved_t + long(order.size()) * cfg.epochs;
      return before;
    }
    return after;
  };

  const int stages = 1 + std::max(0, cfg.bootstrap_rounds);
  for (int stage = 0; stage < stages; ++stage) {
    if (stage > 0) {
      // Hard negatives: top-scoring windows on negative frames.
      DetectOptions opt;
      opt.threshold = -1;
      opt.max_detections = 5;
      opt.backtrack = false;
      std::vector<Detection> found;
      std::vector<const FeaturePyramid*> source;
      const int stride = std::max(1, cfg.hard_negative_stride);
      for (std::size_t i = 0; i < bootstrap.size(); i += stride) {
        for (auto& d : detect_frame(*bootstrap[i], m, opt).detections) {
          found.push_back(std::move(d));
          source.push_back(bootstrap[i]);
        }
      }
      std::vector<std::size_t> order(found.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return found[a].score > found[b].score; });
      int added = 0;
      for (std::size_t i : order) {
        if (added >= cfg.hard_negatives) break;
        TrainExample ex;
        ex.features = source[i];
        ex.label = -1;
        ex.level = found[i].level;
        ex.root = found[i].root;
        negatives.push_back(ex);
        ++added;
      }
      result.bootstrap_added.push_back(added);
      if (added == 0) break;
    }
    for (int r = 0; r < std::max(1, cfg.latent_iterations); ++r) {
      latent_step(stage == 0 && r == 0);
      result.objective.push_back(convex_step());
      result.objective_stage.push_back(stage);
    }
  }

  const MatX w = m.interpolation();
  Scalar hinge_total = 0;
  full_objective(m, st, negatives, cfg, &hinge_total);
  for (std::size_t n = 0; n < st.pos.size(); ++n) {
    const Scalar s = placement_score(m, w, *st.pos_examples[n].features, st.pos[n]);
    result.positive_scores.push_back(s);
    result.slacks.push_back(hinge(s));
  }
  result.negatives_used = int(negatives.size());
  result.mean_hinge = hinge_total / Scalar(st.pos.size() + negatives.size());
  return result;
}

LinearSvm train_linear_svm(const MatX& samples, std::span<const int> labels, Scalar C,
                           Scalar tolerance, int max_iterations) {
  const auto n = samples.rows(), d = samples.cols();
  if (Eigen::Index(labels.size()) != n) throw SizeError("train_linear_svm: label count mismatch");
  if (n == 0) throw DegenerateError("train_linear_svm: no samples");
  if (!(C > 0)) throw ConfigError("train_linear_svm: C must be positive");
  VecX y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[i] > 0 ? 1 : -1;
  VecX alpha = VecX::Zero(n), w = VecX::Zero(d);
  Scalar b = 0;
  VecX q = samples.rowwise().squaredNorm().array() + 1;
  LinearSvm out;
  for (int it = 0; it < max_iterations; ++it) {
    Scalar pg_max = -kInf, pg_min = kInf;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar g = y[i] * (samples.row(i).dot(w) + b) - 1;
      Scalar pg = g;
      if (alpha[i] == 0) pg = std::min<Scalar>(g, 0);
      else if (alpha[i] == C) pg = std::max<Scalar>(g, 0);
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0) {
        const Scalar old = alpha[i];
        alpha[i] = std::clamp(old - g / q[i], Scalar(0), C);
        const Scalar delta = (alpha[i] - old) * y[i];
        w += delta * samples.row(i).transpose();
        b += delta;
      }
    }
    out.iterations = it + 1;
    if (pg_max - pg_min <= tolerance) break;
  }
  if (!w.allFinite() || !std::isfinite(b)) throw NumericError("train_linear_svm: non-finite solution");
  out.weights = w;
  out.bias = b;
  return out;
}

VecX action_features(std::span<const Pyramid73> pose_pyramids, std::span<const LowResFeature> lowres,
                     const ActionModel& action) {
  VecX x(Eigen::Index(kPyramidDims) * Eigen::Index(pose_pyramids.size() + action.lowres.size()));
  Eigen::Index k = 0;
  for (const auto& p : pose_pyramids) x.segment<kPyramidDims>(kPyramidDims * k++) = p;
  for (const auto& node : action.lowres) {
    const auto maps = lowres_maps(lowres, node);
    x.segment<kPyramidDims>(kPyramidDims * k++) = pyramid_pool(maps);
  }
  return x;
}

std::vector<ActionModel> train_action(std::span<const ActionTrainingVideo> videos,
                                      const std::vector<std::string>& vocabulary,
                                      std::span<const int> pose_ids, const TrainingConfig& cfg,
                                      bool use_lowres) {
  if (videos.empty()) throw DegenerateError("train_action: no videos");
  std::vector<int> present;
  for (const auto& v : videos) {
    if (v.label < 0 || v.label >= int(vocabulary.size())) throw SizeError("train_action: label out of range");
    if (v.pose_pyramids.size() != pose_ids.size()) throw SizeError("train_action: pyramid count mismatch");
    if (std::find(present.begin(), present.end(), v.label) == present.end()) present.push_back(v.label);
  }
  if (present.size() < 2) throw DegenerateError("train_action: need at least two classes");
  std::sort(present.begin(), present.end());

  std::vector<ActionModel> out;
  for (int c : present) {
    ActionModel a;
    a.label = c;
    a.name = vocabulary[c];
    a.pose_ids.assign(pose_ids.begin(), pose_ids.end());
    if (use_lowres) {
      for (LowResKind kind : {LowResKind::Intensity, LowResKind::BoxSize}) {
        std::vector<VecX> rows;
        std::vector<int> labels;
        for (const auto& v : videos)
          for (const auto& f : v.lowres) {
            rows.push_back(kind == LowResKind::Intensity ? f.histogram : VecX(f.size));
            labels.push_back(v.label == c ? 1 : -1);
          }
        if (rows.empty()) continue;
        MatX x(Eigen::Index(rows.size()), rows[0].size());
        for (std::size_t i = 0; i < rows.size(); ++i) x.row(Eigen::Index(i)) = rows[i].transpose();
        const LinearSvm svm = train_linear_svm(x, labels, cfg.lowres_C, 1e-6, 2000);
        a.lowres.push_back({kind, svm.weights, svm.bias});
      }
    }
    MatX x(Eigen::Index(videos.size()),
           Eigen::Index(kPyramidDims) * Eigen::Index(pose_ids.size() + a.lowres.size()));
    std::vector<int> labels;
    for (std::size_t i = 0; i < videos.size(); ++i) {
      x.row(Eigen::Index(i)) = action_features(videos[i].pose_pyramids, videos[i].lowres, a).transpose();
      labels.push_back(videos[i].label == c ? 1 : -1);
    }
    const LinearSvm svm = train_linear_svm(x, labels, cfg.action_C, 1e-8, 20000);
    a.weights = svm.weights;
    a.bias = svm.bias;
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace mstaog
