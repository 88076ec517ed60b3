#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mstaog/aog.hpp"
#include "mstaog/features.hpp"
#include "mstaog/mining.hpp"

namespace mstaog {

struct TrainingConfig {
  Scalar C = 1.0;
  Scalar eta = 0.5;          ///< positive-distance threshold
  int negatives = 5000;
  int bootstrap_rounds = 2;
  int latent_iterations = 5;
  int epochs = 10;
  Scalar tolerance = 1e-6;
  std::uint64_t seed = 1;
  int search_radius = 2;     ///< cells around the annotation
  int view_radius = 1;       ///< bins around the annotated view
  Scalar sigma_min = 1e-3;   ///< floor on 3D offset variances
  Scalar sigma0 = 0.25;      ///< initial offset standard deviation
  int max_positives = 200;
  int hard_negatives = 1000; ///< cap per bootstrap round
  int hard_negative_stride = 3;
  int min_window = 2;
  int max_window = 6;
  Scalar action_C = 1.0;
  Scalar lowres_C = 0.1;
};

/// One training window. Positives carry their annotated child locations and
/// view angle, which initialize the latent variables.
struct TrainExample {
  const FeaturePyramid* features = nullptr;
  int label = 1;
  int level = 0;
  Cell root;
  std::vector<Cell> parts;
  Scalar theta = 0;
};

struct TrainResult {
  PoseModel model;
  std::vector<Scalar> objective;  ///< after each alternation round, per stage
  std::vector<int> objective_stage;  ///< 0 = initial negatives, r = bootstrap round r
  std::vector<Scalar> slacks;      ///< hinge slack of every positive at convergence
  std::vector<Scalar> positive_scores;
  Scalar mean_hinge = 0;           ///< over positives and negatives
  int negatives_used = 0;
  std::vector<int> bootstrap_added;
};

/// Latent structural SVM: alternates latent inference on the positives with a
/// stochastic subgradient pass over the templates and deformation parameters;
/// negatives maximize over view bins and child placements. After convergence
/// each bootstrap round adds the top-scoring windows found by `bootstrap`
/// (frames of negative videos) and retrains.
TrainResult train_pose(PoseModel init, std::span<const TrainExample> positives,
                       std::vector<TrainExample> negatives,
                       std::span<const FeaturePyramid* const> bootstrap,
                       const TrainingConfig& cfg);

/// Objective 1/2 |params|^2 + C sum hinge(1 - y S) of a model on fixed
/// examples (positives at their given latent values, negatives maximized).
Scalar latent_objective(const PoseModel& model, std::span<const TrainExample> positives,
                        std::span<const TrainExample> negatives, const TrainingConfig& cfg);

/// Score of an example at fixed latent values (bin, root, parts at `level`).
Scalar example_score(const PoseModel& model, const FeaturePyramid& features, int level,
                     int bin, Cell root, std::span<const Cell> parts);

struct LinearSvm {
  VecX weights;
  Scalar bias = 0;
  int iterations = 0;

  Scalar decision(const VecX& x) const { return weights.dot(x) + bias; }
};

/// L1-loss linear SVM, dual coordinate descent in a fixed cyclic order; the
/// bias is a regularized constant feature.
LinearSvm train_linear_svm(const MatX& samples, std::span<const int> labels, Scalar C,
                           Scalar tolerance = 1e-10, int max_iterations = 100000);

/// Per-video inputs of the action layer.
struct ActionTrainingVideo {
  std::vector<Pyramid73> pose_pyramids;
  std::vector<LowResFeature> lowres;  ///< per frame
  int label = 0;
};

/// One-vs-rest linear SVMs: first the frame-level low-resolution nodes of
/// each action, then the action weights over pooled pyramids.
std::vector<ActionModel> train_action(std::span<const ActionTrainingVideo> videos,
                                      const std::vector<std::string>& vocabulary,
                                      std::span<const int> pose_ids, const TrainingConfig& cfg,
                                      bool use_lowres = true);

/// Feature vector of one video for one action: its pose pyramids followed by
/// the action's low-resolution pyramids.
VecX action_features(std::span<const Pyramid73> pose_pyramids,
                     std::span<const LowResFeature> lowres, const ActionModel& action);

}  // namespace mstaog
