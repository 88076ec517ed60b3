#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mstaog/aog.hpp"
#include "mstaog/core.hpp"

namespace mstaog {

struct ConfusionMatrix {
  Eigen::MatrixXi counts;  ///< row = ground truth, column = prediction

  explicit ConfusionMatrix(int classes = 0) : counts(Eigen::MatrixXi::Zero(classes, classes)) {}
  void add(int truth, int predicted) { counts(truth, predicted) += 1; }
  int total() const { return counts.sum(); }
  Scalar accuracy() const;
  std::vector<Scalar> per_class_accuracy() const;
};

struct VideoResult {
  std::string id;
  int truth = -1;
  int predicted = -1;
  std::vector<Scalar> scores;
};

struct EvalReport {
  std::vector<std::string> vocabulary;
  ConfusionMatrix confusion;
  std::vector<VideoResult> videos;
};

EvalReport make_report(const std::vector<std::string>& vocabulary,
                       std::vector<VideoResult> videos);

/// Writes confusion.csv, scores.csv and summary.txt.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// Accuracy recomputed from a scores.csv table (argmax of the score columns,
/// ties to the first column).
Scalar accuracy_from_scores(const std::filesystem::path& scores_csv);

}  // namespace mstaog
