#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "mstaog/aog.hpp"
#include "mstaog/config.hpp"
#include "mstaog/core.hpp"
#include "mstaog/eval.hpp"
#include "mstaog/features.hpp"
#include "mstaog/mining.hpp"

namespace mstaog {

/// Line-delimited JSON training log. A default-constructed log discards.
class TrainLog {
 public:
  TrainLog() = default;
  explicit TrainLog(const std::filesystem::path& file);

  void write(const std::string& stage, nlohmann::json record);
  const std::vector<nlohmann::json>& records() const { return records_; }

 private:
  std::unique_ptr<std::ofstream> out_;
  std::vector<nlohmann::json> records_;
  std::mutex mutex_;
};

/// Video features keyed by sample id, computed once per feature config.
class FeatureCache {
 public:
  explicit FeatureCache(FeatureConfig cfg, int jobs = 0) : cfg_(cfg), jobs_(jobs) {}

  std::shared_ptr<const VideoFeatures> get(const VideoSample& video);
  /// Computes the missing entries of a dataset in parallel.
  void prefetch(const Dataset& d);
  const FeatureConfig& config() const { return cfg_; }

 private:
  FeatureConfig cfg_;
  int jobs_;
  std::map<std::string, std::shared_ptr<const VideoFeatures>> entries_;
  std::mutex mutex_;
};

/// Output of the mining stage.
struct MinedDictionary {
  ItemTable items;
  std::vector<MinedPose> poses;
};

/// Normalized skeletons of every video with skeletons, for mining.
std::vector<MiningVideo> mining_videos(const Dataset& d);

/// Part clustering, Apriori mining, set-cover pruning and the per-class cap.
MinedDictionary mine_dataset(const Dataset& train, const RunConfig& cfg, TrainLog& log);

nlohmann::json dictionary_to_json(const MinedDictionary& dict,
                                  const std::vector<std::string>& vocabulary);
MinedDictionary dictionary_from_json(const nlohmann::json& j);

/// Human-readable table of mined poses (items, Supp and Disc per class).
std::string format_pose_table(const MinedDictionary& dict,
                              const std::vector<std::string>& vocabulary);

/// mine -> prune -> harvest -> train detectors -> validation pruning ->
/// pyramids -> action SVMs. A precomputed dictionary skips mining.
ModelArchive train_pipeline(const Dataset& train, const RunConfig& cfg, FeatureCache& cache,
                            TrainLog& log, const MinedDictionary* dictionary = nullptr);

/// Runs classify on every sample of `test`; requires the archive vocabulary
/// to contain every test action.
EvalReport evaluate(const ModelArchive& archive, const Dataset& test, FeatureCache& cache,
                    int jobs = 0);

}  // namespace mstaog
