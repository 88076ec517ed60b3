#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "mstaog/aog.hpp"
#include "mstaog/features.hpp"
#include "mstaog/learning.hpp"
#include "mstaog/mining.hpp"

namespace mstaog {

/// Every tunable of the pipeline. Files are flat `section.key = value` lines;
/// `#` starts a comment.
struct RunConfig {
  FeatureConfig features;
  int view_bins = kDefaultViewBins;
  ViewCoupling coupling = ViewCoupling::Shared;
  bool use_lowres = true;
  MiningConfig mining;
  TrainingConfig training;
  std::string protocol = "cross-view";
  int held_out = 2;
  int jobs = 0;

  /// Throws ConfigError on unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Throws ConfigError when a field violates its module's invariants.
  void validate() const;
  std::map<std::string, std::string> entries() const;

  static RunConfig load(const std::filesystem::path& file);
};

void save_config(const RunConfig& cfg, const std::filesystem::path& file);

}  // namespace mstaog
