#include "mstaog/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "mstaog/error.hpp"

namespace mstaog {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("invalid value '" + value + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean '" + value + "' for " + key);
}

std::string format(Scalar v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MSTAOG_INT(path)                                                             \
  Field {                                                                           \
    [](RunConfig& c, const std::string& k, const std::string& v) {                  \
      c.path = decltype(c.path)(parse_number<long long>(k, v));                     \
    },                                                                              \
        [](const RunConfig& c) { return std::to_string(c.path); }                   \
  }
#define MSTAOG_REAL(path)                                                                    \
  Field {                                                                                   \
    [](RunConfig& c, const std::string& k, const std::string& v) {                          \
      c.path = parse_number<Scalar>(k, v);                                                  \
    },                                                                                      \
        [](const RunConfig& c) { return format(c.path); }                                   \
  }
#define MSTAOG_BOOL(path)                                                                             \
  Field {                                                                                            \
    [](RunConfig& c, const std::string& k, const std::string& v) { c.path = parse_bool(k, v); },     \
        [](const RunConfig& c) { return std::string(c.path ? "true" : "false"); }                    \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"features.cell", MSTAOG_INT(features.cell)},
      {"features.scales", MSTAOG_INT(features.scales)},
      {"features.scale_step", MSTAOG_REAL(features.scale_step)},
      {"features.hof_threshold", MSTAOG_REAL(features.hof_threshold)},
      {"flow.alpha", MSTAOG_REAL(features.flow.alpha)},
      {"flow.iterations", MSTAOG_INT(features.flow.iterations)},
      {"flow.levels", MSTAOG_INT(features.flow.levels)},
      {"flow.warps", MSTAOG_INT(features.flow.warps)},
      {"flow.max_magnitude", MSTAOG_REAL(features.flow.max_magnitude)},
      {"model.view_bins", MSTAOG_INT(view_bins)},
      {"model.coupling",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "shared") c.coupling = ViewCoupling::Shared;
          else if (v == "independent") c.coupling = ViewCoupling::Independent;
          else throw ConfigError("invalid value '" + v + "' for " + k + " (shared|independent)");
        },
        [](const RunConfig& c) {
          return std::string(c.coupling == ViewCoupling::Shared ? "shared" : "independent");
        }}},
      {"model.use_lowres", MSTAOG_BOOL(use_lowres)},
      {"mining.visibility_penalty", MSTAOG_REAL(mining.visibility_penalty)},
      {"mining.cluster_floor", MSTAOG_INT(mining.cluster_floor)},
      {"mining.max_clusters", MSTAOG_INT(mining.max_clusters)},
      {"mining.support", MSTAOG_REAL(mining.support)},
      {"mining.discrimination", MSTAOG_REAL(mining.discrimination)},
      {"mining.similarity", MSTAOG_REAL(mining.similarity)},
      {"mining.missing_part_penalty", MSTAOG_REAL(mining.missing_part_penalty)},
      {"mining.distance_scale", MSTAOG_REAL(mining.distance_scale)},
      {"mining.validation_floor", MSTAOG_REAL(mining.validation_floor)},
      {"mining.frame_stride", MSTAOG_INT(mining.frame_stride)},
      {"mining.max_level", MSTAOG_INT(mining.max_level)},
      {"mining.max_poses_per_class", MSTAOG_INT(mining.max_poses_per_class)},
      {"training.C", MSTAOG_REAL(training.C)},
      {"training.eta", MSTAOG_REAL(training.eta)},
      {"training.negatives", MSTAOG_INT(training.negatives)},
      {"training.bootstrap_rounds", MSTAOG_INT(training.bootstrap_rounds)},
      {"training.latent_iterations", MSTAOG_INT(training.latent_iterations)},
      {"training.epochs", MSTAOG_INT(training.epochs)},
      {"training.tolerance", MSTAOG_REAL(training.tolerance)},
      {"training.seed", MSTAOG_INT(training.seed)},
      {"training.search_radius", MSTAOG_INT(training.search_radius)},
      {"training.view_radius", MSTAOG_INT(training.view_radius)},
      {"training.sigma_min", MSTAOG_REAL(training.sigma_min)},
      {"training.sigma0", MSTAOG_REAL(training.sigma0)},
      {"training.max_positives", MSTAOG_INT(training.max_positives)},
      {"training.hard_negatives", MSTAOG_INT(training.hard_negatives)},
      {"training.hard_negative_stride", MSTAOG_INT(training.hard_negative_stride)},
      {"training.min_window", MSTAOG_INT(training.min_window)},
      {"training.max_window", MSTAOG_INT(training.max_window)},
      {"training.action_C", MSTAOG_REAL(training.action_C)},
      {"training.lowres_C", MSTAOG_REAL(training.lowres_C)},
      {"protocol.name", {[](RunConfig& c, const std::string&, const std::string& v) { c.protocol = v; },
                         [](const RunConfig& c) { return c.protocol; }}},
      {"protocol.held_out", MSTAOG_INT(held_out)},
      {"run.jobs", MSTAOG_INT(jobs)},
  };
  return table;
}

#undef MSTAOG_INT
#undef MSTAOG_REAL
#undef MSTAOG_BOOL

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

std::map<std::string, std::string> RunConfig::entries() const {
  std::map<std::string, std::string> out;
  for (const auto& [k, f] : fields()) out[k] = f.get(*this);
  return out;
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid configuration: ") + what);
  };
  require(features.cell >= 2, "features.cell >= 2");
  require(features.scales >= 1, "features.scales >= 1");
  require(features.scale_step > 1, "features.scale_step > 1");
  require(features.hof_threshold >= 0, "features.hof_threshold >= 0");
  require(features.flow.alpha > 0, "flow.alpha > 0");
  require(features.flow.iterations >= 1, "flow.iterations >= 1");
  require(features.flow.levels >= 1, "flow.levels >= 1");
  require(features.flow.warps >= 1, "flow.warps >= 1");
  require(view_bins >= 1, "model.view_bins >= 1");
  require(mining.visibility_penalty >= 0, "mining.visibility_penalty >= 0");
  require(mining.cluster_floor >= 1, "mining.cluster_floor >= 1");
  require(mining.max_clusters >= 1, "mining.max_clusters >= 1");
  require(mining.support > 0 && mining.support <= 1, "0 < mining.support <= 1");
  require(mining.discrimination > 0, "mining.discrimination > 0");
  require(mining.similarity > 0, "mining.similarity > 0");
  require(mining.missing_part_penalty >= 0, "mining.missing_part_penalty >= 0");
  require(mining.distance_scale > 0, "mining.distance_scale > 0");
  require(mining.frame_stride >= 1, "mining.frame_stride >= 1");
  require(mining.max_level >= 0, "mining.max_level >= 0");
  require(mining.max_poses_per_class >= 0, "mining.max_poses_per_class >= 0");
  require(training.C > 0, "training.C > 0");
  require(training.eta > 0, "training.eta > 0");
  require(training.negatives >= 1, "training.negatives >= 1");
  require(training.bootstrap_rounds >= 0, "training.bootstrap_rounds >= 0");
  require(training.latent_iterations >= 1, "training.latent_iterations >= 1");
  require(training.epochs >= 1, "training.epochs >= 1");
  require(training.tolerance >= 0, "training.tolerance >= 0");
  require(training.search_radius >= 0, "training.search_radius >= 0");
  require(training.view_radius >= 0, "training.view_radius >= 0");
  require(training.sigma_min > 0 && training.sigma_min < 1, "0 < training.sigma_min < 1");
  require(training.sigma0 > 0, "training.sigma0 > 0");
  require(training.max_positives >= 1, "training.max_positives >= 1");
  require(training.hard_negatives >= 0, "training.hard_negatives >= 0");
  require(training.hard_negative_stride >= 1, "training.hard_negative_stride >= 1");
  require(training.min_window >= 1 && training.max_window >= training.min_window,
          "1 <= training.min_window <= training.max_window");
  require(training.action_C > 0 && training.lowres_C > 0, "training.action_C, training.lowres_C > 0");
  parse_protocol(protocol);
}

RunConfig RunConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  RunConfig cfg;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(file.string() + ":" + std::to_string(n) + ": expected 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(file.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return cfg;
}

void save_config(const RunConfig& cfg, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  for (const auto& [k, v] : cfg.entries()) out << k << " = " << v << '\n';
}

}  // namespace mstaog
