#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mstaog/archive.hpp"
#include "mstaog/config.hpp"
#include "mstaog/error.hpp"
#include "mstaog/eval.hpp"
#include "mstaog/inference.hpp"
#include "mstaog/parallel.hpp"
#include "mstaog/pipeline.hpp"
#include "mstaog/synth.hpp"

namespace fs = std::filesystem;
using namespace mstaog;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  int jobs = -1;

  RunConfig load() const {
    RunConfig cfg = config.empty() ? RunConfig{} : RunConfig::load(config);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (jobs >= 0) cfg.jobs = jobs;
    cfg.validate();
    return cfg;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Configuration file (section.key = value lines)");
  app->add_option("--set", c.overrides, "Override a configuration key (key=value)");
  app->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)");
}

Dataset load_manifest(const std::string& path) {
  Dataset d = load_dataset(path);
  if (d.empty()) throw IngestError("manifest " + path + " lists no samples");
  return d;
}

/// Training and test sets under the configured protocol.
Split make_split(const RunConfig& cfg, const std::string& manifest, const std::string& test_manifest) {
  const Dataset d = load_manifest(manifest);
  if (parse_protocol(cfg.protocol) == SplitProtocol::CrossEnvironment) {
    if (test_manifest.empty()) throw ConfigError("cross-environment protocol needs --test-manifest");
    Dataset test = load_manifest(test_manifest);
    // Both environments share the training vocabulary.
    for (auto& s : test.samples) s.label = d.label_of(s.action);
    test.vocabulary = d.vocabulary;
    return split_environment(d, test);
  }
  return split_dataset(d, parse_protocol(cfg.protocol), cfg.held_out);
}

nlohmann::json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestError("cannot open " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(file.string(), 1, e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw IngestError("cannot write " + file.string());
  out << text;
}

int run_ingest(const Common& common, const std::string& manifest) {
  const RunConfig cfg = common.load();
  (void)cfg;
  const Dataset d = load_manifest(manifest);
  std::map<std::string, int> per_action;
  std::map<int, int> per_camera, per_subject;
  std::size_t frames = 0, with_skeletons = 0, with_joints = 0;
  for (const auto& s : d.samples) {
    ++per_action[s.action];
    ++per_camera[s.camera];
    ++per_subject[s.subject];
    frames += s.num_frames();
    with_skeletons += s.has_skeletons();
    with_joints += !s.joints2d.empty();
  }
  std::cout << "samples " << d.size() << "\nframes " << frames << "\nskeletons " << with_skeletons
            << "\njoints2d " << with_joints << '\n';
  for (const auto& [a, n] : per_action) std::cout << "action " << a << ' ' << n << '\n';
  for (const auto& [c, n] : per_camera) std::cout << "camera " << c << ' ' << n << '\n';
  for (const auto& [s, n] : per_subject) std::cout << "subject " << s << ' ' << n << '\n';
  return kOk;
}

int run_mine(const Common& common, const std::string& manifest, const std::string& test_manifest,
             const std::string& out, const std::string& log_file, bool dump) {
  const RunConfig cfg = common.load();
  const Split split = make_split(cfg, manifest, test_manifest);
  TrainLog log = log_file.empty() ? TrainLog() : TrainLog(log_file);
  const MinedDictionary dict = mine_dataset(split.train, cfg, log);
  write_text(out, dictionary_to_json(dict, split.train.vocabulary).dump(1) + "\n");
  if (dump) std::cout << format_pose_table(dict, split.train.vocabulary);
  return kOk;
}

int run_train(const Common& common, const std::string& manifest, const std::string& test_manifest,
              const std::string& out, const std::string& dictionary, const std::string& log_file, bool dump) {
  const RunConfig cfg = common.load();
  const Split split = make_split(cfg, manifest, test_manifest);
  TrainLog log = log_file.empty() ? TrainLog() : TrainLog(log_file);
  FeatureCache cache(cfg.features, cfg.jobs);
  MinedDictionary dict = dictionary.empty() ? mine_dataset(split.train, cfg, log)
                                            : dictionary_from_json(read_json(dictionary));
  const ModelArchive archive = train_pipeline(split.train, cfg, cache, log, &dict);
  save_archive(archive, out);
  write_text(fs::path(out) / "dictionary.json", dictionary_to_json(dict, split.train.vocabulary).dump(1) + "\n");
  if (dump) std::cout << format_pose_table(dict, split.train.vocabulary);
  return kOk;
}

int run_infer(const Common& common, const std::string& archive_dir, const std::string& manifest,
              const std::string& out, bool detections, Scalar threshold) {
  const RunConfig cfg = common.load();
  const ModelArchive archive = load_archive(archive_dir);
  const Dataset d = load_manifest(manifest);
  std::vector<std::string> records(d.size());
  parallel_for(d.size(), cfg.jobs, [&](std::size_t i) {
    const auto& s = d.samples[i];
    const VideoFeatures f = compute_video_features(s, archive.features);
    std::ostringstream os;
    os << std::setprecision(17);
    if (detections) {
      DetectOptions opt;
      opt.threshold = threshold;
      for (const auto& pose : archive.poses)
        for (std::size_t t = 0; t < f.frames.size(); ++t)
          for (const auto& det : detect_frame(f.frames[t], pose, opt).detections)
            os << "detection " << s.id << ' ' << t << ' ' << pose.id << ' ' << det.bin << ' ' << det.score << ' '
               << det.box.x << ' ' << det.box.y << ' ' << det.box.width << ' ' << det.box.height << '\n';
    }
    const Classification c = classify(f, archive);
    os << "video " << s.id << ' ' << archive.vocabulary.at(c.label);
    for (std::size_t a = 0; a < archive.actions.size(); ++a)
      os << ' ' << archive.actions[a].name << '=' << c.scores[a];
    os << '\n';
    records[i] = os.str();
  });
  std::ostringstream all;
  for (const auto& r : records) all << r;
  if (out.empty()) std::cout << all.str();
  else write_text(out, all.str());
  return kOk;
}

int run_eval(const Common& common, const std::string& archive_dir, const std::string& manifest,
             const std::string& test_manifest, const std::string& out) {
  const RunConfig cfg = common.load();
  const ModelArchive archive = load_archive(archive_dir);
  const Split split = make_split(cfg, manifest, test_manifest);
  FeatureCache cache(archive.features, cfg.jobs);
  const EvalReport report = evaluate(archive, split.test, cache, cfg.jobs);
  write_report(report, out);
  std::cout << std::setprecision(6) << "accuracy " << report.confusion.accuracy() << " ("
            << report.confusion.counts.trace() << '/' << report.confusion.total() << ")\n";
  return kOk;
}

int run_synth(const std::string& out, SynthConfig sc) {
  const Dataset d = generate_corpus(sc);
  write_corpus(d, out);
  std::cout << "samples " << d.size() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiview spatio-temporal AND-OR graph action recognition"};
  app.require_subcommand(1);
  Common common;

  std::string manifest, test_manifest, out, archive_dir, dictionary, log_file;
  bool dump = false, detections = false;
  Scalar threshold = 0;
  SynthConfig sc;

  auto* ingest = app.add_subcommand("ingest", "Validate a manifest and summarize its samples");
  add_common(ingest, common);
  ingest->add_option("--manifest", manifest, "Dataset manifest (CSV)")->required();

  auto* synth = app.add_subcommand("synth", "Render a synthetic stick-figure corpus");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--classes", sc.classes, "Action classes");
  synth->add_option("--views", sc.views_deg, "Camera view angles in degrees")->delimiter(',');
  synth->add_option("--subjects", sc.subjects, "Subjects per class and view");
  synth->add_option("--frames", sc.frames, "Frames per video");
  synth->add_option("--width", sc.width, "Frame width");
  synth->add_option("--height", sc.height, "Frame height");
  synth->add_option("--pixels-per-meter", sc.pixels_per_meter, "Render scale");
  synth->add_option("--pixel-noise", sc.pixel_noise, "Std of additive pixel noise");
  synth->add_option("--joint-noise", sc.joint_noise, "Std of 3D joint noise (meters)");
  synth->add_option("--view-jitter", sc.view_jitter_deg, "Per-sample view jitter (degrees)");
  synth->add_option("--seed", sc.seed, "Random seed");

  auto* mine = app.add_subcommand("mine", "Mine discriminative 3D poses from the training split");
  add_common(mine, common);
  mine->add_option("--manifest", manifest, "Dataset manifest (CSV)")->required();
  mine->add_option("--test-manifest", test_manifest, "Second environment (cross-environment protocol)");
  mine->add_option("--out", out, "Output dictionary (JSON)")->required();
  mine->add_option("--log", log_file, "Line-delimited JSON log");
  mine->add_flag("--dump-poses", dump, "Print the mined pose table");

  auto* train = app.add_subcommand("train", "Train pose detectors and action classifiers");
  add_common(train, common);
  train->add_option("--manifest", manifest, "Dataset manifest (CSV)")->required();
  train->add_option("--test-manifest", test_manifest, "Second environment (cross-environment protocol)");
  train->add_option("--out", out, "Output model archive directory")->required();
  train->add_option("--dictionary", dictionary, "Mined dictionary from `mine` (skips mining)");
  train->add_option("--log", log_file, "Line-delimited JSON log");
  train->add_flag("--dump-poses", dump, "Print the mined pose table");

  auto* infer = app.add_subcommand("infer", "Classify every video of a manifest");
  add_common(infer, common);
  infer->add_option("--archive", archive_dir, "Model archive directory")->required();
  infer->add_option("--manifest", manifest, "Dataset manifest (CSV)")->required();
  infer->add_option("--out", out, "Output records (default: stdout)");
  infer->add_flag("--detections", detections, "Also emit per-frame pose detections");
  infer->add_option("--threshold", threshold, "Detection score threshold");

  auto* eval = app.add_subcommand("eval", "Evaluate an archive on the test split");
  add_common(eval, common);
  eval->add_option("--archive", archive_dir, "Model archive directory")->required();
  eval->add_option("--manifest", manifest, "Dataset manifest (CSV)")->required();
  eval->add_option("--test-manifest", test_manifest, "Second environment (cross-environment protocol)");
  eval->add_option("--out", out, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return run_ingest(common, manifest);
    if (*synth) return run_synth(out, sc);
    if (*mine) return run_mine(common, manifest, test_manifest, out, log_file, dump);
    if (*train) return run_train(common, manifest, test_manifest, out, dictionary, log_file, dump);
    if (*infer) return run_infer(common, archive_dir, manifest, out, detections, threshold);
    if (*eval) return run_eval(common, archive_dir, manifest, test_manifest, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.category()) {
      case Error::Category::Usage: return kUsage;
      case Error::Category::Data: return kData;
      case Error::Category::Numeric: return kNumeric;
    }
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
