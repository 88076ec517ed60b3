#include "mstaog/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "mstaog/error.hpp"
#include "mstaog/geometry.hpp"

namespace mstaog {

namespace fs = std::filesystem;

const char* joint_name(int joint) {
  static constexpr const char* names[kNumJoints] = {
      "head",       "neck",        "torso",       "spine",          "hip_center",
      "l_shoulder", "l_elbow",     "l_wrist",     "l_hand",         "r_shoulder",
      "r_elbow",    "r_wrist",     "r_hand",      "l_hip",          "l_knee",
      "l_ankle",    "l_foot",      "r_hip",       "r_knee",         "r_ankle",
      "r_foot"};
  return (joint >= 0 && joint < kNumJoints) ? names[joint] : "?";
}

const std::vector<PartDefinition>& default_parts() {
  static const std::vector<PartDefinition> parts = {
      {0, "head_torso", {kHead, kNeck, kTorso, kSpine}},
      {1, "left_arm", {kLeftShoulder, kLeftElbow, kLeftWrist, kLeftHand}},
      {2, "right_arm", {kRightShoulder, kRightElbow, kRightWrist, kRightHand}},
      {3, "left_leg", {kLeftHip, kLeftKnee, kLeftAnkle, kLeftFoot}},
      {4, "right_leg", {kRightHip, kRightKnee, kRightAnkle, kRightFoot}},
      {5, "left_hand", {kLeftElbow, kLeftWrist, kLeftHand}},
      {6, "right_hand", {kRightElbow, kRightWrist, kRightHand}},
      {7, "hip", {kHipCenter, kLeftHip, kRightHip}},
  };
  return parts;
}

Image VideoSample::frame(std::size_t i) const {
  if (!frames.empty()) {
    if (i >= frames.size()) throw SizeError("frame index out of range in " + id);
    return frames[i];
  }
  if (i >= frame_files.size()) throw SizeError("frame index out of range in " + id);
  return load_image(frame_files[i]);
}

int Dataset::label_of(const std::string& action) const {
  auto it = std::find(vocabulary.begin(), vocabulary.end(), action);
  return it == vocabulary.end() ? -1 : int(it - vocabulary.begin());
}

void index_vocabulary(Dataset& d) {
  std::set<std::string> names;
  for (const auto& s : d.samples) names.insert(s.action);
  d.vocabulary.assign(names.begin(), names.end());
  for (auto& s : d.samples) s.label = d.label_of(s.action);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

int parse_int(const std::string& s, const fs::path& file, int line, const char* what) {
  if (s.empty()) return -1;
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(file.string(), line, std::string("invalid ") + what + " '" + s + "'");
  }
}

std::vector<fs::path> list_frames(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IngestError("frame directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".png" || ext == ".PGM" || ext == ".PNG"))
      files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IngestError("no PGM/PNG frames in " + dir.string());
  return files;
}

std::vector<BoundingBox> load_boxes(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestError("bounding-box file not found: " + file.string());
  std::vector<BoundingBox> boxes;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    BoundingBox b;
    if (!(ss >> b.x >> b.y >> b.width >> b.height))
      throw ParseError(file.string(), n, "expected 'x y width height'");
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<Joints2D> load_joints2d(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestError("2D joint file not found: " + file.string());
  std::vector<Joints2D> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Joints2D j;
    for (int k = 0; k < kNumJoints; ++k)
      if (!(ss >> j[k].x() >> j[k].y()))
        throw ParseError(file.string(), n, "expected 21 x (x y)");
    out.push_back(j);
  }
  return out;
}

}  // namespace

std::vector<Skeleton3D> load_skeleton_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestError("skeleton file not found: " + file.string());
  std::vector<Skeleton3D> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Skeleton3D s;
    s.timestamp = int(out.size());
    for (int j = 0; j < kNumJoints; ++j) {
      double x, y, z, v;
      if (!(ss >> x >> y >> z >> v))
        throw ParseError(file.string(), n, "expected 21 x (x y z v) values");
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
        throw ParseError(file.string(), n, "non-finite joint coordinate");
      if (v != 0 && v != 1) throw ParseError(file.string(), n, "visibility must be 0 or 1");
      s.joints[j].position = Vec3(x, y, z);
      s.joints[j].visible = v != 0;
    }
    std::string extra;
    if (ss >> extra) throw ParseError(file.string(), n, "trailing values after 21 joints");
    if (!out.empty())
      for (int j = 0; j < kNumJoints; ++j)
        s.joints[j].motion = s.joints[j].position - out.back().joints[j].position;
    out.push_back(s);
  }
  return out;
}

void save_skeleton_file(const fs::path& file, std::span<const Skeleton3D> skeletons) {
  std::ofstream out(file);
  if (!out) throw IngestError("cannot write " + file.string());
  out << std::setprecision(17);
  for (const auto& s : skeletons) {
    for (int j = 0; j < kNumJoints; ++j) {
      const auto& p = s.joints[j].position;
      out << (j ? " " : "") << p.x() << ' ' << p.y() << ' ' << p.z() << ' '
          << (s.joints[j].visible ? 1 : 0);
    }
    out << '\n';
  }
}

Dataset load_dataset(const fs::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IngestError("manifest not found: " + manifest.string());
  const fs::path base = manifest.parent_path();
  std::string line;
  int n = 0;
  std::map<std::string, int> column;
  Dataset d;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
    auto fields = split_csv(line);
    if (column.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) column[fields[i]] = int(i);
      for (const char* required : {"id", "action", "subject", "camera", "frames_dir"})
        if (!column.count(required))
          throw ParseError(manifest.string(), n, std::string("missing column ") + required);
      continue;
    }
    auto get = [&](const char* name) -> std::string {
      auto it = column.find(name);
      if (it == column.end() || it->second >= int(fields.size())) return {};
      return fields[it->second];
    };
    VideoSample s;
    s.id = get("id");
    s.action = get("action");
    if (s.id.empty() || s.action.empty())
      throw ParseError(manifest.string(), n, "empty id or action");
    s.subject = parse_int(get("subject"), manifest, n, "subject");
    s.camera = parse_int(get("camera"), manifest, n, "camera");
    s.frame_files = list_frames(base / get("frames_dir"));
    if (auto f = get("skeleton_file"); !f.empty()) {
      s.skeletons = load_skeleton_file(base / f);
      if (s.skeletons.size() != s.frame_files.size())
        throw IngestError("skeleton/frame count mismatch for sample " + s.id);
    }
    if (auto f = get("bbox_file"); !f.empty()) {
      s.boxes = load_boxes(base / f);
      if (s.boxes.size() != s.frame_files.size())
        throw IngestError("box/frame count mismatch for sample " + s.id);
    }
    if (auto f = get("joints2d_file"); !f.empty()) {
      s.joints2d = load_joints2d(base / f);
      if (s.joints2d.size() != s.frame_files.size())
        throw IngestError("2D joint/frame count mismatch for sample " + s.id);
    }
    d.samples.push_back(std::move(s));
  }
  index_vocabulary(d);
  return d;
}

std::vector<Skeleton3D> normalize_sequence(std::span<const Skeleton3D> seq,
                                           Normalization* transform) {
  std::vector<Skeleton3D> out(seq.begin(), seq.end());
  if (seq.empty()) return out;
  const Skeleton3D& first = seq.front();
  for (int j : {kHipCenter, kNeck, kLeftShoulder, kRightShoulder})
    if (!first.joints[j].visible)
      throw DegenerateError(std::string("normalize_skeleton: reference joint not visible: ") +
                            joint_name(j));
  const Scalar torso = (first.position(kNeck) - first.position(kHipCenter)).norm();
  if (!(torso > 1e-12)) throw DegenerateError("normalize_skeleton: zero torso length");
  const Vec3 axis = first.position(kLeftShoulder) - first.position(kRightShoulder);
  const Scalar yaw = (std::abs(axis.x()) + std::abs(axis.z()) > 0) ? std::atan2(axis.z(), axis.x()) : 0;
  const Scalar c = std::cos(yaw), s = std::sin(yaw);
  Mat3 rot;
  rot << c, 0, s, 0, 1, 0, -s, 0, c;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const Vec3 origin = seq[t].position(kHipCenter);
    for (int j = 0; j < kNumJoints; ++j) {
      out[t].joints[j].position = rot * (seq[t].position(j) - origin) / torso;
      out[t].joints[j].motion =
          t == 0 ? Vec3::Zero().eval()
                 : (out[t].joints[j].position - out[t - 1].joints[j].position).eval();
    }
  }
  if (transform) *transform = {yaw, torso};
  return out;
}

Skeleton3D normalize_skeleton(const Skeleton3D& s) {
  return normalize_sequence(std::span<const Skeleton3D>(&s, 1)).front();
}

double view_angle_of(const Normalization& n) { return wrap_angle(n.yaw); }

SplitProtocol parse_protocol(const std::string& name) {
  if (name == "cross-subject") return SplitProtocol::CrossSubject;
  if (name == "cross-view") return SplitProtocol::CrossView;
  if (name == "cross-environment") return SplitProtocol::CrossEnvironment;
  throw ConfigError("unknown protocol '" + name + "'");
}

Split split_dataset(const Dataset& d, SplitProtocol protocol, int held_out) {
  if (protocol == SplitProtocol::CrossEnvironment)
    throw ConfigError("cross-environment splits pair two manifests; use split_environment");
  Split out;
  out.train.vocabulary = out.test.vocabulary = d.vocabulary;
  const bool by_subject = protocol == SplitProtocol::CrossSubject;
  out.train.protocol = out.test.protocol =
      std::string(by_subject ? "cross-subject:" : "cross-view:") + std::to_string(held_out);
  for (const auto& s : d.samples) {
    const int key = by_subject ? s.subject : s.camera;
    if (key < 0)
      throw ConfigError("sample " + s.id + " has no " + (by_subject ? "subject" : "camera") + " id");
    (key == held_out ? out.test : out.train).samples.push_back(s);
  }
  return out;
}

Split split_environment(const Dataset& train_env, const Dataset& test_env) {
  Split out{train_env, test_env};
  out.train.protocol = out.test.protocol = "cross-environment";
  return out;
}

}  // namespace mstaog
