#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mstaog/image.hpp"
#include "mstaog/types.hpp"

namespace mstaog {

/// Fixed 21-joint ordering used by every skeleton file and model archive.
enum JointId : int {
  kHead = 0,
  kNeck,
  kTorso,
  kSpine,
  kHipCenter,
  kLeftShoulder,
  kLeftElbow,
  kLeftWrist,
  kLeftHand,
  kRightShoulder,
  kRightElbow,
  kRightWrist,
  kRightHand,
  kLeftHip,
  kLeftKnee,
  kLeftAnkle,
  kLeftFoot,
  kRightHip,
  kRightKnee,
  kRightAnkle,
  kRightFoot,
};

inline constexpr int kNumJoints = 21;

const char* joint_name(int joint);

struct Joint {
  Vec3 position = Vec3::Zero();
  Vec3 motion = Vec3::Zero();
  bool visible = true;
};

struct Skeleton3D {
  std::array<Joint, kNumJoints> joints;
  int timestamp = 0;

  const Vec3& position(int j) const { return joints[j].position; }
};

/// A manually chosen group of joints. Part 0 is the root (head + torso).
struct PartDefinition {
  int id = 0;
  std::string name;
  std::vector<int> joints;
};

/// The eight default parts: head+torso (root), left/right arm, left/right
/// leg, left/right hand region, hip region.
const std::vector<PartDefinition>& default_parts();

struct BoundingBox {
  double x = 0, y = 0, width = 0, height = 0;
  double area() const { return width * height; }
};

/// 2D joint annotations for one frame, in pixel coordinates.
using Joints2D = std::array<Vec2, kNumJoints>;

struct VideoSample {
  std::string id;
  std::string action;
  int label = -1;  ///< index into Dataset::vocabulary
  int subject = -1;
  int camera = -1;
  std::vector<std::filesystem::path> frame_files;
  std::vector<Image> frames;  ///< in-memory frames; take precedence over files
  std::vector<Skeleton3D> skeletons;
  std::vector<BoundingBox> boxes;
  std::vector<Joints2D> joints2d;

  std::size_t num_frames() const {
    return frames.empty() ? frame_files.size() : frames.size();
  }
  bool has_skeletons() const { return !skeletons.empty(); }
  /// Decodes frame `i` on demand.
  Image frame(std::size_t i) const;
};

struct Dataset {
  std::vector<VideoSample> samples;
  std::vector<std::string> vocabulary;
  std::string protocol;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  int label_of(const std::string& action) const;
};

/// Reads a CSV manifest with header
/// `id,action,subject,camera,frames_dir[,skeleton_file][,bbox_file][,joints2d_file]`.
/// Paths are relative to the manifest directory. Frames are located eagerly
/// and decoded lazily.
Dataset load_dataset(const std::filesystem::path& manifest);

/// One line per frame, 21 x (x y z v).
std::vector<Skeleton3D> load_skeleton_file(const std::filesystem::path& file);
void save_skeleton_file(const std::filesystem::path& file,
                        std::span<const Skeleton3D> skeletons);

/// Rebuilds the vocabulary (sorted unique action names) and labels.
void index_vocabulary(Dataset& d);

struct Normalization {
  double yaw = 0;    ///< rotation about y applied to align the shoulders with +x
  double scale = 1;  ///< torso length of the first frame
};

/// Normalizes a sequence: per-frame translation (hip center to origin), a
/// single yaw rotation and scale fixed from the first frame, motions
/// recomputed as finite differences of the normalized positions.
std::vector<Skeleton3D> normalize_sequence(std::span<const Skeleton3D> seq,
                                           Normalization* transform = nullptr);

Skeleton3D normalize_skeleton(const Skeleton3D& s);

/// View angle in [0, 2pi) of a camera-frame sequence, i.e. the yaw that the
/// normalization removes.
double view_angle_of(const Normalization& n);

enum class SplitProtocol { CrossSubject, CrossView, CrossEnvironment };

SplitProtocol parse_protocol(const std::string& name);

struct Split {
  Dataset train;
  Dataset test;
};

/// Holds out the samples whose subject (cross-subject) or camera
/// (cross-view) equals `held_out`.
Split split_dataset(const Dataset& d, SplitProtocol protocol, int held_out);

/// Cross-environment protocol: the two manifests are used as given.
Split split_environment(const Dataset& train_env, const Dataset& test_env);

}  // namespace mstaog
