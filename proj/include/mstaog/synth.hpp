#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mstaog/core.hpp"
#include "mstaog/geometry.hpp"

namespace mstaog {

/// Parameters of a rendered stick-figure corpus.
struct SynthConfig {
  int classes = 3;
  std::vector<Scalar> views_deg = {0, 60, 120};  ///< one camera per entry
  int subjects = 6;
  int frames = 30;
  int width = 64;
  int height = 80;
  Scalar pixels_per_meter = 34;
  Scalar pixel_noise = 6;      ///< std of additive Gaussian pixel noise
  Scalar joint_noise = 0.005;  ///< std of 3D joint jitter (meters)
  Scalar view_jitter_deg = 5;  ///< per-sample facing jitter
  Scalar background = 60;
  Scalar foreground = 200;
  std::uint64_t seed = 7;
};

/// Names of the synthetic action classes (cycled when classes > 3).
std::string synth_action_name(int cls);

/// Body-frame skeleton sequence of one class for one subject: x toward the
/// subject's left, y up, the subject facing -z. Meters.
std::vector<Skeleton3D> synth_motion(int cls, int subject, int frames, std::uint64_t seed);

struct RenderCamera {
  Scalar view = 0;           ///< radians; the subject's yaw seen from the camera
  Scalar pixels_per_meter = 34;
  Vec2 origin = Vec2::Zero();  ///< image position of the camera-frame origin
};

/// Camera-frame skeleton (orthographic camera looking along +z).
Skeleton3D to_camera(const Skeleton3D& body, Scalar view);

/// Pixel coordinates (x right, y down) of every joint.
Joints2D project_joints(const Skeleton3D& camera_frame, const RenderCamera& cam);

/// Draws limbs as thick segments and the head as a disk.
Image render_stick_figure(const Joints2D& joints, int width, int height, Scalar background,
                          Scalar foreground);

/// Generates the corpus in memory (frames, camera-frame skeletons, boxes and
/// 2D joints). Deterministic in cfg.seed.
Dataset generate_corpus(const SynthConfig& cfg);

/// Writes manifest.csv plus per-sample frame directories, skeleton, box and
/// 2D-joint files under `dir`.
void write_corpus(const Dataset& d, const std::filesystem::path& dir);

}  // namespace mstaog
