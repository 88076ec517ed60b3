#include "mstaog/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "mstaog/error.hpp"

namespace mstaog {

namespace fs = std::filesystem;

namespace {

constexpr Scalar kPi = std::numbers::pi;

struct BodyShape {
  Scalar upper_arm = 0.28, forearm = 0.25, hand = 0.07;
  Scalar thigh = 0.43, shin = 0.44, foot = 0.1;
};

Vec3 unit(Vec3 v) { return v.normalized(); }

Vec3 blend(const Vec3& a, const Vec3& b, Scalar e) { return unit((1 - e) * a + e * b); }

void set_arm(Skeleton3D& s, int shoulder, const Vec3& upper, const Vec3& fore, const BodyShape& b,
             Scalar scale) {
  const Vec3 sh = s.joints[shoulder].position;
  const Vec3 el = sh + scale * b.upper_arm * unit(upper);
  const Vec3 wr = el + scale * b.forearm * unit(fore);
  s.joints[shoulder + 1].position = el;
  s.joints[shoulder + 2].position = wr;
  s.joints[shoulder + 3].position = wr + scale * b.hand * unit(fore);
}

void set_leg(Skeleton3D& s, int hip, const Vec3& thigh, const Vec3& shin, const BodyShape& b,
             Scalar scale) {
  const Vec3 h = s.joints[hip].position;
  const Vec3 k = h + scale * b.thigh * unit(thigh);
  const Vec3 a = k + scale * b.shin * unit(shin);
  s.joints[hip + 1].position = k;
  s.joints[hip + 2].position = a;
  s.joints[hip + 3].position = a + scale * b.foot * Vec3(0, 0, -1);
}

Skeleton3D rest_pose(Scalar scale) {
  Skeleton3D s;
  auto at = [&](int j, Scalar x, Scalar y, Scalar z) { s.joints[j].position = scale * Vec3(x, y, z); };
  at(kHipCenter, 0, 0.97, 0);
  at(kSpine, 0, 1.12, 0);
  at(kTorso, 0, 1.3, 0);
  at(kNeck, 0, 1.47, 0);
  at(kHead, 0, 1.64, 0);
  at(kLeftShoulder, 0.19, 1.43, 0);
  at(kRightShoulder, -0.19, 1.43, 0);
  at(kLeftHip, 0.1, 0.93, 0);
  at(kRightHip, -0.1, 0.93, 0);
  BodyShape b;
  set_arm(s, kLeftShoulder, Vec3(0.12, -1, 0), Vec3(0.05, -1, -0.05), b, scale);
  set_arm(s, kRightShoulder, Vec3(-0.12, -1, 0), Vec3(-0.05, -1, -0.05), b, scale);
  set_leg(s, kLeftHip, Vec3(0.02, -1, 0), Vec3(0, -1, 0), b, scale);
  set_leg(s, kRightHip, Vec3(-0.02, -1, 0), Vec3(0, -1, 0), b, scale);
  return s;
}

void draw_segment(Image& img, Vec2 a, Vec2 b, Scalar radius, Scalar value) {
  const int x0 = std::max(0, int(std::floor(std::min(a.x(), b.x()) - radius - 1)));
  const int x1 = std::min(int(img.cols()) - 1, int(std::ceil(std::max(a.x(), b.x()) + radius + 1)));
  const int y0 = std::max(0, int(std::floor(std::min(a.y(), b.y()) - radius - 1)));
  const int y1 = std::min(int(img.rows()) - 1, int(std::ceil(std::max(a.y(), b.y()) + radius + 1)));
  const Vec2 ab = b - a;
  const Scalar len2 = ab.squaredNorm();
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p(x, y);
      const Scalar t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0;
      const Scalar d = (p - (a + t * ab)).norm();
      // Coverage falls off linearly over one pixel at the edge.
      const Scalar cover = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      if (cover > 0) img(y, x) = std::max(img(y, x), cover * value);
    }
}

constexpr std::pair<int, int> kBones[] = {
    {kHead, kNeck},           {kNeck, kTorso},           {kTorso, kSpine},
    {kSpine, kHipCenter},     {kNeck, kLeftShoulder},    {kLeftShoulder, kLeftElbow},
    {kLeftElbow, kLeftWrist}, {kLeftWrist, kLeftHand},   {kNeck, kRightShoulder},
    {kRightShoulder, kRightElbow}, {kRightElbow, kRightWrist}, {kRightWrist, kRightHand},
    {kHipCenter, kLeftHip},   {kLeftHip, kLeftKnee},     {kLeftKnee, kLeftAnkle},
    {kLeftAnkle, kLeftFoot},  {kHipCenter, kRightHip},   {kRightHip, kRightKnee},
    {kRightKnee, kRightAnkle}, {kRightAnkle, kRightFoot}};

}  // namespace

std::string synth_action_name(int cls) {
  static const char* names[] = {"wave", "punch", "kick"};
  std::string n = names[cls % 3];
  if (cls >= 3) n += std::to_string(cls / 3);
  return n;
}

std::vector<Skeleton3D> synth_motion(int cls, int subject, int frames, std::uint64_t seed) {
  if (cls < 0 || frames < 1) throw ConfigError("synth_motion: invalid class or frame count");
  std::seed_seq seq{seed, std::uint64_t(cls), std::uint64_t(subject), std::uint64_t(0x5eed)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<Scalar> u01(0, 1);
  const Scalar scale = 0.92 + 0.16 * u01(rng);
  const Scalar period = 12 + 6 * u01(rng);
  const Scalar amplitude = 0.8 + 0.2 * u01(rng);
  const Scalar phase0 = 2 * kPi * u01(rng);
  const bool mirrored = (cls / 3) % 2 == 1;
  const BodyShape b;
  std::vector<Skeleton3D> out;
  for (int t = 0; t < frames; ++t) {
    Skeleton3D s = rest_pose(scale);
    s.timestamp = t;
    const Scalar ph = 2 * kPi * t / period + phase0;
    const Scalar e = amplitude * (1 - std::cos(ph)) / 2;  // 0..amplitude
    switch (cls % 3) {
      case 0: {  // raised right arm, forearm swaying
        const Scalar a = kPi / 2 + amplitude * 0.35 * std::sin(ph);
        set_arm(s, kRightShoulder, Vec3(-1, 0.15, 0), Vec3(-std::cos(a), std::sin(a), 0), b, scale);
        break;
      }
      case 1: {  // left arm punching forward
        const Vec3 up = blend(Vec3(0.25, -0.85, -0.45), Vec3(0, -0.05, -1), e);
        const Vec3 fore = blend(Vec3(-0.35, 0.55, -0.75), Vec3(0, 0, -1), e);
        set_arm(s, kLeftShoulder, up, fore, b, scale);
        break;
      }
      default: {  // right leg kicking forward, arms out for balance
        set_leg(s, kRightHip, blend(Vec3(-0.02, -1, 0), Vec3(0, -0.45, -0.9), e),
                blend(Vec3(0, -1, 0), Vec3(0, -0.35, -0.95), e), b, scale);
        set_arm(s, kLeftShoulder, Vec3(0.6, -0.8, 0), Vec3(0.6, -0.8, 0), b, scale);
        set_arm(s, kRightShoulder, Vec3(-0.6, -0.8, 0), Vec3(-0.6, -0.8, 0), b, scale);
        break;
      }
    }
    if (mirrored)
      for (auto& j : s.joints) j.position.x() = -j.position.x();
    if (mirrored) {
      // Mirroring swaps the sides: exchange the left and right chains.
      for (int k = 0; k < 4; ++k) {
        std::swap(s.joints[kLeftShoulder + k], s.joints[kRightShoulder + k]);
        std::swap(s.joints[kLeftHip + k], s.joints[kRightHip + k]);
      }
    }
    out.push_back(s);
  }
  for (int t = 1; t < frames; ++t)
    for (int j = 0; j < kNumJoints; ++j)
      out[t].joints[j].motion = out[t].joints[j].position - out[t - 1].joints[j].position;
  return out;
}

Skeleton3D to_camera(const Skeleton3D& body, Scalar view) {
  const Scalar c = std::cos(view), s = std::sin(view);
  Mat3 r;
  r << c, 0, -s, 0, 1, 0, s, 0, c;
  Skeleton3D out = body;
  for (auto& j : out.joints) {
    j.position = r * j.position;
    j.motion = r * j.motion;
  }
  return out;
}

Joints2D project_joints(const Skeleton3D& camera_frame, const RenderCamera& cam) {
  Joints2D out;
  for (int j = 0; j < kNumJoints; ++j) {
    const Vec3& p = camera_frame.joints[j].position;
    out[j] = cam.origin + cam.pixels_per_meter * Vec2(p.x(), -p.y());
  }
  return out;
}

Image render_stick_figure(const Joints2D& joints, int width, int height, Scalar background,
                          Scalar foreground) {
  if (width <= 0 || height <= 0) throw SizeError("render_stick_figure: invalid size");
  Image img = Image::Zero(height, width);
  for (auto [a, b] : kBones) draw_segment(img, joints[a], joints[b], 1.2, 1);
  draw_segment(img, joints[kHead], joints[kHead], 3.5, 1);
  return background + (foreground - background) * img;
}

Dataset generate_corpus(const SynthConfig& cfg) {
  if (cfg.classes < 1 || cfg.subjects < 1 || cfg.frames < 1 || cfg.views_deg.empty())
    throw ConfigError("synth: classes, subjects, frames and views must be positive");
  if (cfg.width < 16 || cfg.height < 16) throw ConfigError("synth: frame size too small");
  Dataset d;
  for (int cls = 0; cls < cfg.classes; ++cls)
    for (int cam = 0; cam < int(cfg.views_deg.size()); ++cam)
      for (int subject = 1; subject <= cfg.subjects; ++subject) {
        std::seed_seq seq{cfg.seed, std::uint64_t(cls), std::uint64_t(cam), std::uint64_t(subject)};
        std::mt19937_64 rng(seq);
        std::normal_distribution<Scalar> gauss(0, 1);
        std::uniform_real_distribution<Scalar> u11(-1, 1);
        const Scalar view = (cfg.views_deg[cam] + cfg.view_jitter_deg * u11(rng)) * kPi / 180;
        RenderCamera camera{view, cfg.pixels_per_meter,
                            Vec2(cfg.width / 2.0 + 2 * u11(rng), cfg.height - 6.0 + u11(rng))};
        VideoSample s;
        s.action = synth_action_name(cls);
        s.subject = subject;
        s.camera = cam + 1;
        std::ostringstream id;
        id << s.action << "_s" << subject << "_c" << s.camera;
        s.id = id.str();
        for (const auto& body : synth_motion(cls, subject, cfg.frames, cfg.seed)) {
          const Skeleton3D camframe = to_camera(body, view);
          const Joints2D j2 = project_joints(camframe, camera);
          Image img = render_stick_figure(j2, cfg.width, cfg.height, cfg.background, cfg.foreground);
          for (Eigen::Index i = 0; i < img.size(); ++i)
            img.data()[i] = std::clamp(std::round(img.data()[i] + cfg.pixel_noise * gauss(rng)), 0.0, 255.0);
          Skeleton3D noisy = camframe;
          for (auto& j : noisy.joints)
            j.position += cfg.joint_noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
          Scalar x0 = 1e9, y0 = 1e9, x1 = -1e9, y1 = -1e9;
          for (const auto& p : j2) {
            x0 = std::min(x0, p.x());
            y0 = std::min(y0, p.y());
            x1 = std::max(x1, p.x());
            y1 = std::max(y1, p.y());
          }
          x0 = std::max(0.0, x0 - 4);
          y0 = std::max(0.0, y0 - 6);
          x1 = std::min(Scalar(cfg.width), x1 + 4);
          y1 = std::min(Scalar(cfg.height), y1 + 4);
          s.boxes.push_back({x0, y0, x1 - x0, y1 - y0});
          s.joints2d.push_back(j2);
          s.skeletons.push_back(noisy);
          s.frames.push_back(std::move(img));
        }
        for (std::size_t t = 0; t < s.skeletons.size(); ++t) {
          s.skeletons[t].timestamp = int(t);
          for (int j = 0; j < kNumJoints; ++j)
            s.skeletons[t].joints[j].motion =
                t == 0 ? Vec3::Zero().eval()
                       : (s.skeletons[t].joints[j].position - s.skeletons[t - 1].joints[j].position).eval();
        }
        d.samples.push_back(std::move(s));
      }
  index_vocabulary(d);
  return d;
}

void write_corpus(const Dataset& d, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IngestError("cannot create " + dir.string() + ": " + ec.message());
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest) throw IngestError("cannot write " + (dir / "manifest.csv").string());
  manifest << "id,action,subject,camera,frames_dir,skeleton_file,bbox_file,joints2d_file\n";
  for (const auto& s : d.samples) {
    const fs::path rel = fs::path("samples") / s.id;
    fs::create_directories(dir / rel / "frames");
    for (std::size_t t = 0; t < s.num_frames(); ++t) {
      std::ostringstream name;
      name << std::setw(4) << std::setfill('0') << t << ".pgm";
      save_pgm(dir / rel / "frames" / name.str(), s.frame(t));
    }
    save_skeleton_file(dir / rel / "skeleton.txt", s.skeletons);
    std::ofstream boxes(dir / rel / "boxes.txt"), joints(dir / rel / "joints2d.txt");
    boxes << std::setprecision(17);
    joints << std::setprecision(17);
    for (const auto& b : s.boxes) boxes << b.x << ' ' << b.y << ' ' << b.width << ' ' << b.height << '\n';
    for (const auto& j2 : s.joints2d) {
      for (int j = 0; j < kNumJoints; ++j) joints << (j ? " " : "") << j2[j].x() << ' ' << j2[j].y();
      joints << '\n';
    }
    manifest << s.id << ',' << s.action << ',' << s.subject << ',' << s.camera << ','
             << (rel / "frames").string() << ',' << (rel / "skeleton.txt").string() << ','
             << (rel / "boxes.txt").string() << ',' << (rel / "joints2d.txt").string() << '\n';
  }
}

}  // namespace mstaog
