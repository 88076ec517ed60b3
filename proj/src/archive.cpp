#include "mstaog/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mstaog/error.hpp"

namespace mstaog {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// float32 little-endian blob with (offset, rows, cols) references.
class Blob {
 public:
  json put(const MatX& m) {
    json ref = {{"offset", data_.size()}, {"rows", m.rows()}, {"cols", m.cols()}};
    for (Eigen::Index i = 0; i < m.size(); ++i) push(m.data()[i]);
    return ref;
  }
  json put(const VecX& v) { return put(MatX(Eigen::Map<const MatX>(v.data(), v.size(), 1))); }

  MatX matrix(const json& ref) const {
    const std::size_t off = ref.at("offset").get<std::size_t>();
    const auto rows = ref.at("rows").get<Eigen::Index>(), cols = ref.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0 || off + std::size_t(rows * cols) > data_.size())
      throw IngestError("archive: array reference outside weights.bin");
    MatX m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = data_[off + std::size_t(i)];
    return m;
  }
  VecX vector(const json& ref) const {
    const MatX m = matrix(ref);
    return Eigen::Map<const VecX>(m.data(), m.size());
  }

  void write(const fs::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IngestError("cannot write " + file.string());
    for (float f : data_) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  void read(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IngestError("cannot open " + file.string());
    in.seekg(0, std::ios::end);
    const auto size = std::size_t(in.tellg());
    if (size % 4) throw IngestError("archive: weights.bin size is not a multiple of 4");
    in.seekg(0);
    data_.resize(size / 4);
    for (float& f : data_) {
      std::uint32_t bits;
      in.read(reinterpret_cast<char*>(&bits), 4);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(&f, &bits, 4);
    }
  }

 private:
  void push(Scalar v) { data_.push_back(static_cast<float>(v)); }
  std::vector<float> data_;
};

template <typename V>
json vec_json(const V& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json part_json(const PartModel& p, Blob& blob) {
  json j = {{"part_id", p.part_id},   {"width", p.width},       {"height", p.height},
            {"anchor_x", p.anchor_x}, {"anchor_y", p.anchor_y},
            {"offset", {{"mean", vec_json(p.offset.mean)}, {"variance", vec_json(p.offset.variance)}}}};
  j["appearance"] = json::array();
  j["motion"] = json::array();
  for (const auto& m : p.appearance) j["appearance"].push_back(blob.put(m));
  for (const auto& m : p.motion) j["motion"].push_back(blob.put(m));
  j["view_offsets"] = json::array();
  for (const auto& g : p.view_offsets)
    j["view_offsets"].push_back({{"mean", vec_json(g.mean)},
                                 {"covariance", {g.covariance(0, 0), g.covariance(0, 1), g.covariance(1, 0),
                                                 g.covariance(1, 1)}}});
  return j;
}

PartModel part_from(const json& j, const Blob& blob) {
  PartModel p;
  p.part_id = j.at("part_id");
  p.width = j.at("width");
  p.height = j.at("height");
  p.anchor_x = j.at("anchor_x");
  p.anchor_y = j.at("anchor_y");
  for (int i = 0; i < 3; ++i) {
    p.offset.mean[i] = j.at("offset").at("mean").at(i);
    p.offset.variance[i] = j.at("offset").at("variance").at(i);
  }
  for (const auto& r : j.at("appearance")) p.appearance.push_back(blob.matrix(r));
  for (const auto& r : j.at("motion")) p.motion.push_back(blob.matrix(r));
  for (const auto& g : j.at("view_offsets")) {
    OffsetGaussian2D<Scalar> o;
    o.mean = Vec2(g.at("mean").at(0), g.at("mean").at(1));
    o.covariance << g.at("covariance").at(0).get<Scalar>(), g.at("covariance").at(1).get<Scalar>(),
        g.at("covariance").at(2).get<Scalar>(), g.at("covariance").at(3).get<Scalar>();
    p.view_offsets.push_back(o);
  }
  return p;
}

json features_json(const FeatureConfig& f) {
  return {{"cell", f.cell},
          {"scales", f.scales},
          {"scale_step", f.scale_step},
          {"hof_threshold", f.hof_threshold},
          {"flow",
           {{"alpha", f.flow.alpha},
            {"iterations", f.flow.iterations},
            {"levels", f.flow.levels},
            {"warps", f.flow.warps},
            {"max_magnitude", f.flow.max_magnitude}}}};
}

FeatureConfig features_from(const json& j) {
  FeatureConfig f;
  f.cell = j.at("cell");
  f.scales = j.at("scales");
  f.scale_step = j.at("scale_step");
  f.hof_threshold = j.at("hof_threshold");
  const auto& fl = j.at("flow");
  f.flow.alpha = fl.at("alpha");
  f.flow.iterations = fl.at("iterations");
  f.flow.levels = fl.at("levels");
  f.flow.warps = fl.at("warps");
  f.flow.max_magnitude = fl.at("max_magnitude");
  return f;
}

void quantize(MatX& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(m.data()[i]);
}
void quantize(VecX& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(v[i]);
}

}  // namespace

void quantize_to_float(PoseModel& pose) {
  auto q = [](PartModel& p) {
    for (auto& m : p.appearance) quantize(m);
    for (auto& m : p.motion) quantize(m);
  };
  q(pose.root);
  for (auto& c : pose.children) q(c);
}

void quantize_to_float(ActionModel& action) {
  quantize(action.weights);
  for (auto& n : action.lowres) quantize(n.weights);
}

void save_archive(const ModelArchive& archive, const fs::path& dir) {
  archive.validate();
  fs::create_directories(dir);
  Blob blob;
  json index;
  index["format"] = "mstaog-archive";
  index["version"] = kArchiveVersion;
  index["features"] = features_json(archive.features);
  index["parts"] = json::array();
  for (const auto& p : archive.parts) index["parts"].push_back({{"id", p.id}, {"name", p.name}, {"joints", p.joints}});
  index["vocabulary"] = archive.vocabulary;
  index["poses"] = json::array();
  for (const auto& p : archive.poses) {
    json j = {{"id", p.id},
              {"label", p.label},
              {"items", p.items},
              {"coupling", p.coupling == ViewCoupling::Shared ? "shared" : "independent"},
              {"bin_centers", p.bin_centers},
              {"active", p.active},
              {"k1", p.k1},
              {"k2", p.k2},
              {"bias", p.bias},
              {"response_mean", p.response_mean},
              {"response_std", p.response_std},
              {"channels", p.channels}};
    j["cameras"] = json::array();
    for (const auto& c : p.cameras) j["cameras"].push_back({{"k1", c.k1}, {"k2", c.k2}, {"theta", c.theta}});
    j["root"] = part_json(p.root, blob);
    j["children"] = json::array();
    for (const auto& c : p.children) j["children"].push_back(part_json(c, blob));
    index["poses"].push_back(std::move(j));
  }
  index["actions"] = json::array();
  for (const auto& a : archive.actions) {
    json j = {{"label", a.label}, {"name", a.name}, {"pose_ids", a.pose_ids}, {"bias", a.bias}};
    j["weights"] = blob.put(a.weights);
    j["lowres"] = json::array();
    for (const auto& n : a.lowres)
      j["lowres"].push_back({{"kind", n.kind == LowResKind::Intensity ? "intensity" : "box_size"},
                             {"bias", n.bias},
                             {"weights", blob.put(n.weights)}});
    index["actions"].push_back(std::move(j));
  }
  {
    std::ofstream out(dir / "index.json");
    if (!out) throw IngestError("cannot write " + (dir / "index.json").string());
    out << index.dump(1) << '\n';
  }
  blob.write(dir / "weights.bin");
}

ModelArchive load_archive(const fs::path& dir) {
  std::ifstream in(dir / "index.json");
  if (!in) throw IngestError("archive index not found in " + dir.string());
  json index;
  try {
    in >> index;
  } catch (const json::exception& e) {
    throw ParseError((dir / "index.json").string(), 1, e.what());
  }
  Blob blob;
  blob.read(dir / "weights.bin");
  ModelArchive a;
  try {
    if (index.at("version").get<int>() != kArchiveVersion)
      throw IngestError("unsupported archive version " + index.at("version").dump());
    a.features = features_from(index.at("features"));
    for (const auto& p : index.at("parts"))
      a.parts.push_back({p.at("id"), p.at("name"), p.at("joints").get<std::vector<int>>()});
    a.vocabulary = index.at("vocabulary").get<std::vector<std::string>>();
    for (const auto& j : index.at("poses")) {
      PoseModel p;
      p.id = j.at("id");
      p.label = j.at("label");
      p.items = j.at("items").get<std::vector<int>>();
      p.coupling = j.at("coupling") == "shared" ? ViewCoupling::Shared : ViewCoupling::Independent;
      p.bin_centers = j.at("bin_centers").get<std::vector<Scalar>>();
      p.active = j.at("active").get<std::vector<bool>>();
      p.k1 = j.at("k1");
      p.k2 = j.at("k2");
      p.bias = j.at("bias");
      p.response_mean = j.at("response_mean");
      p.response_std = j.at("response_std");
      p.channels = j.at("channels");
      for (const auto& c : j.at("cameras")) p.cameras.push_back({c.at("k1"), c.at("k2"), c.at("theta")});
      p.root = part_from(j.at("root"), blob);
      for (const auto& c : j.at("children")) p.children.push_back(part_from(c, blob));
      a.poses.push_back(std::move(p));
    }
    for (const auto& j : index.at("actions")) {
      ActionModel m;
      m.label = j.at("label");
      m.name = j.at("name");
      m.pose_ids = j.at("pose_ids").get<std::vector<int>>();
      m.bias = j.at("bias");
      m.weights = blob.vector(j.at("weights"));
      for (const auto& n : j.at("lowres"))
        m.lowres.push_back({n.at("kind") == "intensity" ? LowResKind::Intensity : LowResKind::BoxSize,
                            blob.vector(n.at("weights")), n.at("bias")});
      a.actions.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ParseError((dir / "index.json").string(), 1, e.what());
  }
  a.validate();
  return a;
}

}  // namespace mstaog
