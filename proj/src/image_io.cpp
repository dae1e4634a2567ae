#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "instloc/errors.hpp"
#include "instloc/io.hpp"
#include "json.hpp"

namespace instloc::io {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary image formats assume a little-endian host");

namespace {

json Vec(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 ToVec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::ofstream OpenOut(const fs::path& path, bool binary = false) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::ifstream OpenIn(const fs::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw FormatError("cannot read " + path.string());
  return in;
}

void ExpectLine(std::istream& in, const std::string& expected, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line) || line != expected) {
    throw FormatError(path.string() + ": expected header '" + expected + "'");
  }
}

ImageDims ReadDims(std::istream& in, int channels, const fs::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": missing dimensions");
  std::istringstream ss(line);
  ImageDims dims;
  int c = 0;
  ss >> dims.width >> dims.height;
  if (channels > 0) ss >> c;
  if (!ss || dims.width <= 0 || dims.height <= 0 || (channels > 0 && c != channels)) {
    throw FormatError(path.string() + ": bad dimension line '" + line + "'");
  }
  return dims;
}

}  // namespace

std::string ReadText(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out = OpenOut(path);
  out << text;
}

void WritePoseFile(const fs::path& path, const std::vector<PoseRecord>& records) {
  std::ofstream out = OpenOut(path);
  for (const PoseRecord& r : records) {
    json j;
    j["frame"] = r.frame;
    if (r.failed) {
      j["failed"] = true;
      j["reason"] = r.reason;
    } else {
      const Eigen::Quaterniond q = r.pose.Quaternion();
      j["q"] = json::array({q.w(), q.x(), q.y(), q.z()});
      j["t"] = Vec(r.pose.Translation());
      if (r.inliers) j["inliers"] = *r.inliers;
      if (r.mean_residual_deg) j["mean_residual_deg"] = *r.mean_residual_deg;
    }
    out << j.dump() << '\n';
  }
}

std::vector<PoseRecord> ReadPoseFile(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  std::vector<PoseRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      PoseRecord r;
      r.frame = j.at("frame").get<std::string>();
      r.failed = j.value("failed", false);
      if (r.failed) {
        r.reason = j.value("reason", "");
      } else {
        const json& q = j.at("q");
        if (!q.is_array() || q.size() != 4) throw FormatError("q must have 4 entries");
        const Eigen::Quaterniond quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                      q[3].get<double>());
        r.pose = Pose::FromQuaternion(quat, ToVec3(j.at("t")));
        if (j.contains("inliers")) r.inliers = j["inliers"].get<int>();
        if (j.contains("mean_residual_deg")) r.mean_residual_deg = j["mean_residual_deg"].get<double>();
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string SceneToJson(const CityScene& scene) {
  json j;
  j["seed"] = scene.seed;
  j["road_segments"] = scene.road_segments;
  j["layout"] = {{"blocks_x", scene.layout.blocks_x},
                 {"blocks_z", scene.layout.blocks_z},
                 {"block_size", scene.layout.block_size},
                 {"street_width", scene.layout.street_width}};
  json buildings = json::array();
  for (const Cuboid& b : scene.buildings) {
    buildings.push_back({{"center", Vec(b.center)},
                         {"half_extents", Vec(b.half_extents)},
                         {"yaw", b.yaw},
                         {"label", b.label}});
  }
  j["buildings"] = std::move(buildings);
  return j.dump(1) + "\n";
}

CityScene SceneFromJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    CityScene s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.road_segments = j.at("road_segments").get<int>();
    if (j.contains("layout")) {
      const json& l = j["layout"];
      s.layout.blocks_x = l.at("blocks_x").get<int>();
      s.layout.blocks_z = l.at("blocks_z").get<int>();
      s.layout.block_size = l.at("block_size").get<double>();
      s.layout.street_width = l.at("street_width").get<double>();
    }
    for (const json& b : j.at("buildings")) {
      Cuboid c;
      c.center = ToVec3(b.at("center"));
      c.half_extents = ToVec3(b.at("half_extents"));
      c.yaw = b.at("yaw").get<double>();
      c.label = b.at("label").get<Label>();
      if ((c.half_extents.array() <= 0.0).any()) throw FormatError("half extents must be positive");
      s.buildings.push_back(c);
    }
    return s;
  } catch (const json::exception& e) {
    throw FormatError(std::string("scene: ") + e.what());
  }
}

void WriteScene(const fs::path& path, const CityScene& scene) { WriteText(path, SceneToJson(scene)); }
CityScene ReadScene(const fs::path& path) { return SceneFromJson(ReadText(path)); }

std::string InstanceMapToJson(const InstanceMap& map) {
  json labels = json::array();
  for (const auto& [label, t] : map.Transforms()) {
    json w = json::array();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) w.push_back(t.unwhiten(r, c));
    }
    labels.push_back({{"id", label}, {"mean", Vec(t.mean)}, {"W", w}, {"count", t.point_count}});
  }
  json j;
  j["labels"] = std::move(labels);
  j["label_count"] = map.LabelCount();
  return j.dump(1) + "\n";
}

InstanceMap InstanceMapFromJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    InstanceMap map;
    for (const json& e : j.at("labels")) {
      const json& w = e.at("W");
      if (!w.is_array() || w.size() != 9) throw FormatError("W must have 9 entries");
      Mat3 m;
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m(r, c) = w[3 * r + c].get<double>();
      }
      const Label id = e.at("id").get<Label>();
      if (map.Contains(id)) throw FormatError("duplicate label " + std::to_string(id));
      map.Insert(MakeWhiteningTransform(id, ToVec3(e.at("mean")), m, e.value("count", 0L)));
    }
    return map;
  } catch (const json::exception& e) {
    throw FormatError(std::string("instance map: ") + e.what());
  }
}

void WriteInstanceMap(const fs::path& path, const InstanceMap& map) { WriteText(path, InstanceMapToJson(map)); }
InstanceMap ReadInstanceMap(const fs::path& path) { return InstanceMapFromJson(ReadText(path)); }

void WriteSceneCoordinates(const fs::path& path, const SceneCoordinateImage& image) {
  std::ofstream out = OpenOut(path, true);
  out << "SCRD1\n" << image.dims.width << ' ' << image.dims.height << " 3\n";
  std::vector<float> buf(image.coords.size() * 3);
  for (std::size_t i = 0; i < image.coords.size(); ++i) {
    for (int k = 0; k < 3; ++k) buf[3 * i + k] = static_cast<float>(image.coords[i](k));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

SceneCoordinateImage ReadSceneCoordinates(const fs::path& path) {
  std::ifstream in = OpenIn(path, true);
  ExpectLine(in, "SCRD1", path);
  SceneCoordinateImage image(ReadDims(in, 3, path));
  std::vector<float> buf(image.coords.size() * 3);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(float))) {
    throw FormatError(path.string() + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < image.coords.size(); ++i) {
    const Vec3 v(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]);
    if (v.allFinite()) image.coords[i] = v;
  }
  return image;
}

void WriteLabels(const fs::path& path, const LabelImage& image) {
  std::ofstream out = OpenOut(path, true);
  out << "LBLS1\n" << image.dims.width << ' ' << image.dims.height << "\n";
  out.write(reinterpret_cast<const char*>(image.labels.data()),
            static_cast<std::streamsize>(image.labels.size() * sizeof(Label)));
}

LabelImage ReadLabels(const fs::path& path) {
  std::ifstream in = OpenIn(path, true);
  ExpectLine(in, "LBLS1", path);
  LabelImage image(ReadDims(in, 0, path));
  const auto bytes = static_cast<std::streamsize>(image.labels.size() * sizeof(Label));
  in.read(reinterpret_cast<char*>(image.labels.data()), bytes);
  if (in.gcount() != bytes) throw FormatError(path.string() + ": truncated label data");
  return image;
}

void WritePly(const fs::path& path, const LabeledCloud& cloud) {
  std::ofstream out = OpenOut(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nproperty uint instance_label\nend_header\n";
  char line[128];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %u\n", static_cast<float>(p.x()),
                  static_cast<float>(p.y()), static_cast<float>(p.z()), cloud.labels[i]);
    out << line;
  }
}

LabeledCloud ReadPly(const fs::path& path) {
  std::ifstream in = OpenIn(path);
  std::string line;
  if (!std::getline(in, line) || line != "ply") throw FormatError(path.string() + ": not a PLY file");
  long vertices = -1;
  std::vector<std::string> props;
  bool ascii = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "format") {
      std::string kind;
      ss >> kind;
      ascii = kind == "ascii";
    } else if (word == "element") {
      std::string name;
      ss >> name;
      if (name == "vertex") ss >> vertices;
    } else if (word == "property" && vertices >= 0) {
      std::string type, name;
      ss >> type >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) throw FormatError(path.string() + ": only ASCII PLY is supported");
  auto find = [&](const std::string& name) {
    auto it = std::find(props.begin(), props.end(), name);
    if (it == props.end()) throw FormatError(path.string() + ": missing property " + name);
    return static_cast<std::size_t>(it - props.begin());
  };
  const std::size_t ix = find("x"), iy = find("y"), iz = find("z"), il = find("instance_label");
  LabeledCloud cloud;
  std::vector<double> values(props.size());
  for (long v = 0; v < vertices; ++v) {
    for (double& x : values) {
      if (!(in >> x)) throw FormatError(path.string() + ": truncated vertex list");
    }
    cloud.Add(Vec3(static_cast<float>(values[ix]), static_cast<float>(values[iy]), static_cast<float>(values[iz])),
              static_cast<Label>(values[il]));
  }
  return cloud;
}

}  // namespace instloc::io
