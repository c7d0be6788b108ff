#include "mvlab/world/world_io.hpp"

#include <bit>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "mvlab/core/errors.hpp"

namespace mvlab {

static_assert(std::endian::native == std::endian::little, "world-v1 stores little-endian doubles");

namespace {

using json = nlohmann::json;
namespace bai = boost::archive::iterators;
using ToBase64 = bai::base64_from_binary<bai::transform_width<const char*, 6, 8>>;
using FromBase64 = bai::transform_width<bai::binary_from_base64<std::string::const_iterator>, 8, 6>;

json vec3(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d read_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw StructuralError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string encode_points(const std::vector<Eigen::Vector3d>& pts) {
  std::vector<double> flat;
  flat.reserve(3 * pts.size());
  for (const auto& p : pts) flat.insert(flat.end(), {p.x(), p.y(), p.z()});
  return encode_doubles(flat);
}

std::vector<Eigen::Vector3d> decode_points(const std::string& text, std::size_t count) {
  const auto flat = decode_doubles(text);
  if (flat.size() != 3 * count) throw StructuralError("point array has the wrong length");
  std::vector<Eigen::Vector3d> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]};
  return out;
}

json object_to_json(const PrototypeObject& object) {
  json j;
  if (const auto* q = std::get_if<TexturedQuad>(&object)) {
    j["center"] = vec3(q->center);
    j["half_u"] = vec3(q->half_u);
    j["half_v"] = vec3(q->half_v);
    j["texture"] = {{"height", q->texture.height()},
                    {"width", q->texture.width()},
                    {"data", encode_doubles(q->texture.data())}};
  } else if (const auto* g = std::get_if<VolumeGrid>(&object)) {
    j["resolution"] = g->resolution;
    j["lo"] = vec3(g->lo);
    j["hi"] = vec3(g->hi);
    j["density"] = encode_doubles(g->density);
    j["color"] = encode_doubles(g->color);
  } else {
    const auto& s = std::get<SplatSet>(object);
    j["count"] = s.size();
    j["centers"] = encode_points(s.centers);
    j["scales"] = encode_doubles(s.scales);
    j["opacities"] = encode_doubles(s.opacities);
    j["colors"] = encode_points(s.colors);
  }
  return j;
}

PrototypeObject object_from_json(const std::string& kind, const json& j) {
  if (kind == "quad") {
    TexturedQuad q;
    q.center = read_vec3(j.at("center"));
    q.half_u = read_vec3(j.at("half_u"));
    q.half_v = read_vec3(j.at("half_v"));
    const json& t = j.at("texture");
    q.texture = Image(t.at("height").get<int>(), t.at("width").get<int>(), 3);
    const auto data = decode_doubles(t.at("data").get<std::string>());
    if (data.size() != q.texture.size()) throw StructuralError("texture array has the wrong length");
    std::ranges::copy(data, q.texture.data().begin());
    return q;
  }
  if (kind == "volume") {
    VolumeGrid g(j.at("resolution").get<int>(), read_vec3(j.at("lo")), read_vec3(j.at("hi")));
    g.density = decode_doubles(j.at("density").get<std::string>());
    g.color = decode_doubles(j.at("color").get<std::string>());
    g.validate();
    return g;
  }
  if (kind == "splats") {
    const auto n = j.at("count").get<std::size_t>();
    SplatSet s;
    s.centers = decode_points(j.at("centers").get<std::string>(), n);
    s.scales = decode_doubles(j.at("scales").get<std::string>());
    s.opacities = decode_doubles(j.at("opacities").get<std::string>());
    s.colors = decode_points(j.at("colors").get<std::string>(), n);
    s.validate();
    return s;
  }
  throw StructuralError("unknown prototype kind '" + kind + "'");
}

json camera_to_json(const Camera& c) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) rot.push_back(c.rotation(r, col));
  return {{"rotation", rot},
          {"translation", vec3(c.translation)},
          {"focal", c.focal},
          {"principal", json::array({c.principal.x(), c.principal.y()})},
          {"width", c.width},
          {"height", c.height}};
}

Camera camera_from_json(const json& j) {
  Camera c;
  const json& rot = j.at("rotation");
  if (!rot.is_array() || rot.size() != 9) throw StructuralError("camera rotation needs 9 entries");
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) c.rotation(r, col) = rot[3 * r + col].get<double>();
  c.translation = read_vec3(j.at("translation"));
  c.focal = j.at("focal").get<double>();
  c.principal = {j.at("principal").at(0).get<double>(), j.at("principal").at(1).get<double>()};
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.validate();
  return c;
}

}  // namespace

std::string encode_doubles(std::span<const double> values) {
  const auto* bytes = reinterpret_cast<const char*>(values.data());
  const std::size_t n = values.size() * sizeof(double);
  std::string out(ToBase64(bytes), ToBase64(bytes + n));
  out.append((3 - n % 3) % 3, '=');
  return out;
}

std::vector<double> decode_doubles(const std::string& text) {
  std::string body = text;
  std::size_t pad = 0;
  while (!body.empty() && body.back() == '=') {
    body.pop_back();
    ++pad;
  }
  if (pad > 2) throw StructuralError("malformed base64 padding");
  std::string bytes;
  try {
    bytes.assign(FromBase64(body.cbegin()), FromBase64(body.cend()));
  } catch (const std::exception& e) {
    throw StructuralError(std::string("malformed base64: ") + e.what());
  }
  // Trailing bits that only belong to padding decode to extra bytes; drop them.
  bytes.resize(body.size() * 6 / 8);
  if (bytes.size() % sizeof(double) != 0) throw StructuralError("base64 payload is not float64");
  std::vector<double> out(bytes.size() / sizeof(double));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

std::string world_to_json(const WorldModel& world) {
  json j;
  j["schema"] = "world-v1";
  j["name"] = world.name();
  j["view_noise"] = world.view_noise();
  j["cameras"] = json::array();
  for (const auto& c : world.cameras()) j["cameras"].push_back(camera_to_json(c));
  j["prototypes"] = json::array();
  for (const auto& p : world.prototypes()) {
    json pj = {{"id", p.id},
               {"prior", p.prior},
               {"condition", p.condition},
               {"kind", std::string(kind_name(p.kind()))}};
    pj["object"] = object_to_json(p.object);
    j["prototypes"].push_back(std::move(pj));
  }
  return j.dump(2);
}

WorldModel world_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw StructuralError(std::string("world json: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "world-v1")
      throw StructuralError("unsupported world schema '" + j.at("schema").get<std::string>() + "'");
    std::vector<Camera> cams;
    for (const auto& c : j.at("cameras")) cams.push_back(camera_from_json(c));
    std::vector<Prototype> protos;
    for (const auto& p : j.at("prototypes"))
      protos.push_back({p.at("id").get<int>(),
                        object_from_json(p.at("kind").get<std::string>(), p.at("object")),
                        p.at("prior").get<double>(), p.value("condition", std::string())});
    return WorldModel(j.at("name").get<std::string>(), std::move(protos), std::move(cams),
                      j.at("view_noise").get<double>());
  } catch (const json::exception& e) {
    throw StructuralError(std::string("world json: ") + e.what());
  }
}

void save_world(const WorldModel& world, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << world_to_json(world) << '\n';
}

WorldModel load_world(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LookupError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return world_from_json(ss.str());
}

}  // namespace mvlab
