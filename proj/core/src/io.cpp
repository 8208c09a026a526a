#include "vhl/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vhl {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "blob formats assume a little-endian host");

void atomic_write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("atomic_write_file: cannot open " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("atomic_write_file: short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

namespace {

void append_u32(std::string& out, uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(const std::string& bytes, size_t at) {
  uint32_t v;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

}  // namespace

std::string encode_texture_blob(const TextureAtlas& atlas) {
  std::string out;
  out.reserve(16 + atlas.texels.size() * 4);
  out.append("TXA1", 4);
  append_u32(out, static_cast<uint32_t>(atlas.width));
  append_u32(out, static_cast<uint32_t>(atlas.height));
  append_u32(out, 0);
  for (double t : atlas.texels) {
    const float f = static_cast<float>(t);
    out.append(reinterpret_cast<const char*>(&f), 4);
  }
  return out;
}

TextureAtlas decode_texture_blob(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "TXA1") != 0) {
    throw std::runtime_error("texture blob: bad magic");
  }
  const uint32_t w = read_u32(bytes, 4);
  const uint32_t h = read_u32(bytes, 8);
  const size_t expected = 16 + static_cast<size_t>(w) * h * 3 * 4;
  if (bytes.size() != expected) throw std::runtime_error("texture blob: truncated payload");
  TextureAtlas atlas(static_cast<int>(w), static_cast<int>(h));
  for (size_t i = 0; i < atlas.texels.size(); ++i) {
    float f;
    std::memcpy(&f, bytes.data() + 16 + i * 4, 4);
    atlas.texels[i] = static_cast<double>(f);
  }
  return atlas;
}

void save_texture_blob(const TextureAtlas& atlas, const std::filesystem::path& path) {
  atomic_write_file(path, encode_texture_blob(atlas));
}

TextureAtlas load_texture_blob(const std::filesystem::path& path) {
  return decode_texture_blob(read_file(path));
}

std::string encode_policy_blob(const PolicyParams& params, const std::string& config_hash) {
  json header;
  header["format"] = "vhl-policy-v1";
  header["config_hash"] = config_hash;
  header["dim"] = params.dim;
  header["vocab_size"] = params.vocab_size;
  json entries = json::array();
  for (const auto& [name, mat] : params.entries()) {
    entries.push_back({{"name", name}, {"rows", mat->rows()}, {"cols", mat->cols()}});
  }
  header["entries"] = entries;
  const std::string header_text = header.dump();

  std::string out;
  out.append("VPP1", 4);
  append_u32(out, static_cast<uint32_t>(header_text.size()));
  out.append(header_text);
  for (const auto& [name, mat] : params.entries()) {
    out.append(reinterpret_cast<const char*>(mat->data()),
               static_cast<size_t>(mat->size()) * sizeof(double));
  }
  return out;
}

PolicyParams decode_policy_blob(const std::string& bytes, std::string* config_hash) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "VPP1") != 0) {
    throw std::runtime_error("policy blob: bad magic");
  }
  const uint32_t header_len = read_u32(bytes, 4);
  if (bytes.size() < 8 + header_len) throw std::runtime_error("policy blob: truncated header");
  const json header = json::parse(bytes.substr(8, header_len));
  if (header.at("format") != "vhl-policy-v1") throw std::runtime_error("policy blob: bad format");
  if (config_hash != nullptr) *config_hash = header.value("config_hash", "");

  PolicyParams params = PolicyParams::zeros(header.at("dim").get<int>(),
                                            header.at("vocab_size").get<int>());
  size_t at = 8 + header_len;
  auto entries = params.entries();
  const json& manifest = header.at("entries");
  if (manifest.size() != entries.size()) throw std::runtime_error("policy blob: entry count mismatch");
  for (size_t i = 0; i < entries.size(); ++i) {
    auto& [name, mat] = entries[i];
    const json& m = manifest[i];
    if (m.at("name") != name || m.at("rows") != mat->rows() || m.at("cols") != mat->cols()) {
      throw std::runtime_error("policy blob: shape manifest mismatch at " + name);
    }
    const size_t n = static_cast<size_t>(mat->size()) * sizeof(double);
    if (at + n > bytes.size()) throw std::runtime_error("policy blob: truncated payload");
    std::memcpy(mat->data(), bytes.data() + at, n);
    at += n;
  }
  if (at != bytes.size()) throw std::runtime_error("policy blob: trailing bytes");
  return params;
}

void save_policy(const PolicyParams& params, const std::string& config_hash,
                 const std::filesystem::path& path) {
  atomic_write_file(path, encode_policy_blob(params, config_hash));
}

PolicyParams load_policy(const std::filesystem::path& path, std::string* config_hash) {
  return decode_policy_blob(read_file(path), config_hash);
}

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from_json(const json& j) { return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()}; }

json episode_json(const Episode& ep) {
  json j;
  j["id"] = ep.id;
  j["env_id"] = ep.env_id;
  j["instruction"] = ep.instruction;
  j["trajectory"] = ep.trajectory;
  return j;
}

Episode episode_from_json(const json& j) {
  Episode ep;
  ep.id = j.at("id").get<std::string>();
  ep.env_id = j.at("env_id").get<std::string>();
  ep.instruction = j.at("instruction").get<std::vector<std::string>>();
  ep.trajectory = j.at("trajectory").get<Trajectory>();
  return ep;
}

}  // namespace

std::string episode_to_json(const Episode& ep) { return episode_json(ep).dump(); }

void save_world_bundle(const WorldBundle& bundle, const std::filesystem::path& json_path,
                       const std::filesystem::path& blob_path) {
  json doc;
  doc["format"] = "vhl-world-v1";
  doc["config_hash"] = bundle.config_hash;
  doc["env_id"] = bundle.env_id;
  doc["seed"] = bundle.seed;

  json graph;
  json positions = json::array();
  for (const Vec3& p : bundle.world.graph.positions()) positions.push_back(vec3_to_json(p));
  graph["positions"] = positions;
  json edges = json::array();
  for (const auto& [a, b] : bundle.world.graph.edges()) edges.push_back(json::array({a, b}));
  graph["edges"] = edges;
  doc["graph"] = graph;

  const Scene& scene = bundle.world.scene;
  json mesh;
  json vertices = json::array();
  for (const Vec3& v : scene.vertices) vertices.push_back(vec3_to_json(v));
  mesh["vertices"] = vertices;
  json faces = json::array();
  for (const Face& f : scene.faces) faces.push_back(json::array({f.v0, f.v1, f.v2}));
  mesh["faces"] = faces;
  json uvs = json::array();
  for (const auto& fuv : scene.face_uvs) {
    uvs.push_back(json::array({json::array({fuv[0].u, fuv[0].v}), json::array({fuv[1].u, fuv[1].v}),
                               json::array({fuv[2].u, fuv[2].v})}));
  }
  mesh["face_uvs"] = uvs;
  doc["mesh"] = mesh;

  json objects = json::array();
  for (const SceneObject& obj : scene.objects) {
    objects.push_back(
        {{"id", obj.id}, {"category", category_name(obj.category)}, {"faces", obj.faces}});
  }
  doc["objects"] = objects;

  doc["atlas"] = {{"width", scene.atlas.width},
                  {"height", scene.atlas.height},
                  {"blob", blob_path.filename().string()}};
  doc["vocab"] = instruction_vocabulary();

  json eps = json::array();
  for (const Episode& ep : bundle.episodes) eps.push_back(episode_json(ep));
  doc["episodes"] = eps;

  atomic_write_file(json_path, doc.dump(2) + "\n");
  save_texture_blob(scene.atlas, blob_path);
}

WorldBundle load_world_bundle(const std::filesystem::path& json_path) {
  const json doc = json::parse(read_file(json_path));
  if (doc.at("format") != "vhl-world-v1") throw std::runtime_error("world bundle: bad format");

  WorldBundle bundle;
  bundle.env_id = doc.at("env_id").get<std::string>();
  bundle.seed = doc.at("seed").get<uint64_t>();
  bundle.config_hash = doc.value("config_hash", "");

  for (const json& p : doc.at("graph").at("positions")) {
    bundle.world.graph.add_node(vec3_from_json(p));
  }
  for (const json& e : doc.at("graph").at("edges")) {
    bundle.world.graph.add_edge(e[0].get<NodeId>(), e[1].get<NodeId>());
  }

  Scene& scene = bundle.world.scene;
  for (const json& v : doc.at("mesh").at("vertices")) scene.vertices.push_back(vec3_from_json(v));
  for (const json& f : doc.at("mesh").at("faces")) {
    scene.faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
  }
  for (const json& u : doc.at("mesh").at("face_uvs")) {
    scene.face_uvs.push_back({Vec2{u[0][0].get<double>(), u[0][1].get<double>()},
                              Vec2{u[1][0].get<double>(), u[1][1].get<double>()},
                              Vec2{u[2][0].get<double>(), u[2][1].get<double>()}});
  }
  for (const json& o : doc.at("objects")) {
    SceneObject obj;
    obj.id = o.at("id").get<int>();
    obj.category = category_from_name(o.at("category").get<std::string>());
    obj.faces = o.at("faces").get<std::vector<int>>();
    scene.objects.push_back(std::move(obj));
  }

  const std::filesystem::path blob_path =
      json_path.parent_path() / doc.at("atlas").at("blob").get<std::string>();
  scene.atlas = load_texture_blob(blob_path);
  if (scene.atlas.width != doc.at("atlas").at("width").get<int>() ||
      scene.atlas.height != doc.at("atlas").at("height").get<int>()) {
    throw std::runtime_error("world bundle: atlas dimensions disagree with blob");
  }

  for (const json& e : doc.at("episodes")) bundle.episodes.push_back(episode_from_json(e));
  scene.validate();
  return bundle;
}

void save_attack_set(const AttackSet& set, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "vhl-attacks-v1";
  doc["config_hash"] = set.config_hash;
  doc["mode"] = attack_mode_name(set.mode);
  json instances = json::array();
  for (const AttackInstance& inst : set.instances) {
    json j;
    j["id"] = inst.id;
    j["env_id"] = inst.env_id;
    j["test_episode"] = episode_json(inst.test_episode);
    j["attack_object"] = inst.attack_object;
    j["v_atk"] = inst.v_atk;
    j["attack_trajectory"] = inst.attack_trajectory;
    json train_ids = json::array();
    for (const Episode& ep : inst.train_split) train_ids.push_back(ep.id);
    j["train_ids"] = train_ids;
    json val_ids = json::array();
    for (const Episode& ep : inst.val_split) val_ids.push_back(ep.id);
    j["val_ids"] = val_ids;
    instances.push_back(std::move(j));
  }
  doc["instances"] = instances;
  json rejections = json::array();
  for (const auto& [id, reason] : set.rejections) {
    rejections.push_back({{"episode_id", id}, {"reason", reason}});
  }
  doc["rejections"] = rejections;
  atomic_write_file(path, doc.dump(2) + "\n");
}

AttackSet load_attack_set(const std::filesystem::path& path,
                          const std::vector<WorldBundle>& worlds) {
  const json doc = json::parse(read_file(path));
  if (doc.at("format") != "vhl-attacks-v1") throw std::runtime_error("attack set: bad format");

  std::map<std::string, const Episode*> by_id;
  for (const WorldBundle& w : worlds) {
    for (const Episode& ep : w.episodes) by_id[ep.id] = &ep;
  }

  AttackSet set;
  set.config_hash = doc.value("config_hash", "");
  set.mode = attack_mode_from_name(doc.at("mode").get<std::string>());
  for (const json& j : doc.at("instances")) {
    AttackInstance inst;
    inst.id = j.at("id").get<std::string>();
    inst.env_id = j.at("env_id").get<std::string>();
    inst.test_episode = episode_from_json(j.at("test_episode"));
    inst.attack_object = j.at("attack_object").get<int>();
    inst.v_atk = j.at("v_atk").get<NodeId>();
    inst.attack_trajectory = j.at("attack_trajectory").get<Trajectory>();
    inst.mode = set.mode;
    for (const json& id : j.at("train_ids")) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) throw std::runtime_error("attack set: unknown episode " + id.dump());
      inst.train_split.push_back(*it->second);
    }
    for (const json& id : j.at("val_ids")) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end()) throw std::runtime_error("attack set: unknown episode " + id.dump());
      inst.val_split.push_back(*it->second);
    }
    set.instances.push_back(std::move(inst));
  }
  for (const json& j : doc.at("rejections")) {
    set.rejections.emplace_back(j.at("episode_id").get<std::string>(),
                                j.at("reason").get<std::string>());
  }
  return set;
}

std::string metrics_report_to_json(const MetricsReport& report) {
  json doc;
  json rows = json::array();
  for (const EpisodeResult& r : report.rows) {
    rows.push_back({{"episode_id", r.episode_id},
                    {"post_trajectory", r.post_trajectory},
                    {"sr", r.sr},
                    {"osr", r.osr},
                    {"ndtw", r.ndtw},
                    {"stopped_at_vatk", r.stopped_at_vatk}});
  }
  doc["rows"] = rows;
  doc["sr_pct"] = report.sr_pct;
  doc["osr_pct"] = report.osr_pct;
  doc["ndtw_pct"] = report.ndtw_pct;
  doc["stop_rate_pct"] = report.stop_rate_pct;
  return doc.dump(2);
}

MetricsReport metrics_report_from_json(const std::string& text) {
  const json doc = json::parse(text);
  MetricsReport report;
  for (const json& j : doc.at("rows")) {
    EpisodeResult r;
    r.episode_id = j.at("episode_id").get<std::string>();
    r.post_trajectory = j.at("post_trajectory").get<Trajectory>();
    r.sr = j.at("sr").get<bool>();
    r.osr = j.at("osr").get<bool>();
    r.ndtw = j.at("ndtw").get<double>();
    r.stopped_at_vatk = j.at("stopped_at_vatk").get<bool>();
    report.rows.push_back(std::move(r));
  }
  report.sr_pct = doc.at("sr_pct").get<double>();
  report.osr_pct = doc.at("osr_pct").get<double>();
  report.ndtw_pct = doc.at("ndtw_pct").get<double>();
  report.stop_rate_pct = doc.at("stop_rate_pct").get<double>();
  return report;
}

}  // namespace vhl
