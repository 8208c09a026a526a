#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vhl/agent.hpp"
#include "vhl/attack.hpp"
#include "vhl/metrics.hpp"
#include "vhl/scene.hpp"
#include "vhl/worldgen.hpp"

namespace vhl {

// Write-temp-then-rename; the destination is either fully written or absent.
void atomic_write_file(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

// Texture blob: 16-byte header (magic "TXA1", u32 LE width, u32 LE height,
// u32 LE reserved zero) followed by width*height*3 32-bit LE IEEE-754 floats,
// row-major, RGB interleaved.
std::string encode_texture_blob(const TextureAtlas& atlas);
TextureAtlas decode_texture_blob(const std::string& bytes);
void save_texture_blob(const TextureAtlas& atlas, const std::filesystem::path& path);
TextureAtlas load_texture_blob(const std::filesystem::path& path);

// Policy blob: magic "VPP1", u32 LE header length, JSON shape manifest, then
// raw little-endian 64-bit floats in the manifest's entry order
// (column-major within each matrix).
std::string encode_policy_blob(const PolicyParams& params, const std::string& config_hash);
PolicyParams decode_policy_blob(const std::string& bytes, std::string* config_hash = nullptr);
void save_policy(const PolicyParams& params, const std::string& config_hash,
                 const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path, std::string* config_hash = nullptr);

struct WorldBundle {
  std::string env_id;
  uint64_t seed = 0;
  World world;
  std::vector<Episode> episodes;
  std::string config_hash;
};

// One JSON document per environment plus the texture blob sidecar.
void save_world_bundle(const WorldBundle& bundle, const std::filesystem::path& json_path,
                       const std::filesystem::path& blob_path);
WorldBundle load_world_bundle(const std::filesystem::path& json_path);

std::string episode_to_json(const Episode& ep);

struct AttackSet {
  AttackMode mode = AttackMode::kTrajectory;
  std::vector<AttackInstance> instances;
  std::vector<std::pair<std::string, std::string>> rejections;  // episode id -> reason
  std::string config_hash;
};

// Instances reference supporting episodes by id; loading resolves them
// against the world bundles' episode lists.
void save_attack_set(const AttackSet& set, const std::filesystem::path& path);
AttackSet load_attack_set(const std::filesystem::path& path,
                          const std::vector<WorldBundle>& worlds);

std::string metrics_report_to_json(const MetricsReport& report);
MetricsReport metrics_report_from_json(const std::string& text);

}  // namespace vhl
