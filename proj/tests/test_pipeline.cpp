#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "vhl/config.hpp"
#include "vhl/io.hpp"
#include "vhl/pipeline.hpp"

using namespace vhl;

namespace {

RunConfig tiny_config(const std::filesystem::path& out) {
  RunConfig c;
  c.seed = 5;
  c.environments = 1;
  c.out = out.string();
  c.workers = 2;
  c.world.rooms_x = 2;
  c.world.rooms_y = 2;
  c.world.objects_per_room = 2;
  c.episodes_per_env = 30;
  c.holdout_fraction = 0.3;
  c.subimage_size = 16;
  c.agent_dim = 16;
  c.agent_epochs = 1;
  c.agent_lr = 1e-3;
  c.attack.iterations = 10;
  c.attack.checkpoint_every = 5;
  c.attack.batch_size = 2;
  c.max_instances = 2;
  c.validate();
  return c;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("gen-world writes idempotent artifacts; downstream stages find them") {
  TempDir tmp("vhl_pipeline_test");
  const RunConfig cfg = tiny_config(tmp.path);
  PipelinePaths paths(cfg.out);

  stage_gen_world(cfg);
  REQUIRE(std::filesystem::exists(paths.world_json(0)));
  REQUIRE(std::filesystem::exists(paths.world_blob(0)));
  const std::string world_bytes = read_file(paths.world_json(0));
  const std::string blob_bytes = read_file(paths.world_blob(0));

  stage_gen_world(cfg);  // rerun: byte-identical outputs
  CHECK(read_file(paths.world_json(0)) == world_bytes);
  CHECK(read_file(paths.world_blob(0)) == blob_bytes);

  const WorldBundle bundle = load_world_bundle(paths.world_json(0));
  CHECK(bundle.config_hash == config_hash(cfg));
  CHECK(bundle.episodes.size() == 30);

  // The holdout split keys on trajectory groups: paraphrases stay together.
  for (const Episode& a : bundle.episodes) {
    for (const Episode& b : bundle.episodes) {
      if (a.trajectory == b.trajectory) {
        CHECK(is_heldout(a, cfg.holdout_fraction) == is_heldout(b, cfg.holdout_fraction));
      }
    }
  }
}

TEST_CASE("train-agent and build-attacks stage artifacts; eval demands attack outputs") {
  TempDir tmp("vhl_pipeline_test2");
  const RunConfig cfg = tiny_config(tmp.path);
  PipelinePaths paths(cfg.out);

  // Stages demand upstream artifacts.
  CHECK_THROWS_AS(stage_train_agent(cfg), MissingArtifactError);
  CHECK(run_command("train-agent", cfg) == 2);

  stage_gen_world(cfg);
  stage_train_agent(cfg);
  REQUIRE(std::filesystem::exists(paths.policy()));
  REQUIRE(std::filesystem::exists(paths.gate()));
  REQUIRE(std::filesystem::exists(paths.train_log()));

  stage_build_attacks(cfg);
  REQUIRE(std::filesystem::exists(paths.attacks()));
  LoadedWorlds worlds = load_worlds(cfg, false);
  const AttackSet set = load_attack_set(paths.attacks(), worlds.bundles);
  CHECK(set.instances.size() + set.rejections.size() > 0);
  for (const AttackInstance& inst : set.instances) {
    CHECK(inst.train_split.size() + inst.val_split.size() >= 5);
    CHECK(first_index_of(inst.test_episode.trajectory, inst.v_atk) >= 0);
    for (const Episode& ep : inst.train_split) {
      CHECK(first_index_of(ep.trajectory, inst.v_atk) >= 0);
    }
  }

  // eval before attack: missing attacked atlas, exit code 2.
  if (!set.instances.empty()) {
    CHECK(run_command("eval", cfg) == 2);
  }

  // A 1-epoch policy cannot pass the competence gate, so attack refuses to
  // run against it (validation error, exit 1).
  const nlohmann::json gate = nlohmann::json::parse(read_file(paths.gate()));
  if (!gate.value("pass", false)) {
    CHECK(run_command("attack", cfg) == 1);
  }
}

TEST_CASE("config hash mismatches are refused by eval") {
  TempDir tmp("vhl_pipeline_test3");
  RunConfig cfg = tiny_config(tmp.path);
  stage_gen_world(cfg);

  RunConfig other = cfg;
  other.seed = 1234;  // different hash, same artifacts on disk
  PipelinePaths paths(cfg.out);
  // eval checks world hashes before anything else.
  CHECK(run_command("eval", other) != 0);
}
