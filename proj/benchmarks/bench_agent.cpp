#include <benchmark/benchmark.h>

#include "vhl/agent.hpp"
#include "vhl/obs_cache.hpp"
#include "vhl/worldgen.hpp"

namespace {

struct AgentFixture {
  vhl::World world = vhl::generate_world(42, vhl::WorldParams{});
  vhl::PanoramaCache cache{world.scene, world.graph, 32};
  vhl::PolicyParams params =
      vhl::PolicyParams::xavier(64, vhl::Vocabulary::standard().size(), 7);
  std::vector<int> tokens = vhl::Vocabulary::standard().encode(
      std::vector<std::string>{"walk", "straight", "past", "the", "sofa", "then", "finally",
                               "walk", "left", "and", "stop", "at", "the", "table"});
};

const AgentFixture& fixture() {
  static const AgentFixture f;
  return f;
}

void BM_EncodeInstruction(benchmark::State& state) {
  const AgentFixture& f = fixture();
  for (auto _ : state) {
    Eigen::VectorXd enc = vhl::encode_instruction(f.tokens, f.params);
    benchmark::DoNotOptimize(enc.data());
  }
}
BENCHMARK(BM_EncodeInstruction);

void BM_Rollout(benchmark::State& state) {
  const AgentFixture& f = fixture();
  const vhl::EnvContext env{&f.world.graph, &f.cache};
  for (auto _ : state) {
    vhl::Trajectory t = vhl::rollout_from_state(f.params, env, f.tokens, 0,
                                                vhl::HistoryState::initial(f.params.dim), 15);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_Rollout);

void BM_TrainBcEpoch(benchmark::State& state) {
  const AgentFixture& f = fixture();
  const auto episodes = vhl::generate_episodes(f.world.graph, f.world.scene, "bench", 60, 3);
  std::map<std::string, vhl::EnvContext> envs{{"bench", {&f.world.graph, &f.cache}}};
  vhl::BCConfig cfg;
  cfg.epochs = 1;
  cfg.lr = 1e-3;
  for (auto _ : state) {
    vhl::BCResult r = vhl::train_bc(f.params, episodes, envs, vhl::Vocabulary::standard(), cfg);
    benchmark::DoNotOptimize(r.epoch_losses.data());
  }
}
BENCHMARK(BM_TrainBcEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
