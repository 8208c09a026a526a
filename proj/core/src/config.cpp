#include "vhl/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "vhl/rng.hpp"

namespace vhl {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config key '" + key + "': malformed integer '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config key '" + key + "': malformed number '" + value + "'");
  }
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& key, const std::string& value, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("config key '" + key + "': empty list element");
    out.push_back(parse(key, item));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

// Full key -> setter. Full keys are "<section>.<name>".
const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> kSetters = {
      {"run.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.seed = static_cast<uint64_t>(parse_int(k, v));
       }},
      {"run.environments",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.environments = static_cast<int>(parse_int(k, v));
       }},
      {"run.out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; }},
      {"run.workers",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.workers = static_cast<int>(parse_int(k, v));
       }},
      {"world.rooms_x",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.world.rooms_x = static_cast<int>(parse_int(k, v));
       }},
      {"world.rooms_y",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.world.rooms_y = static_cast<int>(parse_int(k, v));
       }},
      {"world.room_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.world.room_size = parse_double(k, v);
       }},
      {"world.objects_per_room",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.world.objects_per_room = static_cast<int>(parse_int(k, v));
       }},
      {"world.atlas_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.world.atlas_size = static_cast<int>(parse_int(k, v));
       }},
      {"world.episodes_per_env",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.episodes_per_env = static_cast<int>(parse_int(k, v));
       }},
      {"world.holdout_fraction",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.holdout_fraction = parse_double(k, v);
       }},
      {"world.subimage_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.subimage_size = static_cast<int>(parse_int(k, v));
       }},
      {"agent.dim",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.agent_dim = static_cast<int>(parse_int(k, v));
       }},
      {"agent.epochs",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.agent_epochs = static_cast<int>(parse_int(k, v));
       }},
      {"agent.lr",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.agent_lr = parse_double(k, v);
       }},
      {"agent.batch_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.agent_batch_size = static_cast<int>(parse_int(k, v));
       }},
      {"agent.max_steps",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.max_steps = static_cast<int>(parse_int(k, v));
       }},
      {"attack.mode",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.attack.mode = attack_mode_from_name(v);
         } catch (const std::exception&) {
           throw ConfigError("config key '" + k + "': expected stop or trajectory, got '" + v + "'");
         }
       }},
      {"attack.epsilon",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.epsilon = parse_double(k, v);
       }},
      {"attack.lr",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.lr = parse_double(k, v);
       }},
      {"attack.beta1",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.beta1 = parse_double(k, v);
       }},
      {"attack.beta2",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.beta2 = parse_double(k, v);
       }},
      {"attack.iterations",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.iterations = static_cast<int>(parse_int(k, v));
       }},
      {"attack.batch_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.batch_size = static_cast<int>(parse_int(k, v));
       }},
      {"attack.checkpoint_every",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.checkpoint_every = static_cast<int>(parse_int(k, v));
       }},
      {"attack.steps_rendered",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.attack.steps_rendered = static_cast<int>(parse_int(k, v));
       }},
      {"attack.max_instances",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.max_instances = static_cast<int>(parse_int(k, v));
       }},
      {"ablate.steps_rendered",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_steps_rendered = parse_list<int>(k, v, [](const std::string& kk, const std::string& vv) {
           return static_cast<int>(parse_int(kk, vv));
         });
       }},
      {"ablate.epsilon",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_epsilon = parse_list<double>(k, v, parse_double);
       }},
      {"ablate.instructions",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_instructions = parse_list<int>(k, v, [](const std::string& kk, const std::string& vv) {
           return static_cast<int>(parse_int(kk, vv));
         });
       }},
      {"ablate.iterations",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_iterations = parse_list<int>(k, v, [](const std::string& kk, const std::string& vv) {
           return static_cast<int>(parse_int(kk, vv));
         });
       }},
      {"ablate.instances",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.ablate_instances = static_cast<int>(parse_int(k, v));
       }},
  };
  return kSetters;
}

}  // namespace

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what);
  };
  if (environments < 1) fail("run.environments", "must be >= 1");
  if (workers < 1) fail("run.workers", "must be >= 1");
  if (world.rooms_x < 1 || world.rooms_y < 1) fail("world.rooms_x", "room grid must be positive");
  if (world.room_size < 4.0) fail("world.room_size", "must be >= 4");
  if (world.objects_per_room < 0) fail("world.objects_per_room", "must be >= 0");
  if (world.atlas_size < 32) fail("world.atlas_size", "must be >= 32");
  if (episodes_per_env < 3) fail("world.episodes_per_env", "must be >= 3");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    fail("world.holdout_fraction", "must lie in (0,1)");
  }
  if (subimage_size < 8 || subimage_size % 4 != 0) {
    fail("world.subimage_size", "must be >= 8 and divisible by 4");
  }
  if (agent_dim < 8) fail("agent.dim", "must be >= 8");
  if (agent_epochs < 1) fail("agent.epochs", "must be >= 1");
  if (agent_lr < 0.0) fail("agent.lr", "must be >= 0");
  if (agent_batch_size < 1) fail("agent.batch_size", "must be >= 1");
  if (max_steps < 2) fail("agent.max_steps", "must be >= 2");
  if (!(attack.epsilon >= 0.0 && attack.epsilon <= 1.0)) {
    fail("attack.epsilon", "epsilon out of range");
  }
  try {
    attack.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config key 'attack.*': ") + e.what());
  }
  if (max_instances < 1) fail("attack.max_instances", "must be >= 1");
  if (ablate_instances < 1) fail("ablate.instances", "must be >= 1");
  for (int s : ablate_steps_rendered) {
    if (s < 1 || s > 3) fail("ablate.steps_rendered", "entries must be 1, 2 or 3");
  }
  for (double e : ablate_epsilon) {
    if (!(e >= 0.0 && e <= 1.0)) fail("ablate.epsilon", "entries out of range");
  }
  for (int i : ablate_instructions) {
    if (i < 1 || i > kInstructionTemplates) fail("ablate.instructions", "entries must be 1..3");
  }
  for (int i : ablate_iterations) {
    if (i < 1 || i % attack.checkpoint_every != 0) {
      fail("ablate.iterations", "entries must be positive multiples of checkpoint_every");
    }
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    auto it = setters().find(full);
    if (it == setters().end()) throw ConfigError("unknown config key '" + full + "'");
    it->second(config, full, value);
  }
  config.validate();
  return config;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

namespace {

std::string serialize_config_impl(const RunConfig& c, bool for_hash) {
  std::ostringstream os;
  os << "[run]\n";
  os << "seed = " << c.seed << "\n";
  os << "environments = " << c.environments << "\n";
  if (!for_hash) {
    os << "out = " << c.out << "\n";
    os << "workers = " << c.workers << "\n";
  }
  os << "\n[world]\n";
  os << "rooms_x = " << c.world.rooms_x << "\n";
  os << "rooms_y = " << c.world.rooms_y << "\n";
  os << "room_size = " << format_double(c.world.room_size) << "\n";
  os << "objects_per_room = " << c.world.objects_per_room << "\n";
  os << "atlas_size = " << c.world.atlas_size << "\n";
  os << "episodes_per_env = " << c.episodes_per_env << "\n";
  os << "holdout_fraction = " << format_double(c.holdout_fraction) << "\n";
  os << "subimage_size = " << c.subimage_size << "\n";
  os << "\n[agent]\n";
  os << "dim = " << c.agent_dim << "\n";
  os << "epochs = " << c.agent_epochs << "\n";
  os << "lr = " << format_double(c.agent_lr) << "\n";
  os << "batch_size = " << c.agent_batch_size << "\n";
  os << "max_steps = " << c.max_steps << "\n";
  os << "\n[attack]\n";
  os << "mode = " << attack_mode_name(c.attack.mode) << "\n";
  os << "epsilon = " << format_double(c.attack.epsilon) << "\n";
  os << "lr = " << format_double(c.attack.lr) << "\n";
  os << "beta1 = " << format_double(c.attack.beta1) << "\n";
  os << "beta2 = " << format_double(c.attack.beta2) << "\n";
  os << "iterations = " << c.attack.iterations << "\n";
  os << "batch_size = " << c.attack.batch_size << "\n";
  os << "checkpoint_every = " << c.attack.checkpoint_every << "\n";
  os << "steps_rendered = " << c.attack.steps_rendered << "\n";
  os << "max_instances = " << c.max_instances << "\n";
  os << "\n[ablate]\n";
  os << "steps_rendered = " << join_ints(c.ablate_steps_rendered) << "\n";
  os << "epsilon = " << join_doubles(c.ablate_epsilon) << "\n";
  os << "instructions = " << join_ints(c.ablate_instructions) << "\n";
  os << "iterations = " << join_ints(c.ablate_iterations) << "\n";
  os << "instances = " << c.ablate_instances << "\n";
  return os.str();
}

}  // namespace

std::string serialize_config(const RunConfig& config) {
  return serialize_config_impl(config, false);
}

std::string config_hash(const RunConfig& config) {
  const uint64_t h = fnv1a64(serialize_config_impl(config, true));
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void apply_env_overrides(RunConfig& config) {
  for (const auto& [full, setter] : setters()) {
    std::string env_name = "VHL_";
    for (char ch : full) {
      env_name += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    const char* value = std::getenv(env_name.c_str());
    if (value != nullptr) setter(config, full, value);
  }
  config.validate();
}

}  // namespace vhl
