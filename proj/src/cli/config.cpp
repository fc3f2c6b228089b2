#include "navgrpo/cli/config.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"

namespace navgrpo::cli {

using nlohmann::json;

namespace {

// One traversal of the config tree drives both serialization directions.
class Writer {
 public:
  explicit Writer(json& out) : out_(out) {}
  template <typename T>
  void field(const char* key, const T& value) {
    out_[key] = value;
  }
  template <typename F>
  void section(const char* key, F&& body) {
    Writer sub(out_[key] = json::object());
    body(sub);
  }

 private:
  json& out_;
};

class Reader {
 public:
  Reader(const json& in, std::string path) : in_(in), path_(std::move(path)) {
    if (!in_.is_object()) throw ConfigError("config section '" + name() + "' must be an object");
  }
  template <typename T>
  void field(const char* key, T& value) {
    used_.insert(key);
    const auto it = in_.find(key);
    if (it == in_.end()) return;
    try {
      value = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + path_ + key + "' has the wrong type");
    }
  }
  template <typename F>
  void section(const char* key, F&& body) {
    used_.insert(key);
    const auto it = in_.find(key);
    if (it == in_.end()) return;
    Reader sub(*it, path_ + key + ".");
    body(sub);
    sub.finish();
  }
  void finish() const {
    for (const auto& [k, v] : in_.items()) {
      if (!used_.count(k)) throw ConfigError("unknown config key '" + path_ + k + "'");
    }
  }

 private:
  std::string name() const { return path_.empty() ? "<root>" : path_.substr(0, path_.size() - 1); }

  const json& in_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename V, typename C>
void visit_model(V& v, C& c) {
  v.section("schedule", [&](auto& s) {
    s.field("steps", c.schedule.steps);
    s.field("beta_min", c.schedule.beta_min);
    s.field("beta_max", c.schedule.beta_max);
  });
  v.section("network", [&](auto& s) {
    auto& n = c.network;
    s.field("horizon", n.horizon);
    s.field("patch_width", n.patch_width);
    s.field("frames", n.frames);
    s.field("encoder_hidden", n.encoder_hidden);
    s.field("cond_dim", n.cond_dim);
    s.field("step_embed_dim", n.step_embed_dim);
    s.field("width", n.width);
    s.field("ffn", n.ffn);
    s.field("blocks", n.blocks);
    s.field("goal_scale", n.goal_scale);
    s.field("goal_clip", n.goal_clip);
    s.field("head_init_scale", n.head_init_scale);
  });
  v.field("traj_scale", c.traj_scale);
}

template <typename V, typename C>
void visit(V& v, C& c) {
  v.field("seed", c.seed);
  visit_model(v, c);
  v.section("env", [&](auto& s) {
    auto& e = c.env;
    s.field("arena_cells", e.arena_cells);
    s.field("cell_size", e.cell_size);
    s.field("sensor_range", e.sensor_range);
    s.section("patch", [&](auto& p) {
      p.field("width", e.patch.width);
      p.field("resolution", e.patch.resolution);
      p.field("x_min", e.patch.x_min);
      p.field("y_min", e.patch.y_min);
    });
    s.field("frames", e.frames);
    s.field("success_radius", e.success_radius);
    s.field("n_exec", e.n_exec);
    s.field("max_steps", e.max_steps);
    s.field("robot_radius", e.robot_radius);
    s.field("tasks_per_scene", e.tasks_per_scene);
    s.field("min_task_distance", e.min_task_distance);
    s.field("max_task_distance", e.max_task_distance);
    s.field("obstacle_override", e.obstacle_override);
  });
  v.section("reward", [&](auto& s) {
    auto& r = c.reward;
    s.section("weights", [&](auto& w) {
      w.field("success", r.weights.success);
      w.field("progress", r.weights.progress);
      w.field("collision", r.weights.collision);
      w.field("inflated", r.weights.inflated);
      w.field("distance", r.weights.distance);
      w.field("smoothness", r.weights.smoothness);
      w.field("zigzag", r.weights.zigzag);
    });
    s.field("success_threshold", r.success_threshold);
    s.field("inflation_radius", r.inflation_radius);
    s.field("outside_is_free", r.outside_is_free);
  });
  v.section("expert", [&](auto& s) {
    s.field("horizon", c.expert.horizon);
    s.field("spacing", c.expert.spacing);
    s.field("clearance", c.expert.clearance);
  });
  v.section("demos", [&](auto& s) {
    s.field("budget", c.demos.budget);
    s.field("perturb_prob", c.demos.perturb_prob);
    s.field("perturb_std", c.demos.perturb_std);
    s.field("seed", c.demos.seed);
  });
  v.section("pretrain", [&](auto& s) {
    auto& p = c.pretrain;
    s.field("epochs", p.epochs);
    s.field("batch", p.batch);
    s.field("lr", p.lr);
    s.field("final_lr_fraction", p.final_lr_fraction);
    s.field("stratify_steps", p.stratify_steps);
    s.field("holdout_fraction", p.holdout_fraction);
    s.field("holdout_draws", p.holdout_draws);
    s.field("seed", p.seed);
  });
  v.section("grpo", [&](auto& s) {
    auto& g = c.grpo;
    s.field("group", g.group);
    s.field("adv_eps", g.adv_eps);
    s.field("clip", g.clip);
    s.field("kl_coef", g.kl_coef);
    s.field("last_k", g.last_k);
    s.field("iterations", g.iterations);
    s.field("episodes", g.episodes);
    s.field("window", g.window);
    s.field("window_stride", g.window_stride);
    s.field("buffer_capacity", g.buffer_capacity);
    s.field("epochs", g.epochs);
    s.field("minibatch", g.minibatch);
    s.field("lr", g.lr);
    s.field("select_window", g.select_window);
    s.field("trainable_blocks", g.trainable_blocks);
    s.field("clip_objective", g.clip_objective);
    s.field("normalize_advantages", g.normalize_advantages);
    s.field("probe_tasks", g.probe_tasks);
    s.field("probe_seed", g.probe_seed);
    s.field("max_skips", g.max_skips);
    s.field("seed", g.seed);
  });
  v.section("scenes", [&](auto& s) {
    s.section("seen", [&](auto& x) {
      x.field("first_seed", c.scenes.seen.first_seed);
      x.field("count", c.scenes.seen.count);
    });
    s.section("unseen", [&](auto& x) {
      x.field("first_seed", c.scenes.unseen.first_seed);
      x.field("count", c.scenes.unseen.count);
    });
    s.field("difficulty_cycle", c.scenes.difficulty_cycle);
  });
  v.section("eval", [&](auto& s) {
    s.field("seeds", c.eval.seeds);
    s.field("group", c.eval.group);
    s.field("deterministic", c.eval.deterministic);
    s.field("workers", c.eval.workers);
  });
}

std::vector<env::Scene> make_scenes(const SceneSet& set, const std::vector<std::string>& cycle,
                                    const env::EnvConfig& env) {
  std::vector<env::Scene> out;
  for (int i = 0; i < set.count; ++i) {
    const auto d = env::parse_difficulty(cycle[static_cast<std::size_t>(i) % cycle.size()]);
    out.push_back(env::generate_scene(set.first_seed + static_cast<std::uint64_t>(i), d, env));
  }
  return out;
}

}  // namespace

bc::PretrainConfig RunConfig::default_pretrain() {
  bc::PretrainConfig p;
  p.epochs = 100;
  p.lr = 1e-3;
  p.final_lr_fraction = 0.05;
  return p;
}

std::string RunConfig::to_json_text() const {
  json j = json::object();
  Writer w(j);
  visit(w, *this);
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Reader r(j, "");
  visit(r, c);
  r.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  const auto bytes = read_file(path);
  return from_json_text(std::string(bytes.begin(), bytes.end()));
}

void RunConfig::save(const std::string& path) const {
  const std::string text = to_json_text() + "\n";
  write_file_atomic(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t RunConfig::config_hash() const {
  RunConfig canonical = *this;
  canonical.eval.workers = 0;  // scheduling only
  json j = json::object();
  Writer w(j);
  visit(w, canonical);
  return fnv1a(j.dump());
}

std::uint64_t RunConfig::model_hash() const {
  json j = json::object();
  Writer w(j);
  visit_model(w, *this);
  return fnv1a(j.dump());
}

void RunConfig::validate() const {
  if (schedule.steps < 1) throw ConfigError("schedule.steps must be positive");
  if (network.horizon < 2) throw ConfigError("network.horizon must be at least 2");
  if (static_cast<int>(network.patch_width) != env.patch.width) {
    throw ConfigError("network.patch_width must equal env.patch.width");
  }
  if (static_cast<int>(network.frames) != env.frames) {
    throw ConfigError("network.frames must equal env.frames");
  }
  if (expert.horizon != static_cast<int>(network.horizon)) {
    throw ConfigError("expert.horizon must equal network.horizon");
  }
  if (!(traj_scale > 0)) throw ConfigError("traj_scale must be positive");
  if (env.n_exec < 1 || env.n_exec > static_cast<int>(network.horizon)) {
    throw ConfigError("env.n_exec must lie in 1..horizon");
  }
  if (scenes.difficulty_cycle.empty()) throw ConfigError("scenes.difficulty_cycle is empty");
  for (const auto& d : scenes.difficulty_cycle) env::parse_difficulty(d);
  if (scenes.seen.count < 0 || scenes.unseen.count < 0) throw ConfigError("scene counts must be >= 0");
  if (eval.seeds.empty()) throw ConfigError("eval.seeds is empty");
  if (eval.group < 1) throw ConfigError("eval.group must be positive");
  grpo.validate(static_cast<int>(network.blocks), schedule.steps);
}

ddpm::DiffusionPolicy RunConfig::make_policy() const {
  return ddpm::DiffusionPolicy(
      ddpm::DdpmSchedule::linear(schedule.steps, schedule.beta_min, schedule.beta_max), network,
      traj_scale);
}

std::vector<env::Scene> RunConfig::seen_scenes() const {
  return make_scenes(scenes.seen, scenes.difficulty_cycle, env);
}

std::vector<env::Scene> RunConfig::unseen_scenes() const {
  return make_scenes(scenes.unseen, scenes.difficulty_cycle, env);
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace navgrpo::cli
