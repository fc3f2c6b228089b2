#include "navgrpo/grpo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>

#include <json.hpp>

#include "navgrpo/common/errors.hpp"
#include "navgrpo/diffcore/checkpoint.hpp"
#include "navgrpo/env/sensing.hpp"

namespace navgrpo::grpo {

namespace fs = std::filesystem;
using diff::Tensor;
using diff::Var;

namespace {

struct BatchInputs {
  Tensor features;
  std::vector<const ddpm::ChainRecord*> records;
  std::vector<std::size_t> obs_index;
};

BatchInputs gather(const ddpm::DiffusionPolicy& policy,
                   std::span<const BufferEntry* const> entries) {
  BatchInputs in;
  std::vector<const ddpm::Observation*> obs;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    obs.push_back(&entries[e]->obs);
    for (const auto& rec : entries[e]->records) {
      in.records.push_back(&rec);
      in.obs_index.push_back(e);
    }
  }
  in.features = policy.network().features(obs);
  return in;
}

// Sum over steps of |m - ref|^2 / (2 sigma_k^2), averaged over records.
double mean_step_kl(const ddpm::DiffusionPolicy& policy, const Tensor& means,
                    const std::function<std::span<const double>(std::size_t, int)>& ref,
                    std::size_t records, int last_k) {
  if (records == 0) return 0.0;
  const std::size_t d = policy.dim();
  double total = 0.0;
  for (std::size_t r = 0; r < records; ++r) {
    for (int j = 0; j < last_k; ++j) {
      const int k = last_k - j;
      const double var = policy.schedule().sigma[k] * policy.schedule().sigma[k];
      const auto m = means.row_span(r * last_k + j);
      const auto q = ref(r, k);
      double ss = 0.0;
      for (std::size_t i = 0; i < d; ++i) ss += (m[i] - q[i]) * (m[i] - q[i]);
      total += ss / (2.0 * var);
    }
  }
  return total / static_cast<double>(records);
}

bool grads_finite(const diff::Gradients& g) {
  return std::all_of(g.begin(), g.end(), [](const auto& kv) { return kv.second.all_finite(); });
}

// Copies trainable flags from `like` onto `store`.
void copy_flags(diff::ParamStore& store, const diff::ParamStore& like) {
  for (auto& p : store) p.trainable = like.at(p.name).trainable;
}

class CollectingPlanner : public env::Planner {
 public:
  CollectingPlanner(env::DiffusionPlanner& inner, ReplayBuffer& buffer, BufferEntry proto)
      : inner_(inner), buffer_(buffer), proto_(std::move(proto)) {}

  ddpm::Trajectory plan(const env::PlanContext& ctx, Rng& rng) override {
    ddpm::Trajectory t = inner_.plan(ctx, rng);
    BufferEntry e = proto_;
    e.obs = ctx.obs;
    e.step = ctx.step;
    for (const auto& c : inner_.last_candidates()) e.records.push_back(c.record);
    e.rewards = inner_.last_rewards();
    for (const auto& r : e.rewards) reward_sum += r.total;
    candidates += e.rewards.size();
    buffer_.add(e);
    ++stored;
    return t;
  }

  std::size_t stored = 0;
  std::size_t candidates = 0;
  double reward_sum = 0.0;

 private:
  env::DiffusionPlanner& inner_;
  ReplayBuffer& buffer_;
  BufferEntry proto_;
};

}  // namespace

double kl_diagnostic(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                     const diff::ParamStore& reference, std::span<const BufferEntry> entries,
                     int last_k) {
  std::vector<const BufferEntry*> ptrs;
  for (const auto& e : entries) ptrs.push_back(&e);
  const BatchInputs in = gather(policy, ptrs);
  if (in.records.empty()) return 0.0;
  const Tensor m = policy.chain_means(params, in.features, in.records, in.obs_index, last_k);
  const Tensor q = policy.chain_means(reference, in.features, in.records, in.obs_index, last_k);
  return mean_step_kl(
      policy, m,
      [&](std::size_t r, int k) { return q.row_span(r * last_k + (last_k - k)); },
      in.records.size(), last_k);
}

double kl_to_cached(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                    std::span<const BufferEntry* const> entries, int last_k) {
  const BatchInputs in = gather(policy, entries);
  if (in.records.empty()) return 0.0;
  const Tensor m = policy.chain_means(params, in.features, in.records, in.obs_index, last_k);
  return mean_step_kl(
      policy, m, [&](std::size_t r, int k) { return in.records[r]->mean(k); }, in.records.size(),
      last_k);
}

CollectStats collect_iteration(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                               const GrpoConfig& cfg, const CollectSetup& setup,
                               ReplayBuffer& buffer) {
  if (setup.window.empty()) throw UsageError("collection needs at least one scene");
  CollectStats stats;
  env::DiffusionPlanner inner(policy, params, cfg.group, setup.reward);
  double candidate_sum = 0.0;
  std::size_t candidate_n = 0;
  double executed_sum = 0.0;
  std::size_t executed_n = 0;
  for (int e = 0; e < setup.episodes; ++e) {
    const env::Scene& scene = setup.window[static_cast<std::size_t>(e) % setup.window.size()];
    Rng rng(derive_seed(setup.seed, {static_cast<std::uint64_t>(e)}));
    const int task = rng.uniform_int(0, static_cast<int>(scene.tasks.size()) - 1);
    BufferEntry proto;
    proto.scene_seed = scene.seed;
    proto.task = task;
    proto.episode = setup.first_episode_id + static_cast<std::uint64_t>(e);
    proto.version = setup.version;
    CollectingPlanner planner(inner, buffer, proto);
    env::EpisodeResult res;
    try {
      res = env::run_episode(planner, scene, scene.tasks[static_cast<std::size_t>(task)],
                             setup.env, setup.reward, rng);
    } catch (const IoError& err) {
      throw IoError("buffer write failed after " + std::to_string(stats.entries + planner.stored) +
                    " entries (" + std::to_string(stats.episodes) +
                    " complete episodes): " + err.what());
    }
    ++stats.episodes;
    stats.entries += planner.stored;
    stats.successes += res.success ? 1 : 0;
    stats.collisions += res.cause == env::Termination::Collision ? 1 : 0;
    candidate_sum += planner.reward_sum;
    candidate_n += planner.candidates;
    for (double r : res.step_rewards) executed_sum += r;
    executed_n += res.step_rewards.size();
  }
  if (candidate_n) stats.mean_reward = candidate_sum / static_cast<double>(candidate_n);
  if (executed_n) stats.mean_executed = executed_sum / static_cast<double>(executed_n);
  return stats;
}

BatchEval evaluate_batch(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                         std::span<const BufferEntry* const> entries, const GrpoConfig& cfg) {
  const BatchInputs in = gather(policy, entries);
  BatchEval out;
  for (const auto* e : entries) {
    const auto totals = e->totals();
    const auto g = group_advantages(totals, cfg.adv_eps, cfg.normalize_advantages);
    out.advantages.insert(out.advantages.end(), g.advantages.begin(), g.advantages.end());
  }
  Tensor old({in.records.size(), 1});
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    old[i] = in.records[i]->cached_log_prob(cfg.last_k);
  }
  diff::Tape tape;
  Var lp = policy.chain_log_probs(tape, params, in.features, in.records, in.obs_index, cfg.last_k);
  Var log_ratio = diff::ops::sub(lp, tape.constant(std::move(old)));
  Var loss = grpo_loss(log_ratio, out.advantages, cfg.clip, cfg.clip_objective);
  out.loss = loss.value()[0];
  out.log_ratios = log_ratio.value().to_vector();
  out.grads = tape.backward(loss);
  return out;
}

std::vector<BatchMetrics> update_epoch(const ddpm::DiffusionPolicy& policy,
                                       diff::ParamStore& params, diff::Adam& optimizer,
                                       const ReplayBuffer& buffer, const GrpoConfig& cfg,
                                       const UpdateContext& ctx) {
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(ctx.shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  const std::size_t groups_per_batch =
      std::max<std::size_t>(1, static_cast<std::size_t>(cfg.minibatch) / cfg.group);
  std::vector<BatchMetrics> out;
  int consecutive_skips = 0;
  for (std::size_t start = 0; start < order.size(); start += groups_per_batch) {
    const std::size_t stop = std::min(order.size(), start + groups_per_batch);
    std::vector<BufferEntry> entries;
    for (std::size_t i = start; i < stop; ++i) entries.push_back(buffer.load(order[i]));
    std::vector<const BufferEntry*> ptrs;
    for (const auto& e : entries) ptrs.push_back(&e);

    BatchMetrics m;
    m.iteration = ctx.iteration;
    m.epoch = ctx.epoch;
    m.batch = static_cast<int>(out.size());
    m.kl = kl_to_cached(policy, params, ptrs, cfg.last_k);
    const BatchEval ev = evaluate_batch(policy, params, ptrs, cfg);
    m.loss = ev.loss;
    double ratio_sum = 0.0;
    std::size_t clipped = 0;
    for (double lr : ev.log_ratios) {
      const double r = std::exp(lr);
      ratio_sum += r;
      if (r < 1.0 - cfg.clip || r > 1.0 + cfg.clip) ++clipped;
    }
    const double n = static_cast<double>(ev.log_ratios.size());
    m.mean_ratio = ratio_sum / n;
    m.clip_fraction = static_cast<double>(clipped) / n;
    m.mean_adv = std::accumulate(ev.advantages.begin(), ev.advantages.end(), 0.0) / n;
    m.max_adv = *std::max_element(ev.advantages.begin(), ev.advantages.end());

    if (!std::isfinite(ev.loss) || !grads_finite(ev.grads)) {
      m.skipped = true;
      if (ctx.on_batch) ctx.on_batch(m);
      out.push_back(m);
      if (++consecutive_skips >= cfg.max_skips) {
        throw TrainingAborted("non-finite loss in " + std::to_string(consecutive_skips) +
                              " consecutive batches (iteration " + std::to_string(ctx.iteration) +
                              ", epoch " + std::to_string(ctx.epoch) + ", batch " +
                              std::to_string(m.batch) + ", loss " + std::to_string(ev.loss) +
                              ", mean ratio " + std::to_string(m.mean_ratio) + ")");
      }
      continue;
    }
    consecutive_skips = 0;
    optimizer.step(params, ev.grads, cfg.lr);
    if (ctx.on_batch) ctx.on_batch(m);
    out.push_back(m);
  }
  return out;
}

ProbeSet make_probe_set(std::span<const env::Scene> scenes, const env::EnvConfig& env, int count,
                        std::uint64_t seed) {
  if (scenes.empty()) throw UsageError("probe set needs at least one scene");
  ProbeSet probe;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    const env::Scene& scene = scenes[static_cast<std::size_t>(i) % scenes.size()];
    const auto& task =
        scene.tasks[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(scene.tasks.size()) - 1))];
    env::FrameHistory history(env.frames);
    probe.observations.push_back(history.push(env::observe(scene, task.start, task.goal, env)));
  }
  return probe;
}

double probe_reward(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
                    const ProbeSet& probe, std::size_t group, const reward::RewardConfig& reward,
                    std::uint64_t seed) {
  if (probe.observations.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probe.observations.size(); ++i) {
    const auto& obs = probe.observations[i];
    Rng rng(derive_seed(seed, {i}));
    const auto cands = policy.sample(params, obs, group, rng);
    const auto occ = reward::build_local_occupancy(obs, reward.inflation_radius);
    double s = 0.0;
    for (const auto& c : cands) s += reward::score(c.trajectory, occ, obs.goal, reward).total;
    total += s / static_cast<double>(cands.size());
  }
  return total / static_cast<double>(probe.observations.size());
}

std::size_t select_checkpoint(std::span<const double> rewards, int window) {
  if (rewards.empty()) throw UsageError("select_checkpoint needs at least one checkpoint");
  if (window < 1) throw UsageError("selection window must be positive");
  std::size_t best = 0;
  double best_avg = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window) ? i + 1 - window : 0;
    double s = 0.0;
    for (std::size_t j = lo; j <= i; ++j) s += rewards[j];
    const double avg = s / static_cast<double>(i - lo + 1);
    if (avg >= best_avg) {
      best_avg = avg;
      best = i;
    }
  }
  return best;
}

std::string summary_to_json(const IterationSummary& s) {
  nlohmann::json j;
  j["iteration"] = s.iteration;
  j["window_seeds"] = s.window_seeds;
  j["episodes"] = s.collect.episodes;
  j["entries"] = s.collect.entries;
  j["successes"] = s.collect.successes;
  j["collisions"] = s.collect.collisions;
  j["collect_mean_reward"] = s.collect.mean_reward;
  j["collect_mean_executed"] = s.collect.mean_executed;
  j["buffer_entries"] = s.buffer_entries;
  j["buffer_episodes"] = s.buffer_episodes;
  j["batches"] = s.batches;
  j["skipped"] = s.skipped;
  j["mean_loss"] = s.mean_loss;
  j["mean_kl"] = s.mean_kl;
  j["epoch_probes"] = s.epoch_probes;
  j["selected"] = s.selected;
  j["selected_score"] = s.selected_score;
  j["seconds"] = s.seconds;
  return j.dump();
}

IterationSummary summary_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  IterationSummary s;
  s.iteration = j.at("iteration");
  s.window_seeds = j.at("window_seeds").get<std::vector<std::uint64_t>>();
  s.collect.episodes = j.at("episodes");
  s.collect.entries = j.at("entries");
  s.collect.successes = j.at("successes");
  s.collect.collisions = j.at("collisions");
  s.collect.mean_reward = j.at("collect_mean_reward");
  s.collect.mean_executed = j.at("collect_mean_executed");
  s.buffer_entries = j.at("buffer_entries");
  s.buffer_episodes = j.at("buffer_episodes");
  s.batches = j.at("batches");
  s.skipped = j.at("skipped");
  s.mean_loss = j.at("mean_loss");
  s.mean_kl = j.at("mean_kl");
  s.epoch_probes = j.at("epoch_probes").get<std::vector<double>>();
  s.selected = j.at("selected");
  s.selected_score = j.at("selected_score");
  s.seconds = j.at("seconds");
  return s;
}

namespace {

constexpr char kResumeMagic[8] = {'N', 'G', 'R', 'E', 'S', 'U', 'M', '1'};

struct RunState {
  int completed = 0;
  std::vector<diff::ParamStore> history;
  std::vector<double> scores;
  std::size_t current = 0;  // index into history of the collection policy
  std::vector<IterationSummary> summaries;
};

void save_state(const std::string& path, const RunState& st, std::uint64_t config_hash) {
  ByteWriter w;
  for (char c : kResumeMagic) w.put<char>(c);
  w.put<std::uint64_t>(config_hash);
  w.put<std::int32_t>(st.completed);
  w.put<std::uint64_t>(st.current);
  w.put_doubles(st.scores);
  w.put<std::uint64_t>(st.history.size());
  for (const auto& p : st.history) {
    diff::Checkpoint ck;
    ck.params = p;
    w.put_bytes(diff::encode_checkpoint(ck));
  }
  w.put<std::uint64_t>(st.summaries.size());
  for (const auto& s : st.summaries) w.put_string(summary_to_json(s));
  w.put<std::uint64_t>(fnv1a(w.bytes()));
  write_file_atomic(path, w.bytes());
}

RunState load_state(const std::string& path, std::uint64_t config_hash) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16) throw IoError("resume state too short: " + path);
  const std::span<const std::uint8_t> all(bytes);
  ByteReader tail(all.last(8));
  if (tail.get<std::uint64_t>() != fnv1a(all.first(all.size() - 8))) {
    throw IoError("resume state checksum mismatch: " + path);
  }
  ByteReader r(all.first(all.size() - 8));
  for (char c : kResumeMagic) {
    if (r.get<char>() != c) throw IoError("not a resume state file: " + path);
  }
  if (r.get<std::uint64_t>() != config_hash) {
    throw ConfigError("resume state was written by a different configuration: " + path);
  }
  RunState st;
  st.completed = r.get<std::int32_t>();
  st.current = r.get<std::uint64_t>();
  st.scores = r.get_doubles();
  const auto n = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto blob = r.get_bytes();
    st.history.push_back(diff::decode_checkpoint(blob).params);
  }
  const auto ns = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < ns; ++i) st.summaries.push_back(summary_from_json(r.get_string()));
  if (st.history.size() != st.scores.size() || st.current >= st.history.size()) {
    throw IoError("inconsistent resume state: " + path);
  }
  return st;
}

}  // namespace

FinetuneResult finetune(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& initial,
                        std::span<const env::Scene> pool, const env::EnvConfig& env,
                        const reward::RewardConfig& reward, const GrpoConfig& cfg,
                        const FinetuneHooks& hooks) {
  const int blocks = static_cast<int>(policy.network().config().blocks);
  cfg.validate(blocks, policy.schedule().steps);
  if (pool.empty()) throw ConfigError("fine-tuning needs at least one training scene");
  if (hooks.work_dir.empty()) throw ConfigError("fine-tuning needs a work directory");
  const ParamPartition partition{blocks, cfg.trainable_blocks};
  const ProbeSet probe = make_probe_set(pool, env, cfg.probe_tasks, cfg.probe_seed);
  const auto probe_score = [&](const diff::ParamStore& p) {
    return probe_reward(policy, p, probe, cfg.group, reward, cfg.probe_seed);
  };

  fs::create_directories(hooks.work_dir);
  const std::string state_path = (fs::path(hooks.work_dir) / "resume.bin").string();
  RunState st;
  if (hooks.resume && fs::exists(state_path)) {
    st = load_state(state_path, hooks.config_hash);
  } else {
    diff::ParamStore start = initial;
    partition.apply(start);
    st.scores.push_back(probe_score(start));
    st.history.push_back(std::move(start));
  }

  ReplayBuffer buffer((fs::path(hooks.work_dir) / "buffer").string(), cfg.buffer_capacity,
                      hooks.config_hash);
  buffer.clear();
  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(cfg.window), pool.size());
  int ran = 0;
  for (int m = st.completed; m < cfg.iterations; ++m) {
    if (hooks.stop_after && ran >= *hooks.stop_after) break;
    const auto t0 = std::chrono::steady_clock::now();
    IterationSummary sum;
    sum.iteration = m;

    std::vector<env::Scene> scenes;
    for (std::size_t j = 0; j < window; ++j) {
      const std::size_t idx = (static_cast<std::size_t>(m) * cfg.window_stride + j) % pool.size();
      scenes.push_back(pool[idx]);
      sum.window_seeds.push_back(pool[idx].seed);
    }

    const diff::ParamStore& old = st.history[st.current];
    CollectSetup setup{scenes, env, reward, cfg.episodes, static_cast<std::uint32_t>(m),
                       static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(cfg.episodes),
                       derive_seed(cfg.seed, {1, static_cast<std::uint64_t>(m)})};
    sum.collect = collect_iteration(policy, old, cfg, setup, buffer);
    buffer.write_manifest();
    sum.buffer_entries = buffer.size();
    sum.buffer_episodes = buffer.episodes();

    diff::ParamStore theta = old;
    diff::Adam optimizer;
    double loss_sum = 0.0;
    double kl_sum = 0.0;
    for (int e = 0; e < cfg.epochs; ++e) {
      UpdateContext ctx{m, e,
                        derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(m),
                                               static_cast<std::uint64_t>(e)}),
                        hooks.on_batch};
      for (const auto& b : update_epoch(policy, theta, optimizer, buffer, cfg, ctx)) {
        ++sum.batches;
        if (b.skipped) {
          ++sum.skipped;
          continue;
        }
        loss_sum += b.loss;
        kl_sum += b.kl;
      }
      const double score = probe_score(theta);
      sum.epoch_probes.push_back(score);
      st.scores.push_back(score);
      st.history.push_back(theta);
    }
    const int used = sum.batches - sum.skipped;
    if (used > 0) {
      sum.mean_loss = loss_sum / used;
      sum.mean_kl = kl_sum / used;
    }
    st.current = select_checkpoint(st.scores, cfg.select_window);
    sum.selected = st.current;
    sum.selected_score = st.scores[st.current];
    if (!(hooks.keep_final_buffer && m + 1 == cfg.iterations)) buffer.clear();
    sum.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    st.completed = m + 1;
    st.summaries.push_back(sum);
    save_state(state_path, st, hooks.config_hash);
    if (hooks.on_iteration) hooks.on_iteration(sum, st.history[st.current]);
    ++ran;
  }

  FinetuneResult res;
  res.params = st.history[st.current];
  copy_flags(res.params, initial);
  res.probe_history = st.scores;
  res.selected = st.current;
  res.iterations = st.summaries;
  res.completed = st.completed;
  return res;
}

}  // namespace navgrpo::grpo
