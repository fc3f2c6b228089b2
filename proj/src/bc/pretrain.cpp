#include "navgrpo/bc/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "navgrpo/common/binary_io.hpp"
#include "navgrpo/common/errors.hpp"
#include "navgrpo/env/sensing.hpp"

namespace navgrpo::bc {

using diff::Tensor;
using diff::Var;
namespace ops = diff::ops;

namespace {

constexpr char kDemoMagic[8] = {'N', 'G', 'D', 'E', 'M', 'O', '0', '1'};

ddpm::Trajectory perturb(const ddpm::Trajectory& t, double std_dev, Rng& rng) {
  // Smooth lateral bend that grows along the horizon.
  const double bend = rng.normal() * std_dev;
  ddpm::Trajectory out = t;
  const double n = static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i].y += bend * (i + 1) / n;
  return out;
}

}  // namespace

std::vector<Demonstration> collect_demonstrations(std::span<const env::Scene> scenes,
                                                  const env::EnvConfig& env,
                                                  const ExpertConfig& expert,
                                                  const DemoConfig& config) {
  if (scenes.empty() || config.budget <= 0) throw ConfigError("no scenes or demo budget");
  std::vector<Demonstration> demos;
  Rng rng(derive_seed(config.seed, {0xde40}));
  for (int round = 0; static_cast<int>(demos.size()) < config.budget; ++round) {
    const std::size_t before = demos.size();
    for (const auto& scene : scenes) {
      for (std::size_t ti = 0; ti < scene.tasks.size(); ++ti) {
        if (static_cast<int>(demos.size()) >= config.budget) return demos;
        const auto& task = scene.tasks[ti];
        env::RobotState state{task.start, 0.0};
        if (round > 0) state.pose.heading += rng.uniform(-0.5, 0.5);
        env::FrameHistory history(env.frames);
        for (int step = 0; step < env.max_steps; ++step) {
          if (distance(state.pose.position, task.goal) < env.success_radius) break;
          if (static_cast<int>(demos.size()) >= config.budget) break;
          auto obs = history.push(env::observe(scene, state.pose, task.goal, env));
          auto traj = expert_trajectory(scene, state.pose, task.goal, expert);
          const bool bend = round > 0 && rng.uniform() < config.perturb_prob;
          const auto exec = bend ? perturb(traj, config.perturb_std, rng) : traj;
          demos.push_back({std::move(obs), std::move(traj), scene.seed, static_cast<int>(ti)});
          const auto motion = env::execute_waypoints(scene, state, exec, env.n_exec, task.goal, env);
          state = motion.state;
          if (motion.collided || motion.reached_goal) break;
        }
      }
    }
    if (demos.size() == before) throw GenerationError("expert rollouts produced no states");
  }
  return demos;
}

void save_demonstrations(const std::string& path, std::span<const Demonstration> demos) {
  ByteWriter w;
  for (char c : kDemoMagic) w.put<char>(c);
  w.put<std::uint64_t>(demos.size());
  for (const auto& d : demos) {
    w.put<std::uint64_t>(d.scene_seed);
    w.put<std::int32_t>(d.task);
    d.obs.write(w);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(d.traj.size()));
    for (const auto& p : d.traj.waypoints) {
      w.put<double>(p.x);
      w.put<double>(p.y);
    }
  }
  w.put<std::uint64_t>(fnv1a(w.bytes()));
  write_file_atomic(path, w.bytes());
}

std::vector<Demonstration> load_demonstrations(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 16) throw IoError("demo file too short: " + path);
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 8);
  ByteReader tail(std::span<const std::uint8_t>(bytes.data() + body.size(), 8));
  if (tail.get<std::uint64_t>() != fnv1a(body)) throw IoError("demo file checksum mismatch: " + path);
  ByteReader r(body);
  for (char c : kDemoMagic) {
    if (r.get<char>() != c) throw IoError("not a demonstration file: " + path);
  }
  std::vector<Demonstration> demos(r.get<std::uint64_t>());
  for (auto& d : demos) {
    d.scene_seed = r.get<std::uint64_t>();
    d.task = r.get<std::int32_t>();
    d.obs = ddpm::Observation::read(r);
    d.traj.waypoints.resize(r.get<std::uint32_t>());
    for (auto& p : d.traj.waypoints) {
      p.x = r.get<double>();
      p.y = r.get<double>();
    }
  }
  if (!r.at_end()) throw IoError("trailing bytes in demo file: " + path);
  return demos;
}

double bc_loss(const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
               const Demonstration& demo, int k, std::span<const double> noise) {
  const auto tau_k = policy.q_sample(policy.normalize(demo.traj), k, noise);
  const auto eps = policy.predict_noise(params, tau_k, k, demo.obs);
  double s = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) s += (eps[i] - noise[i]) * (eps[i] - noise[i]);
  return s / static_cast<double>(eps.size());
}

Var bc_loss(diff::Tape& tape, const ddpm::DiffusionPolicy& policy, const diff::ParamStore& params,
            std::span<const Demonstration* const> batch, std::span<const int> steps,
            const Tensor& noise) {
  const std::size_t n = batch.size();
  const std::size_t d = policy.dim();
  if (steps.size() != n || noise.rows() != n || noise.cols() != d) {
    throw UsageError("bc_loss: batch, steps and noise disagree");
  }
  std::vector<const ddpm::Observation*> obs;
  Tensor tau = Tensor::matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    obs.push_back(&batch[i]->obs);
    const auto x0 = policy.normalize(batch[i]->traj);
    const auto xk = policy.q_sample(x0, steps[i], noise.row_span(i));
    std::copy(xk.begin(), xk.end(), tau.row_span(i).begin());
  }
  const auto& net = policy.network();
  Var emb = net.encode(tape, params, net.features(obs));
  Var eps = net.predict(tape, params, emb, tau, steps);
  return ops::mean(ops::square(ops::sub(eps, tape.constant(noise))));
}

PretrainResult pretrain(const ddpm::DiffusionPolicy& policy, diff::ParamStore params,
                        std::span<const Demonstration> demos, const PretrainConfig& config,
                        const std::function<void(const EpochStats&)>& on_epoch) {
  if (demos.size() < 2 || config.batch < 1 || config.epochs < 0) {
    throw ConfigError("pretrain: need >= 2 demos, positive batch");
  }
  params.set_all_trainable(true);
  Rng rng(derive_seed(config.seed, {0xbc}));
  const int steps_k = policy.schedule().steps;
  const std::size_t d = policy.dim();

  std::vector<std::size_t> order(demos.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const auto n_hold = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::round(config.holdout_fraction * demos.size())), 1,
      demos.size() - 1);
  const std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<long>(n_hold));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(n_hold), order.end());

  // Fixed evaluation draws so held-out losses are comparable across epochs.
  struct Draw {
    std::size_t demo;
    int k;
    std::vector<double> noise;
  };
  std::vector<Draw> eval;
  for (std::size_t i : held) {
    for (int j = 0; j < config.holdout_draws; ++j) {
      Draw dr{i, rng.uniform_int(1, steps_k), std::vector<double>(d)};
      for (auto& v : dr.noise) v = rng.normal();
      eval.push_back(std::move(dr));
    }
  }
  auto heldout_loss = [&](const diff::ParamStore& p) {
    double total = 0.0;
    for (std::size_t start = 0; start < eval.size(); start += 256) {
      const std::size_t end = std::min(eval.size(), start + 256);
      std::vector<const Demonstration*> batch;
      std::vector<int> ks;
      Tensor noise = Tensor::matrix(end - start, d);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&demos[eval[i].demo]);
        ks.push_back(eval[i].k);
        std::copy(eval[i].noise.begin(), eval[i].noise.end(), noise.row_span(i - start).begin());
      }
      diff::Tape tape(false);
      total += tape.value(bc_loss(tape, policy, p, batch, ks, noise))[0] * (end - start);
    }
    return total / static_cast<double>(eval.size());
  };

  const std::size_t per_epoch = (train.size() + config.batch - 1) / config.batch;
  const double total_steps = static_cast<double>(per_epoch) * config.epochs;
  std::size_t step = 0;
  auto rate = [&] {
    const double t = total_steps > 0 ? static_cast<double>(step) / total_steps : 0.0;
    const double f = config.final_lr_fraction;
    return config.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
  };

  PretrainResult result;
  result.initial_heldout = heldout_loss(params);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng.engine());
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train.size(); start += config.batch) {
      const std::size_t end = std::min(train.size(), start + static_cast<std::size_t>(config.batch));
      std::vector<const Demonstration*> batch;
      std::vector<int> ks;
      Tensor noise = Tensor::matrix(end - start, d);
      const int offset = rng.uniform_int(0, steps_k - 1);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&demos[train[i]]);
        ks.push_back(config.stratify_steps
                         ? 1 + static_cast<int>((offset + (i - start)) % steps_k)
                         : rng.uniform_int(1, steps_k));
      }
      for (auto& v : noise.storage()) v = rng.normal();
      diff::Tape tape;
      Var loss = bc_loss(tape, policy, params, batch, ks, noise);
      sum += tape.value(loss)[0];
      ++batches;
      result.optimizer.step(params, tape.backward(loss), rate());
      ++step;
    }
    EpochStats stats{epoch, sum / static_cast<double>(std::max<std::size_t>(batches, 1)),
                     heldout_loss(params)};
    result.curve.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  result.params = std::move(params);
  return result;
}

}  // namespace navgrpo::bc
