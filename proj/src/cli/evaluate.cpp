#include "navgrpo/cli/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "navgrpo/cli/config.hpp"
#include "navgrpo/common/errors.hpp"

namespace navgrpo::cli {

namespace {

Rates rates_of(std::span<const EpisodeLog* const> logs) {
  Rates r;
  r.episodes = static_cast<int>(logs.size());
  if (logs.empty()) return r;
  for (const auto* e : logs) {
    r.sr += e->success ? 1.0 : 0.0;
    r.spl += e->spl;
    r.collision += e->cause == env::Termination::Collision ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(logs.size());
  r.sr /= n;
  r.spl /= n;
  r.collision /= n;
  return r;
}

nlohmann::json rates_json(const Rates& r) {
  return {{"sr", r.sr}, {"spl", r.spl}, {"collision", r.collision}, {"episodes", r.episodes}};
}

std::string row(const std::string& name, const Rates& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %8.3f %8.3f %10.3f %9d\n", name.c_str(), r.sr, r.spl,
                r.collision, r.episodes);
  return buf;
}

std::string header(const std::string& first) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s %10s %9s\n", first.c_str(), "SR", "SPL",
                "collision", "episodes");
  return buf;
}

}  // namespace

Rates mean_over_seeds(std::span<const SeedRates> seeds) {
  Rates m;
  if (seeds.empty()) return m;
  for (const auto& s : seeds) {
    m.sr += s.rates.sr;
    m.spl += s.rates.spl;
    m.collision += s.rates.collision;
    m.episodes += s.rates.episodes;
  }
  const double n = static_cast<double>(seeds.size());
  m.sr /= n;
  m.spl /= n;
  m.collision /= n;
  return m;
}

EvalReport evaluate(const PlannerFactory& make_planner, const EvalSetup& setup,
                    std::string label) {
  struct Job {
    std::uint64_t seed;
    const env::Scene* scene;
    int task;
  };
  std::vector<Job> jobs;
  for (auto seed : setup.seeds) {
    for (const auto& scene : setup.scenes) {
      for (int t = 0; t < static_cast<int>(scene.tasks.size()); ++t) jobs.push_back({seed, &scene, t});
    }
  }

  std::vector<EpisodeLog> logs(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      auto planner = make_planner();
      for (std::size_t i = next++; i < jobs.size(); i = next++) {
        const Job& j = jobs[i];
        Rng rng(derive_seed(j.seed, {j.scene->seed, static_cast<std::uint64_t>(j.task)}));
        const auto& task = j.scene->tasks[static_cast<std::size_t>(j.task)];
        const auto res = env::run_episode(*planner, *j.scene, task, setup.env, setup.reward, rng);
        logs[i] = {j.seed,    j.scene->seed,       j.task,    res.success,
                   res.spl(), res.path_length,     res.shortest_length,
                   res.steps, res.cause};
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = jobs.size();
    }
  };
  int workers = setup.workers > 0 ? setup.workers
                                  : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::max(1, std::min<int>(workers, static_cast<int>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  EvalReport report;
  report.label = std::move(label);
  report.episodes = std::move(logs);
  auto select = [&](auto&& pred) {
    std::vector<const EpisodeLog*> out;
    for (const auto& e : report.episodes) {
      if (pred(e)) out.push_back(&e);
    }
    return out;
  };
  for (auto seed : setup.seeds) {
    report.per_seed.push_back({seed, rates_of(select([&](const EpisodeLog& e) { return e.seed == seed; }))});
  }
  for (const auto& scene : setup.scenes) {
    SceneRates sr;
    sr.scene = scene.seed;
    sr.difficulty = std::string(env::difficulty_name(scene.difficulty));
    for (auto seed : setup.seeds) {
      sr.per_seed.push_back({seed, rates_of(select([&](const EpisodeLog& e) {
                               return e.seed == seed && e.scene == scene.seed;
                             }))});
    }
    sr.mean = mean_over_seeds(sr.per_seed);
    report.per_scene.push_back(std::move(sr));
  }
  report.mean = mean_over_seeds(report.per_seed);
  return report;
}

nlohmann::json EvalReport::to_json(bool with_episodes) const {
  nlohmann::json j;
  j["label"] = label;
  j["config_hash"] = hex(config_hash);
  j["mean"] = rates_json(mean);
  j["per_seed"] = nlohmann::json::array();
  for (const auto& s : per_seed) j["per_seed"].push_back({{"seed", s.seed}, {"rates", rates_json(s.rates)}});
  j["per_scene"] = nlohmann::json::array();
  for (const auto& sc : per_scene) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& s : sc.per_seed) seeds.push_back({{"seed", s.seed}, {"rates", rates_json(s.rates)}});
    j["per_scene"].push_back({{"scene", sc.scene},
                              {"difficulty", sc.difficulty},
                              {"mean", rates_json(sc.mean)},
                              {"per_seed", seeds}});
  }
  if (with_episodes) {
    j["episodes"] = nlohmann::json::array();
    for (const auto& e : episodes) {
      j["episodes"].push_back({{"seed", e.seed},
                               {"scene", e.scene},
                               {"task", e.task},
                               {"success", e.success},
                               {"spl", e.spl},
                               {"path_length", e.path_length},
                               {"shortest_length", e.shortest_length},
                               {"steps", e.steps},
                               {"cause", std::string(env::termination_name(e.cause))}});
    }
  }
  return j;
}

std::string EvalReport::table() const {
  std::string out = header(label.empty() ? "scene" : label);
  for (const auto& sc : per_scene) {
    out += row(std::to_string(sc.scene) + " (" + sc.difficulty + ")", sc.mean);
  }
  for (const auto& s : per_seed) out += row("seed " + std::to_string(s.seed), s.rates);
  out += row("mean over seeds", mean);
  return out;
}

std::string comparison_table(std::span<const EvalReport> reports) {
  std::string out = header("run");
  for (const auto& r : reports) out += row(r.label, r.mean);
  return out;
}

}  // namespace navgrpo::cli
