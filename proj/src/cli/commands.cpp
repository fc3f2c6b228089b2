#include "navgrpo/cli/commands.hpp"

#include <filesystem>
#include <sstream>

#include "navgrpo/bc/expert.hpp"
#include "navgrpo/bc/pretrain.hpp"
#include "navgrpo/common/errors.hpp"
#include "navgrpo/grpo/buffer.hpp"

namespace navgrpo::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void say(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : sep) + s;
  return out;
}

MetricsWriter open_metrics(const std::string& out_dir) {
  if (out_dir.empty()) return {};
  fs::create_directories(out_dir);
  return MetricsWriter((fs::path(out_dir) / "metrics.jsonl").string());
}

std::string metadata(const RunConfig& cfg, const std::string& stage, json extra = json::object()) {
  extra["stage"] = stage;
  extra["seed"] = cfg.seed;
  extra["config_hash"] = hex(cfg.config_hash());
  extra["model_hash"] = hex(cfg.model_hash());
  return extra.dump();
}

json batch_json(const grpo::BatchMetrics& m) {
  return {{"iteration", m.iteration}, {"epoch", m.epoch},       {"batch", m.batch},
          {"loss", m.loss},           {"ratio", m.mean_ratio},  {"clip_fraction", m.clip_fraction},
          {"kl", m.kl},               {"skipped", m.skipped}};
}

}  // namespace

diff::Checkpoint cmd_pretrain(const RunConfig& cfg, const PretrainOptions& opts) {
  cfg.validate();
  auto metrics = open_metrics(opts.out_dir);
  const auto scenes = cfg.seen_scenes();
  std::vector<bc::Demonstration> demos;
  if (!opts.demos_path.empty() && fs::exists(opts.demos_path)) {
    demos = bc::load_demonstrations(opts.demos_path);
    say(opts.log, "loaded " + std::to_string(demos.size()) + " demonstrations");
  } else {
    demos = bc::collect_demonstrations(scenes, cfg.env, cfg.expert, cfg.demos);
    say(opts.log, "collected " + std::to_string(demos.size()) + " demonstrations");
    if (!opts.demos_path.empty()) bc::save_demonstrations(opts.demos_path, demos);
  }

  const auto policy = cfg.make_policy();
  Rng init_rng(derive_seed(cfg.seed, {0x1a17}));
  auto result = bc::pretrain(policy, policy.network().init(init_rng), demos, cfg.pretrain,
                             [&](const bc::EpochStats& s) {
                               metrics.write("epoch", {{"epoch", s.epoch},
                                                       {"train_loss", s.train_loss},
                                                       {"heldout_loss", s.heldout_loss},
                                                       {"config_hash", hex(cfg.config_hash())}});
                               char buf[96];
                               std::snprintf(buf, sizeof buf, "epoch %d train %.5f heldout %.5f",
                                             s.epoch, s.train_loss, s.heldout_loss);
                               say(opts.log, buf);
                             });

  diff::Checkpoint ckpt{std::move(result.params), std::move(result.optimizer), cfg.config_hash(),
                        cfg.model_hash(),
                        metadata(cfg, "pretrain", {{"demos", demos.size()},
                                                   {"initial_heldout", result.initial_heldout}})};
  if (!opts.out_dir.empty()) {
    diff::save_checkpoint((fs::path(opts.out_dir) / "pretrained.ckpt").string(), ckpt);
  }
  return ckpt;
}

diff::Checkpoint cmd_finetune(const RunConfig& cfg, const diff::Checkpoint& input,
                              const FinetuneOptions& opts) {
  cfg.validate();
  if (input.model_hash != cfg.model_hash()) {
    const std::string msg = "checkpoint model hash " + hex(input.model_hash) +
                            " does not match config model hash " + hex(cfg.model_hash()) +
                            " (architecture or schedule differ)";
    if (!opts.force) throw ConfigError(msg + "; pass --force to override");
    say(opts.log, "warning: " + msg);
  }
  if (opts.out_dir.empty()) throw ConfigError("finetune needs an output directory");
  fs::create_directories(opts.out_dir);
  auto metrics = open_metrics(opts.out_dir);
  const auto policy = cfg.make_policy();
  const auto scenes = cfg.seen_scenes();
  const std::uint64_t hash = cfg.config_hash();

  grpo::FinetuneHooks hooks;
  hooks.work_dir = (fs::path(opts.out_dir) / "work").string();
  hooks.resume = opts.resume;
  hooks.keep_final_buffer = opts.keep_final_buffer;
  hooks.config_hash = hash;
  hooks.stop_after = opts.stop_after;
  hooks.on_batch = [&](const grpo::BatchMetrics& m) { metrics.write("batch", batch_json(m)); };
  hooks.on_iteration = [&](const grpo::IterationSummary& s, const diff::ParamStore& selected) {
    auto record = json::parse(grpo::summary_to_json(s));
    record["config_hash"] = hex(hash);
    metrics.write("iteration", record);
    diff::save_checkpoint(
        (fs::path(opts.out_dir) / ("iter_" + std::to_string(s.iteration) + ".ckpt")).string(),
        {selected, diff::Adam{}, hash, cfg.model_hash(),
         metadata(cfg, "finetune", {{"iteration", s.iteration}, {"selected", s.selected}})});
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "iteration %d: %zu entries, %d successes, %d collisions, loss %.4f, kl %.5f, "
                  "selected %zu (probe %.4f), %.1fs",
                  s.iteration, s.buffer_entries, s.collect.successes, s.collect.collisions,
                  s.mean_loss, s.mean_kl, s.selected, s.selected_score, s.seconds);
    say(opts.log, buf);
  };

  auto result = grpo::finetune(policy, input.params, scenes, cfg.env, cfg.reward, cfg.grpo, hooks);
  diff::Checkpoint out{std::move(result.params), diff::Adam{}, hash, cfg.model_hash(),
                       metadata(cfg, "finetune", {{"completed", result.completed},
                                                  {"selected", result.selected},
                                                  {"input_checksum", hex(input.params.checksum())}})};
  if (result.completed == cfg.grpo.iterations) {
    diff::save_checkpoint((fs::path(opts.out_dir) / "finetuned.ckpt").string(), out);
  }
  return out;
}

PlannerKind parse_planner(const std::string& name) {
  if (name == "policy") return PlannerKind::Policy;
  if (name == "expert") return PlannerKind::Expert;
  if (name == "random") return PlannerKind::Random;
  if (name == "straight") return PlannerKind::Straight;
  throw ConfigError("unknown planner '" + name + "' (policy, expert, random, straight)");
}

std::vector<env::Scene> select_scenes(const RunConfig& cfg, const std::string& spec) {
  if (spec == "seen") return cfg.seen_scenes();
  if (spec == "unseen") return cfg.unseen_scenes();
  if (spec == "all") {
    auto out = cfg.seen_scenes();
    for (auto& s : cfg.unseen_scenes()) out.push_back(std::move(s));
    return out;
  }
  const auto dash = spec.find('-');
  try {
    std::size_t used = 0;
    const std::uint64_t first = std::stoull(spec.substr(0, dash), &used);
    if (used != dash) throw std::invalid_argument(spec);
    const std::uint64_t last = dash == std::string::npos ? first : std::stoull(spec.substr(dash + 1));
    if (last < first) throw std::invalid_argument(spec);
    RunConfig copy = cfg;
    copy.scenes.unseen = {first, static_cast<int>(last - first + 1)};
    return copy.unseen_scenes();
  } catch (const std::logic_error&) {
    throw ConfigError("bad scene selector '" + spec + "' (seen, unseen, all, or FIRST-LAST)");
  }
}

EvalReport cmd_evaluate(const RunConfig& cfg, const diff::Checkpoint* ckpt,
                        const EvaluateOptions& opts) {
  cfg.validate();
  const auto scenes = select_scenes(cfg, opts.scenes);
  const auto policy = cfg.make_policy();
  if (opts.planner == PlannerKind::Policy && !ckpt) {
    throw ConfigError("evaluating the policy needs a checkpoint");
  }
  const int horizon = static_cast<int>(cfg.network.horizon);
  const double spacing = cfg.expert.spacing;
  PlannerFactory factory = [&]() -> std::unique_ptr<env::Planner> {
    switch (opts.planner) {
      case PlannerKind::Policy:
        return std::make_unique<env::DiffusionPlanner>(policy, ckpt->params, cfg.eval.group,
                                                       cfg.reward, cfg.eval.deterministic);
      case PlannerKind::Expert:
        return std::make_unique<bc::ExpertPlanner>(cfg.expert);
      case PlannerKind::Random:
        return std::make_unique<env::RandomPlanner>(horizon, spacing);
      case PlannerKind::Straight:
        return std::make_unique<env::StraightPlanner>(horizon, spacing);
    }
    return nullptr;
  };
  EvalSetup setup{scenes, opts.seeds.value_or(cfg.eval.seeds), cfg.env, cfg.reward,
                  cfg.eval.workers};
  auto report = evaluate(factory, setup, opts.label);
  report.config_hash = cfg.config_hash();
  return report;
}

std::vector<std::string> preset_names() { return {"depth", "k_sweep", "objective"}; }

AblationPreset make_preset(const std::string& name, const RunConfig& cfg) {
  AblationPreset p{name, {}};
  const auto base = cfg.grpo;
  if (name == "depth") {
    for (int n : {1, 3, static_cast<int>(cfg.network.blocks)}) {
      auto g = base;
      g.trainable_blocks = n;
      p.rows.emplace_back(n == static_cast<int>(cfg.network.blocks) ? "FT-All" : "FT" + std::to_string(n), g);
    }
  } else if (name == "k_sweep") {
    for (int k : {3, 5, 7, 10}) {
      auto g = base;
      g.last_k = std::min(k, cfg.schedule.steps);
      p.rows.emplace_back("K=" + std::to_string(k), g);
    }
  } else if (name == "objective") {
    p.rows.emplace_back("full", base);
    auto no_clip = base;
    no_clip.clip_objective = false;
    p.rows.emplace_back("no_clip", no_clip);
    auto no_norm = base;
    no_norm.normalize_advantages = false;
    p.rows.emplace_back("no_adv_norm", no_norm);
  } else {
    throw ConfigError("unknown preset '" + name + "'; valid presets: " + join(preset_names(), ", "));
  }
  return p;
}

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const diff::Checkpoint& base,
                                    const AblationPreset& preset, const AblateOptions& opts) {
  std::vector<AblationRow> rows;
  for (const auto& [name, grpo_cfg] : preset.rows) {
    RunConfig row_cfg = cfg;
    row_cfg.grpo = grpo_cfg;
    say(opts.log, "ablation row " + name);
    FinetuneOptions fo;
    fo.out_dir = (fs::path(opts.out_dir) / preset.name / name).string();
    fo.log = opts.log;
    const auto tuned = cmd_finetune(row_cfg, base, fo);
    AblationRow row;
    row.name = name;
    row.grpo = grpo_cfg;
    row.base_checksum = base.params.checksum();
    row.final_checksum = tuned.params.checksum();
    for (const auto& rec : read_metrics((fs::path(fo.out_dir) / "metrics.jsonl").string())) {
      if (rec.at("kind") == "iteration") row.losses.push_back(rec.at("mean_loss").get<double>());
    }
    if (opts.evaluate) {
      row.report = cmd_evaluate(row_cfg, &tuned, {PlannerKind::Policy, "unseen", std::nullopt, name});
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::vector<EvalReport> reports;
  for (const auto& r : rows) {
    reports.push_back(r.report);
    reports.back().label = r.name;
  }
  return comparison_table(reports);
}

std::string cmd_inspect_buffer(const std::string& dir) {
  const auto buffer = grpo::ReplayBuffer::open(dir);
  std::ostringstream out;
  out << "buffer " << dir << "\n"
      << "  config hash   " << hex(buffer.config_hash()) << "\n"
      << "  entries       " << buffer.size() << "\n"
      << "  episodes      " << buffer.episodes() << " (capacity " << buffer.capacity() << ")\n"
      << "  evicted       " << buffer.evicted() << "\n"
      << "  checksum      " << hex(buffer.checksum()) << "\n";
  if (!buffer.empty()) {
    std::uint32_t lo = buffer.index().front().version, hi = lo;
    for (const auto& it : buffer.index()) {
      lo = std::min(lo, it.version);
      hi = std::max(hi, it.version);
    }
    out << "  versions      " << lo << ".." << hi << "\n";
    const auto first = buffer.load(0);
    double mean = 0.0;
    for (double r : first.totals()) mean += r;
    out << "  group size    " << first.records.size() << "\n"
        << "  first entry   scene " << first.scene_seed << " task " << first.task << " step "
        << first.step << " mean reward " << mean / static_cast<double>(first.records.size())
        << "\n";
  }
  return out.str();
}

}  // namespace navgrpo::cli
