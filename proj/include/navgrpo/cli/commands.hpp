#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navgrpo/cli/config.hpp"
#include "navgrpo/cli/evaluate.hpp"
#include "navgrpo/cli/metrics.hpp"
#include "navgrpo/diffcore/checkpoint.hpp"
#include "navgrpo/grpo/trainer.hpp"

namespace navgrpo::cli {

// Progress lines go here when set.
using LogFn = std::function<void(const std::string&)>;

struct PretrainOptions {
  std::string out_dir;
  std::string demos_path;  // load instead of generating when the file exists
  LogFn log;
};

// Demonstrations on the seen scenes, behaviour cloning, checkpoint at
// out_dir/pretrained.ckpt. Metrics: one "epoch" record per epoch.
diff::Checkpoint cmd_pretrain(const RunConfig& cfg, const PretrainOptions& opts);

struct FinetuneOptions {
  std::string out_dir;
  bool resume = false;
  bool force = false;  // accept a checkpoint built for another model
  std::optional<int> stop_after;
  bool keep_final_buffer = false;
  LogFn log;
};

// GRPO on the seen scenes. Writes out_dir/iter_<m>.ckpt with the policy
// selected after iteration m, and out_dir/finetuned.ckpt. Metrics: one
// "iteration" record per completed iteration and "batch" records.
diff::Checkpoint cmd_finetune(const RunConfig& cfg, const diff::Checkpoint& input,
                              const FinetuneOptions& opts);

enum class PlannerKind { Policy, Expert, Random, Straight };
PlannerKind parse_planner(const std::string& name);

// Scene selector: "seen", "unseen", "all", or "<first>-<last>" seeds with
// difficulties from the configured cycle.
std::vector<env::Scene> select_scenes(const RunConfig& cfg, const std::string& spec);

struct EvaluateOptions {
  PlannerKind planner = PlannerKind::Policy;
  std::string scenes = "unseen";
  std::optional<std::vector<std::uint64_t>> seeds;  // default cfg.eval.seeds
  std::string label;
};

EvalReport cmd_evaluate(const RunConfig& cfg, const diff::Checkpoint* ckpt,
                        const EvaluateOptions& opts);

struct AblationRow {
  std::string name;
  grpo::GrpoConfig grpo;
  EvalReport report;
  std::uint64_t base_checksum = 0;   // params of the shared input checkpoint
  std::uint64_t final_checksum = 0;  // params after fine-tuning
  std::vector<double> losses;        // mean loss per iteration
};

struct AblationPreset {
  std::string name;
  std::vector<std::pair<std::string, grpo::GrpoConfig>> rows;
};

std::vector<std::string> preset_names();
// Throws ConfigError listing the valid presets on an unknown name.
AblationPreset make_preset(const std::string& name, const RunConfig& cfg);

struct AblateOptions {
  std::string out_dir;
  bool evaluate = true;
  LogFn log;
};

std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, const diff::Checkpoint& base,
                                    const AblationPreset& preset, const AblateOptions& opts);
std::string ablation_table(const std::vector<AblationRow>& rows);

// Human-readable manifest summary of a buffer directory.
std::string cmd_inspect_buffer(const std::string& dir);

}  // namespace navgrpo::cli
