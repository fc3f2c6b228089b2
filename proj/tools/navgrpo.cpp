#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "navgrpo/cli/commands.hpp"
#include "navgrpo/common/errors.hpp"

using namespace navgrpo;
namespace fs = std::filesystem;

namespace {

cli::RunConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return cli::RunConfig::load(path);
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + item + "' in --seeds");
    }
  }
  if (out.empty()) throw ConfigError("--seeds is empty");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

void log_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Group-relative policy optimization for diffusion navigation policies"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, out_dir = "runs/default", seeds, scenes = "unseen",
                                       planner = "policy", preset, demos;
  bool resume = false, force = false;

  auto* pre = app.add_subcommand("pretrain", "collect demonstrations and pretrain by cloning");
  pre->add_option("--config", config_path, "run configuration (JSON)");
  pre->add_option("--out", out_dir, "output directory");
  pre->add_option("--demos", demos, "demonstration cache file");

  auto* fine = app.add_subcommand("finetune", "buffered GRPO fine-tuning");
  fine->add_option("--config", config_path, "run configuration (JSON)");
  fine->add_option("--checkpoint", checkpoint, "input checkpoint")->required();
  fine->add_option("--out", out_dir, "output directory");
  fine->add_flag("--resume", resume, "continue from the last completed iteration");
  fine->add_flag("--force", force, "accept a checkpoint from a different model");

  auto* eval = app.add_subcommand("evaluate", "SR/SPL/collision campaign");
  eval->add_option("--config", config_path, "run configuration (JSON)");
  eval->add_option("--checkpoint", checkpoint, "policy checkpoint");
  eval->add_option("--seeds", seeds, "comma-separated seeds");
  eval->add_option("--scenes", scenes, "seen | unseen | all | FIRST-LAST");
  eval->add_option("--planner", planner, "policy | expert | random | straight");
  eval->add_option("--out", out_dir, "output directory");

  auto* abl = app.add_subcommand("ablate", "run an ablation preset");
  abl->add_option("--config", config_path, "run configuration (JSON)");
  abl->add_option("--checkpoint", checkpoint, "shared pretrained checkpoint")->required();
  abl->add_option("--preset", preset, "depth | k_sweep | objective")->required();
  abl->add_option("--out", out_dir, "output directory");

  auto* insp = app.add_subcommand("inspect-buffer", "summarize a replay buffer directory");
  std::string buffer_dir;
  insp->add_option("dir", buffer_dir, "buffer directory")->required();

  auto* dump = app.add_subcommand("dump-config", "print the effective configuration");
  dump->add_option("--config", config_path, "run configuration (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*dump) {
      std::cout << load_config(config_path).to_json_text() << "\n";
    } else if (*pre) {
      const auto cfg = load_config(config_path);
      fs::create_directories(out_dir);
      cfg.save((fs::path(out_dir) / "config.json").string());
      const auto ckpt = cli::cmd_pretrain(cfg, {out_dir, demos, log_line});
      std::printf("pretrained checkpoint %s (params %s)\n",
                  (fs::path(out_dir) / "pretrained.ckpt").c_str(),
                  cli::hex(ckpt.params.checksum()).c_str());
    } else if (*fine) {
      const auto cfg = load_config(config_path);
      if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint);
      const auto input = diff::load_checkpoint(checkpoint);
      fs::create_directories(out_dir);
      cfg.save((fs::path(out_dir) / "config.json").string());
      cli::FinetuneOptions fo;
      fo.out_dir = out_dir;
      fo.resume = resume;
      fo.force = force;
      fo.log = log_line;
      const auto ckpt = cli::cmd_finetune(cfg, input, fo);
      std::printf("fine-tuned checkpoint %s (params %s)\n",
                  (fs::path(out_dir) / "finetuned.ckpt").c_str(),
                  cli::hex(ckpt.params.checksum()).c_str());
    } else if (*eval) {
      const auto cfg = load_config(config_path);
      cli::EvaluateOptions eo;
      eo.planner = cli::parse_planner(planner);
      eo.scenes = scenes;
      if (!seeds.empty()) eo.seeds = parse_seeds(seeds);
      eo.label = planner;
      std::optional<diff::Checkpoint> ckpt;
      if (eo.planner == cli::PlannerKind::Policy) {
        if (checkpoint.empty()) throw ConfigError("evaluate --planner policy needs --checkpoint");
        if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint);
        ckpt = diff::load_checkpoint(checkpoint);
      }
      const auto report = cli::cmd_evaluate(cfg, ckpt ? &*ckpt : nullptr, eo);
      fs::create_directories(out_dir);
      write_text(fs::path(out_dir) / "report.json", report.to_json().dump(2) + "\n");
      write_text(fs::path(out_dir) / "report.txt", report.table());
      std::cout << report.table();
    } else if (*abl) {
      const auto cfg = load_config(config_path);
      const auto p = cli::make_preset(preset, cfg);
      if (!fs::exists(checkpoint)) throw ConfigError("checkpoint not found: " + checkpoint);
      const auto base = diff::load_checkpoint(checkpoint);
      const auto rows = cli::cmd_ablate(cfg, base, p, {out_dir, true, log_line});
      const std::string table = cli::ablation_table(rows);
      nlohmann::json j;
      j["preset"] = preset;
      j["config_hash"] = cli::hex(cfg.config_hash());
      j["base_checksum"] = cli::hex(base.params.checksum());
      for (const auto& r : rows) {
        j["rows"].push_back({{"name", r.name},
                             {"final_checksum", cli::hex(r.final_checksum)},
                             {"losses", r.losses},
                             {"report", r.report.to_json(false)}});
      }
      write_text(fs::path(out_dir) / (preset + ".json"), j.dump(2) + "\n");
      write_text(fs::path(out_dir) / (preset + ".txt"), table);
      std::cout << table;
    } else if (*insp) {
      std::cout << cli::cmd_inspect_buffer(buffer_dir);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
