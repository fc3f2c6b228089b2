#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "navgrpo/cli/commands.hpp"
#include "navgrpo/common/errors.hpp"
#include "tiny_policy.hpp"

using namespace navgrpo;
using namespace navgrpo::cli;
namespace fs = std::filesystem;

namespace {

std::string scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("navgrpo_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

RunConfig tiny_run() {
  RunConfig c;
  c.seed = 3;
  c.schedule = {4, 0.02, 0.4};
  c.network = testing::tiny_network(4, 2);
  c.traj_scale = 1.5;
  c.env.patch.width = 6;
  c.env.patch.x_min = -0.5;
  c.env.patch.y_min = -0.75;
  c.env.max_steps = 6;
  c.env.arena_cells = 40;
  c.env.tasks_per_scene = 4;
  c.env.min_task_distance = 3.0;
  c.env.max_task_distance = 6.0;
  c.expert.horizon = 4;
  c.demos.budget = 24;
  c.pretrain.epochs = 2;
  c.pretrain.batch = 8;
  c.grpo.group = 4;
  c.grpo.last_k = 4;
  c.grpo.minibatch = 8;
  c.grpo.trainable_blocks = 1;
  c.grpo.iterations = 2;
  c.grpo.episodes = 3;
  c.grpo.window = 2;
  c.grpo.epochs = 1;
  c.grpo.probe_tasks = 3;
  c.grpo.lr = 1e-3;
  c.scenes.seen = {11, 3};
  c.scenes.unseen = {21, 2};
  c.eval.seeds = {1, 2};
  c.eval.group = 4;
  c.eval.workers = 1;
  return c;
}

std::vector<std::uint8_t> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int count_kind(const std::string& metrics, const std::string& kind) {
  int n = 0;
  for (const auto& r : read_metrics(metrics)) n += r.at("kind") == kind;
  return n;
}

}  // namespace

TEST_CASE("config round trip and strict keys") {
  const auto cfg = tiny_run();
  const auto back = RunConfig::from_json_text(cfg.to_json_text());
  CHECK(back.to_json_text() == cfg.to_json_text());
  CHECK(back.config_hash() == cfg.config_hash());
  CHECK(back.model_hash() == cfg.model_hash());

  SUBCASE("defaults") {
    const RunConfig d;
    CHECK(d.schedule.steps == 10);
    CHECK(d.network.horizon == 24);
    CHECK(d.grpo.group == 16);
    CHECK(d.grpo.clip == 0.2);
    CHECK(d.grpo.last_k == 7);
    CHECK(d.grpo.trainable_blocks == 3);
    CHECK(d.reward.weights.success == 10.0);
    CHECK(d.reward.weights.progress == 3.0);
    CHECK(d.eval.seeds == std::vector<std::uint64_t>{1234, 42, 10});
    CHECK(d.scenes.seen.count == 8);
    CHECK(d.scenes.unseen.count == 6);
    CHECK(d.env.tasks_per_scene == 25);
    CHECK_NOTHROW(d.validate());
    CHECK(RunConfig::from_json_text("{}").config_hash() == d.config_hash());
  }
  SUBCASE("partial file keeps defaults") {
    const auto c = RunConfig::from_json_text(R"({"grpo": {"lr": 0.002}})");
    CHECK(c.grpo.lr == 0.002);
    CHECK(c.grpo.group == 16);
  }
  SUBCASE("unknown keys name their path") {
    auto msg = [](const std::string& text) {
      try {
        RunConfig::from_json_text(text);
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string();
    };
    CHECK(msg(R"({"grpo": {"foo": 1}})").find("grpo.foo") != std::string::npos);
    CHECK(msg(R"({"env": {"patch": {"wdth": 3}}})").find("env.patch.wdth") != std::string::npos);
    CHECK(msg(R"({"bogus": true})").find("bogus") != std::string::npos);
    CHECK(msg(R"({"grpo": {"lr": "fast"}})").find("grpo.lr") != std::string::npos);
    CHECK(msg("{not json").find("JSON") != std::string::npos);
  }
  SUBCASE("cross-field validation") {
    auto bad = tiny_run();
    bad.network.patch_width = 8;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tiny_run();
    bad.grpo.kl_coef = 0.1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = tiny_run();
    bad.scenes.difficulty_cycle = {"easy", "brutal"};
    CHECK_THROWS(bad.validate());
  }
  SUBCASE("model hash ignores training knobs") {
    auto other = cfg;
    other.grpo.lr = 5e-4;
    other.pretrain.epochs = 9;
    CHECK(other.model_hash() == cfg.model_hash());
    CHECK(other.config_hash() != cfg.config_hash());
    other.schedule.beta_max = 0.3;
    CHECK(other.model_hash() != cfg.model_hash());
  }
  SUBCASE("file save and load") {
    const auto p = fs::path(scratch_dir("cfg")) / "c.json";
    cfg.save(p.string());
    CHECK(RunConfig::load(p.string()).config_hash() == cfg.config_hash());
  }
}

TEST_CASE("report means") {
  const SeedRates s[] = {{1, {0.5, 0.2, 0.1, 10}}, {2, {0.6, 0.3, 0.2, 10}}, {3, {0.7, 0.4, 0.3, 10}}};
  const auto m = mean_over_seeds(s);
  CHECK(std::abs(m.sr - 0.6) < 1e-12);
  CHECK(std::abs(m.spl - 0.3) < 1e-12);
  CHECK(std::abs(m.collision - 0.2) < 1e-12);
  CHECK(m.episodes == 30);
}

TEST_CASE("metrics stream") {
  const auto path = (fs::path(scratch_dir("metrics")) / "m.jsonl").string();
  {
    MetricsWriter w(path);
    w.write("epoch", {{"epoch", 0}});
    w.write("epoch", {{"epoch", 1}});
  }
  { std::ofstream(path, std::ios::app) << R"({"kind": "epo)"; }
  const auto recs = read_metrics(path);
  REQUIRE(recs.size() == 2);
  CHECK(recs[1].at("epoch") == 1);
  CHECK(recs[0].at("kind") == "epoch");
  MetricsWriter(path).write("x", {{"a", 1}});
}

TEST_CASE("evaluation campaign") {
  auto cfg = tiny_run();
  cfg.env.max_steps = 60;
  SUBCASE("expert on easy scenes succeeds everywhere") {
    cfg.scenes.difficulty_cycle = {"easy"};
    const auto r = cmd_evaluate(cfg, nullptr, {PlannerKind::Expert, "unseen", std::nullopt, "expert"});
    CHECK(r.mean.sr == 1.0);
    CHECK(r.mean.collision == 0.0);
    CHECK(r.episodes.size() == 2 * 2 * 4);
    for (const auto& e : r.episodes) {
      CHECK(e.spl >= 0.0);
      CHECK(e.spl <= 1.0);
    }
  }
  SUBCASE("random directions rarely arrive on medium scenes") {
    cfg.scenes.difficulty_cycle = {"medium"};
    cfg.scenes.unseen.count = 3;
    cfg.env.tasks_per_scene = 10;
    const auto r = cmd_evaluate(cfg, nullptr, {PlannerKind::Random, "unseen", std::nullopt, "random"});
    CHECK(r.mean.sr <= 0.1);
  }
  SUBCASE("results do not depend on the worker count") {
    const auto params = [&] {
      Rng rng(4);
      return cfg.make_policy().network().init(rng);
    }();
    const diff::Checkpoint ckpt{params, diff::Adam{}, 0, cfg.model_hash(), "{}"};
    cfg.eval.workers = 1;
    const auto a = cmd_evaluate(cfg, &ckpt, {});
    cfg.eval.workers = 3;
    const auto b = cmd_evaluate(cfg, &ckpt, {});
    REQUIRE(a.episodes.size() == b.episodes.size());
    for (std::size_t i = 0; i < a.episodes.size(); ++i) {
      CHECK(a.episodes[i].seed == b.episodes[i].seed);
      CHECK(a.episodes[i].scene == b.episodes[i].scene);
      CHECK(a.episodes[i].task == b.episodes[i].task);
      CHECK(a.episodes[i].path_length == b.episodes[i].path_length);
      CHECK(a.episodes[i].steps == b.episodes[i].steps);
    }
    CHECK(a.to_json().dump() == b.to_json().dump());
    double sum = 0;
    for (const auto& s : a.per_seed) sum += s.rates.sr;
    CHECK(std::abs(a.mean.sr - sum / a.per_seed.size()) < 1e-12);
    CHECK(a.table().find("mean over seeds") != std::string::npos);
  }
  SUBCASE("policy planner needs a checkpoint") {
    CHECK_THROWS_AS(cmd_evaluate(cfg, nullptr, {}), ConfigError);
  }
}

TEST_CASE("scene selection") {
  const auto cfg = tiny_run();
  CHECK(select_scenes(cfg, "seen").size() == 3);
  CHECK(select_scenes(cfg, "unseen").size() == 2);
  CHECK(select_scenes(cfg, "all").size() == 5);
  const auto r = select_scenes(cfg, "40-42");
  REQUIRE(r.size() == 3);
  CHECK(r[2].seed == 42);
  CHECK_THROWS_AS(select_scenes(cfg, "nope"), ConfigError);
  CHECK_THROWS_AS(select_scenes(cfg, "9-3"), ConfigError);
}

TEST_CASE("ablation presets") {
  const auto cfg = tiny_run();
  CHECK(make_preset("k_sweep", cfg).rows.size() == 4);
  const auto depth = make_preset("depth", cfg);
  REQUIRE(depth.rows.size() == 3);
  CHECK(depth.rows[2].second.trainable_blocks == 2);
  const auto obj = make_preset("objective", cfg);
  REQUIRE(obj.rows.size() == 3);
  CHECK(obj.rows[0].second.clip_objective);
  CHECK(obj.rows[0].second.normalize_advantages);
  CHECK(!obj.rows[1].second.clip_objective);
  CHECK(obj.rows[1].second.normalize_advantages);
  CHECK(obj.rows[2].second.clip_objective);
  CHECK(!obj.rows[2].second.normalize_advantages);
  try {
    make_preset("depthh", cfg);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const auto& n : preset_names()) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("pretrain and finetune commands") {
  const auto cfg = tiny_run();
  const auto dir = fs::path(scratch_dir("pipeline"));
  const auto a = cmd_pretrain(cfg, {(dir / "a").string(), (dir / "demos.bin").string(), {}});
  const auto b = cmd_pretrain(cfg, {(dir / "b").string(), {}, {}});
  CHECK(file_bytes(dir / "a" / "pretrained.ckpt") == file_bytes(dir / "b" / "pretrained.ckpt"));
  CHECK(a.config_hash == cfg.config_hash());
  CHECK(a.model_hash == cfg.model_hash());
  CHECK(count_kind((dir / "a" / "metrics.jsonl").string(), "epoch") >= cfg.pretrain.epochs);
  const auto c = cmd_pretrain(cfg, {(dir / "c").string(), (dir / "demos.bin").string(), {}});
  CHECK(c.params.checksum() == a.params.checksum());

  SUBCASE("M=0 returns the input") {
    auto zero = cfg;
    zero.grpo.iterations = 0;
    FinetuneOptions fo;
    fo.out_dir = (dir / "ft0").string();
    const auto out = cmd_finetune(zero, a, fo);
    CHECK(out.params.serialize([](const auto&) { return true; }) ==
          a.params.serialize([](const auto&) { return true; }));
    CHECK(fs::exists(dir / "ft0" / "finetuned.ckpt"));
  }
  SUBCASE("model mismatch is refused unless forced") {
    auto other = cfg;
    other.schedule.beta_max = 0.3;
    FinetuneOptions fo;
    fo.out_dir = (dir / "mismatch").string();
    CHECK_THROWS_AS(cmd_finetune(other, a, fo), ConfigError);
    fo.force = true;
    other.grpo.iterations = 1;
    CHECK_NOTHROW(cmd_finetune(other, a, fo));
  }
  SUBCASE("summaries, checkpoints and resume") {
    FinetuneOptions fo;
    fo.out_dir = (dir / "full").string();
    const auto full = cmd_finetune(cfg, a, fo);
    CHECK(count_kind((dir / "full" / "metrics.jsonl").string(), "iteration") == cfg.grpo.iterations);
    for (int m = 0; m < cfg.grpo.iterations; ++m) {
      CHECK(fs::exists(dir / "full" / ("iter_" + std::to_string(m) + ".ckpt")));
    }
    FinetuneOptions again_opts;
    again_opts.out_dir = (dir / "again").string();
    cmd_finetune(cfg, a, again_opts);
    CHECK(file_bytes(dir / "full" / "finetuned.ckpt") == file_bytes(dir / "again" / "finetuned.ckpt"));

    FinetuneOptions part;
    part.out_dir = (dir / "part").string();
    part.stop_after = 1;
    cmd_finetune(cfg, a, part);
    CHECK(!fs::exists(dir / "part" / "finetuned.ckpt"));
    part.stop_after.reset();
    part.resume = true;
    const auto resumed = cmd_finetune(cfg, a, part);
    CHECK(resumed.params.checksum() == full.params.checksum());
    CHECK(file_bytes(dir / "part" / "finetuned.ckpt") == file_bytes(dir / "full" / "finetuned.ckpt"));
    CHECK(count_kind((dir / "part" / "metrics.jsonl").string(), "iteration") == cfg.grpo.iterations);
  }
  SUBCASE("ablation rows share the input checkpoint") {
    auto small = cfg;
    small.grpo.iterations = 1;
    const auto rows = cmd_ablate(small, a, make_preset("objective", small), {(dir / "abl").string(), true, {}});
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
      CHECK(r.base_checksum == a.params.checksum());
      REQUIRE(r.losses.size() == 1);
      CHECK(std::isfinite(r.losses[0]));
      CHECK(r.report.episodes.size() == 2 * 2 * 4);
    }
    CHECK(ablation_table(rows).find("no_adv_norm") != std::string::npos);
  }
}

#ifdef NAVGRPO_CLI_PATH
TEST_CASE("command line") {
  const auto dir = fs::path(scratch_dir("exe"));
  const std::string exe = NAVGRPO_CLI_PATH;
  auto run = [&](const std::string& args) {
    const std::string cmd = exe + " " + args + " > " + (dir / "out.txt").string() + " 2>&1";
    return std::system(cmd.c_str());
  };
  auto output = [&] {
    const auto b = file_bytes(dir / "out.txt");
    return std::string(b.begin(), b.end());
  };
  CHECK(run("pretrain --config " + (dir / "missing.json").string()) != 0);
  CHECK(output().find("not found") != std::string::npos);
  CHECK(run("") != 0);
  {
    std::ofstream(dir / "bad.json") << R"({"grpo": {"foo": 1}})";
  }
  CHECK(run("dump-config --config " + (dir / "bad.json").string()) != 0);
  CHECK(output().find("grpo.foo") != std::string::npos);
  CHECK(run("ablate --preset nope --checkpoint x") != 0);
  CHECK(output().find("k_sweep") != std::string::npos);

  tiny_run().save((dir / "tiny.json").string());
  CHECK(run("evaluate --planner expert --seeds 5,6 --config " + (dir / "tiny.json").string() +
            " --out " + (dir / "ev").string()) == 0);
  CHECK(output().find("mean over seeds") != std::string::npos);
  const auto rep = nlohmann::json::parse(file_bytes(dir / "ev" / "report.json"));
  CHECK(rep.at("per_seed").size() == 2);
  CHECK(rep.at("config_hash") == hex(tiny_run().config_hash()));
}
#endif
