#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "mummi/cli/commands.hpp"
#include "mummi/cli/png.hpp"

using namespace mummi;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("mummi_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::trunc) << text;
  return path.string();
}

// small-but-real training setup used across the command tests
std::string smoke_config_json() {
  return R"({
    "seed": 5,
    "env": {"resolution": 6, "episode_len": 12},
    "model": {"h_dim": 8, "c_dim": 4, "f_dim": 6, "hidden": [8]},
    "train": {
      "total_steps": 3, "batch_size": 2, "seq_len": 6,
      "model_updates": 1, "ac_updates": 1, "imagination_horizon": 3,
      "prefill_episodes": 1, "buffer_capacity": 16,
      "eval_every": 3, "eval_episodes": 1, "checkpoint_every": 1,
      "policy_hidden": [8]
    }
  })";
}

std::vector<json> read_metrics(const fs::path& dir) {
  std::ifstream is(dir / "metrics.jsonl");
  std::vector<json> out;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

}  // namespace

TEST_CASE("run config parsing") {
  SUBCASE("defaults round-trip through the effective document") {
    auto cfg = cli::RunConfig::defaults();
    cfg.finalize();
    const auto text = cfg.to_json_text();
    auto reparsed = cli::RunConfig::from_json_text(text);
    reparsed.finalize();
    CHECK(reparsed.model.fingerprint() == cfg.model.fingerprint());
    CHECK(reparsed.env.fingerprint() == cfg.env.fingerprint());
    CHECK(reparsed.train.variant == cfg.train.variant);
  }
  SUBCASE("unknown keys are rejected and named") {
    try {
      (void)cli::RunConfig::from_json_text(R"({"train": {"learning_rate": 0.1}})");
      FAIL("expected ConfigError");
    } catch (const cli::ConfigError& e) {
      CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
    }
    CHECK_THROWS_AS((void)cli::RunConfig::from_json_text(R"({"typo_top": 1})"), cli::ConfigError);
    CHECK_THROWS_AS((void)cli::RunConfig::from_json_text("not json"), cli::ConfigError);
  }
  SUBCASE("flag overrides take precedence over file values") {
    auto cfg = cli::RunConfig::from_json_text(R"({"seed": 3, "train": {"total_steps": 50}})");
    cli::Overrides o;
    o.steps = 7;
    o.variant = std::string("elbo");
    o.env_name = std::string("toy2d-axes");
    cli::apply_overrides(cfg, o);
    cfg.finalize();
    CHECK(cfg.train.total_steps == 7);
    CHECK(cfg.train.variant == "elbo");
    CHECK(cfg.model.modalities.size() == 2);
    CHECK(cfg.model.modalities[0].name == "x_sensor");
    CHECK(cfg.seed == 3);
  }
  SUBCASE("unknown env name is a config error") {
    auto cfg = cli::RunConfig::defaults();
    cfg.env_name = "mujoco";
    CHECK_THROWS_AS(cfg.finalize(), cli::ConfigError);
  }
}

TEST_CASE("cmd_train") {
  SUBCASE("missing config file exits with the usage code") {
    cli::TrainCmdOptions opts;
    opts.config_path = "/nonexistent/config.json";
    CHECK(cli::cmd_train(opts) == cli::kExitConfig);
  }
  SUBCASE("steps override produces exactly that many outer iterations") {
    const auto dir = scratch("steps");
    cli::TrainCmdOptions opts;
    opts.config_path = write_file(dir / "config_in.json", smoke_config_json());
    opts.overrides.out_dir = dir.string();
    opts.overrides.steps = 2;
    REQUIRE(cli::cmd_train(opts) == cli::kExitOk);

    const auto metrics = read_metrics(dir);
    int collect_steps = 0;
    for (const auto& m : metrics)
      if (m.at("phase") == "collect") ++collect_steps;
    CHECK(collect_steps == 2);

    // the effective config is persisted and strict-parses back
    std::ifstream eff(dir / "config.json");
    REQUIRE(eff.good());
    std::stringstream ss;
    ss << eff.rdbuf();
    auto cfg = cli::RunConfig::from_json_text(ss.str());
    CHECK(cfg.train.total_steps == 2);
    CHECK(cfg.model.modalities.size() == 2);  // derived modalities persisted
    fs::remove_all(dir);
  }
  SUBCASE("resumed training reproduces the next-step losses bit-for-bit") {
    const auto dir_a = scratch("resume_a");
    cli::TrainCmdOptions opts;
    opts.config_path = write_file(dir_a / "config_in.json", smoke_config_json());
    opts.overrides.out_dir = dir_a.string();
    REQUIRE(cli::cmd_train(opts) == cli::kExitOk);  // 3 full steps, checkpoints every step

    // clone the run, rewind it to the step-2 checkpoint, and resume
    const auto dir_b = scratch("resume_b");
    fs::copy(dir_a, dir_b, fs::copy_options::recursive);
    fs::copy_file(dir_b / "checkpoint_step_2.bin", dir_b / "checkpoint_latest.bin",
                  fs::copy_options::overwrite_existing);
    fs::remove(dir_b / "metrics.jsonl");

    cli::TrainCmdOptions resume_opts;
    resume_opts.config_path = write_file(dir_b / "config_in.json", smoke_config_json());
    resume_opts.overrides.out_dir = dir_b.string();
    resume_opts.resume = true;
    REQUIRE(cli::cmd_train(resume_opts) == cli::kExitOk);

    auto step2_model_totals = [](const std::vector<json>& ms) {
      std::vector<double> out;
      for (const auto& m : ms)
        if (m.at("phase") == "model" && m.at("step") == 2) out.push_back(m.at("total").get<double>());
      return out;
    };
    const auto a = step2_model_totals(read_metrics(dir_a));
    const auto b = step2_model_totals(read_metrics(dir_b));
    REQUIRE(!a.empty());
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    fs::remove_all(dir_a);
    fs::remove_all(dir_b);
  }
}

TEST_CASE("cmd_gen_data and offline training") {
  const auto data_dir = scratch("gen");
  cli::GenDataCmdOptions gen;
  gen.episodes = 3;
  gen.missing_rate = 0.25;
  gen.out_dir = data_dir.string();
  gen.seed = 9;
  gen.config_path = write_file(data_dir.parent_path() / "mummi_cli_gencfg.json",
                               R"({"env": {"resolution": 6, "episode_len": 12}})");
  REQUIRE(cli::cmd_gen_data(gen) == cli::kExitOk);

  SUBCASE("episode count, manifest, and bit-exact reload") {
    int count = 0;
    for (const auto& e : fs::directory_iterator(data_dir))
      if (e.path().extension() == ".bin") ++count;
    CHECK(count == 3);
    CHECK(fs::exists(data_dir / "manifest.json"));
    const auto ep = envs::load_episode((data_dir / "ep_000000.bin").string());
    CHECK(ep.length == 12);
    CHECK(ep.policy_tag == "random");
  }
  SUBCASE("same seed regenerates identical bytes") {
    const auto data_dir2 = scratch("gen2");
    auto gen2 = gen;
    gen2.out_dir = data_dir2.string();
    REQUIRE(cli::cmd_gen_data(gen2) == cli::kExitOk);
    std::ifstream f1(data_dir / "ep_000001.bin", std::ios::binary);
    std::ifstream f2(data_dir2 / "ep_000001.bin", std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
    fs::remove_all(data_dir2);
  }
  SUBCASE("offline training consumes the archive without collecting") {
    const auto run_dir = scratch("offline_run");
    cli::TrainCmdOptions opts;
    opts.config_path = write_file(run_dir / "config_in.json", smoke_config_json());
    opts.overrides.out_dir = run_dir.string();
    opts.overrides.offline_dir = data_dir.string();
    opts.overrides.steps = 2;
    REQUIRE(cli::cmd_train(opts) == cli::kExitOk);
    for (const auto& m : read_metrics(run_dir)) CHECK(m.at("phase") != "collect");
    fs::remove_all(run_dir);
  }
  fs::remove_all(data_dir);
}

TEST_CASE("cmd_eval and cmd_viz_latent on a trained checkpoint") {
  const auto dir = scratch("evalviz");
  cli::TrainCmdOptions topts;
  topts.config_path = write_file(dir / "config_in.json", smoke_config_json());
  topts.overrides.out_dir = dir.string();
  REQUIRE(cli::cmd_train(topts) == cli::kExitOk);
  const std::string ckpt = (dir / "checkpoint_latest.bin").string();

  SUBCASE("eval at rate 0 reports no masked steps; one episode has zero std") {
    cli::EvalCmdOptions opts;
    opts.checkpoint = ckpt;
    opts.episodes = 1;
    opts.missing_rate = 0.0;
    opts.report_path = (dir / "report.json").string();
    REQUIRE(cli::cmd_eval(opts) == cli::kExitOk);
    std::ifstream is(opts.report_path);
    const auto report = json::parse(is);
    CHECK(report.at("masked_fraction") == 0.0);
    CHECK(report.at("std_return") == 0.0);
    CHECK(report.at("episodes") == 1);
  }
  SUBCASE("eval rejects a bad checkpoint path with the usage code") {
    cli::EvalCmdOptions opts;
    opts.checkpoint = "/nonexistent.bin";
    CHECK(cli::cmd_eval(opts) == cli::kExitConfig);
  }
  SUBCASE("viz exports N x (M+1) data rows, images, and the calibration ratio") {
    cli::VizCmdOptions opts;
    opts.checkpoint = ckpt;
    opts.samples = 40;
    opts.out_dir = (dir / "viz").string();
    REQUIRE(cli::cmd_viz_latent(opts) == cli::kExitOk);

    std::ifstream csv(dir / "viz/latents.csv");
    REQUIRE(csv.good());
    int rows = -1;  // discount the header
    std::string line;
    while (std::getline(csv, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 40 * 3);  // position, camera, fused
    CHECK(fs::exists(dir / "viz/latent_position.png"));
    CHECK(fs::exists(dir / "viz/latent_camera.png"));
    CHECK(fs::exists(dir / "viz/latent_fused.png"));
    std::ifstream cal(dir / "viz/calibration.json");
    const auto calib = json::parse(cal);
    CHECK(calib.contains("calibration_ratio"));
    CHECK(calib.at("mean_expert_std").size() == 2);
  }
  fs::remove_all(dir);
}

TEST_CASE("cmd_gradcheck passes at the default dimensions") {
  cli::GradcheckCmdOptions opts;
  CHECK(cli::cmd_gradcheck(opts) == cli::kExitOk);
}

TEST_CASE("png writer emits a well-formed file") {
  const auto path = scratch("png").string() + ".png";
  std::vector<std::uint8_t> pixels(8 * 8 * 3, 200);
  cli::write_rgb_png(path, 8, 8, pixels);
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  std::vector<unsigned char> head(8);
  is.read(reinterpret_cast<char*>(head.data()), 8);
  CHECK(head[0] == 0x89);
  CHECK(head[1] == 'P');
  CHECK(head[2] == 'N');
  CHECK(head[3] == 'G');
  fs::remove(path);
}

TEST_CASE("installed binary smoke" * doctest::skip(std::getenv("MUMMI_CLI_BIN") == nullptr)) {
  const std::string bin = std::getenv("MUMMI_CLI_BIN") ? std::getenv("MUMMI_CLI_BIN") : "";
  SUBCASE("no subcommand is a usage error") {
    const int rc = std::system((bin + " >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == cli::kExitConfig);
  }
  SUBCASE("train with a missing config exits 1") {
    const int rc = std::system((bin + " train --config /missing.json >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == cli::kExitConfig);
  }
  SUBCASE("gen-data runs end to end") {
    const auto dir = scratch("bin_gen");
    const int rc = std::system((bin + " gen-data --episodes 1 --out " + dir.string() +
                                " --seed 1 >/dev/null 2>&1").c_str());
    CHECK(WEXITSTATUS(rc) == cli::kExitOk);
    CHECK(fs::exists(dir / "ep_000000.bin"));
    fs::remove_all(dir);
  }
}
