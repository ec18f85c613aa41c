#include <catch2/catch.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>
#include <string>

#include "support.hpp"
#include "tinr/commands.hpp"

using namespace tinr;
namespace fs = std::filesystem;

namespace {

/// Runs the CLI inside `cwd`; returns its exit status.
int run_cli(const fs::path& cwd, const std::string& args) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" TINR_CLI_PATH "' " + args + " > cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t count(const std::string& s, char c) {
  std::size_t n = 0;
  for (char x : s) n += x == c;
  return n;
}

const char* kSmallConfig = R"({
  "seed": 3,
  "encoding": {"width": 8, "scales": [1, 10]},
  "network": {"hidden": [12, 12]},
  "factorized": {"d_x": 3, "d_t": 3},
  "ginr": {"latent_dim": 6, "inner_rate": 0.05, "epochs": 3, "batch_size": 2},
  "train": {"steps": 5, "lr": 0.001},
  "mf": {"rank": 2, "sweeps": 4},
  "synth": {"family": 3, "cells": 12, "steps": 10,
            "initial": {"kind": "riemann", "left": 0.2, "right": 0.7},
            "perturbation": {"density": 0.1}}
})";

fs::path small_workspace(const std::string& name) {
  const fs::path dir = testing::scratch_dir(name);
  testing::write_file(dir / "cfg.json", kSmallConfig);
  return dir;
}

}  // namespace

TEST_CASE("synth is deterministic and reloadable", "[cli]") {
  const fs::path dir = testing::scratch_dir("cli_synth");
  REQUIRE(run_cli(dir, "synth --family 5 --seed 1 --S 16 --T 12 --out a") == 0);
  REQUIRE(run_cli(dir, "synth --family 5 --seed 1 --S 16 --T 12 --out b") == 0);
  for (int n = 0; n < 5; ++n) {
    const std::string name = "instance_" + std::to_string(n) + ".csv";
    CHECK(testing::read_file(dir / "a" / name) == testing::read_file(dir / "b" / name));
    const GridField f = load_grid_csv(dir / "a" / name);
    CHECK(f.space_size() == 16);
    CHECK(f.time_size() == 12);
  }
  CHECK_FALSE(fs::exists(dir / "a" / "instance_5.csv"));
}

TEST_CASE("synth grid file layout", "[cli]") {
  const fs::path dir = testing::scratch_dir("cli_layout");
  REQUIRE(run_cli(dir, "synth --S 64 --T 128 --out s") == 0);
  const std::string text = testing::read_file(dir / "s" / "instance_0.csv");
  CHECK(count(text, '\n') == 65);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) CHECK(count(line, '\t') + 1 == 129);
}

TEST_CASE("synth writes masks on request", "[cli]") {
  const fs::path dir = testing::scratch_dir("cli_masks");
  REQUIRE(run_cli(dir, "synth --family 2 --S 20 --T 8 --mask sensor-subset --density 0.25 --out s") == 0);
  const GridField f = load_grid_csv(dir / "s" / "instance_1.csv");
  const ObservationMask m = load_mask_csv(dir / "s" / "instance_1.mask.csv", f);
  CHECK(m.observed_count() == 5 * 8);
}

TEST_CASE("fit with zero steps stores the initial model", "[cli]") {
  const fs::path dir = small_workspace("cli_fit0");
  REQUIRE(run_cli(dir, "synth --config cfg.json --out data") == 0);
  for (const char* kind : {"inr", "factorized"}) {
    INFO(kind);
    const std::string k = kind;
    REQUIRE(run_cli(dir, "fit --config cfg.json --kind " + k + " --data data/instance_0.csv --steps 0 --out f0_" + k) == 0);
    REQUIRE(run_cli(dir, "fit --config cfg.json --kind " + k + " --data data/instance_0.csv --out f5_" + k) == 0);
    const Checkpoint init = load_checkpoint(dir / ("f0_" + k) / "model.ckpt");
    CHECK(init.steps_done == 0);

    // Recompute the initial loss from the checkpoint alone.
    const GridField field = load_grid_csv(dir / "data" / "instance_0.csv");
    const PairSet pairs = to_pairs(field, 0, init.domain.value);
    const double recomputed = std::visit(
        [&](const auto& m) -> double {
          if constexpr (requires { m.prepare(pairs.coords); }) return tinr::mse(m, pairs);
          else return -1.0;
        },
        init.model);

    const std::string csv = testing::read_file(dir / ("f5_" + k) / "loss.csv");
    std::istringstream in(csv);
    std::string header, first;
    std::getline(in, header);
    std::getline(in, first);
    CHECK(header == "step,loss");
    CHECK(count(csv, '\n') == 1 + 6);
    const double logged = std::stod(first.substr(first.find(',') + 1));
    CHECK(logged == recomputed);
    CHECK(testing::read_file(dir / ("f0_" + k) / "loss.csv") == "step,loss\n0," + format_double(recomputed) + "\n");
  }
}

TEST_CASE("fit is deterministic", "[cli]") {
  const fs::path dir = small_workspace("cli_fitdet");
  REQUIRE(run_cli(dir, "synth --config cfg.json --out data") == 0);
  for (const char* kind : {"inr", "factorized", "mf"}) {
    const std::string k = kind;
    REQUIRE(run_cli(dir, "fit --config cfg.json --kind " + k + " --data data/instance_1.csv --out a_" + k) == 0);
    REQUIRE(run_cli(dir, "fit --config cfg.json --kind " + k + " --data data/instance_1.csv --out b_" + k) == 0);
    CHECK(testing::read_file(dir / ("a_" + k) / "model.ckpt") == testing::read_file(dir / ("b_" + k) / "model.ckpt"));
    CHECK(load_checkpoint(dir / ("a_" + k) / "model.ckpt").kind() == parse_model_kind(k));
  }
}

TEST_CASE("full pipeline through the binary", "[cli]") {
  const fs::path dir = small_workspace("cli_pipeline");
  REQUIRE(run_cli(dir, "synth --config cfg.json --out fam") == 0);
  REQUIRE(run_cli(dir, "meta-fit --config cfg.json --data fam --out meta") == 0);
  REQUIRE(run_cli(dir, "adapt --checkpoint meta/model.ckpt --data fam/instance_2.csv --out ad") == 0);
  const std::string report = testing::read_file(dir / "ad" / "report.csv");
  CHECK(report.find("pre_loss,") != std::string::npos);
  CHECK(report.find("post_loss,") != std::string::npos);
  CHECK(report.find("instance_id,2") != std::string::npos);

  REQUIRE(run_cli(dir, "query --checkpoint meta/model.ckpt --code ad/code.tsv --x-res 24 --t-res 7 --out q.csv") == 0);
  const GridField q = load_grid_csv(dir / "q.csv");
  CHECK(q.space_size() == 24);
  CHECK(q.time_size() == 7);
  REQUIRE(run_cli(dir, "query --checkpoint meta/model.ckpt --code ad/code.tsv --like fam/instance_2.csv --out same.csv") == 0);
  REQUIRE(run_cli(dir, "eval --pred same.csv --truth fam/instance_2.csv --out m.csv") == 0);
  CHECK(testing::read_file(dir / "m.csv").rfind("metric,value\nrmse,", 0) == 0);

  // A ginr checkpoint cannot be queried without a code.
  CHECK(run_cli(dir, "query --checkpoint meta/model.ckpt --x-res 4 --t-res 4") == 2);
  // A latent code of the wrong width is a format error.
  testing::write_file(dir / "short.tsv", "2\t0.5\t0.25\n");
  CHECK(run_cli(dir, "query --checkpoint meta/model.ckpt --code short.tsv --x-res 4 --t-res 4") == 3);
}

TEST_CASE("baseline and evaluation scopes", "[cli]") {
  const fs::path dir = small_workspace("cli_baseline");
  REQUIRE(run_cli(dir, "synth --config cfg.json --family 1 --mask random --density 0.6 --out d") == 0);
  REQUIRE(run_cli(dir, "baseline --config cfg.json --data d/instance_0.csv --mask d/instance_0.mask.csv --out b") == 0);
  CHECK(fs::exists(dir / "b" / "prediction.csv"));
  CHECK(testing::read_file(dir / "b" / "objective.csv").rfind("step,objective\n", 0) == 0);
  for (const char* scope : {"all", "observed", "unobserved"}) {
    CHECK(run_cli(dir, std::string("eval --pred b/prediction.csv --truth d/instance_0.csv --mask d/instance_0.mask.csv "
                                   "--scope ") + scope + " --out e_" + scope + ".csv") == 0);
  }
  const std::string obs = testing::read_file(dir / "e_observed.csv");
  const std::string unobs = testing::read_file(dir / "e_unobserved.csv");
  CHECK(obs != unobs);

  // A full mask leaves nothing unobserved.
  const GridField f = load_grid_csv(dir / "d" / "instance_0.csv");
  save_mask_csv(ObservationMask::full(f.space_size(), f.time_size()), f, dir / "full.csv");
  CHECK(run_cli(dir, "eval --pred b/prediction.csv --truth d/instance_0.csv --mask full.csv --scope unobserved") == 2);

  // mf checkpoints answer only on their own grid.
  CHECK(run_cli(dir, "query --checkpoint b/model.ckpt --x-res 7 --t-res 10 --out mq.csv") == 2);
  CHECK(run_cli(dir, "query --checkpoint b/model.ckpt --like d/instance_0.csv --out mq.csv") == 0);
  CHECK(load_grid_csv(dir / "mq.csv").values().size() == 120);
}

TEST_CASE("exit codes follow the error category", "[cli]") {
  const fs::path dir = small_workspace("cli_exit");
  REQUIRE(run_cli(dir, "synth --config cfg.json --family 1 --out d") == 0);
  CHECK(run_cli(dir, "fit --bogus-flag") == 2);
  CHECK(run_cli(dir, "frobnicate") == 2);
  testing::write_file(dir / "typo.json", R"({"encodng": {"width": 8}})");
  CHECK(run_cli(dir, "fit --config typo.json --data d/instance_0.csv --out never") == 2);
  CHECK_FALSE(fs::exists(dir / "never"));
  CHECK(run_cli(dir, "synth --config typo.json --out never") == 2);
  CHECK_FALSE(fs::exists(dir / "never"));
  CHECK(run_cli(dir, "fit --config cfg.json --kind ginr --data d/instance_0.csv --out never") == 2);
  CHECK_FALSE(fs::exists(dir / "never"));

  testing::write_file(dir / "bad.csv", "x\t0\t1\n0\t1\t2\n1\t3\n");
  CHECK(run_cli(dir, "fit --config cfg.json --data bad.csv --out never") == 3);
  testing::write_file(dir / "junk.ckpt", "not a checkpoint");
  CHECK(run_cli(dir, "query --checkpoint junk.ckpt --x-res 4 --t-res 4") == 3);

  // Two observed sensor rows of twelve and no ridge: the ALS solve is singular.
  testing::write_file(dir / "ridge0.json", R"({"mf": {"rank": 2, "lambda": 0, "sweeps": 2},
                                              "mask": {"pattern": "sensor-subset", "density": 0.17}})");
  CHECK(run_cli(dir, "baseline --config ridge0.json --data d/instance_0.csv --out b") == 4);
}

TEST_CASE("command functions validate before writing", "[cli]") {
  const fs::path dir = testing::scratch_dir("cli_functions");
  std::ostringstream log;
  SynthOptions s;
  s.common.out = (dir / "s").string();
  s.cells = 1;
  CHECK_THROWS_AS(cmd_synth(s, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "s"));

  s.cells = 8;
  s.steps = 6;
  s.family = 2;
  cmd_synth(s, log);
  CHECK(fs::exists(dir / "s" / "instance_1.csv"));

  FitOptions f;
  f.common.out = (dir / "f").string();
  f.data = (dir / "s" / "missing.csv").string();
  CHECK_THROWS_AS(cmd_fit(f, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "f"));

  MetaFitOptions m;
  m.common.out = (dir / "m").string();
  m.data = (dir / "nowhere").string();
  CHECK_THROWS_AS(cmd_meta_fit(m, log), ConfigError);
  CHECK_FALSE(fs::exists(dir / "m"));
}
