#include <doctest.h>

#include <fstream>
#include <iterator>

#include "domino/cli.hpp"
#include "helpers.hpp"

using namespace domino;
using namespace domino::cli;
using testutil::TempDir;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string error_of(std::string_view text) {
  try {
    parse_config_text(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

bool contains(const std::string& s, std::string_view needle) { return s.find(needle) != std::string::npos; }

trainer::TrainConfig tiny(std::vector<std::string> edges) {
  trainer::TrainConfig cfg;
  cfg.edges = std::move(edges);
  cfg.epochs = cfg.eval_epochs = 1;
  cfg.batch = 32;
  cfg.base_channels = 4;
  cfg.dataset.n = 128;
  cfg.dataset.holdout = 64;
  return cfg;
}

}  // namespace

TEST_CASE("a minimal config fills in defaults") {
  const auto cfg = parse_train_config(R"({"edges": ["RR:0-1"]})");
  REQUIRE(cfg.edges.size() == 1);
  CHECK(cfg.edges[0] == "RR:0-1");
  CHECK(cfg.schedule.lr == doctest::Approx(4e-4));
  CHECK(cfg.schedule.max_lr == doctest::Approx(0.01));
  CHECK(cfg.batch == 64);
  CHECK(cfg.epochs == cfg.eval_epochs);
}

TEST_CASE("run keys override defaults and epochs drives both phases") {
  const auto cfg = parse_train_config(
      R"({"edges": "RR-AE", "lr": 1e-3, "max_lr": 0.02, "batch": 16, "epochs": 3, "seed": 7,
          "weights": {"AE:0": 0.5}, "precision": "f64", "dataset": {"kind": "synth", "n": 300}})");
  CHECK(cfg.edges == std::vector<std::string>{"RR-AE"});
  CHECK(cfg.schedule.lr == doctest::Approx(1e-3));
  CHECK(cfg.schedule.max_lr == doctest::Approx(0.02));
  CHECK(cfg.batch == 16);
  CHECK(cfg.epochs == 3);
  CHECK(cfg.eval_epochs == 3);
  CHECK(cfg.seed == 7);
  CHECK(cfg.weights.at("AE:0") == doctest::Approx(0.5));
  CHECK(cfg.dataset.kind == "synth");
  CHECK(cfg.dataset.n == 300);
}

TEST_CASE("presets set the dataset and width") {
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset_config(name));
  const auto desk = parse_train_config(R"({"preset": "desk", "edges": ["CR:0"]})");
  CHECK(desk.dataset.kind == "synth_two_view");
  CHECK(desk.dataset.n == 10000);
  CHECK(desk.dataset.holdout == 2000);
  CHECK(desk.batch == 64);
  CHECK(contains(error_of(R"({"preset": "huge", "edges": ["CR:0"]})"), "huge"));
}

TEST_CASE("bad configs are rejected with a message naming the problem") {
  const auto qq = error_of(R"({"edges": ["QQ:0-1"]})");
  CHECK(contains(qq, "QQ"));
  CHECK(contains(qq, "cfg.json"));
  CHECK(contains(error_of(""), "empty"));
  CHECK(contains(error_of("  \n"), "empty"));
  CHECK(contains(error_of(R"({"edges": ["RR:0-1"], "learning_rate": 1})"), "learning_rate"));
  CHECK(contains(error_of(R"({"edges": ["RR:0-1"], "batch": "big"})"), "batch"));
  CHECK(contains(error_of(R"({"edges": ["RR:0-1"], "precision": "f16"})"), "f16"));
  CHECK(contains(error_of(R"({"edges": ["RR:0-1"], "dataset": {"kind": "cifar"}})"), "cifar"));
  CHECK_FALSE(error_of(R"({"edges": ["RR:0-0"]})").empty());
  CHECK_FALSE(error_of(R"({"edges": ["RR:0-1"], "batch": 0})").empty());
}

TEST_CASE("malformed json reports where it broke") {
  const auto msg = error_of("{\n  \"edges\": [\"RR:0-1\",]\n}");
  CHECK(contains(msg, "malformed JSON"));
  CHECK(contains(msg, "line 2"));
}

TEST_CASE("manifests parse cells and inherit the preset") {
  const auto parsed = parse_config_text(R"({"out": "runs/x", "preset": "small",
      "cells": [{"name": "CR", "edges": "CR"}, {"name": "RR", "edges": ["RR:0-1"], "seeds": [0, 1, 2]}]})");
  REQUIRE(std::holds_alternative<trainer::Manifest>(parsed));
  const auto& m = std::get<trainer::Manifest>(parsed);
  CHECK(m.out_dir == "runs/x");
  REQUIRE(m.cells.size() == 2);
  CHECK(m.cells[0].name == "CR");
  CHECK(m.cells[0].config.name == "CR");
  CHECK(m.cells[0].seeds == std::vector<std::uint64_t>{0});
  CHECK(m.cells[1].seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(m.cells[1].config.dataset.n == preset_config("small").dataset.n);

  CHECK(std::holds_alternative<trainer::TrainConfig>(parse_config_text(R"({"edges": ["CR:0"]})")));
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(parse_manifest(R"({"cells": [{"name": "A", "edges": "RR"}, {"name": "A", "edges": "CR"}]})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_manifest(R"({"cells": [{"edges": "RR"}]})"), ConfigError);
  CHECK_THROWS_AS(parse_manifest(R"({"cells": [{"name": "A", "edges": "RR", "seed": 1}]})"), ConfigError);
  CHECK_THROWS_AS(parse_manifest(R"({"cells": [{"name": "A", "edges": "RR", "seeds": []}]})"), ConfigError);
  CHECK_THROWS_AS(parse_manifest(R"({"out": "x"})"), ConfigError);
}

TEST_CASE("config files are read from disk") {
  TempDir dir("cfg");
  {
    std::ofstream(dir / "run.json") << R"({"edges": ["XX:0-1"]})";
  }
  CHECK(std::get<trainer::TrainConfig>(parse_config(dir / "run.json")).edges[0] == "XX:0-1");
  try {
    parse_config(dir / "missing.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(contains(e.what(), "missing.json"));
  }
}

TEST_CASE("format_cell") {
  CHECK(format_cell(0.97314) == "0.9731");
  CHECK(format_cell(0.5, 2) == "0.50");
  CHECK(format_cell(std::nan("")) == "—");
  CHECK(format_cell(INFINITY) == "—");
}

TEST_CASE("report tables, gaps and idempotent regeneration") {
  TempDir dir("report");
  trainer::Manifest manifest;
  manifest.out_dir = dir.path();
  trainer::ExperimentCell cell;
  cell.name = "RR";
  cell.config = tiny({"RR:0-1"});
  manifest.cells.push_back(cell);
  REQUIRE(trainer::run_experiment(manifest).ok());

  const auto first = emit_report(dir.path());
  CHECK(first.gaps.empty());
  const auto md = read_bytes(first.markdown);
  CHECK(contains(md, "| model | modality | split | mean | sd | seeds |"));
  CHECK(contains(md, "train cca | train svcca | train pwcca_ij | train pwcca_ji | train cka |"));
  CHECK(contains(md, "holdout cca | holdout svcca | holdout pwcca_ij | holdout pwcca_ji | holdout cka |"));
  CHECK(contains(md, "| — | 1 |"));
  CHECK_FALSE(contains(md, "## Gaps"));

  emit_report(dir.path());
  CHECK(read_bytes(first.markdown) == md);

  std::filesystem::remove(dir.path() / "RR" / "seed_0" / "similarity.json");
  const auto partial = emit_report(dir.path());
  REQUIRE(partial.gaps.size() == 1);
  CHECK(contains(partial.gaps[0], "RR/seed_0"));
  CHECK(contains(partial.gaps[0], "similarity.json"));
  CHECK(contains(read_bytes(partial.markdown), "## Gaps"));

  CHECK_THROWS(emit_report(dir / "nope"));
}
