// Copyright 2026 The fnproc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fnproc/checkpoint.hpp"
#include "fnproc/config.hpp"
#include "fnproc/model.hpp"
#include "fnproc/runner.hpp"

using namespace fnproc;
using nlohmann::json;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("fnproc_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::filesystem::path write_config(const std::filesystem::path& dir, const json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const json& j) {
  try {
    (void)parse_run_config(j, std::filesystem::temp_directory_path());
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

CheckpointError::Kind checkpoint_error(const std::string& text) {
  try {
    (void)parse_checkpoint(text);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  FAIL("expected CheckpointError");
  return CheckpointError::Kind::kIo;
}

Checkpoint sample_checkpoint() {
  ModelConfig mc;
  mc.torso_hidden = {3};
  mc.head_hidden = 2;
  mc.d_z = 2;
  const FnpModel model(mc, 4);
  Checkpoint ck;
  ck.seed = 4;
  ck.model = "fnp";
  ck.config = json{{"task", "toy1"}};
  ck.reference = {1, 5, 9};
  ck.params = model.params();
  return ck;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("configuration errors") {
    CHECK(config_error(json{{"task", "toy1"}, {"model", "fnp"}}).empty());
    CHECK(config_error(json{{"task", "toy3"}, {"model", "fnp"}}).rfind("task", 0) == 0);
    CHECK(config_error(json{{"task", "toy1"}, {"model", "svm"}}).rfind("model", 0) == 0);
    CHECK(
        config_error(json{{"task", "toy1"}, {"model", "fnp"}, {"train", {{"epochs", -1}}}}).rfind("train.epochs", 0) ==
        0);
    CHECK(config_error(json{{"task", "toy1"}, {"model", "fnp"}, {"architecture", {{"d_u", "x"}}}})
              .rfind("architecture.d_u", 0) == 0);
    CHECK(config_error(json{{"task", "idx-classification"},
                            {"model", "fnp"},
                            {"data", {{"images", "no/such/file"}, {"labels", "no/such/file"}}}})
              .rfind("data.", 0) == 0);
    CHECK_FALSE(config_error(json::array()).empty());

    const auto base = std::filesystem::temp_directory_path();
    const RunConfig c = parse_run_config(json{{"task", "toy2"}, {"model", "fnp-plus"}}, base);
    CHECK(c.task == TaskName::kToy2);
    CHECK(c.model == ModelKind::kFnpPlus);
    CHECK(parse_run_config(c.to_json(), base).to_json() == c.to_json());
  }

  TEST_CASE("checkpoint round trip") {
    const Checkpoint ck = sample_checkpoint();
    const std::string text = serialize_checkpoint(ck);
    const Checkpoint back = parse_checkpoint(text);
    CHECK(back.params == ck.params);
    CHECK(back.reference == ck.reference);
    CHECK(back.seed == 4);
    CHECK(serialize_checkpoint(back) == text);

    const auto dir = fresh_dir("ckpt");
    save_checkpoint(dir / "a.json", ck);
    CHECK(slurp(dir / "a.json") == text);
    CHECK(load_checkpoint(dir / "a.json").params == ck.params);
    try {
      (void)load_checkpoint(dir / "missing.json");
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kIo);
    }
  }

  TEST_CASE("checkpoint rejects tampering") {
    const Checkpoint ck = sample_checkpoint();
    const json j = json::parse(serialize_checkpoint(ck));

    CHECK(checkpoint_error("{not json") == CheckpointError::Kind::kParse);

    json v = j;
    v["format_version"] = kCheckpointVersion + 1;
    CHECK(checkpoint_error(v.dump()) == CheckpointError::Kind::kVersion);

    json s = j;
    auto& first = s["parameters"][0];
    first["shape"][0] = first["shape"][0].get<std::size_t>() + 1;
    CHECK(checkpoint_error(s.dump()) == CheckpointError::Kind::kShape);

    json d = j;
    d["parameters"].push_back(d["parameters"][0]);
    CHECK(checkpoint_error(d.dump()) == CheckpointError::Kind::kDuplicate);

    ParameterStore target = ck.params;
    ParameterStore partial;
    partial.add("log_tau", ck.params.get("log_tau"));
    try {
      restore_parameters(target, partial);
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::kMissingParameter);
    }
    CHECK_NOTHROW(restore_parameters(target, ck.params));
  }

  TEST_CASE("commands") {
    const auto dir = fresh_dir("cmd");
    std::ostringstream log;

    SUBCASE("unknown command and bad config") {
      CHECK(run_command("fly", CommandOptions{write_config(dir, json{{"task", "toy1"}, {"model", "fnp"}})}, log) ==
            kExitConfig);
      CHECK(run_command("train", CommandOptions{dir / "absent.json"}, log) == kExitConfig);
      CHECK(run_command("train", CommandOptions{write_config(dir, json{{"task", "toy1"}})}, log) == kExitConfig);
      CHECK(run_command(
                "eval",
                CommandOptions{write_config(dir, json{{"task", "toy1"}, {"model", "fnp"}, {"output_dir", "empty"}})},
                log) == kExitConfig);
    }

    SUBCASE("toy training writes parseable files") {
      const json cfg{{"task", "toy1"}, {"model", "fnp"}, {"output_dir", "run"}, {"train", {{"epochs", 20}}}};
      const CommandOptions opts{write_config(dir, cfg)};
      REQUIRE(run_command("train", opts, log) == kExitOk);
      const auto out = dir / "run";
      CHECK_NOTHROW(load_checkpoint(out / "model.ckpt.json"));
      std::ifstream metrics(out / "metrics.csv");
      std::string line;
      std::size_t lines = 0;
      while (std::getline(metrics, line)) ++lines;
      CHECK(lines == 21);

      REQUIRE(run_command("eval", opts, log) == kExitOk);
      const json report = json::parse(slurp(out / "report.json"));
      CHECK(report["task"] == "toy1");
      CHECK(report["model"] == "fnp");
      CHECK(report["test"].contains("rmse"));

      REQUIRE(run_command("bands", opts, log) == kExitOk);
      std::ifstream bands(out / "bands.csv");
      std::getline(bands, line);
      CHECK(line == "x,mean,lo,hi");
      std::size_t rows = 0;
      while (std::getline(bands, line)) ++rows;
      CHECK(rows == 200);
    }

    SUBCASE("zero epochs store the initialization") {
      const json cfg{
          {"task", "toy2"}, {"model", "fnp-plus"}, {"seed", 7}, {"output_dir", "init"}, {"train", {{"epochs", 0}}}};
      REQUIRE(run_command("train", CommandOptions{write_config(dir, cfg)}, log) == kExitOk);
      const RunConfig rc = load_run_config(dir / "config.json");
      const Checkpoint ck = load_checkpoint(dir / "init" / "model.ckpt.json");
      const PreparedData data = prepare_data(rc);
      FnpModel fresh(rc.model_config(1, 0), 7);
      fresh.fit_standardization(data.dataset(), data.dataset().indices(data::Split::kTrain));
      CHECK(ck.params == fresh.params());
    }

    SUBCASE("seed override") {
      const json cfg{{"task", "toy1"}, {"model", "gp"}, {"output_dir", "gp"}};
      CommandOptions opts{write_config(dir, cfg)};
      opts.seed = 3;
      opts.out = dir / "gp3";
      REQUIRE(run_command("train", opts, log) == kExitOk);
      CHECK(load_checkpoint(dir / "gp3" / "model.ckpt.json").seed == 3);
      CHECK_FALSE(std::filesystem::exists(dir / "gp"));
    }
  }

  TEST_CASE("bands need a regression checkpoint") {
    const auto dir = fresh_dir("cls");
    // A tiny classification set in IDX form.
    std::vector<std::uint8_t> px(40 * 4), labels(40);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      labels[i] = static_cast<std::uint8_t>(i % 2);
      for (std::size_t k = 0; k < 4; ++k) px[4 * i + k] = static_cast<std::uint8_t>(labels[i] ? 200 + k : 20 + 3 * k);
    }
    data::write_idx_images(dir / "img", px, 40, 2, 2);
    data::write_idx_labels(dir / "lab", labels);
    const json cfg{{"task", "idx-classification"},
                   {"model", "fnp"},
                   {"output_dir", "out"},
                   {"architecture", {{"torso_hidden", {8}}, {"d_u", 2}, {"d_z", 3}, {"head_hidden", 8}}},
                   {"train", {{"epochs", 3}, {"batch_size", 10}, {"reference_size", 5}}},
                   {"data", {{"images", "img"}, {"labels", "lab"}, {"train", 20}, {"val", 5}, {"test", 10}}},
                   {"eval", {{"samples", 5}, {"ood", {{{"name", "same"}, {"kind", "test"}}}}}}};
    const CommandOptions opts{write_config(dir, cfg)};
    std::ostringstream log;
    REQUIRE(run_command("train", opts, log) == kExitOk);
    CHECK(run_command("bands", opts, log) == kExitConfig);
    REQUIRE(run_command("eval", opts, log) == kExitOk);
    const json report = json::parse(slurp(dir / "out" / "report.json"));
    CHECK(report["test"].contains("error"));
    // The same points scored twice with the same noise cannot be told apart.
    CHECK(report["ood"][0]["aucr"].get<double>() == doctest::Approx(0.5).epsilon(1e-12));
  }

}  // TEST_SUITE
