/*
 * Copyright 2026 The pathnas Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <regex>
#include <sstream>

#include "fixtures.hpp"
#include "pathnas/commands.hpp"

namespace pathnas {
namespace {

namespace fs = std::filesystem;

std::size_t count_lines(const fs::path& p) {
  std::istringstream in(testing::read_file(p));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

class Commands : public ::testing::Test {
 protected:
  void SetUp() override {
    testing::write_countries_fixture(tmp / "countries");
    const std::string text =
        "[run]\nseed = 3\n"
        "[task]\nkind = countries\ndata = countries\ncountries_task = S1\n"
        "[walk]\npaths_per_triplet = 1\n"
        "[train]\ndim = 8\nepochs = 2\nbatch_size = 128\n"
        "[search]\nouter_iterations = 2\n"
        "[tune]\ntrials = 2\n"
        "[countries]\nmode = P1\nsamples = 2\nrepeats = 2\n";
    testing::write_file(tmp / "run.ini", text);
    cfg = load_run_config(tmp / "run.ini");
    fan_out_seeds(cfg);
  }
  testing::TempDir tmp;
  RunConfig cfg;
};

TEST_F(Commands, SamplePathsWritesTheCorpus) {
  auto o = cmd_sample_paths(cfg, tmp / "sp");
  EXPECT_GT(o.num_paths, 0u);
  EXPECT_EQ(count_lines(tmp / "sp" / "paths.tsv"), o.num_paths);
  auto summary = nlohmann::json::parse(testing::read_file(tmp / "sp" / "summary.json"));
  EXPECT_EQ(summary["num_paths"], o.num_paths);
  EXPECT_TRUE(fs::exists(tmp / "sp" / "paths.bin"));
  EXPECT_TRUE(fs::exists(tmp / "sp" / "config.ini"));
}

TEST_F(Commands, TrainWritesHistoryAndReport) {
  auto o = cmd_train(cfg, "transe", tmp / "train");
  const fs::path d = tmp / "train";
  EXPECT_EQ(count_lines(d / "history.jsonl"), 2u);
  ASSERT_EQ(count_lines(d / "report.jsonl"), 1u);
  auto rep = nlohmann::json::parse(testing::read_file(d / "report.jsonl"));
  EXPECT_EQ(rep["genotype"], to_string(preset("transe")));
  EXPECT_EQ(rep["checkpoint_hash"], file_crc32(d / "model.ckpt"));
  EXPECT_TRUE(rep["metrics"].contains("auc_pr"));
  EXPECT_NE(testing::read_file(d / "report.txt").find("auc_pr"), std::string::npos);
  EXPECT_EQ(o.checkpoint_hash, rep["checkpoint_hash"]);
}

TEST_F(Commands, RunDirectoryReproducesTheRun) {
  auto a = cmd_train(cfg, "complex", tmp / "a");
  RunConfig again = load_run_config(tmp / "a" / "config.ini");
  fan_out_seeds(again);
  auto b = cmd_train(again, "complex", tmp / "b");
  EXPECT_EQ(a.checkpoint_hash, b.checkpoint_hash);
  EXPECT_EQ(a.test, b.test);
  EXPECT_EQ(testing::read_file(tmp / "a" / "config.ini"), testing::read_file(tmp / "b" / "config.ini"));
}

TEST_F(Commands, EvalReproducesTheTrainReport) {
  auto t = cmd_train(cfg, "ptranse_add", tmp / "train");
  auto e = cmd_eval(cfg, tmp / "train" / "model.ckpt", tmp / "eval");
  EXPECT_EQ(e.genotype, t.genotype);
  EXPECT_EQ(e.test, t.test);
  EXPECT_TRUE(fs::exists(tmp / "eval" / "report.jsonl"));
}

TEST_F(Commands, EvalRejectsCorruptCheckpoints) {
  cmd_train(cfg, "transe", tmp / "train");
  std::string bytes = testing::read_file(tmp / "train" / "model.ckpt");
  bytes[bytes.size() / 2] ^= 0x5a;
  testing::write_file(tmp / "bad.ckpt", bytes);
  EXPECT_THROW(cmd_eval(cfg, tmp / "bad.ckpt", tmp / "eval"), IntegrityError);
}

TEST_F(Commands, EvalRejectsCheckpointsOfAnotherDataset) {
  ParameterStore<double> s(5, 4, 8, 1);
  save_checkpoint(s, to_string(preset("transe")), tmp / "other.ckpt");
  EXPECT_THROW(cmd_eval(cfg, tmp / "other.ckpt", tmp / "eval"), IntegrityError);
}

TEST_F(Commands, SearchWritesLogsAndResumes) {
  auto o = cmd_search(cfg, tmp / "search");
  const fs::path d = tmp / "search";
  EXPECT_EQ(count_lines(d / kSearchLogFile), o.result.log.size());
  EXPECT_GT(count_lines(d / "top_k.jsonl"), 0u);
  EXPECT_TRUE(fs::exists(d / "best" / "report.jsonl"));
  EXPECT_EQ(o.best.genotype, o.result.best().genotype);
  // resuming a finished search runs no further iterations
  auto r = cmd_search(cfg, d, true);
  EXPECT_EQ(r.result.log.size(), o.result.log.size());
  EXPECT_EQ(r.best.checkpoint_hash, o.best.checkpoint_hash);
}

TEST_F(Commands, TuneWritesTrialTable) {
  auto o = cmd_tune(cfg, "transe", tmp / "tune");
  EXPECT_EQ(count_lines(tmp / "tune" / "trials.jsonl"), 2u);
  auto best = nlohmann::json::parse(testing::read_file(tmp / "tune" / "best_config.json"));
  EXPECT_EQ(best["trial_id"], o.best.trial_id);
  EXPECT_EQ(best["config"], config_json(o.trials[o.best.trial_id].spec.cfg));
}

TEST_F(Commands, CountriesSubspaceTableRow) {
  auto o = cmd_countries(cfg, tmp / "countries_run");
  ASSERT_EQ(o.test_auc.size(), 2u);
  EXPECT_EQ(count_lines(tmp / "countries_run" / "samples.jsonl"), 4u);
  const std::string table = testing::read_file(tmp / "countries_run" / "countries_table.txt");
  EXPECT_TRUE(std::regex_search(table, std::regex(R"(S1 \| P1 \| \d\.\d{3} \+- \d\.\d{3})")))
      << table;
  const auto [mean, sd] = mean_std(o.test_auc);
  EXPECT_EQ(o.mean, mean);
  EXPECT_EQ(o.std, sd);
  for (const auto& g : o.best_genotypes) {
    const auto in_r = parse_genotype(g).macro.in_r;
    EXPECT_TRUE(in_r != Connection::HPrev && in_r != Connection::OsOut) << g;
  }
}

TEST_F(Commands, CountriesRequiresTheCountriesKind) {
  cfg.kind = TaskKind::LinkPrediction;
  EXPECT_THROW(cmd_countries(cfg, tmp / "c"), ConfigError);
}

TEST(RunDir, Resolution) {
  RunConfig c;
  c.seed = 4;
  c.kind = TaskKind::Countries;
  c.countries_task = CountriesTask::S2;
  EXPECT_EQ(resolve_run_dir(c, "train", fs::path("x")), fs::path("x"));
  ::setenv(kOutputRootEnv, "/tmp/root", 1);
  EXPECT_EQ(resolve_run_dir(c, "train"), fs::path("/tmp/root/train-countries-S2-seed4"));
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(resolve_run_dir(c, "train"), fs::path("runs/train-countries-S2-seed4"));
  c.output_dir = "/o";
  EXPECT_EQ(resolve_run_dir(c, "train"), fs::path("/o"));
}

TEST(Summary, MeanAndSampleStd) {
  auto [m, s] = mean_std({1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(m, 2.0);
  EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_EQ(format_mean_std(0.9333, 0.0312), "0.933 +- 0.031");
}

// --- the binary ---------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(PATHNAS_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

TEST_F(Commands, BinaryExitCodes) {
  const fs::path log = tmp / "log.txt";
  const std::string conf = "--config " + (tmp / "run.ini").string();
  EXPECT_EQ(run_cli("train " + conf + " --genotype transe --quiet --out " + (tmp / "t").string(), log), 0)
      << testing::read_file(log);
  EXPECT_NE(testing::read_file(log).find("auc_pr"), std::string::npos);

  std::string bytes = testing::read_file(tmp / "t" / "model.ckpt");
  bytes[bytes.size() - 3] ^= 0x01;
  testing::write_file(tmp / "bad.ckpt", bytes);
  EXPECT_EQ(run_cli("eval " + conf + " --quiet --checkpoint " + (tmp / "bad.ckpt").string() +
                        " --out " + (tmp / "e").string(),
                    log),
            3);

  testing::write_file(tmp / "bad.ini", "[train]\nlr = 0.5\n[task]\nkind = countries\ndata = countries\n");
  EXPECT_EQ(run_cli("train --config " + (tmp / "bad.ini").string() + " --genotype transe", log), 2);
  EXPECT_NE(testing::read_file(log).find("lr"), std::string::npos);

  EXPECT_NE(run_cli("train " + conf, log), 0);  // --genotype missing
  EXPECT_NE(run_cli("frobnicate", log), 0);
  EXPECT_EQ(run_cli("train " + conf + " --genotype distmult --quiet", log), 2);
}

TEST_F(Commands, BinaryCountriesOverrides) {
  const fs::path log = tmp / "log.txt";
  EXPECT_EQ(run_cli("countries --config " + (tmp / "run.ini").string() +
                        " --task S2 --mode P3 -N 1 -R 1 --quiet --out " + (tmp / "c").string(),
                    log),
            0)
      << testing::read_file(log);
  EXPECT_NE(testing::read_file(log).find("S2 | P3 | "), std::string::npos);
}

}  // namespace
}  // namespace pathnas
