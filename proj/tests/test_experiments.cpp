// Copyright 2026 The assocmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "assocmem/experiments.hpp"
#include "assocmem/verify.hpp"

namespace assocmem {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& stem) {
    path = fs::temp_directory_path() / (stem + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

TEST(Fig2, LargeStepSpikesSmallStepDoesNot) {
  const auto cfg = figure_config("fig2");
  const auto emb = cfg.embedding;
  for (double eta : {1.0, 10.0}) {
    const auto rec = detail::gd_trace(emb, cfg.task, eta, 35, std::nullopt);
    double early = 0.0;
    for (std::size_t k = 1; k < rec.size() && rec.times[k] <= 5.0; ++k) early = std::max(early, rec.loss[k]);
    if (eta == 10.0) {
      EXPECT_GT(early, std::log(2.0));
    } else {
      EXPECT_LT(early, std::log(2.0));
      for (std::size_t k = 1; k < rec.size(); ++k) EXPECT_LE(rec.loss[k], rec.loss[k - 1] + 1e-15);
    }
  }
}

TEST(Fig2, SummaryFlags) {
  auto cfg = figure_config("fig2");
  cfg.landscape.n1 = cfg.landscape.n2 = 16;
  const auto a = run_fig2(cfg, 1);
  EXPECT_TRUE(a.summary["eta_10"]["spike_above_log2"].get<bool>());
  EXPECT_FALSE(a.summary["eta_1"]["spike_above_log2"].get<bool>());
}

TEST(Fig6, FrequentTokenLearnedFirstInMatchedDimension) {
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    const auto [emb, task] = fig6_problem(seed, 5, 0);
    const auto rec = detail::gd_trace(emb, task, 1.0, 10000, std::nullopt);
    const auto first = first_positive(rec, 0), last = first_positive(rec, 4);
    ASSERT_TRUE(first.has_value()) << seed;
    ASSERT_TRUE(last.has_value()) << seed;
    EXPECT_LT(*first, *last) << seed;
  }
}

TEST(Fig6, ProblemsAreSeeded) {
  const auto a = fig6_problem(3, 5, 0).first;
  const auto b = fig6_problem(3, 5, 0).first;
  const auto c = fig6_problem(3, 5, 1).first;
  EXPECT_EQ((a.inputs - b.inputs).norm(), 0.0);
  EXPECT_GT((a.inputs - c.inputs).norm(), 0.0);
  for (Index x = 0; x < 5; ++x) EXPECT_NEAR(a.inputs.row(x).norm(), 1.0, 1e-12);
}

TEST(AtomicWrite, ReplacesWholeFileAndLeavesNoTemp) {
  TempDir tmp("assocmem-atomic");
  const auto target = tmp.path / "out.csv";
  write_file_atomic(target, "first\n");
  write_file_atomic(target, "second\n");
  EXPECT_EQ(slurp(target), "second\n");
  std::size_t entries = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) entries += e.is_regular_file();
  EXPECT_EQ(entries, 1u);
}

TEST(AtomicWrite, MissingDirectoryIsIoError) {
  TempDir tmp("assocmem-atomic-missing");
  EXPECT_THROW(write_file_atomic(tmp.path / "nope" / "x.csv", "x"), IoError);
}

TEST(Verify, AllPropertiesPass) {
  const auto report = verify();
  EXPECT_EQ(report.results.size(), property_names().size());
  for (const auto& r : report.results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Verify, StrictPasses) {
  VerifyOptions opt;
  opt.strict = true;
  const auto report = verify(opt);
  for (const auto& r : report.results) EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
}

TEST(Verify, FlippedGradientIsCaught) {
  VerifyOptions opt;
  opt.grad_override = [](const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) -> Matrix {
    return -grad(W, emb, task);
  };
  opt.only = {"gradient_finite_difference"};
  const auto report = verify(opt);
  ASSERT_EQ(report.results.size(), 1u);
  EXPECT_FALSE(report.passed());
}

TEST(Verify, ScaledGradientIsCaught) {
  VerifyOptions opt;
  opt.grad_override = [](const Weights& W, const EmbeddingSet& emb, const TaskSpec& task) -> Matrix {
    return 1.001 * grad(W, emb, task);
  };
  opt.only = {"gradient_finite_difference"};
  EXPECT_FALSE(verify(opt).passed());
}

#ifdef ASSOCMEM_CLI_PATH
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(ASSOCMEM_CLI_PATH) + " " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

TEST(Cli, ExitCodes) {
  TempDir tmp("assocmem-cli");
  const auto log = tmp.path / "log.txt";
  {
    std::ofstream(tmp.path / "bad.toml") << "[dynamics]\netaa = 1.0\n";
    EXPECT_EQ(run_cli("simulate '" + (tmp.path / "bad.toml").string() + "'", log), 2);
    EXPECT_NE(slurp(log).find("dynamics.etaa"), std::string::npos) << slurp(log);
  }
  EXPECT_EQ(run_cli("simulate '" + (tmp.path / "missing.toml").string() + "'", log), 2);
  EXPECT_EQ(run_cli("frobnicate", log), 2);
  EXPECT_EQ(run_cli("reproduce fig9", log), 2);
  EXPECT_EQ(run_cli("--version", log), 0);
  EXPECT_NE(slurp(log).find(kVersion), std::string::npos);
  EXPECT_EQ(run_cli("list", log), 0);
  EXPECT_NE(slurp(log).find("fig6"), std::string::npos);

  std::ofstream(tmp.path / "ok.toml") << "id = \"ok\"\n[dynamics]\nt_end = 5\n";
  EXPECT_EQ(run_cli("--out '" + (tmp.path / "run").string() + "' simulate '" + (tmp.path / "ok.toml").string() + "'", log), 0)
      << slurp(log);
  EXPECT_TRUE(fs::exists(tmp.path / "run" / "manifest.json"));

  // Output path blocked by a regular file.
  std::ofstream(tmp.path / "blocker") << "x";
  EXPECT_EQ(run_cli("--out '" + (tmp.path / "blocker" / "sub").string() + "' simulate '" + (tmp.path / "ok.toml").string() + "'", log), 1);

  EXPECT_EQ(run_cli("verify --only model.", log), 0) << slurp(log);
}
#endif

}  // namespace
}  // namespace assocmem
