#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "mgvton/image_io.hpp"
#include "test_support.hpp"

using namespace mgvton;
using namespace mgvton::testing;
namespace fs = std::filesystem;

#ifndef MGVTON_CLI_PATH
#error "MGVTON_CLI_PATH must name the mgvton executable"
#endif

namespace {

struct RunResult {
  int code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const auto log = fs::temp_directory_path() / "mgvton_cli_test_output.txt";
  const std::string cmd = std::string(MGVTON_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const auto bytes = read_bytes(log);
  r.output.assign(bytes.begin(), bytes.end());
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string text_of(const fs::path& p) {
  const auto bytes = read_bytes(p);
  return {bytes.begin(), bytes.end()};
}

const std::string kQuickTrain =
    "--resolution 64x48 --epochs_parsing 1 --epochs_geo 1 --epochs_warp 1 --epochs_refine 1 "
    "--residual_blocks 1 --render_residual_blocks 1";

// Dataset of 12 triplets plus one-epoch checkpoints, built once.
const fs::path& workspace() {
  static const fs::path root = [] {
    const auto r = scratch_dir("cli");
    auto g = run("gen-data --count 12 --seed 5 --resolution 64x48 --out " + q(r / "data"));
    EXPECT_EQ(g.code, 0) << g.output;
    auto t = run("train --stage all --dataset " + q(r / "data") + " --checkpoints " + q(r / "ckpt") + " " +
                 kQuickTrain);
    EXPECT_EQ(t.code, 0) << t.output;
    return r;
  }();
  return root;
}

}  // namespace

TEST(Cli, GenDataRejectsNonPositiveCountWithoutWriting) {
  const auto root = scratch_dir("cli_zero");
  const auto out = root / "ds";
  const auto r = run("gen-data --count 0 --out " + q(out));
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, GenDataRefusesNonEmptyDirectoryUnlessOverwrite) {
  const auto root = scratch_dir("cli_refuse");
  std::ofstream(root / "keep.txt") << "x";
  const auto r = run("gen-data --count 2 --resolution 64x48 --out " + q(root));
  EXPECT_NE(r.code, 0);
  EXPECT_TRUE(fs::exists(root / "keep.txt"));
  EXPECT_FALSE(fs::exists(root / "manifest.tsv"));
  const auto o = run("gen-data --count 2 --resolution 64x48 --overwrite --out " + q(root));
  EXPECT_EQ(o.code, 0) << o.output;
  EXPECT_FALSE(fs::exists(root / "keep.txt"));
  EXPECT_TRUE(fs::exists(root / "manifest.tsv"));
}

TEST(Cli, GenDataDeterministic) {
  const auto a = scratch_dir("cli_det_a"), b = scratch_dir("cli_det_b");
  fs::remove_all(a);
  fs::remove_all(b);
  ASSERT_EQ(run("gen-data --count 3 --seed 9 --resolution 64x48 --out " + q(a)).code, 0);
  ASSERT_EQ(run("gen-data --count 3 --seed 9 --resolution 64x48 --out " + q(b)).code, 0);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(read_bytes(e.path()), read_bytes(b / fs::relative(e.path(), a))) << e.path();
  }
}

TEST(Cli, UnknownFlagAndMissingSubcommandRejected) {
  EXPECT_NE(run("gen-data --bogus 1").code, 0);
  EXPECT_NE(run("").code, 0);
  EXPECT_NE(run("train --stage nonsense").code, 0);
  EXPECT_NE(run("train --epochs_geo -3 --stage geo").code, 0);
}

TEST(Cli, TryOnWritesResultAndGrid) {
  const auto& root = workspace();
  const auto out = scratch_dir("cli_tryon");
  const auto person = root / "data" / "test" / "000005";
  const auto r = run("try-on --person " + q(person) + " --clothes 000011 --pose " + q(person / "target_pose.txt") +
                     " --dataset " + q(root / "data") + " --checkpoints " + q(root / "ckpt") + " --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto result = read_png(out / "result.png");
  EXPECT_EQ(result.height, 64);
  EXPECT_EQ(result.width, 48);
  const auto grid = read_png(out / "grid.png");
  EXPECT_GE(grid.width, 7 * 48);
  EXPECT_GT(grid.height, 64);
}

TEST(Cli, CorruptCheckpointNamedInError) {
  const auto& root = workspace();
  const auto broken = scratch_dir("cli_broken");
  for (const auto& e : fs::directory_iterator(root / "ckpt")) fs::copy(e.path(), broken / e.path().filename());
  {
    std::ofstream f(broken / "warp.ckpt", std::ios::binary | std::ios::trunc);
    f << "not a checkpoint";
  }
  const auto person = root / "data" / "test" / "000005";
  const auto r = run("try-on --person " + q(person) + " --clothes 000011 --pose " + q(person / "target_pose.txt") +
                     " --dataset " + q(root / "data") + " --checkpoints " + q(broken) + " --out " +
                     q(scratch_dir("cli_broken_out")));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.output.find("warp.ckpt"), std::string::npos) << r.output;
}

TEST(Cli, EvalReportIdenticalAcrossRuns) {
  const auto& root = workspace();
  const auto a = scratch_dir("cli_eval_a"), b = scratch_dir("cli_eval_b");
  const std::string common = " --checkpoints " + q(root / "ckpt") + " --dataset " + q(root / "data") + " --splits 1";
  const auto ra = run("eval" + common + " --out " + q(a));
  ASSERT_EQ(ra.code, 0) << ra.output;
  ASSERT_EQ(run("eval" + common + " --out " + q(b)).code, 0);
  const auto ta = text_of(a / "report.tsv");
  EXPECT_EQ(ta, text_of(b / "report.tsv"));
  EXPECT_NE(ta.find("model\tssim_mean\tssim_std\tis_mean\tis_std\tn\n"), std::string::npos);
  EXPECT_NE(ta.find("\nfull\t"), std::string::npos);
}

TEST(Cli, GridStacksRows) {
  const auto& root = workspace();
  const auto out = scratch_dir("cli_grid") / "grid.png";
  const auto r = run("grid --checkpoints " + q(root / "ckpt") + " --dataset " + q(root / "data") +
                     " --split train --count 3 --out " + q(out));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto img = read_png(out);
  EXPECT_GT(img.height, 3 * 64);
  EXPECT_GE(img.width, 8 * 48);
}
