#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "timberlens/cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = timberlens::cli::run(args, o, e);
  return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "timberlens_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    const auto r = run({"generate", "--out", (dir_ / "ds").string(), "--seed", "11", "--frames", "6",
                        "--width", "320", "--height", "180", "--threads", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto g = run({"perturb", "--dataset", dataset().string(), "--out", gt_preds().string()});
    ASSERT_EQ(g.code, 0) << g.err;
  }
  static fs::path gt_preds() { return dir_ / "gt_preds.json"; }
  static fs::path dataset() { return dir_ / "ds" / "annotations.json"; }
  static inline fs::path dir_;
};

}  // namespace

TEST_F(Cli, HelpAndUnknownCommand) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"bogus"}).code, 1);
  EXPECT_EQ(run({"evaluate", "--dataset", "x"}).code, 1);
}

TEST_F(Cli, ScenesTimesFramesListedInManifest) {
  const fs::path out = dir_ / "three";
  const auto r = run({"generate", "--out", out.string(), "--scenes", "3", "--frames", "30", "--width", "160",
                      "--height", "90", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["total_frames"], 90);
  int listed = 0;
  for (const auto& s : m["scenes"]) listed += static_cast<int>(s["images"].size());
  EXPECT_EQ(listed, 90);
  EXPECT_NE(r.out.find("total:"), std::string::npos);
}

TEST_F(Cli, GroundTruthScoresPerfect) {
  const fs::path sum = dir_ / "perfect.json";
  const auto r = run({"evaluate", "--dataset", dataset().string(), "--predictions", gt_preds().string(), "--out",
                      sum.string(), "--plots", (dir_ / "plots").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(slurp(sum));
  ASSERT_EQ(j["metrics"].size(), 8u);
  for (const auto& [k, v] : j["metrics"].items()) EXPECT_DOUBLE_EQ(v.get<double>(), 100.0) << k;
  EXPECT_TRUE(fs::exists(dir_ / "plots" / "pr_curves_bbox.svg"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run({"evaluate", "--dataset", dataset().string(), "--predictions", "/nonexistent.json"}).code, 2);
  spit(dir_ / "obj.json", "{\"a\": 1}");
  const auto bad = run({"evaluate", "--dataset", dataset().string(), "--predictions", (dir_ / "obj.json").string()});
  EXPECT_EQ(bad.code, 3);
  spit(dir_ / "unknown.json", R"([{"image_id": 999999, "category_id": 1, "bbox": [0, 0, 5, 5], "score": 1}])");
  const auto unk =
      run({"evaluate", "--dataset", dataset().string(), "--predictions", (dir_ / "unknown.json").string()});
  EXPECT_EQ(unk.code, 3);
  EXPECT_NE(unk.err.find("999999"), std::string::npos) << unk.err;
  EXPECT_EQ(run({"perturb", "--dataset", dataset().string(), "--out", (dir_ / "p.json").string(), "--p-fn", "2"}).code,
            1);
}

TEST_F(Cli, ConfigPrecedence) {
  const fs::path cfg = dir_ / "cfg.json";
  spit(cfg, json{{"dataset", dataset().string()}, {"out", (dir_ / "cfg_out.json").string()}, {"p_fn", 1.0}}.dump());
  ASSERT_EQ(run({"perturb", "--config", cfg.string()}).code, 0);
  EXPECT_EQ(json::parse(slurp(dir_ / "cfg_out.json")).size(), 0u);
  // The flag beats the file.
  ASSERT_EQ(run({"perturb", "--config", cfg.string(), "--p-fn", "0"}).code, 0);
  EXPECT_GT(json::parse(slurp(dir_ / "cfg_out.json")).size(), 0u);

  spit(cfg, json{{"dataset", dataset().string()}, {"out", "x.json"}, {"p_fnn", 1.0}}.dump());
  EXPECT_EQ(run({"perturb", "--config", cfg.string()}).code, 1);
  spit(cfg, json{{"dataset", dataset().string()}, {"out", "x.json"}, {"p_fn", "high"}}.dump());
  EXPECT_EQ(run({"perturb", "--config", cfg.string()}).code, 1);
  spit(cfg, "[1, 2]");
  EXPECT_EQ(run({"perturb", "--config", cfg.string()}).code, 1);
}

TEST_F(Cli, PerturbZeroNoiseIsByteStable) {
  const fs::path a = dir_ / "z1.json", b = dir_ / "z2.json";
  ASSERT_EQ(run({"perturb", "--dataset", dataset().string(), "--out", a.string()}).code, 0);
  ASSERT_EQ(run({"perturb", "--dataset", dataset().string(), "--out", b.string(), "--threads", "3"}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(Cli, KeypointEvalOnExactKeypoints) {
  const fs::path rep = dir_ / "kp.json";
  const auto r = run({"kp-eval", "--dataset", dataset().string(), "--predictions", gt_preds().string(), "--out",
                      rep.string(), "--plots", (dir_ / "kp_plots").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "kp_plots" / "error_vs_distance.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "kp_plots" / "fc_scatter.svg"));
}

TEST_F(Cli, AnalyzeSubmodes) {
  spit(dir_ / "pts.json", R"([{"n": 100, "ap": 60}, {"n": 200, "ap": 61.5}, {"n": 400, "ap": 63}])");
  const auto sc = run({"analyze", "scaling", "--input", (dir_ / "pts.json").string(), "--out",
                       (dir_ / "scaling.json").string()});
  ASSERT_EQ(sc.code, 0) << sc.err;
  EXPECT_NEAR(json::parse(slurp(dir_ / "scaling.json"))["fits"][0]["slope_per_doubling"].get<double>(), 1.5, 1e-9);

  spit(dir_ / "two.json", R"([{"n": 100, "ap": 60}, {"n": 200, "ap": 61.5}])");
  EXPECT_EQ(run({"analyze", "scaling", "--input", (dir_ / "two.json").string()}).code, 1);

  const auto oc = run({"analyze", "occlusion", "--dataset", dataset().string(), "--predictions",
                       gt_preds().string(), "--out", (dir_ / "occ.json").string()});
  ASSERT_EQ(oc.code, 0) << oc.err;
  EXPECT_EQ(run({"analyze", "nothing"}).code, 1);
}

TEST_F(Cli, OutputsIndependentOfThreadCount) {
  std::string gen_ref, eval_ref;
  const fs::path preds = dir_ / "noisy.json";
  ASSERT_EQ(run({"perturb", "--dataset", dataset().string(), "--out", preds.string(), "--sigma-b", "3",
                 "--p-fn", "0.2", "--lambda-fp", "1", "--seed", "4"})
                .code,
            0);
  for (const char* t : {"1", "4", "16"}) {
    const fs::path out = dir_ / (std::string("t") + t);
    ASSERT_EQ(run({"generate", "--out", out.string(), "--seed", "5", "--scenes", "2", "--frames", "4", "--width",
                   "160", "--height", "90", "--threads", t})
                  .code,
              0);
    ASSERT_EQ(run({"evaluate", "--dataset", dataset().string(), "--predictions", preds.string(), "--out",
                   (out / "summary.json").string(), "--threads", t})
                  .code,
              0);
    std::string gen = slurp(out / "annotations.json") + slurp(out / "manifest.json");
    for (const auto& e : fs::recursive_directory_iterator(out))
      if (e.path().extension() == ".png") gen += slurp(e.path());
    const std::string ev = slurp(out / "summary.json");
    if (gen_ref.empty()) {
      gen_ref = gen;
      eval_ref = ev;
    } else {
      EXPECT_EQ(gen, gen_ref) << t;
      EXPECT_EQ(ev, eval_ref) << t;
    }
  }
}
