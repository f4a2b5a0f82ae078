/*
 * Copyright 2026 The uiprune Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "uiprune/app.hpp"

#include "uiprune/image_io.hpp"
#include "uiprune/supervision.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace uiprune::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using uiprune::testing::TempDir;

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_json(const fs::path& p)
{
    return json::parse(slurp(p));
}

void write_text(const fs::path& p, const std::string& s)
{
    std::ofstream(p) << s;
}

std::string record(const std::string& image, const BBox& b, const std::string& instr = "click it")
{
    return json{{"image", image}, {"instruction", instr}, {"bbox", {b.x1, b.y1, b.x2, b.y2}}}.dump() + "\n";
}

RunConfig config_with(const Settings& s)
{
    return config_from_settings(s);
}

TEST(Config, Defaults)
{
    const RunConfig c = config_from_settings({});
    EXPECT_EQ(c.patch_size, 14u);
    EXPECT_DOUBLE_EQ(c.lambda, 0.8);
    EXPECT_DOUBLE_EQ(c.tau, 2.0);
    EXPECT_DOUBLE_EQ(c.ratio, 0.5);
    EXPECT_EQ(c.variant, PadVariant::SequenceEnd);
    EXPECT_EQ(c.dim, 8u);
}

TEST(Config, FileThenOverrides)
{
    TempDir dir("cfg");
    write_text(dir / "run.conf", "# sample\npatch-size = 4\nvariant=middle\n\nratio = 0.25 # trailing\n");
    Settings s = read_config_file(dir / "run.conf");
    s["ratio"] = "0.75";
    const RunConfig c = config_from_settings(s);
    EXPECT_EQ(c.patch_size, 4u);
    EXPECT_EQ(c.variant, PadVariant::SequenceMiddle);
    EXPECT_DOUBLE_EQ(c.ratio, 0.75);
}

TEST(Config, RejectsBadValues)
{
    EXPECT_THROW(config_with({{"ratio", "0"}}), UsageError);
    EXPECT_THROW(config_with({{"ratio", "abc"}}), UsageError);
    EXPECT_THROW(config_with({{"lambda", "1.2"}}), UsageError);
    EXPECT_THROW(config_with({{"patch-size", "-3"}}), UsageError);
    EXPECT_THROW(config_with({{"variant", "sideways"}}), UsageError);
    EXPECT_THROW(config_with({{"colour", "red"}}), UsageError);
    EXPECT_THROW(config_with({{"workers", "0"}}), UsageError);
    TempDir dir("cfgbad");
    write_text(dir / "bad.conf", "patch-size 4\n");
    EXPECT_THROW(read_config_file(dir / "bad.conf"), UsageError);
    EXPECT_THROW(read_config_file(dir / "missing.conf"), UsageError);
}

TEST(Dataset, ParsesAndReportsBadLines)
{
    TempDir dir("ds");
    write_text(dir / "d.jsonl", record("a.png", {0, 0, 4, 4}) + "\n{not json}\n" +
                                    R"({"image":"b.png","instruction":"x","bbox":[4,4,1,1]})" + "\n" +
                                    record("/abs/c.png", {1, 1, 2, 2}));
    const Dataset ds = load_dataset(dir / "d.jsonl");
    ASSERT_EQ(ds.records.size(), 2u);
    EXPECT_EQ(ds.records[0].id, "rec00000");
    EXPECT_EQ(ds.records[0].image_path, dir.path() / "a.png");
    EXPECT_EQ(ds.records[1].id, "rec00003");
    EXPECT_EQ(ds.records[1].image_path, fs::path("/abs/c.png"));
    EXPECT_EQ(ds.errors.size(), 2u);
}

TEST(Dataset, IouFilter)
{
    TempDir dir("dsiou");
    const std::string a = R"({"image":"a.png","instruction":"x","bbox":[0,0,2,2],"detected":[1,0,3,2]})";
    const std::string b = R"({"image":"b.png","instruction":"x","bbox":[0,0,2,2],"detected":[1.9,0,3.9,2]})";
    write_text(dir / "d.jsonl", a + "\n" + b + "\n" + record("c.png", {0, 0, 1, 1}));
    const Dataset ds = load_dataset(dir / "d.jsonl", 0.3);
    EXPECT_EQ(ds.records.size(), 2u);
    EXPECT_EQ(ds.filtered, 1u);
    EXPECT_EQ(load_dataset(dir / "d.jsonl").records.size(), 3u);
}

TEST(Supervise, EmptyDataset)
{
    TempDir dir("empty");
    write_text(dir / "d.jsonl", "");
    std::ostringstream log;
    RunConfig c;
    c.out = dir / "out";
    EXPECT_EQ(cmd_supervise(dir / "d.jsonl", c, log), kExitOk);
    EXPECT_TRUE(fs::is_empty(c.out));
}

TEST(Supervise, MissingImageIsPartialFailure)
{
    TempDir dir("missing");
    write_png_rgb(dir / "ok.png", testing::solid_image(8, 8, 0.5, 0.5, 0.5));
    write_text(dir / "d.jsonl", record("ok.png", {0, 0, 4, 4}) + record("nope.png", {0, 0, 4, 4}));
    std::ostringstream log;
    RunConfig c;
    c.patch_size = 2;
    c.out = dir / "out";
    EXPECT_EQ(cmd_supervise(dir / "d.jsonl", c, log), kExitPartial);
    EXPECT_TRUE(fs::exists(c.out / "rec00000.supervision.json"));
    EXPECT_TRUE(fs::exists(c.out / "rec00000.supervision.png"));
    EXPECT_FALSE(fs::exists(c.out / "rec00001.supervision.json"));
    EXPECT_NE(log.str().find("rec00001"), std::string::npos);
}

TEST(Supervise, FullBoxUniformImage)
{
    TempDir dir("full");
    write_png_rgb(dir / "u.png", testing::solid_image(8, 12, 0.3, 0.3, 0.3));
    write_text(dir / "d.jsonl", record("u.png", {0, 0, 12, 8}));
    std::ostringstream log;
    RunConfig c;
    c.patch_size = 4;
    c.out = dir / "out";
    ASSERT_EQ(cmd_supervise(dir / "d.jsonl", c, log), kExitOk);
    const ScoreMap m = score_map_from_json(read_json(c.out / "rec00000.supervision.json"));
    EXPECT_EQ(m.grid_h(), 2u);
    EXPECT_EQ(m.grid_w(), 3u);
    for (double v : m.values()) {
        EXPECT_NEAR(v, 0.8 + 0.2 / std::log(7.0), 1e-12);
    }
    // A constant map renders mid-grey.
    const ImageBuffer heat = load_image(c.out / "rec00000.supervision.png");
    EXPECT_EQ(heat.height(), 8u);
    EXPECT_EQ(heat.width(), 12u);
    for (double v : heat.data()) {
        EXPECT_NEAR(v, 128.0 / 255.0, 1e-12);
    }
}

struct SelectFixture
{
    TempDir dir{"select"};
    ImageBuffer image;

    explicit SelectFixture(std::size_t h = 20, std::size_t w = 20)
    {
        image = ImageBuffer(h, w);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                image.set_rgb(y, x, 0.2 + 0.03 * (x % 7), 0.5, 0.3 + 0.02 * (y % 9));
            }
        }
        write_png_rgb(dir / "img.png", image);
        write_text(dir / "d.jsonl", record("img.png", {2, 2, 9, 9}, "click the green button"));
    }
};

TEST(Select, FullRetentionLeavesImageUntouched)
{
    SelectFixture f;
    RunConfig c;
    c.patch_size = 2;
    c.ratio = 1.0;
    c.out = f.dir / "out";
    std::ostringstream log;
    ASSERT_EQ(cmd_select(f.dir / "d.jsonl", c, log), kExitOk);
    EXPECT_EQ(slurp(c.out / "rec00000.masked.png"), [&] {
        write_png_rgb(f.dir / "ref.png", f.image);
        return slurp(f.dir / "ref.png");
    }());
    const json trace = read_json(c.out / "rec00000.selection.json");
    EXPECT_EQ(trace["m"], 100);
    EXPECT_EQ(trace["m_prime"], 100);
    EXPECT_EQ(trace["u"], 0);
}

TEST(Select, BlackPatchCountMatchesBudget)
{
    SelectFixture f;
    RunConfig c;
    c.patch_size = 2;
    c.ratio = 0.3;
    c.out = f.dir / "out";
    std::ostringstream log;
    ASSERT_EQ(cmd_select(f.dir / "d.jsonl", c, log), kExitOk);
    const ImageBuffer masked = load_image(c.out / "rec00000.masked.png");
    std::size_t black = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        for (std::size_t j = 0; j < 10; ++j) {
            bool all_black = true;
            for (std::size_t y = 2 * i; y < 2 * i + 2; ++y) {
                for (std::size_t x = 2 * j; x < 2 * j + 2; ++x) {
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        all_black = all_black && masked.at(y, x, ch) == 0.0;
                    }
                }
            }
            black += all_black;
        }
    }
    EXPECT_EQ(black, 100u - 30u);
    const json trace = read_json(c.out / "rec00000.selection.json");
    EXPECT_EQ(trace["k"], 30);
    EXPECT_EQ(trace["kept_count"], 30);
    EXPECT_EQ(trace["m_prime"].get<int>(), 30 + trace["u"].get<int>());
    EXPECT_EQ(trace["variant"], "sequence-end");
}

TEST(Select, ScriptedScoresGiveGoldenTrace)
{
    TempDir dir("golden");
    write_png_rgb(dir / "toy.png", testing::solid_image(2, 3, 0.5, 0.5, 0.5));
    write_text(dir / "d.jsonl", record("toy.png", {0, 0, 1, 1}));
    fs::create_directories(dir / "scores");
    write_text(dir / "scores" / "rec00000.saliency.json",
               json{{"grid_h", 2}, {"grid_w", 3}, {"values", {9, 1, 8, 2, 3, 7}}}.dump());
    RunConfig c;
    c.patch_size = 1;
    c.scores_dir = dir / "scores";
    c.out = dir / "out";
    std::ostringstream log;
    ASSERT_EQ(cmd_select(dir / "d.jsonl", c, log), kExitOk);
    const json trace = read_json(c.out / "rec00000.selection.json");
    const json expected = json::array({
        {{"kind", "patch"}, {"index", 0}, {"h", 0}, {"w", 0}},
        {{"kind", "pos_pad"}, {"index", 1}, {"h", 0}, {"w", 1}},
        {{"kind", "patch"}, {"index", 2}, {"h", 0}, {"w", 2}},
        {{"kind", "pos_pad"}, {"index", 4}, {"h", 1}, {"w", 1}},
        {{"kind", "patch"}, {"index", 5}, {"h", 1}, {"w", 2}},
    });
    EXPECT_EQ(trace["entries"], expected);
    EXPECT_EQ(trace["m"], 6);
    EXPECT_EQ(trace["m_prime"], 5);
    EXPECT_EQ(trace["u"], 2);
    EXPECT_EQ(trace["gamma"], 7.0);
}

TEST(Select, TinyGridFailsRecord)
{
    TempDir dir("tiny");
    write_png_rgb(dir / "t.png", testing::solid_image(2, 2, 0.5, 0.5, 0.5));
    write_text(dir / "d.jsonl", record("t.png", {0, 0, 1, 1}));
    RunConfig c;
    c.patch_size = 1;
    c.ratio = 0.2;
    c.out = dir / "out";
    std::ostringstream log;
    EXPECT_EQ(cmd_select(dir / "d.jsonl", c, log), kExitPartial);
    EXPECT_NE(log.str().find("rec00000"), std::string::npos);
}

TEST(Score, WritesSaliency)
{
    SelectFixture f;
    RunConfig c;
    c.patch_size = 4;
    c.out = f.dir / "out";
    std::ostringstream log;
    ASSERT_EQ(cmd_score(f.dir / "d.jsonl", c, log), kExitOk);
    const ScoreMap m = score_map_from_json(read_json(c.out / "rec00000.saliency.json"));
    EXPECT_EQ(m.size(), 25u);
    for (double v : m.values()) {
        EXPECT_LE(std::abs(v), 1.0);
    }
    EXPECT_TRUE(fs::exists(c.out / "rec00000.saliency.png"));
}

TEST(Eval, OracleScorerIsPerfect)
{
    TempDir dir("oracle");
    std::ostringstream log;
    RunConfig c;
    c.patch_size = 4;
    c.out = dir.path();
    ASSERT_EQ(cmd_synth(20, "toy", c, log), kExitOk);
    c.scorer = ScorerKind::Oracle;
    c.csv = true;
    c.out = dir / "eval";
    ASSERT_EQ(cmd_eval(dir / "toy.jsonl", c, log), kExitOk);
    const json rep = read_json(c.out / "eval_report.json");
    EXPECT_EQ(rep["evaluated"], 20);
    for (const auto& r : rep["records"]) {
        for (const char* k : {"recall_at_25", "recall_at_50"}) {
            EXPECT_DOUBLE_EQ(r[k].get<double>(), 1.0);
        }
        EXPECT_GE(r["coverage_budget"].get<double>() + 1e-15,
                  r["gt_patches"].get<double>() / r["m"].get<double>());
    }
    EXPECT_TRUE(fs::exists(c.out / "eval.csv"));
}

TEST(Eval, EmptyGroundTruthExcluded)
{
    TempDir dir("emptygt");
    write_png_rgb(dir / "a.png", testing::solid_image(8, 8, 0.5, 0.5, 0.5));
    write_text(dir / "d.jsonl", record("a.png", {0, 0, 4, 4}) + record("a.png", {40, 40, 50, 50}));
    RunConfig c;
    c.patch_size = 4;
    c.scorer = ScorerKind::Oracle;
    c.out = dir / "eval";
    std::ostringstream log;
    ASSERT_EQ(cmd_eval(dir / "d.jsonl", c, log), kExitOk);
    const json rep = read_json(c.out / "eval_report.json");
    EXPECT_EQ(rep["evaluated"], 1);
    EXPECT_EQ(rep["excluded_empty_gt"], 1);
    EXPECT_EQ(rep["failed"], 0);
}

TEST(Train, WritesParamsAndTrace)
{
    TempDir dir("train");
    std::ostringstream log;
    RunConfig c;
    c.patch_size = 4;
    c.out = dir.path();
    ASSERT_EQ(cmd_synth(6, "toy", c, log), kExitOk);
    c.epochs = 5;
    c.attn_loss = true;
    c.out = dir / "model";
    ASSERT_EQ(cmd_train(dir / "toy.jsonl", c, log), kExitOk);
    const json params = read_json(c.out / "params.json");
    EXPECT_EQ(params["version"], 1);
    EXPECT_EQ(params["kind"], "scorer");
    EXPECT_EQ(read_json(c.out / "head_params.json")["kind"], "head");
    const std::string trace = slurp(c.out / "loss_trace.csv");
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 6);
    EXPECT_EQ(trace.substr(0, trace.find('\n')), "epoch,ins2patch,attention,total");
}

TEST(Train, DivergenceReportsEpoch)
{
    TempDir dir("diverge");
    std::ostringstream log;
    RunConfig c;
    c.patch_size = 4;
    c.out = dir.path();
    ASSERT_EQ(cmd_synth(3, "toy", c, log), kExitOk);
    c.lr = 1e308;
    c.epochs = 20;
    c.out = dir / "model";
    EXPECT_EQ(cmd_train(dir / "toy.jsonl", c, log), kExitPartial);
    EXPECT_NE(log.str().find("epoch"), std::string::npos);
    EXPECT_FALSE(fs::exists(c.out / "params.json"));
}

TEST(Train, EmptyDatasetIsUsageError)
{
    TempDir dir("trainempty");
    write_text(dir / "d.jsonl", "\n");
    std::ostringstream log;
    RunConfig c;
    c.out = dir / "model";
    EXPECT_EQ(cmd_train(dir / "d.jsonl", c, log), kExitUsage);
}

TEST(Stats, TokenShareTable)
{
    TempDir dir("stats");
    write_text(dir / "counts.csv", "name,system,visual,instruction\ndesktop-1080p,397,2348,4.5\nbad,1,x,2\n");
    RunConfig c;
    c.out = dir / "out";
    std::ostringstream out, log;
    EXPECT_EQ(cmd_stats(dir / "counts.csv", c, out, log), kExitPartial);
    const json j = read_json(c.out / "token_stats.json");
    ASSERT_EQ(j["rows"].size(), 1u);
    EXPECT_NEAR(j["rows"][0]["visual_share"].get<double>(), 0.854, 0.001);
    EXPECT_NE(out.str().find("85.4%"), std::string::npos);
}

TEST(Determinism, RepeatedRunsAreByteIdentical)
{
    TempDir dir("det");
    std::ostringstream log;
    RunConfig c;
    c.patch_size = 4;
    c.workers = 3;
    c.out = dir.path();
    ASSERT_EQ(cmd_synth(8, "toy", c, log), kExitOk);
    c.epochs = 10;
    for (const char* run : {"a", "b"}) {
        RunConfig r = c;
        r.out = dir / run;
        ASSERT_EQ(cmd_supervise(dir / "toy.jsonl", r, log), kExitOk);
        ASSERT_EQ(cmd_train(dir / "toy.jsonl", r, log), kExitOk);
        r.params = r.out / "params.json";
        ASSERT_EQ(cmd_score(dir / "toy.jsonl", r, log), kExitOk);
        ASSERT_EQ(cmd_select(dir / "toy.jsonl", r, log), kExitOk);
        ASSERT_EQ(cmd_eval(dir / "toy.jsonl", r, log), kExitOk);
    }
    std::size_t compared = 0;
    for (const auto& e : fs::directory_iterator(dir / "a")) {
        ++compared;
        EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / e.path().filename())) << e.path().filename();
    }
    EXPECT_GT(compared, 30u);
}

#ifdef UIPRUNE_CLI_PATH
int run_cli(const std::string& args)
{
    const int status = std::system((std::string(UIPRUNE_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes)
{
    TempDir dir("cli");
    EXPECT_EQ(run_cli(""), kExitUsage);
    EXPECT_EQ(run_cli("--help"), kExitOk);
    EXPECT_EQ(run_cli("bogus"), kExitUsage);
    EXPECT_EQ(run_cli("supervise"), kExitUsage);
    EXPECT_EQ(run_cli("supervise " + (dir / "none.jsonl").string()), kExitUsage);
    EXPECT_EQ(run_cli("synth toy --count 2 --patch-size 4 --out " + dir.path().string()), kExitOk);
    const std::string ds = (dir / "toy.jsonl").string();
    EXPECT_EQ(run_cli("supervise " + ds + " --patch-size 4 --ratio 2 --out " + dir.path().string()), kExitUsage);
    EXPECT_EQ(run_cli("supervise " + ds + " --patch-size 4 --out " + (dir / "s").string()), kExitOk);
    EXPECT_TRUE(fs::exists(dir / "s" / "rec00001.supervision.json"));

    write_text(dir / "run.conf", "patch-size = 4\nratio = 0.25\n");
    EXPECT_EQ(run_cli("select " + ds + " --config " + (dir / "run.conf").string() + " --ratio 0.5 --out " +
                      (dir / "sel").string()),
              kExitOk);
    EXPECT_EQ(read_json(dir / "sel" / "rec00000.selection.json")["k"], 32);
}
#endif

} // namespace
} // namespace uiprune::app
