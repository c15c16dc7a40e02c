#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include <unistd.h>

#include "uagc/cli.hpp"
#include "uagc/error.hpp"

using namespace uagc;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result uagc_run(std::vector<std::string> args) {
  args.insert(args.begin(), "uagc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::size_t columns(const std::string& line) { return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1; }

class CliPipeline : public ::testing::Test {
 protected:
  static fs::path dir;

  static std::string at(const std::string& name) { return (dir / name).string(); }

  static std::vector<std::string> roads() {
    return {"--nodes", at("ring/nodes.csv"), "--edges", at("ring/edges.csv"), "--sensors", at("ring/sensors.csv")};
  }

  static std::vector<std::string> model_inputs() {
    return {"--adjacency", at("graph/adjacency.txt"), "--activity", at("activity.csv")};
  }

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("uagc_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir / "graph");
    ASSERT_EQ(uagc_run({"synth-data", "--out-dir", at("ring"), "--sensors", "8", "--days", "3", "--survey-rows",
                        "2000", "--seed", "4"})
                  .code,
              0);
    auto g = roads();
    g.insert(g.begin(), "build-graph");
    g.insert(g.end(), {"--out-dir", at("graph"), "--seed", "1"});
    const auto bg = uagc_run(g);
    ASSERT_EQ(bg.code, 0) << bg.err;
    ASSERT_EQ(uagc_run({"build-activity", "--in", at("ring/survey.csv"), "--out", at("activity.csv")}).code, 0);
    std::vector<std::string> t{"train", "--traffic", at("ring/traffic.csv"), "--out", at("model.ckpt"),
                               "--d-model", "4", "--epochs", "1", "--stride", "24", "--no-time", "--seed", "2"};
    for (const auto& a : model_inputs()) t.push_back(a);
    const auto tr = uagc_run(t);
    ASSERT_EQ(tr.code, 0) << tr.err;
  }

  static void TearDownTestSuite() { fs::remove_all(dir); }
};

fs::path CliPipeline::dir;

}  // namespace

TEST_F(CliPipeline, SynthDataFilesAndManifest) {
  const auto traffic = lines(dir / "ring/traffic.csv");
  ASSERT_EQ(traffic.size(), 1u + 3 * 288);
  EXPECT_EQ(columns(traffic[0]), 9u);
  EXPECT_EQ(traffic[0].substr(0, 13), "timestamp,s00");
  EXPECT_EQ(lines(dir / "ring/sensors.csv").size(), 9u);
  EXPECT_EQ(lines(dir / "ring/survey.csv").size(), 2001u);

  const auto m = nlohmann::json::parse(slurp(dir / "ring/synth-data.manifest.json"));
  EXPECT_EQ(m["artifact_version"], "uagc-1");
  EXPECT_EQ(m["command"], "synth-data");
  EXPECT_EQ(m["seed"], 4);
  EXPECT_EQ(m["flags"]["sensors"], 8);
  EXPECT_EQ(m["outputs"][at("ring/traffic.csv")], cli::sha256_file(at("ring/traffic.csv")));
}

TEST_F(CliPipeline, SynthDataIsDeterministic) {
  ASSERT_EQ(uagc_run({"synth-data", "--out-dir", at("again"), "--sensors", "8", "--days", "3", "--survey-rows", "2000",
                      "--seed", "4"})
                .code,
            0);
  for (const auto* f : {"nodes.csv", "edges.csv", "sensors.csv", "traffic.csv", "survey.csv"})
    EXPECT_EQ(slurp(dir / "again" / f), slurp(dir / "ring" / f)) << f;
}

TEST_F(CliPipeline, Sha256KnownVector) {
  std::ofstream(dir / "abc.txt", std::ios::binary) << "abc";
  EXPECT_EQ(cli::sha256_file(at("abc.txt")), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(CliPipeline, BuildGraphReusesPathSet) {
  const auto adj = slurp(dir / "graph/adjacency.txt");
  ASSERT_FALSE(adj.empty());
  const auto m = nlohmann::json::parse(slurp(dir / "graph/adjacency.txt.manifest.json"));
  EXPECT_EQ(m["command"], "build-graph");
  EXPECT_EQ(m["sensors"].size(), 8u);
  EXPECT_GT(m["nnz"].get<int>(), 8);

  auto g = roads();
  g.insert(g.begin(), "gen-paths");
  g.insert(g.end(), {"--out", at("paths.txt"), "--seed", "1"});
  const auto gp = uagc_run(g);
  ASSERT_EQ(gp.code, 0) << gp.err;
  EXPECT_NE(gp.out.find("paths="), std::string::npos);
  EXPECT_EQ(slurp(dir / "paths.txt"), slurp(dir / "graph/paths.txt"));

  fs::create_directories(dir / "reuse");
  auto b = roads();
  b.insert(b.begin(), "build-graph");
  b.insert(b.end(), {"--paths", at("paths.txt"), "--out-dir", at("reuse")});
  const auto bg = uagc_run(b);
  ASSERT_EQ(bg.code, 0) << bg.err;
  EXPECT_FALSE(fs::exists(dir / "reuse/paths.txt"));
  EXPECT_EQ(slurp(dir / "reuse/adjacency.txt"), adj);
  EXPECT_NE(bg.out.find("N=8 NNZ="), std::string::npos);
}

TEST_F(CliPipeline, TrainWritesCheckpointLogAndManifest) {
  EXPECT_EQ(slurp(dir / "model.ckpt").substr(0, 4), "UAGC");
  const auto log = lines(dir / "model.ckpt.log.jsonl");
  ASSERT_EQ(log.size(), 1u);
  const auto rec = nlohmann::json::parse(log[0]);
  EXPECT_EQ(rec["epoch"], 1);
  EXPECT_EQ(rec["seconds"], 0);
  const auto m = nlohmann::json::parse(slurp(dir / "model.ckpt.manifest.json"));
  EXPECT_EQ(m["command"], "train");
  EXPECT_EQ(m["flags"]["d-model"], 4);
  EXPECT_EQ(m["flags"]["lr"], 0.01);  // defaults are recorded too
  EXPECT_EQ(m["model"]["d_model"], 4);
  EXPECT_EQ(m["outputs"][at("model.ckpt")], cli::sha256_file(at("model.ckpt")));
  EXPECT_EQ(m["inputs"][at("ring/traffic.csv")], cli::sha256_file(at("ring/traffic.csv")));
}

TEST_F(CliPipeline, TrainIsDeterministic) {
  std::vector<std::string> t{"train", "--traffic", at("ring/traffic.csv"), "--out", at("model2.ckpt"),
                             "--d-model", "4", "--epochs", "1", "--stride", "24", "--no-time", "--seed", "2"};
  for (const auto& a : model_inputs()) t.push_back(a);
  ASSERT_EQ(uagc_run(t).code, 0);
  EXPECT_EQ(slurp(dir / "model2.ckpt"), slurp(dir / "model.ckpt"));
  EXPECT_EQ(slurp(dir / "model2.ckpt.log.jsonl"), slurp(dir / "model.ckpt.log.jsonl"));
}

TEST_F(CliPipeline, EvalReport) {
  std::vector<std::string> e{"eval", "--checkpoint", at("model.ckpt"), "--traffic", at("ring/traffic.csv"), "--out",
                             at("report.csv")};
  for (const auto& a : model_inputs()) e.push_back(a);
  const auto r = uagc_run(e);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = lines(dir / "report.csv");
  ASSERT_EQ(rep.size(), 5u);
  EXPECT_EQ(rep[0], "# split=0.7/0.1/0.2 range=test loss=masked_mae units=mph model=GCRN");
  EXPECT_EQ(rep[1], "horizon_step,mae,rmse,mape_percent");
  EXPECT_EQ(rep[2].substr(0, 2), "3,");
  EXPECT_EQ(rep[3].substr(0, 2), "6,");
  EXPECT_EQ(rep[4].substr(0, 3), "12,");

  e.push_back("--baseline");
  e.push_back("last-repeat");
  ASSERT_EQ(uagc_run(e).code, 0);
  const auto both = lines(dir / "report.csv");
  ASSERT_EQ(both.size(), 8u);
  EXPECT_EQ(both[1], "model,horizon_step,mae,rmse,mape_percent");
  EXPECT_EQ(both[2].substr(0, 7), "GCRN,3,");
  EXPECT_EQ(both[7].substr(0, 15), "last-repeat,12,");
}

TEST_F(CliPipeline, PredictWritesQRows) {
  std::vector<std::string> p{"predict", "--checkpoint", at("model.ckpt"), "--traffic", at("ring/traffic.csv"),
                             "--start", "2012-03-06T08:00:00", "--out", at("pred.csv")};
  for (const auto& a : model_inputs()) p.push_back(a);
  const auto r = uagc_run(p);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(dir / "pred.csv");
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(columns(rows[0]), 9u);
  EXPECT_EQ(rows[1].substr(0, 19), "2012-03-06T09:00:00");
  p[6] = "2012-04-06T08:00:00";
  EXPECT_EQ(uagc_run(p).code, 3);
}

TEST_F(CliPipeline, SimulateZeroModelHasNoDelta) {
  // Overwrite a copy of the checkpoint with all-zero parameters.
  const auto bytes = slurp(dir / "model.ckpt");
  fs::copy_file(dir / "model.ckpt.manifest.json", dir / "zero.ckpt.manifest.json", fs::copy_options::overwrite_existing);
  {
    auto cfg = models::config_from_json(nlohmann::json::parse(slurp(dir / "model.ckpt.manifest.json"))["model"]);
    models::Model m(cfg, {}, 0);
    std::istringstream in(bytes);
    models::load_checkpoint(m.params(), in);
    for (std::size_t i = 0; i < m.params().size(); ++i) m.params()[i].value.fill(0.0);
    std::ofstream out(dir / "zero.ckpt", std::ios::binary);
    models::save_checkpoint(m.params(), out);
  }
  std::vector<std::string> s{"simulate", "--checkpoint", at("zero.ckpt"), "--out", at("sim.csv")};
  for (const auto& a : model_inputs()) s.push_back(a);
  const auto r = uagc_run(s);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "max_abs_delta=0\n");
  const auto rows = lines(dir / "sim.csv");
  ASSERT_EQ(rows.size(), 9u);
  EXPECT_EQ(rows[0], "sensor_id,window1_mph,window2_mph,delta_mph");

  s[2] = at("model.ckpt");
  const auto trained = uagc_run(s);
  ASSERT_EQ(trained.code, 0);
  EXPECT_NE(trained.out, "max_abs_delta=0\n");
}

TEST(ScenarioWindow, Parsing) {
  const auto w = cli::ScenarioWindow::parse("06:35-08:20");
  EXPECT_EQ(w.start_minute, 395);
  EXPECT_EQ(w.end_minute, 500);
  EXPECT_THROW(cli::ScenarioWindow::parse("06:33-08:20"), UsageError);
  EXPECT_THROW(cli::ScenarioWindow::parse("08:20-06:35"), UsageError);
  EXPECT_THROW(cli::ScenarioWindow::parse("0635-0820"), UsageError);
  EXPECT_EQ(cli::scenario_start(2, w, 12).iso(), "2012-03-07T06:35:00");
  EXPECT_THROW(cli::scenario_start(7, w, 12), UsageError);
  EXPECT_THROW(cli::scenario_start(0, cli::ScenarioWindow::parse("06:35-07:00"), 12), UsageError);
}

TEST(CliErrors, ExitCodesAndOneLineMessages) {
  const std::regex line(R"(^error\[[0-9]\]: [^\n]+\n$)");
  const auto none = uagc_run({});
  EXPECT_EQ(none.code, 2);
  EXPECT_EQ(uagc_run({"frobnicate"}).code, 2);
  const auto missing = uagc_run({"build-activity", "--in", "/nonexistent/survey.csv", "--out", "/tmp/x.csv"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_TRUE(std::regex_match(missing.err, line)) << missing.err;

  const auto tmp = fs::temp_directory_path() / ("uagc_err_" + std::to_string(::getpid()));
  fs::create_directories(tmp);
  std::ofstream(tmp / "survey.csv") << "category,weekday,start_minute\n3,9,100\n";
  const auto bad = uagc_run({"build-activity", "--in", (tmp / "survey.csv").string(), "--out", (tmp / "a.csv").string()});
  EXPECT_EQ(bad.code, 3);
  EXPECT_TRUE(std::regex_match(bad.err, line)) << bad.err;
  EXPECT_NE(bad.err.find("survey"), std::string::npos);

  std::ofstream(tmp / "traffic.csv") << "timestamp,a\n2012-03-05T00:00:00,50\n2012-03-05T00:10:00,51\n";
  const auto irregular =
      uagc_run({"train", "--traffic", (tmp / "traffic.csv").string(), "--out", (tmp / "m.ckpt").string(), "--arch",
                "LSTM", "--embedding", "none"});
  EXPECT_EQ(irregular.code, 3);
  EXPECT_NE(irregular.err.find("line 3"), std::string::npos) << irregular.err;

  std::ofstream(tmp / "ok.csv") << "timestamp,a\n2012-03-05T00:00:00,50\n2012-03-05T00:05:00,51\n";
  const auto arch = uagc_run({"train", "--traffic", (tmp / "ok.csv").string(), "--out",
                              (tmp / "m.ckpt").string(), "--arch", "RNN"});
  EXPECT_EQ(arch.code, 2);
  fs::remove_all(tmp);
}
