#include <filesystem>
#include <functional>
#include <map>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "kwave/cli.hpp"

namespace fs = std::filesystem;
using kwave::cli::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome kwave_run(std::vector<std::string> args) {
  args.insert(args.begin(), "kwave");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Outcome r;
  r.code = kwave::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string config(const std::string& name) { return std::string(KWAVE_SOURCE_DIR) + "/configs/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("kwave-cli-test-" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json report(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

std::string first_line(const fs::path& p) {
  std::ifstream is(p);
  std::string line;
  std::getline(is, line);
  return line;
}

// writes cfg to a temporary file and runs the subcommand on it
Outcome run_json(const std::string& command, const json& cfg, const fs::path& out) {
  fs::create_directories(out);
  const fs::path path = out / "config.json";
  std::ofstream(path) << cfg.dump();
  return kwave_run({command, "--config", path.string(), "--out", out.string()});
}

json load(const std::string& name) { return json::parse(slurp(config(name))); }

}  // namespace

TEST(Cli, ShippedConfigsPass) {
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"check-involutivity", "involutivity.json"}, {"abelianize", "abelianize.json"},
      {"surface", "surface.json"},                 {"implicit-eval", "implicit.json"},
      {"pfaffian-eval", "pfaffian.json"},          {"residual", "residual.json"},
      {"simulate2w", "elastic.json"}};
  for (const auto& [cmd, file] : cases) {
    const fs::path out = scratch(cmd);
    const Outcome r = kwave_run({cmd, "--config", config(file), "--out", out.string()});
    EXPECT_EQ(r.code, 0) << cmd << ": " << r.err << r.out;
    ASSERT_TRUE(fs::exists(out / "report.json")) << cmd;
    const json rep = report(out);
    EXPECT_EQ(rep["command"], cmd);
    EXPECT_EQ(rep["verdict"], "pass") << cmd;
    EXPECT_TRUE(rep.contains("tolerances")) << cmd;
    EXPECT_TRUE(fs::exists(out / "meta.json"));
    for (const auto& a : rep["result"].value("artifacts", json::array()))
      EXPECT_TRUE(fs::exists(out / a.get<std::string>())) << a;
    for (const auto& e : fs::directory_iterator(out)) EXPECT_NE(e.path().extension(), ".tmp");
  }
}

TEST(Cli, ElasticReport) {
  const fs::path out = scratch("elastic");
  ASSERT_EQ(kwave_run({"simulate2w", "--config", config("elastic.json"), "--out", out.string(), "--emit-frames"}).code,
            0);
  const json rep = report(out)["result"];
  EXPECT_TRUE(rep["t1"].is_number());
  EXPECT_TRUE(rep["t2"].is_number());
  EXPECT_LT(rep["t1"].get<double>(), rep["t2"].get<double>());
  EXPECT_EQ(rep["elasticity"]["status"], "complete");
  EXPECT_EQ(rep["elasticity"]["elastic"], true);
  EXPECT_EQ(first_line(out / "traces.csv"), "family,tracer,t,x,r");
  EXPECT_EQ(first_line(out / "frame_0000.csv"), "t,x,r1,r2");
  EXPECT_TRUE(fs::exists(out / "frame_0008.csv"));
}

TEST(Cli, BreakingIsAVerdictFailure) {
  const fs::path out = scratch("breaking");
  const Outcome r = kwave_run({"simulate2w", "--config", config("breaking.json"), "--out", out.string()});
  EXPECT_EQ(r.code, 2) << r.err;
  const json rep = report(out);
  EXPECT_EQ(rep["verdict"], "fail");
  EXPECT_EQ(rep["result"]["halted"], true);
}

TEST(Cli, Showcases) {
  const fs::path a = scratch("mhd");
  Outcome r = kwave_run({"showcase", "mhd", "--psi", "0.2*sin(x1)*sin(x2)", "--out", a.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(report(a)["command"], "showcase mhd");
  EXPECT_EQ(first_line(a / "alfven_field.csv").substr(0, 5), "x1,x2");

  const fs::path b = scratch("baro");
  r = kwave_run({"showcase", "barotropic", "--config", config("showcase_barotropic.json"), "--out", b.string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(report(b)["result"]["variant"], "a-invariant");
  EXPECT_EQ(first_line(b / "barotropic_field.csv"), "t,x1,x2,u1,u2,rho,det");

  const fs::path c = scratch("mhd-bad");
  r = kwave_run({"showcase", "mhd", "--psi", "2*sin(x1)", "--out", c.string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("amplitude bound"), std::string::npos) << r.err;
}

TEST(Cli, ReportIsDeterministic) {
  const fs::path a = scratch("det-a"), b = scratch("det-b");
  ASSERT_EQ(kwave_run({"implicit-eval", "--config", config("implicit.json"), "--out", a.string()}).code, 0);
  ASSERT_EQ(kwave_run({"implicit-eval", "--config", config("implicit.json"), "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "field.csv"), slurp(b / "field.csv"));
}

TEST(Cli, SeedChangesSamples) {
  json cfg = load("residual.json");
  const fs::path a = scratch("seed-a"), b = scratch("seed-b");
  ASSERT_EQ(run_json("residual", cfg, a).code, 0);
  cfg["numerics"]["seed"] = 99;
  ASSERT_EQ(run_json("residual", cfg, b).code, 0);
  EXPECT_NE(slurp(a / "residual.csv"), slurp(b / "residual.csv"));
  EXPECT_EQ(report(b)["seed"], 99);
}

TEST(Cli, ConfigErrorsNameTheKey) {
  struct Case {
    std::string command;
    std::function<void(json&)> edit;
    std::string pointer;
  };
  const std::vector<Case> cases = {
      {"residual", [](json& c) { c["model"].erase("name"); }, "/model/name"},
      {"residual", [](json& c) { c["model"]["name"] = "navier-stokes"; }, "/model/name"},
      {"residual", [](json& c) { c["task"]["field"] = json::array({"x/(1 + t", }); }, "/task/field/0"},
      {"residual", [](json& c) { c["task"]["field"] = json::array({"y"}); }, "/task/field/0"},
      {"residual", [](json& c) { c["task"]["box"]["lo"] = json::array({0}); }, "/task/box/lo"},
      {"residual", [](json& c) { c["numerics"]["order"] = 3; }, "/numerics/order"},
      {"residual", [](json& c) { c["numerics"]["seed"] = -1; }, "/numerics/seed"},
      {"residual", [](json& c) { c["numerics"]["h"] = "small"; }, "/numerics/h"},
      {"residual", [](json& c) { c["task"].erase("box"); }, "/task/points"},
      {"abelianize", [](json& c) { c["elements"][1]["gamma"][1] = "u3"; }, "/elements/1/gamma/1"},
      {"abelianize", [](json& c) { c["model"]["matrices"][1][0][0] = "w"; }, "/model/matrices/1/0/0"},
      {"abelianize", [](json& c) { c["task"]["s1"]["n"] = 1; }, "/task/s1"},
      {"simulate2w", [](json& c) { c["numerics"]["cfl"] = 0.95; }, "/numerics/cfl"},
      {"simulate2w", [](json& c) { c["task"]["nu1"] = "1 + r3"; }, "/task/nu1"},
      {"simulate2w", [](json& c) { c["task"]["scheme"] = "spectral"; }, "/task/scheme"},
      {"simulate2w", [](json& c) { c["task"]["profiles"].erase(1); }, "/task/profiles"},
  };
  const std::map<std::string, std::string> files = {
      {"residual", "residual.json"}, {"abelianize", "abelianize.json"}, {"simulate2w", "elastic.json"}};
  int i = 0;
  for (const auto& c : cases) {
    json cfg = load(files.at(c.command));
    c.edit(cfg);
    const fs::path out = scratch("bad-" + std::to_string(i++));
    const Outcome r = run_json(c.command, cfg, out);
    EXPECT_EQ(r.code, 1) << c.pointer;
    EXPECT_NE(r.err.find("config error at " + c.pointer + ":"), std::string::npos) << r.err;
    EXPECT_FALSE(fs::exists(out / "report.json")) << c.pointer;
  }
}

TEST(Cli, MalformedJsonAndUsage) {
  const fs::path out = scratch("malformed");
  fs::create_directories(out);
  std::ofstream(out / "bad.json") << "{\"model\": ";
  Outcome r = kwave_run({"residual", "--config", (out / "bad.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("malformed JSON"), std::string::npos);

  r = kwave_run({"residual", "--config", (out / "missing.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);

  EXPECT_EQ(kwave_run({}).code, 1);
  EXPECT_EQ(kwave_run({"residual"}).code, 1);
  EXPECT_EQ(kwave_run({"frobnicate"}).code, 1);
  EXPECT_EQ(kwave_run({"showcase", "euler"}).code, 1);
  EXPECT_EQ(kwave_run({"--help"}).code, 0);
}

TEST(Cli, VerdictFailureExitCode) {
  json cfg = load("residual.json");
  cfg["task"]["field"] = json::array({"x/(1 + 2*t)"});
  const fs::path out = scratch("wrong-field");
  const Outcome r = run_json("residual", cfg, out);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(report(out)["verdict"], "fail");
  EXPECT_EQ(first_line(out / "residual.csv"), "t,x,residual");
}

TEST(Cli, LambdaInvolutivityVerdict) {
  // u1 moves with r2 along this surface, so d lambda^1 / d r^2 = (-1, 0, 0) leaves the span
  json cfg = load("surface.json");
  cfg["task"]["check_lambda"] = true;
  const fs::path out = scratch("lambda");
  EXPECT_EQ(run_json("surface", cfg, out).code, 2);
  const json rep = report(out)["result"];
  EXPECT_EQ(rep["lambda_involutivity"]["holds"], false);
  EXPECT_NEAR(rep["lambda_involutivity"]["pairs"][0]["max_residual"].get<double>(), 0.5, 1e-6);
  EXPECT_LE(rep["path_residual"].get<double>(), 1e-12);
}

TEST(Cli, NonCommutingSurfaceIsRejected) {
  json cfg = load("abelianize.json");
  cfg.erase("task");
  cfg["task"] = {{"base", {1.0, 2.5}}, {"axes", {{{"lo", -0.3}, {"hi", 0.3}, {"n", 11}}, {{"lo", -0.3}, {"hi", 0.3}, {"n", 11}}}}};
  const fs::path out = scratch("shear-surface");
  const Outcome r = run_json("surface", cfg, out);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}
