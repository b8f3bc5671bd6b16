#include "fixtures.hpp"

#include "pdgd/cli.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace pdgd;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "pdgd_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

fs::path small_problem() {
  const fs::path p = fs::temp_directory_path() / "pdgd_cli_tests" / "three.json";
  fs::create_directories(p.parent_path());
  std::ofstream(p) << problem_to_json(fixtures::three_agents()).dump(2);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig config(const std::string& command, const fs::path& problem, const fs::path& out) {
  return run_config_from_json({{"command", command}, {"problem", problem.string()}, {"out_dir", out.string()}});
}

}  // namespace

TEST_CASE("run config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(run_config_from_json({{"command", "synthesize"}, {"problem", "p.json"}, {"colour", 1}}),
                  ConfigError);
  try {
    run_config_from_json({{"command", "synthesize"}, {"problem", "p.json"}, {"h", -1.0}});
    FAIL("expected a schema error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("schema error") != std::string::npos);
  }
  CHECK_THROWS_AS(run_config_from_json({{"command", "fly"}, {"problem", "p.json"}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"command", "madub"}, {"problem", "p.json"}, {"tol", "x"}}), ConfigError);
  const RunConfig c = run_config_from_json({{"command", "madub"}, {"problem", "p.json"}, {"eps", {0.5, 1.0}}});
  CHECK(run_config_from_json(run_config_to_json(c)).eps == c.eps);
}

TEST_CASE("augmented simulation without a certificate is a fault") {
  const fs::path out = scratch("nocert");
  RunConfig c = config("simulate", small_problem(), out);
  c.dynamics = "augmented";
  std::ostringstream log;
  CHECK(run_command(c, log) == kExitFault);
  CHECK(log.str().find("gain required") != std::string::npos);
}

TEST_CASE("malformed problem file is a fault with a location") {
  const fs::path out = scratch("malformed");
  const fs::path bad = out / "bad.json";
  std::ofstream(bad) << "{\n  \"agents\": [\n    {\"n\": 1,,}\n  ]\n}\n";
  std::ostringstream log;
  CHECK(run_command(config("synthesize", bad, out), log) == kExitFault);
  CHECK(log.str().find("line 3") != std::string::npos);
}

TEST_CASE("synthesize, verify and detect tampering") {
  const fs::path out = scratch("synth");
  RunConfig c = config("synthesize", small_problem(), out);
  c.h = 0.5;
  std::ostringstream log;
  REQUIRE(run_command(c, log) == kExitOk);
  const fs::path cert = out / "certificate.json";
  REQUIRE(fs::exists(cert));
  CHECK(fs::exists(out / "margins.json"));
  CHECK(fs::exists(out / "config.json"));
  CHECK(fs::exists(out / "run.log"));

  RunConfig v = config("verify", small_problem(), out / "verify");
  v.cert = cert;
  v.stress_runs = 2;
  v.stress_T = 200.0;
  std::ostringstream vlog;
  CHECK(run_command(v, vlog) == kExitOk);
  const json report = json::parse(slurp(out / "verify" / "verify.json"));
  CHECK(report["passed"].get<bool>());

  json tampered = json::parse(slurp(cert));
  tampered["vars"]["X"][0][0] = tampered["vars"]["X"][0][0].get<double>() + 0.25;
  std::ofstream(out / "tampered.json") << tampered.dump();
  v.cert = out / "tampered.json";
  v.out_dir = out / "verify_tampered";
  std::ostringstream tlog;
  CHECK(run_command(v, tlog) == kExitNegative);
  CHECK(tlog.str().find("FAIL gain_recovery") != std::string::npos);

  const fs::path other = out / "other.json";
  Problem p = fixtures::three_agents();
  p.rhs[0](0) = 0.5;
  std::ofstream(other) << problem_to_json(p).dump(2);
  RunConfig w = config("verify", other, out / "verify_other");
  w.cert = cert;
  std::ostringstream olog;
  CHECK(run_command(w, olog) == kExitNegative);
  CHECK(olog.str().find("FAIL provenance") != std::string::npos);
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  for (const auto& out : {a, b}) {
    RunConfig c = config("synthesize", small_problem(), out);
    c.h = 0.4;
    std::ostringstream log;
    REQUIRE(run_command(c, log) == kExitOk);
    RunConfig s = config("simulate", small_problem(), out);
    s.dynamics = "augmented";
    s.cert = out / "certificate.json";
    s.delays = {"sin:h=0.4,d=0.1"};
    s.T = 20.0;
    std::ostringstream slog;
    REQUIRE(run_command(s, slog) == kExitOk);
  }
  for (const char* f : {"certificate.json", "margins.json", "trajectory.csv", "summary.json"})
    CHECK(slurp(a / f) == slurp(b / f));
}

TEST_CASE("delays beyond the certified frontier give a certified negative") {
  const fs::path out = scratch("infeasible");
  RunConfig c = config("synthesize", fixtures::paper10_path(), out);
  c.eps = {1.5};
  c.h = 5.0;
  std::ostringstream log;
  CHECK(run_command(c, log) == kExitNegative);
  const json j = json::parse(slurp(out / "infeasible.json"));
  CHECK(j["status"] == "Infeasible");
  CHECK(j["hint"].get<std::string>().find("madub") != std::string::npos);
}

TEST_CASE("export and dump write their artifacts") {
  const fs::path out = scratch("export");
  RunConfig c = config("export-sdp", small_problem(), out);
  std::ostringstream log;
  CHECK(run_command(c, log) == kExitOk);
  std::ifstream in(out / "lmi.sdp");
  const BlockSdp sdp = read_sparse(in);
  CHECK(sdp.num_vars > 0);
  c.command = "dump";
  CHECK(run_command(c, log) == kExitOk);
  const json d = json::parse(slurp(out / "dump.json"));
  CHECK(d["x_star"].size() == 3);
  CHECK(fs::exists(out / "structure" / "T_0.csv"));
}
