#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "qpwave/cli.hpp"
#include "qpwave/errors.hpp"
#include "qpwave/io.hpp"

using namespace qpwave;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qpwave_cli_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const std::vector<std::string> kSolve{"solve", "--lambda", "1.1,0.731", "--N-max", "9"};

std::vector<std::string> with(std::vector<std::string> base, const std::vector<std::string>& extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  return base;
}

}  // namespace

TEST_CASE("solve, verify and byte-stable outputs") {
  TempDir tmp;
  const auto r1 = cli(with(kSolve, {"--out", tmp / "a"}));
  REQUIRE(r1.code == 0);
  CHECK(r1.out.find("accepted") != std::string::npos);
  const std::string first = slurp(tmp / "a/solution.json"), first_trace = slurp(tmp / "a/trace.csv");
  const auto r2 = cli(with(kSolve, {"--out", tmp / "a"}));
  REQUIRE(r2.code == 0);
  CHECK(slurp(tmp / "a/solution.json") == first);
  CHECK(slurp(tmp / "a/trace.csv") == first_trace);

  // Load and store reproduce the file byte for byte.
  const auto doc = load_solution(tmp / "a/solution.json");
  CHECK(doc.record.accepted);
  CHECK(doc.run_config.at("command") == "solve");
  CHECK(dump_json(solution_to_json(doc)) == slurp(tmp / "a/solution.json"));

  const auto v = cli({"verify", "--in", tmp / "a/solution.json"});
  CHECK(v.code == 0);
  CHECK(v.out.find("verified") != std::string::npos);
}

TEST_CASE("verify rejects tampered and foreign files") {
  TempDir tmp;
  REQUIRE(cli(with(kSolve, {"--out", tmp / "s"})).code == 0);
  const std::string path = tmp / "s/solution.json";
  Json j = Json::parse(slurp(path));

  Json bumped = j;
  bumped["coeffs"][1]["v"] = bumped["coeffs"][1]["v"].get<double>() * (1.0 + 1e-6);
  spit(tmp / "bumped.json", dump_json(bumped));
  const auto r = cli({"verify", "--in", tmp / "bumped.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("residual_mismatch") != std::string::npos);

  Json future = j;
  future["schema"] = kSchemaVersion + 1;
  spit(tmp / "future.json", dump_json(future));
  const auto f = cli({"verify", "--in", tmp / "future.json"});
  CHECK(f.code == 2);
  CHECK(f.err.find("schema_version_mismatch") != std::string::npos);
  CHECK_THROWS_AS(load_solution(tmp / "future.json"), SchemaVersionMismatch);

  Json noncanonical = j;
  noncanonical["coeffs"][0]["j"] = Json::array({-1, 0});
  spit(tmp / "noncanon.json", dump_json(noncanonical));
  CHECK(cli({"verify", "--in", tmp / "noncanon.json"}).code == 2);

  spit(tmp / "garbage.json", "{\"schema\": 1, \"d\": ");
  const auto g = cli({"verify", "--in", tmp / "garbage.json"});
  CHECK(g.code == 2);
  CHECK(g.err.find("corrupt_file") != std::string::npos);
}

TEST_CASE("exit codes") {
  TempDir tmp;
  CHECK(cli({"solve", "--lambda", "1.2,0.6", "--out", tmp / "r"}).code == 2);
  const auto sep = cli({"solve", "--lambda", "1.2,0.6", "--out", tmp / "r"});
  CHECK(sep.err.find("separation") != std::string::npos);
  CHECK_FALSE(fs::exists(tmp / "r/solution.json"));
  CHECK(cli({"solve", "--out", tmp / "x"}).code == 1);
  CHECK(cli(with(kSolve, {"--bogus", "1"})).code == 1);
  CHECK(cli({"solve", "--lambda", "1.1,abc"}).code == 1);
  CHECK(cli({"solve", "--lambda", "1.1,0.731", "--a", "-1"}).code == 1);
  CHECK(cli({"solve", "--d", "2", "--lambda", "1.1,0.731,0.8,1.3", "--jtilde", "1,0,0,0"}).code == 2);
  CHECK(cli({}).code == 1);
  CHECK(cli({"verify"}).code == 1);
  const auto help = cli({"solve", "--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("--lambda") != std::string::npos);
}

TEST_CASE("config files compose with flags") {
  TempDir tmp;
  spit(tmp / "cfg.json", R"({"lambda": [1.1, 0.731], "N-max": 9, "a": 0.02, "force": true})");
  REQUIRE(cli({"solve", "--config", tmp / "cfg.json", "--a", "0.01", "--out", tmp / "c"}).code == 0);
  const auto doc = load_solution(tmp / "c/solution.json");
  CHECK(doc.record.config.a == 0.01);
  CHECK(doc.record.config.N_max == 9);
  CHECK(doc.run_config.at("force") == true);
  CHECK(doc.run_config.at("a") == 0.01);
  CHECK_FALSE(doc.run_config.contains("config"));

  spit(tmp / "bad.json", R"({"lambda": [1.1, 0.731], "nope": 1})");
  const auto b = cli({"solve", "--config", tmp / "bad.json"});
  CHECK(b.code == 1);
  CHECK(b.err.find("nope") != std::string::npos);
  spit(tmp / "flag.json", R"({"lambda": [1.1, 0.731], "force": 1})");
  CHECK(cli({"solve", "--config", tmp / "flag.json"}).code == 1);
  CHECK(cli({"solve", "--config", tmp / "missing.json"}).code == 1);
}

TEST_CASE("other subcommands write their outputs") {
  TempDir tmp;
  const auto sw = cli({"sweep-lambda", "--samples", "6", "--out", tmp / "sw"});
  CHECK(sw.code == 0);
  const Json sj = Json::parse(slurp(tmp / "sw/sweep.json"));
  CHECK(sj.at("config").at("samples") == 6);
  CHECK(fs::exists(tmp / "sw/sweep.csv"));

  CHECK(cli(with(kSolve, {"--out", tmp / "s"})).code == 0);
  const auto ev = cli({"evolve", "--in", tmp / "s/solution.json", "--T", "0.5", "--dt", "0.05", "--out", tmp / "ev"});
  CHECK(ev.code == 0);
  CHECK(fs::exists(tmp / "ev/trajectory.csv"));
  CHECK(Json::parse(slurp(tmp / "ev/trajectory.json")).contains("config"));

  CHECK(cli({"greens", "--lambda", "1.1,0.731", "--N-max", "9", "--greens-N", "8", "--out", tmp / "g"}).code == 0);
  const Json gj = Json::parse(slurp(tmp / "g/greens.json"));
  CHECK(gj.at("op_norm_inverse").get<double>() > 0.0);

  CHECK(cli({"theta-sweep", "--lambda", "1.1,0.731", "--N-max", "9", "--N", "4", "--grid-step", "0.01",
             "--out", tmp / "t"})
            .code == 0);
  CHECK(fs::exists(tmp / "t/theta.csv"));

  CHECK(cli({"bifurcation", "--lambda", "1.1,0.731", "--N-max", "9", "--out", tmp / "bf"}).code == 0);
  CHECK(Json::parse(slurp(tmp / "bf/bifurcation.json")).contains("slope_E"));
}
