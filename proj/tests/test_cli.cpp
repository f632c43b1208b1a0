#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "volterra/cli/commands.hpp"

using namespace volterra;
namespace fs = std::filesystem;

namespace {

struct Run {
  int rc;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "volterra");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  auto* o = std::cout.rdbuf(out.rdbuf());
  auto* e = std::cerr.rdbuf(err.rdbuf());
  const int rc = cli::main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(o);
  std::cerr.rdbuf(e);
  return {rc, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "volterra_test_cli" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json result(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "result.json")); }

}  // namespace

TEST_CASE("config grammar") {
  const cli::Config c = cli::Config::parse(
      "# comment\n[model]\npreset = fbm2\n[model.kernel]\nH = 0.35\n; other comment\n\n[grid]\nsteps = 32\n");
  CHECK(c.str("model.preset") == "fbm2");
  CHECK(c.num("model.kernel.H") == 0.35);
  CHECK(c.count("grid.steps", 1) == 32);
  CHECK(c.num("grid.T", 2.0) == 2.0);
  CHECK(c.resolved().at("grid.T") == "2");

  const cli::Config back = cli::Config::parse(c.render());
  CHECK(back.explicit_values() == c.resolved());

  CHECK_THROWS_AS(cli::Config::parse("[model]\nbogus = 1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::Config::parse("[grid]\nsteps = 1\nsteps = 2\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::Config::parse("[grid\nsteps = 1\n"), cli::ConfigError);
  CHECK_THROWS_AS(cli::Config::parse("grid.steps 3\n"), cli::ConfigError);
  const cli::Config bad = cli::Config::parse("[grid]\nsteps = -3\nT = x\n");
  CHECK_THROWS_AS(bad.count("grid.steps", 1), cli::ConfigError);
  CHECK_THROWS_AS(bad.num("grid.T"), cli::ConfigError);
  try {
    cli::Config::parse("").num("model.kernel.H");
    FAIL("no throw");
  } catch (const cli::ConfigError& e) {
    CHECK(std::string(e.what()).find("model.kernel.H") != std::string::npos);
  }
}

TEST_CASE("every documented subcommand is registered") {
  const auto cmds = cli::commands();
  for (const char* c : {"sve simulate", "lift simulate", "lift flow-check", "lift forward-check", "oulift simulate",
                        "oulift compare", "tangent first", "tangent second", "tangent rates", "kolmo value",
                        "kolmo grad", "kolmo hess", "kolmo pde", "kolmo martingale", "kolmo condexp",
                        "kolmo fpe-mild", "kolmo fpe-singular", "verify kernel", "verify weight",
                        "verify gronwall"})
    CHECK_MESSAGE(std::find(cmds.begin(), cmds.end(), c) != cmds.end(), c);
}

TEST_CASE("verify kernel writes the condition report") {
  const fs::path d = scratch("verify");
  const Run r = invoke({"verify", "kernel", "--model", "fbm2", "--H", "0.3", "--out", d.string(), "--quiet"});
  CHECK(r.rc == 0);
  REQUIRE(fs::exists(d / "conditions.csv"));
  CHECK(slurp(d / "conditions.csv").rfind("condition", 0) == 0);
  CHECK(fs::exists(d / "manifest.txt"));
  const auto j = result(d);
  CHECK(j["operation"] == "verify.kernel");
  CHECK(j["estimate"] == 1.0);
  CHECK(j["per_term"]["cond1"]["pass"] == true);
}

TEST_CASE("missing required key exits 2 and names it") {
  const Run r = invoke({"verify", "kernel", "--model", "fbm2", "--out", scratch("missing").string()});
  CHECK(r.rc == 2);
  CHECK(r.err.find("model.kernel.H") != std::string::npos);
}

TEST_CASE("configuration errors exit 2") {
  const std::string out = scratch("bad").string();
  CHECK(invoke({"verify", "kernel", "--set", "model.kernel.Hurst=0.3", "--out", out}).rc == 2);
  CHECK(invoke({"verify", "kernels", "--model", "fbm2", "--H", "0.3", "--out", out}).rc == 2);
  CHECK(invoke({"verify", "kernel", "--model", "nope", "--H", "0.3", "--out", out}).rc == 2);
  CHECK(invoke({"sve", "simulate", "--model", "fbm2", "--H", "0.3", "--steps", "ten", "--out", out}).rc == 2);
  CHECK(invoke({"verify", "kernel", "--config", "/nonexistent/cfg.txt"}).rc == 2);
  CHECK(invoke({"verify"}).rc == 2);
  CHECK(invoke({"kolmo", "pde", "--model", "gaussian", "--H", "0.3", "--steps", "10", "--t", "0.33", "--out", out})
            .rc == 2);
}

TEST_CASE("task failures exit 1 with a diagnostic") {
  const std::string out = scratch("fail").string();
  const Run r = invoke({"tangent", "second", "--model", "smooth", "--H", "0.2", "--steps", "16", "--paths", "10",
                        "--out", out, "--quiet"});
  CHECK(r.rc == 1);
  CHECK(r.err.find("HurstBelowThreshold") != std::string::npos);
  const Run ok = invoke({"tangent", "second", "--model", "gaussian", "--H", "0.2", "--steps", "16", "--paths", "10",
                         "--out", out, "--quiet"});
  CHECK(ok.rc == 0);
}

TEST_CASE("dry run prints the plan and computes nothing") {
  const fs::path d = scratch("dry");
  const Run r = invoke({"kolmo", "pde", "--model", "gaussian", "--H", "0.35", "--out", d.string(), "--dry-run"});
  CHECK(r.rc == 0);
  CHECK(r.out.rfind("plan: kolmo pde", 0) == 0);
  CHECK(r.out.find("[mc]") != std::string::npos);
  CHECK(r.out.find("paths = 20000") != std::string::npos);
  CHECK_FALSE(fs::exists(d));
  for (const auto& c : cli::commands()) {
    const auto sp = c.find(' ');
    const Run each = invoke({c.substr(0, sp), c.substr(sp + 1), "--model", "gaussian", "--H", "0.35", "--out",
                             d.string(), "--dry-run"});
    CHECK_MESSAGE(each.rc == 0, c << ": " << each.err);
  }
  CHECK_FALSE(fs::exists(d));
}

TEST_CASE("kolmo pde: Gaussian quadratic residual") {
  const fs::path d = scratch("pde");
  const Run r = invoke({"kolmo", "pde", "--model", "gaussian", "--H", "0.35", "--steps", "32", "--t", "0.5",
                        "--payoff", "square", "--set", "task.y=gauss:0.5,0.4,0.3", "--set", "task.fd_steps=4",
                        "--paths", "20000", "--seed", "2", "--out", d.string(), "--quiet"});
  REQUIRE(r.rc == 0);
  const auto j = result(d);
  const double res = j["estimate"], se = j["std_error"];
  CHECK(se > 0.0);
  CHECK(std::abs(res) <= 3.0 * se);
}

TEST_CASE("manifest rerun is bitwise identical across worker counts") {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  REQUIRE(invoke({"sve", "simulate", "--model", "smooth", "--H", "0.3", "--steps", "24", "--paths", "300", "--seed",
                  "9", "--out", a.string(), "--threads", "1", "--quiet"})
              .rc == 0);
  REQUIRE(invoke({"run", (a / "manifest.txt").string(), "--out", b.string(), "--threads", "4", "--quiet"}).rc == 0);
  CHECK(slurp(a / "result.json") == slurp(b / "result.json"));
  CHECK(slurp(a / "ensemble.csv") == slurp(b / "ensemble.csv"));
  const std::string m = slurp(a / "manifest.txt");
  CHECK(m.find("# seed = 9") != std::string::npos);
  CHECK(m.find("# version = ") != std::string::npos);
  CHECK(m.find("# wall_time_s = ") != std::string::npos);
  CHECK(m.find("command = sve simulate") != std::string::npos);
  // A different seed changes the numbers.
  const fs::path c = scratch("rerun_c");
  REQUIRE(invoke({"run", (a / "manifest.txt").string(), "--out", c.string(), "--seed", "10", "--quiet"}).rc == 0);
  CHECK(slurp(a / "ensemble.csv") != slurp(c / "ensemble.csv"));
}

TEST_CASE("config file and overrides") {
  const fs::path d = scratch("cfg");
  fs::create_directories(d);
  std::ofstream(d / "exp.cfg") << "[model]\npreset = fbm2\n\n[model.kernel]\nH = 0.3\n\n[grid]\nsteps = 16\n\n"
                                  "[mc]\npaths = 50\nseed = 4\n";
  const fs::path o1 = d / "o1", o2 = d / "o2";
  REQUIRE(invoke({"sve", "simulate", "--config", (d / "exp.cfg").string(), "--out", o1.string(), "--quiet"}).rc == 0);
  const auto j = result(o1);
  CHECK(j["params"]["grid.steps"] == "16");
  CHECK(j["params"]["mc.paths"] == "50");
  REQUIRE(invoke({"sve", "simulate", "--config", (d / "exp.cfg").string(), "--set", "grid.steps=8", "--out",
                  o2.string(), "--quiet"})
              .rc == 0);
  CHECK(result(o2)["params"]["grid.steps"] == "8");
}
