#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mvsde/toml.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace mvsde;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MVSDE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  REQUIRE(is.good());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path config(const std::string& name) { return fs::path(MVSDE_CONFIG_DIR) / name; }

}  // namespace

TEST_CASE("toml subset parser") {
  const std::string text = R"([alpha]
x = 1
y = 2.5
flag = true
name = "hello"  # trailing comment
arr = [1.0, 2, 3.5]

[beta]
s = ["a", "b"]
)";
  auto t = parse_toml(text);
  CHECK(t.at("alpha.x").as_int() == 1);
  CHECK(t.at("alpha.y").as_double() == 2.5);
  CHECK(t.at("alpha.flag").as_bool());
  CHECK(t.at("alpha.name").as_string() == "hello");
  CHECK(t.at("alpha.arr").as_double_array() == std::vector<double>{1.0, 2.0, 3.5});
  CHECK(t.at("alpha.x").as_double() == 1.0);  // ints promote

  // round trip through the canonical serialization
  auto again = parse_toml(t.serialize());
  CHECK(again.serialize() == t.serialize());

  CHECK_THROWS_WITH(parse_toml("x = 1\n"), doctest::Contains("line 1"));
  CHECK_THROWS_WITH(parse_toml("[a]\nx 1\n"), doctest::Contains("line 2"));
  CHECK_THROWS_WITH(parse_toml("[a]\nx = what\n"), doctest::Contains("line 2"));
}

TEST_CASE("cli basics") {
  const fs::path tmp = fs::temp_directory_path() / "mvsde_cli_test";
  fs::remove_all(tmp);

  SUBCASE("simulate runs and reports") {
    const int rc = run_cli("simulate --config " + config("ou.toml").string() + " --seed 7 --out " +
                           (tmp / "sim").string());
    CHECK(rc == 0);
    const auto summary = json::parse(slurp(tmp / "sim" / "summary.json"));
    CHECK(summary["seed"] == 7);
    CHECK(summary["results"]["terminal_moment_theta"].get<double>() ==
          doctest::Approx((1 - std::exp(-2.0)) / 2).epsilon(0.05));
    // resolved config re-runs to the identical summary
    const int rc2 = run_cli("simulate --config " + (tmp / "sim" / "resolved_config.toml").string() +
                            " --out " + (tmp / "sim2").string());
    CHECK(rc2 == 0);
    CHECK(slurp(tmp / "sim2" / "summary.json") == slurp(tmp / "sim" / "summary.json"));
  }

  SUBCASE("unknown coefficient tag fails with exit 1") {
    const fs::path bad = tmp / "bad.toml";
    fs::create_directories(tmp);
    std::ofstream(bad) << "[scenario]\nd = 1\nm = 10\n[drift]\ntag = \"nope\"\n";
    CHECK(run_cli("simulate --config " + bad.string() + " --out " + (tmp / "bad_out").string()) == 1);
  }

  SUBCASE("validate is diagnostic: failing Dini check still exits 0") {
    const int rc = run_cli("validate --config " + config("singular_drift.toml").string() +
                           " --seed 13 --out " + (tmp / "val").string());
    CHECK(rc == 0);
    const auto summary = json::parse(slurp(tmp / "val" / "summary.json"));
    CHECK_FALSE(summary["results"]["dini_pass"].get<bool>());
  }

  SUBCASE("transport subcommand recovers the Gaussian distance") {
    const int rc = run_cli("transport --config " + config("transport_gaussians.toml").string() +
                           " --seed 71 --out " + (tmp / "tr").string());
    CHECK(rc == 0);
    const auto summary = json::parse(slurp(tmp / "tr" / "summary.json"));
    CHECK(summary["results"]["distance"].get<double>() == doctest::Approx(1.0).epsilon(0.05));
  }
}
