#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path d = [] {
    const fs::path p = fs::temp_directory_path() / ("defectlab_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return d;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

// Exit status of the tool; stdout goes to `capture` when given.
int run(const std::string& args, const std::string& capture = "") {
  std::string cmd = std::string(DEFECTLAB_CLI) + " " + args;
  cmd += capture.empty() ? " > /dev/null" : " > " + capture;
  cmd += " 2> " + path("stderr.txt");
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string& solved() {
  static const std::string p = [] {
    const std::string out = path("p.json");
    REQUIRE(run("solve --t 0.5 --k 1 --nodes 512 --out " + out) == 0);
    return out;
  }();
  return p;
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run("") == 1);
  CHECK(run("--help") == 0);
  CHECK(run("frobnicate") == 1);
  CHECK(run("solve --t 0.5 --out " + path("x.json")) == 1);
  CHECK(run("solve --t 0 --k 1 --out " + path("x.json")) == 1);
  CHECK(run("solve --t 0.5 --k 0 --out " + path("x.json")) == 1);
  CHECK(run("solve --t 0.5 --k 1 --nodes 10 --out " + path("x.json")) == 1);
  CHECK(run("solve --t 0.5 --k 1 --grading chebyshev --out " + path("x.json")) == 1);
  CHECK_FALSE(fs::exists(path("x.json")));
  CHECK(run("properties --profile " + path("missing.json")) == 1);
  CHECK(run("verify --checks spectra --profile " + solved()) == 1);
  CHECK(run("verify --checks '' --profile " + solved()) == 1);
}

TEST_CASE("solve is deterministic") {
  const std::string a = solved();
  const std::string b = path("q.json");
  REQUIRE(run("solve --t 0.5 --k 1 --nodes 512 --out " + b) == 0);
  CHECK(slurp(a) == slurp(b));
  const auto j = nlohmann::json::parse(slurp(a));
  CHECK(j["solver"]["converged"] == true);
  CHECK(j["params"]["nodes"] == 512);
  CHECK(j["r"].size() == 513);
}

TEST_CASE("report subcommands") {
  const std::string props = path("props.json");
  CHECK(run("properties --profile " + solved(), props) == 0);
  CHECK(nlohmann::json::parse(slurp(props))["all_satisfied"] == true);

  const std::string energy = path("energy.json");
  CHECK(run("energy --profile " + solved() + " --out " + energy) == 0);
  CHECK(nlohmann::json::parse(slurp(energy)).contains("discrete_energy"));

  const std::string plots = path("plots");
  CHECK(run("plotdata --profile " + solved() + " --out " + plots) == 0);
  CHECK(fs::exists(plots + "/profile.csv"));
  CHECK(fs::exists(plots + "/margins.csv"));

  const std::string ver = path("verify.json");
  CHECK(run("verify --checks sos --profile " + solved() + " --out " + ver) == 0);
  CHECK(nlohmann::json::parse(slurp(ver))["all_pass"] == true);
}

TEST_CASE("stability") {
  const std::string out = path("stab.json");
  const std::string stdout_file = path("stab.txt");
  CHECK(run("stability --nmax 2 --mmax 2 --profile " + solved() + " --out " + out, stdout_file) == 0);
  CHECK(slurp(stdout_file) == "verdict stable\n");
  CHECK(fs::exists(path("stab.csv")));
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j["verdict"] == "stable");
  CHECK(j["negative_total"] == 0);
}

TEST_CASE("io failures") {
  {
    std::ofstream(path("broken.json")) << "{\"schema_version\": \"1\"";
  }
  CHECK(run("properties --profile " + path("broken.json")) == 4);
  CHECK(run("solve --t 0.5 --k 1 --nodes 256 --out " + path("no/such/dir/p.json")) == 4);
}
