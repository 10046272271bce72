#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#include "defectlab/error.hpp"
#include "defectlab/io.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace defectlab;
using testing::profile;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / ("defectlab_io_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

std::string edit(const std::string& text, auto&& f) {
  nlohmann::ordered_json j = nlohmann::ordered_json::parse(text);
  f(j);
  return j.dump(1);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("shortest round-trip doubles") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng) * std::pow(10.0, i % 40 - 20);
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(1.0) == "1");
  CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("profile documents round-trip byte for byte") {
  const Profile& p = profile(0.5, 1, 256);
  const std::string text = to_json(make_document(p));
  const ProfileDocument doc = profile_document_from_json(text);
  CHECK(to_json(doc) == text);
  CHECK(text.back() == '\n');

  const Profile q = profile_of(doc);
  REQUIRE(q.nodes() == p.nodes());
  for (int i = 0; i < p.nodes(); ++i) {
    CHECK(q.r()[i] == p.r()[i]);
    CHECK(q.u[i] == p.u[i]);
    CHECK(q.v[i] == p.v[i]);
    CHECK(q.du[i] == p.du[i]);
  }
  CHECK(q.params.t == p.params.t);
  CHECK(q.converged == p.converged);

  // Fixed key order.
  const auto j = nlohmann::ordered_json::parse(text);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  const std::vector<std::string> expect = {"schema_version", "params", "s_plus", "solver", "r",
                                           "u", "v", "du", "dv", "property_report"};
  CHECK(keys == expect);
  CHECK(j["params"]["nodes"] == 256);
  CHECK(j["r"].size() == 257);
}

TEST_CASE("strict parsing") {
  const std::string text = to_json(make_document(profile(0.5, 1, 256)));
  CHECK_THROWS_AS(profile_document_from_json("{"), IoError);
  CHECK_THROWS_AS(profile_document_from_json(edit(text, [](auto& j) { j["extra"] = 1; })), IoError);
  CHECK_THROWS_AS(profile_document_from_json(edit(text, [](auto& j) { j.erase("dv"); })), IoError);
  CHECK_THROWS_AS(profile_document_from_json(edit(text, [](auto& j) { j["u"].erase(0); })), IoError);
  CHECK_THROWS_AS(profile_document_from_json(edit(text, [](auto& j) { j["schema_version"] = "2"; })),
                  IoError);
  CHECK_THROWS_AS(profile_document_from_json(edit(text, [](auto& j) { j["params"]["nodes"] = 128; })),
                  IoError);
  CHECK_THROWS_AS(profile_document_from_json(edit(text, [](auto& j) { j["params"]["t"] = "half"; })),
                  IoError);
  CHECK_THROWS_AS(profile_document_from_json(
                      edit(text, [](auto& j) { j["property_report"]["all_satisfied"] = false; })),
                  IoError);
  CHECK_THROWS_AS(profile_document_from_json(
                      edit(text, [](auto& j) { j["params"]["unexpected"] = 0; })),
                  IoError);
}

TEST_CASE("atomic file writes") {
  const fs::path d = scratch_dir();
  const fs::path f = d / "profile.json";
  const ProfileDocument doc = make_document(profile(0.5, 1, 256));
  save_profile(f.string(), doc);
  save_profile(f.string(), doc);
  int entries = 0;
  for (const auto& e : fs::directory_iterator(d)) {
    CHECK(e.path().filename() == "profile.json");
    ++entries;
  }
  CHECK(entries == 1);
  CHECK(to_json(load_profile(f.string())) == to_json(doc));
  CHECK_THROWS_AS(read_file((d / "missing.json").string()), IoError);
  CHECK_THROWS_AS(write_file_atomic((d / "no" / "such" / "dir.json").string(), "x"), IoError);
  fs::remove_all(d);
}

TEST_CASE("tables") {
  const Profile& p = profile(0.5, 1, 256);
  const auto prof = lines(profile_csv(p));
  REQUIRE(prof.size() == 258);
  CHECK(prof[0] == "r,u,v,du,dv");

  const auto marg = lines(margins_csv(p));
  REQUIRE(marg.size() == 258);
  CHECK(marg[0] == "r,u,minus_v,minus_u_plus_3v,norm_bound,v_plus_s6,p,q");
  // Row of node 10: p = u du.
  std::istringstream row(marg[11]);
  std::vector<double> cells;
  for (std::string c; std::getline(row, c, ',');) cells.push_back(std::stod(c));
  REQUIRE(cells.size() == 8);
  CHECK(cells[0] == p.r()[10]);
  CHECK(cells[6] == doctest::Approx(p.u[10] * p.du[10]).epsilon(1e-15));
  CHECK(cells[7] == doctest::Approx(-p.dv[10] * (1 + 6 * p.v[10])).epsilon(1e-15).scale(1e-30));
}

TEST_CASE("spectral and report documents") {
  const Profile& p = profile(0.5, 1, 512);
  SweepOptions so;
  so.n_max = 2;
  so.m_max = 2;
  so.count = 3;
  const SpectralReport rep = stability_sweep(p, so);
  const auto csv = lines(spectra_csv(rep));
  CHECK(csv[0] == "block,sector,index,eig_rank,eigenvalue,residual,inertia_below_shift");
  CHECK(csv.size() == 1 + 3 * rep.blocks.size());

  const auto summary = nlohmann::json::parse(spectral_summary_json(rep, nullptr, 5));
  CHECK(summary["verdict"] == "stable");
  CHECK(summary["seed"] == 5);
  CHECK(summary["kernel"].is_null());
  CHECK(summary["blocks"].size() == rep.blocks.size());

  const auto props = nlohmann::json::parse(properties_json(check_properties(p), strict_monotonicity(p)));
  CHECK(props.contains("monotonicity"));
  const EnergyReport e = reduced_energy(p);
  const auto energy = nlohmann::json::parse(energy_json(p, e, nullptr));
  CHECK(energy.contains("discrete_energy"));
}
