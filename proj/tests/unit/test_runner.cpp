#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "evomarket/runner.hpp"

using namespace evomarket;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("evomarket_run_" + std::to_string(++counter));
    fs::remove_all(path);
  }
  ~TempDir() { std::error_code ec; fs::remove_all(path, ec); }
};

Scenario cheap_scenario() {
  Scenario s;
  s.name = "cheap";
  s.outputs = {"profit_invariant"};
  s.profit.n_products = 20;
  s.profit.n_times = 50;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("pearson correlation: exact cases and guards") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> y = {2.0, 4.0, 6.0, 8.0};
  CHECK(detail::pearson(x, y) == doctest::Approx(1.0));
  std::vector<double> yn = {8.0, 6.0, 4.0, 2.0};
  CHECK(detail::pearson(x, yn) == doctest::Approx(-1.0));
  std::vector<double> flat = {3.0, 3.0, 3.0, 3.0};
  CHECK_THROWS_AS(detail::pearson(x, flat), insufficient_data_error);
  std::vector<double> too_short = {1.0, 2.0};
  CHECK_THROWS_AS(detail::pearson(too_short, too_short),
                  insufficient_data_error);
}

TEST_CASE("fit_exponential_decline recovers a noiseless decline") {
  const double A = 0.3, rate = 0.8, c = 0.025;
  std::vector<double> t, y;
  for (int i = 0; i <= 100; ++i) {
    t.push_back(0.1 * i);
    y.push_back(A * std::exp(-rate * t.back()) + c);
  }
  const auto fit = fit_exponential_decline(t, y);
  CHECK(fit.r_squared > 0.999999);
  CHECK(fit.amplitude == doctest::Approx(A).epsilon(1e-3));
  CHECK(fit.rate == doctest::Approx(rate).epsilon(1e-3));
  CHECK(fit.asymptote == doctest::Approx(c).epsilon(1e-3));

  std::vector<double> flat(20, 1.0), tt(20);
  for (int i = 0; i < 20; ++i) tt[i] = i;
  CHECK_THROWS_AS(fit_exponential_decline(tt, flat), insufficient_data_error);
  std::vector<double> short_t = {0, 1, 2}, short_y = {3, 2, 1};
  CHECK_THROWS_AS(fit_exponential_decline(short_t, short_y),
                  insufficient_data_error);
}

TEST_CASE("run_scenario executes every seed with an identical schema") {
  Scenario s = cheap_scenario();
  s.seeds = {11, 12};
  const auto runs = run_scenario(s, 2);
  REQUIRE(runs.size() == 2);
  for (const auto& r : runs) {
    CHECK(r.ok);
    CHECK(r.error.empty());
    CHECK(r.wall_seconds >= 0.0);
    REQUIRE(r.output.tables.size() == 1);
    CHECK(r.output.tables[0].name == "profit_invariant_timeseries");
    CHECK(r.output.summary.count("profit_ratio_mean") == 1);
  }
  CHECK(runs[0].seed == 11);
  CHECK(runs[1].seed == 12);
  // Different seeds draw different product populations, so the raw revenue
  // series differ even though the profit ratio is invariant.
  CHECK(runs[0].output.tables[0].rows[5][1] !=
        runs[1].output.tables[0].rows[5][1]);
}

TEST_CASE("a failing seed is captured without aborting the batch") {
  Scenario s = cheap_scenario();
  s.outputs = {"size_variance"};
  s.size_variance.size_min = 0.0;  // invalid: triggers a domain error at run time
  s.seeds = {1, 2};
  const auto runs = run_scenario(s, 1);
  REQUIRE(runs.size() == 2);
  for (const auto& r : runs) {
    CHECK(!r.ok);
    CHECK(r.error.find("size_min") != std::string::npos);
  }

  TempDir dir;
  const json manifest = write_run(s, runs, dir.path);
  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(manifest.at("results").size() == 2);
  CHECK(manifest.at("results")[0].at("status") == "error");
  CHECK(manifest.at("results")[0].at("files").empty());
  // Nothing to checksum, so the directory still verifies.
  CHECK(verify_run(dir.path).ok);
}

TEST_CASE("write_run then verify_run round-trips cleanly") {
  Scenario s = cheap_scenario();
  s.seeds = {7};
  const auto runs = run_scenario(s, 1);
  TempDir dir;
  const json manifest = write_run(s, runs, dir.path);

  CHECK(manifest.at("scenario_hash") == scenario_hash(s));
  CHECK(manifest.at("code_version") == kCodeVersion);
  const fs::path seed_dir = dir.path / "seed-7";
  CHECK(fs::exists(seed_dir / "profit_invariant_timeseries.csv"));
  CHECK(fs::exists(seed_dir / "summary.csv"));

  // Every data file opens with the scenario hash line.
  const std::string head = "# scenario_hash=" + scenario_hash(s);
  const std::string csv = slurp(seed_dir / "summary.csv");
  CHECK(csv.substr(0, head.size()) == head);

  const auto rep = verify_run(dir.path);
  CHECK(rep.ok);
  CHECK(rep.mismatches.empty());
}

TEST_CASE("verify_run flags tampering and missing files") {
  Scenario s = cheap_scenario();
  s.seeds = {7};
  const auto runs = run_scenario(s, 1);
  TempDir dir;
  write_run(s, runs, dir.path);

  const fs::path target = dir.path / "seed-7" / "summary.csv";
  {
    std::ofstream f(target, std::ios::binary | std::ios::app);
    f << "tampered\n";
  }
  auto rep = verify_run(dir.path);
  CHECK(!rep.ok);
  REQUIRE(rep.mismatches.size() == 1);
  CHECK(rep.mismatches[0].find("checksum mismatch") != std::string::npos);
  CHECK(rep.mismatches[0].find("summary.csv") != std::string::npos);

  fs::remove(target);
  rep = verify_run(dir.path);
  CHECK(!rep.ok);
  CHECK(rep.mismatches[0].find("missing file") != std::string::npos);

  fs::remove(dir.path / "manifest.json");
  rep = verify_run(dir.path);
  CHECK(!rep.ok);
  CHECK(rep.mismatches[0].find("manifest.json unreadable") != std::string::npos);
}

TEST_CASE("verify_run detects a scenario edited after the fact") {
  Scenario s = cheap_scenario();
  s.seeds = {3};
  TempDir dir;
  write_run(s, run_scenario(s, 1), dir.path);

  json manifest = json::parse(slurp(dir.path / "manifest.json"));
  manifest["scenario"]["market"]["alpha_mean"] = 0.7;
  detail::write_text(dir.path / "manifest.json", manifest.dump(2) + "\n");

  const auto rep = verify_run(dir.path);
  CHECK(!rep.ok);
  CHECK(rep.mismatches[0].find("scenario hash mismatch") != std::string::npos);
}

TEST_CASE("repeated runs emit byte-identical output") {
  Scenario s = cheap_scenario();
  s.seeds = {42};
  TempDir d1, d2;
  write_run(s, run_scenario(s, 1), d1.path);
  write_run(s, run_scenario(s, 1), d2.path);
  for (const auto& fname :
       {"manifest.json", "seed-42/profit_invariant_timeseries.csv",
        "seed-42/summary.csv"}) {
    CAPTURE(fname);
    CHECK(slurp(d1.path / fname) == slurp(d2.path / fname));
  }
}

TEST_CASE("an empty table serializes to header-only CSV") {
  Table t;
  t.name = "empty";
  t.columns = {"a (unit)", "b (unit)"};
  CHECK(detail::table_to_csv(t, "deadbeef") ==
        "# scenario_hash=deadbeef\na (unit),b (unit)\n");
}
