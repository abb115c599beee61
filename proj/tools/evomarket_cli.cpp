// Command-line front end: run scenario files or built-in presets, fit
// distribution families to CSV columns, and verify written run directories.
//
// Exit codes: 0 success, 1 validation error, 2 runtime error,
// 3 verification mismatch.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evomarket/runner.hpp"

namespace {

using namespace evomarket;

std::vector<double> read_csv_column(const std::string& path,
                                    const std::string& column) {
  std::ifstream in(path);
  if (!in) throw domain_error("cannot open table: " + path);
  std::string line;
  std::vector<std::string> header;
  std::size_t col_idx = 0;
  bool have_header = false;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream row(line);
    std::string cell;
    if (!have_header) {
      std::size_t idx = 0;
      bool found = false;
      while (std::getline(row, cell, ',')) {
        // Column names may carry a unit suffix: match up to " (".
        const auto base = cell.substr(0, cell.find(" ("));
        if (cell == column || base == column) {
          col_idx = idx;
          found = true;
        }
        ++idx;
      }
      if (!found) {
        if (column.empty() && idx > 0) {
          col_idx = idx - 1;  // default: last column
        } else {
          throw domain_error("column '" + column + "' not found in " + path);
        }
      }
      have_header = true;
      continue;
    }
    std::size_t idx = 0;
    while (std::getline(row, cell, ',')) {
      if (idx == col_idx) {
        try {
          values.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw domain_error("non-numeric cell '" + cell + "' in " + path);
        }
      }
      ++idx;
    }
  }
  if (values.empty()) throw domain_error("no data rows in " + path);
  return values;
}

json fit_to_json(const FitResult& f) {
  json j;
  j["family"] = to_string(f.family);
  j["n"] = f.n;
  j["loglik"] = f.loglik;
  j["params"] = f.params;
  j["stderrs"] = f.stderrs;
  if (std::isfinite(f.ks_stat)) j["ks_stat"] = f.ks_stat;
  if (std::isfinite(f.ks_pvalue)) j["ks_pvalue"] = f.ks_pvalue;
  j["converged"] = f.converged;
  j["degenerate"] = f.degenerate;
  j["unstable"] = f.unstable;
  if (!f.note.empty()) j["note"] = f.note;
  return j;
}

int execute_runs(const Scenario& scenario_in,
                 const std::vector<std::uint64_t>& seed_override,
                 const std::string& out_dir, unsigned threads) {
  Scenario s = scenario_in;
  if (!seed_override.empty()) s.seeds = seed_override;
  if (s.outputs.empty()) {
    std::cerr << "scenario requests no analyses (empty outputs)\n";
    return 1;
  }
  const auto runs = run_scenario(s, threads);
  write_run(s, runs, out_dir);
  bool any_failed = false;
  for (const auto& r : runs) {
    if (r.ok) {
      std::cout << "seed " << r.seed << ": ok (" << r.wall_seconds << " s)\n";
    } else {
      std::cout << "seed " << r.seed << ": FAILED: " << r.error << "\n";
      any_failed = true;
    }
  }
  std::cout << "wrote " << out_dir << " (scenario hash " << scenario_hash(s)
            << ")\n";
  return any_failed ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evolutionary consumer-goods market simulator"};
  app.require_subcommand(1);

  std::vector<std::uint64_t> seeds;
  std::string out_dir = "out";
  unsigned threads = 1;
  bool strict = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seeds", seeds, "override scenario seeds")->delimiter(',');
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--threads", threads, "parallel seed workers");
    cmd->add_flag("--strict", strict, "reject unknown scenario keys");
  };

  std::string scenario_path;
  auto* run_cmd = app.add_subcommand("run", "run a scenario file");
  run_cmd->add_option("scenario", scenario_path, "scenario JSON file")
      ->required();
  add_common(run_cmd);

  std::string preset_name;
  auto* preset_cmd = app.add_subcommand("preset", "run a built-in preset");
  preset_cmd->add_option("name", preset_name, "preset name")->required();
  add_common(preset_cmd);

  std::string table_path, family, column;
  auto* fit_cmd = app.add_subcommand("fit", "fit a family to a CSV column");
  fit_cmd->add_option("table", table_path, "CSV table")->required();
  fit_cmd
      ->add_option("--family", family,
                   "lognormal | pareto-tail | laplace | subbotin | mixture")
      ->required();
  fit_cmd->add_option("--column", column,
                      "column name (default: last column)");

  std::string run_dir;
  auto* verify_cmd = app.add_subcommand("verify", "verify a run directory");
  verify_cmd->add_option("run-dir", run_dir, "directory with manifest.json")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) {
      const Scenario s = evomarket::load_scenario(scenario_path, strict);
      return execute_runs(s, seeds, out_dir, threads);
    }
    if (*preset_cmd) {
      const Scenario s = evomarket::preset_scenario(preset_name);
      return execute_runs(s, seeds, out_dir, threads);
    }
    if (*fit_cmd) {
      const auto values = read_csv_column(table_path, column);
      evomarket::FitResult fit;
      if (family == "lognormal")
        fit = evomarket::fit_lognormal(values);
      else if (family == "pareto-tail" || family == "pareto_tail")
        fit = evomarket::fit_pareto_tail(values);
      else if (family == "laplace")
        fit = evomarket::fit_laplace(values);
      else if (family == "subbotin")
        fit = evomarket::fit_subbotin(values);
      else if (family == "mixture" || family == "singular_mixture")
        fit = evomarket::fit_singular_mixture(values);
      else
        throw evomarket::domain_error("unknown family '" + family + "'");
      std::cout << fit_to_json(fit).dump(2) << "\n";
      return 0;
    }
    if (*verify_cmd) {
      const auto rep = evomarket::verify_run(run_dir);
      if (rep.ok) {
        std::cout << "verification ok\n";
        return 0;
      }
      for (const auto& m : rep.mismatches) std::cout << "MISMATCH: " << m << "\n";
      return 3;
    }
  } catch (const evomarket::domain_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const evomarket::scenario_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const evomarket::insufficient_data_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
