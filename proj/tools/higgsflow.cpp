// Command-line driver: run scenarios from JSON configuration files, verify
// the geometric identity table for a configuration, and re-render reports
// from persisted output directories.
//
// Exit codes: 0 clean completion (including divergence with a verdict),
// 1 configuration or usage error, 2 aborted run or failed verification,
// 3 unexpected internal error.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "higgsflow/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Donaldson heat flow laboratory for Higgs bundles"};
  app.require_subcommand(1);

  std::vector<std::string> configs;
  std::vector<std::string> dirs;
  std::string out_dir;
  std::string resume;
  int record_every = 0;
  std::uint64_t seed = 0;
  bool has_seed = false;

  CLI::App* run = app.add_subcommand("run", "integrate the flow for scenarios");
  run->add_option("--config", configs, "scenario configuration file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out-dir", out_dir,
                  "output directory (per-scenario subdirectories when several "
                  "configs are given)");
  run->add_option("--record-every", record_every, "override the record cadence")
      ->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "override the configured seed")
      ->each([&](const std::string&) { has_seed = true; });
  run->add_option("--resume", resume,
                  "snapshot prefix to continue from (single config only)");

  CLI::App* verify = app.add_subcommand("verify", "run the identity/invariant table");
  verify->add_option("--config", configs, "scenario configuration file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);

  CLI::App* report = app.add_subcommand("report", "re-render persisted reports");
  report->add_option("--dir", dirs, "output directory of a finished run (repeatable)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      if (!resume.empty() && configs.size() != 1) {
        std::cerr << "run: --resume needs exactly one --config\n";
        return 1;
      }
      int worst = 0;
      for (const std::string& path : configs) {
        higgsflow::RunConfig cfg = higgsflow::load_run_config(path);
        higgsflow::RunOptions opt;
        if (!out_dir.empty())
          opt.out_dir = configs.size() == 1 ? out_dir
                                            : out_dir + "/" + cfg.scenario;
        opt.record_every = record_every;
        opt.has_seed = has_seed;
        opt.seed = seed;
        opt.resume_prefix = resume;
        higgsflow::RunReport rep = higgsflow::run_scenario(cfg, opt);
        std::cout << higgsflow::render_report(rep);
        if (rep.verdict == "aborted") worst = 2;
      }
      return worst;
    }
    if (verify->parsed()) {
      int worst = 0;
      for (const std::string& path : configs) {
        higgsflow::RunConfig cfg = higgsflow::load_run_config(path);
        auto rows = higgsflow::verify_scenario(cfg);
        std::cout << "scenario " << cfg.scenario << '\n'
                  << higgsflow::render_verify(rows);
        for (const auto& row : rows)
          if (row.status == "fail") worst = 2;
      }
      return worst;
    }
    for (const std::string& d : dirs) std::cout << higgsflow::report_subcommand(d);
    return 0;
  } catch (const higgsflow::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
