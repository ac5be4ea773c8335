#include <iostream>

#include <CLI11.hpp>

#include "runner.hpp"

int main(int argc, char** argv) {
  using namespace smoothfix::cli;
  CLI::App app{"Monte Carlo experiments on fixed points of the smoothing transform"};
  app.set_version_flag("--version", kVersion);

  std::string task;
  std::string config;
  RunOptions options;
  options.log = &std::cerr;
  app.add_option("task", task, "Task to run")->required()->check(CLI::IsMember(task_names()));
  app.add_option("--config", config, "Experiment config (JSON)")->required();
  app.add_flag("--strict", options.strict, "Treat cap-exceeded warnings as failures");
  app.add_flag("--overwrite", options.overwrite, "Replace a W cache whose checksum does not match");
  app.add_option("--workers", options.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->default_val(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  const RunResult result = run_file(task, config, options);
  if (result.exit_code == kConfigError) return kConfigError;

  std::size_t failed = 0;
  for (const auto& row : result.rows) {
    if (!row.pass) ++failed;
    std::cout << (row.pass ? "pass  " : "FAIL  ") << row.name << "  estimate=" << row.estimate
              << " target=" << row.target << " stderr=" << row.std_error << " z=" << row.z
              << '\n';
  }
  std::cout << result.rows.size() - failed << '/' << result.rows.size() << " rows passed; "
            << "report in " << (result.output_dir / "report.csv").string() << '\n';
  return result.exit_code;
}
