#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace smoothfix::cli {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kOutputDirEnv = "SMOOTHFIX_OUTPUT_DIR";

enum ExitCode : int { kPass = 0, kAssertionFailed = 1, kConfigError = 2 };

struct ReportRow {
  std::string name;
  double estimate = 0.0;
  double target = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  bool pass = true;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  std::size_t depth = 0;
};

struct RunOptions {
  bool strict = false;
  bool overwrite = false;
  std::size_t workers = 1;
  std::ostream* log = nullptr;  // warnings and diagnostics; nullptr = silent
};

struct RunResult {
  int exit_code = kPass;
  std::filesystem::path output_dir;
  std::vector<ReportRow> rows;
  std::vector<std::string> warnings;
  std::string error;  // set when exit_code == kConfigError
  bool cache_hit = false;
};

const std::vector<std::string>& task_names();

// Validates `config` against the schema for `task`, runs it, and writes
// report.csv and meta.json into the output directory.
RunResult run(const std::string& task, const nlohmann::json& config,
              const RunOptions& options = {});

RunResult run_file(const std::string& task, const std::filesystem::path& config_path,
                   const RunOptions& options = {});

// report.csv contents for the given rows.
std::string report_csv(const std::vector<ReportRow>& rows);

}  // namespace smoothfix::cli
