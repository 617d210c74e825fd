#pragma once

// Command-line front end. run() is the whole program minus process setup,
// so tests can drive every subcommand in-process.
//
//   blin sample-cov --data FILE
//   blin normal-spec --ev FILE [--vprime FILE] [--mc-draws N] [--seed S]
//   blin adjust   --spec FILE [--data FILE | --sample FILE] [--collections s,i,c] [--n N]
//   blin resolve  (as adjust; stepwise resolutions)
//   blin diagnose (as adjust) [--gref FILE] [--strict]
//   blin diagram  (as diagnose | --report FILE) --out FILE.dot
//
// Common: --format table|json, --out FILE, --strict, --tol name=value.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blin/common.hpp"

namespace blin::cli {

enum ExitCode : int {
  kOk = 0,
  kIoOrParse = 2,
  kInsufficientData = 3,
  kValidation = 4,
  kStrictDiagnostic = 5,
};

enum class Command { sample_cov, normal_spec, adjust, resolve, diagnose, diagram };

struct RunConfig {
  Command command = Command::adjust;
  std::string spec_path;
  std::string data_path;
  std::string sample_path;
  std::string output_path;
  std::string report_path;
  std::string ev_path;
  std::string vprime_path;
  std::string collections = "s,i,c";
  std::optional<std::size_t> n_override;
  std::string g_ref_path;
  bool strict = false;
  bool json = false;
  Tolerances tolerances;
  std::optional<std::uint64_t> seed;
  std::size_t mc_draws = 0;
};

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Executes an already-parsed configuration; errors map to ExitCode values.
int execute(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace blin::cli
