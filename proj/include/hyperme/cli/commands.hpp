#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hyperme/cli/bundle.hpp"
#include "hyperme/cli/spec.hpp"

namespace hyperme::cli {

struct RunOptions {
  /// Overrides prior.alphas.
  std::optional<std::vector<double>> alphas;
  /// Overrides repeat.n.
  std::optional<int> n;
  bool finite_bath = false;
};

Bundle run_solve(const ModelSpec& spec);
Bundle run_prior(const ModelSpec& spec, const RunOptions& options);
Bundle run_fluct(const ModelSpec& spec, const RunOptions& options);
Bundle run_repeat(const ModelSpec& spec, const RunOptions& options);
/// Every property applicable to each spec; exit_code is kExitCheckFailed
/// when any property fails.
Bundle run_check(const std::vector<ModelSpec>& specs);

/// Dispatch by subcommand name; `specs` must hold exactly one spec except for check.
Bundle run(const std::string& command, const std::vector<ModelSpec>& specs, const RunOptions& options);

/// Exit code for an engine error: usage errors map to kExitSchema, the rest to kExitNumerical.
int exit_code_for(const std::exception& e);

}  // namespace hyperme::cli
