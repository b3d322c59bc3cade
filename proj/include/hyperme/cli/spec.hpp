#pragma once

// JSON model specification (schema_version 1) and the builders that turn it
// into engine objects.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hyperme/fluctuations.hpp"

namespace hyperme::cli {

inline constexpr int kSchemaVersion = 1;

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitParse = 2,
  kExitSchema = 3,
  kExitNumerical = 4,
  kExitIo = 5,
};

class CliError : public std::runtime_error {
 public:
  CliError(int exit_code, const std::string& message) : std::runtime_error(message), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

struct SpaceSpec {
  /// two-state | k-state | binomial | gaussian-grid | inline
  std::string generator;
  int k = 0;
  int units = 0;
  double x_min = 0.0;
  double x_max = 0.0;
  int points = 0;
  std::vector<double> inline_points;
  std::vector<double> cell_volumes;
  std::vector<double> measure;
};

struct ObservableSpec {
  std::string name;
  /// identity | power | values
  std::string builtin;
  double exponent = 1.0;
  std::vector<double> values;
};

struct AxisSpec {
  std::string name;
  /// Absent bounds default to the observable's hull on the support of m.
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<int> nodes;
  std::optional<double> resolution;
  double offset = kDefaultBoundaryOffset;
};

struct FamilySpec {
  /// target | multiplier | gaussian
  std::string kind;
};

struct ExpectSpec {
  std::optional<double> lambda;
  std::optional<double> exp_neg_lambda;
  std::optional<double> entropy;
  std::optional<double> log_partition;
  std::vector<double> distribution;
  double tolerance = 1e-9;
};

struct OracleSpec {
  int random_instances = 0;
  std::uint64_t seed = 1;
};

struct PriorSpec {
  std::vector<double> alphas{0.5, 1.0, 2.0};
  std::vector<double> observations;
};

struct BathBlock {
  SpaceSpec space;
  std::vector<ObservableSpec> observables;
  std::vector<double> total;
};

struct FluctSpec {
  std::vector<double> lambda0;
  /// entropy-hessian | inverse-covariance
  std::string metric = "entropy-hessian";
  /// Binomial unit counts for the N scan (binomial spaces only).
  std::vector<int> scan_units;
  std::optional<BathBlock> bath;
};

struct RepeatSpec {
  int n = 2;
  std::vector<int> scan{1, 2, 4};
};

struct ReparamSpec {
  /// identity | square | scale
  std::string map = "identity";
  double factor = 1.0;
  double tolerance = 1e-5;
};

struct ModelSpec {
  std::string name;
  std::string source;
  std::uint64_t hash = 0;
  SpaceSpec space;
  std::vector<ObservableSpec> observables;
  std::optional<std::vector<double>> targets;
  SolverOptions solver;
  std::optional<FamilySpec> family;
  std::vector<AxisSpec> axes;
  std::optional<PriorSpec> prior;
  std::optional<FluctSpec> fluct;
  std::optional<RepeatSpec> repeat;
  std::optional<ReparamSpec> reparametrize;
  std::optional<ExpectSpec> expect;
  std::optional<OracleSpec> oracle;
};

/// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes);

/// Throws CliError: kExitParse with line/column, kExitSchema listing every
/// problem with its field path.
ModelSpec parse_spec(const std::string& text, const std::string& source);
/// kExitIo when the file cannot be read.
ModelSpec load_spec(const std::string& path);

// Builders.
SpacePtr build_space(const SpaceSpec& spec);
std::vector<Observable> build_observables(const SpacePtr& space, const std::vector<ObservableSpec>& specs);
ParameterGrid build_grid(const std::vector<AxisSpec>& axes, const SampleSpace& space,
                         const std::vector<Observable>& observables);
/// Requires a family block and parameter_grid.
ModelFamily build_family(const ModelSpec& spec);
/// p(x|mu, sigma) proportional to exp(-(x - mu)^2 / 2 sigma^2), normalized on the grid.
ModelFamily gaussian_family(const SpacePtr& space, ParameterGrid grid);
/// Requires a fluct block and parameter_grid; `units` overrides a binomial space size.
FluctuationScenario build_scenario(const ModelSpec& spec, std::optional<int> units = std::nullopt);

}  // namespace hyperme::cli
