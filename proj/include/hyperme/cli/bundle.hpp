#pragma once

// Result bundles and their JSON/CSV emission.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace hyperme::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kEngineVersion = "1.0.0";

/// Long-format table. Cells are JSON scalars (numbers, strings, booleans).
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::string> units;
  std::vector<std::vector<Json>> rows;

  void add_column(std::string column, std::string unit) {
    columns.push_back(std::move(column));
    units.push_back(std::move(unit));
  }
  void add_row(std::vector<Json> row);
};

struct Bundle {
  std::string command;
  std::string spec_name;
  std::uint64_t spec_hash = 0;
  Json results = Json::object();
  std::vector<Table> tables;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::string> warnings;
  /// kExitOk, or kExitCheckFailed when a check did not pass.
  int exit_code = 0;
};

enum class Format { kJson, kCsv };

Json to_json(const Bundle& bundle, bool with_timings);
/// Serialized document; doubles use the shortest round-trip form.
std::string dump_json(const Bundle& bundle, bool with_timings);
std::string to_csv(const Table& table);
std::string hex_hash(std::uint64_t hash);

/// JSON goes to `out_dir/<spec>.<command>.json` or to `console`; CSV needs
/// out_dir and writes `<spec>.<table>.csv` per table. Throws CliError(kExitIo).
void emit(const Bundle& bundle, Format format, const std::optional<std::string>& out_dir, bool with_timings,
          std::ostream& console);

}  // namespace hyperme::cli
