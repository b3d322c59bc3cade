#include "hyperme/cli/bundle.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperme/cli/spec.hpp"

namespace hyperme::cli {
namespace {

std::string csv_cell(const Json& v) {
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", d);
    return buf;
  }
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_null()) return "";
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(kExitIo, path.string() + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw CliError(kExitIo, path.string() + ": write failed");
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw CliError(kExitIo, dir + ": cannot create output directory");
  }
  return dir;
}

}  // namespace

void Table::add_row(std::vector<Json> row) {
  if (row.size() != columns.size()) {
    throw std::logic_error("table " + name + ": row width does not match the column count");
  }
  rows.push_back(std::move(row));
}

std::string hex_hash(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

Json to_json(const Bundle& bundle, bool with_timings) {
  Json doc = Json::object();
  doc["schema_version"] = kSchemaVersion;
  doc["engine_version"] = kEngineVersion;
  doc["command"] = bundle.command;
  doc["spec_name"] = bundle.spec_name;
  doc["spec_hash"] = hex_hash(bundle.spec_hash);
  doc["results"] = bundle.results;
  doc["warnings"] = bundle.warnings;
  Json tables = Json::object();
  for (const Table& t : bundle.tables) {
    Json jt = Json::object();
    jt["columns"] = t.columns;
    jt["units"] = t.units;
    jt["rows"] = t.rows;
    tables[t.name] = std::move(jt);
  }
  doc["tables"] = std::move(tables);
  if (with_timings) {
    Json timings = Json::object();
    for (const auto& [phase, seconds] : bundle.timings) timings[phase] = seconds;
    doc["timings"] = std::move(timings);
  }
  return doc;
}

std::string dump_json(const Bundle& bundle, bool with_timings) {
  return to_json(bundle, with_timings).dump(2) + "\n";
}

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t c = 0; c < table.columns.size(); ++c) out += (c ? "," : "") + csv_cell(table.columns[c]);
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + csv_cell(row[c]);
    out += "\n";
  }
  return out;
}

void emit(const Bundle& bundle, Format format, const std::optional<std::string>& out_dir, bool with_timings,
          std::ostream& console) {
  if (format == Format::kJson) {
    const std::string text = dump_json(bundle, with_timings);
    if (!out_dir) {
      console << text;
      console.flush();
      if (!console) throw CliError(kExitIo, "stdout: write failed");
      return;
    }
    write_file(prepare_dir(*out_dir) / (bundle.spec_name + "." + bundle.command + ".json"), text);
    return;
  }
  if (!out_dir) throw CliError(kExitSchema, "--format csv requires --out <dir>");
  const auto dir = prepare_dir(*out_dir);
  for (const Table& t : bundle.tables) write_file(dir / (bundle.spec_name + "." + t.name + ".csv"), to_csv(t));
}

}  // namespace hyperme::cli
