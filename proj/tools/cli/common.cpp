#include "cli/common.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "cdvi/error.hpp"
#include "cdvi/hash.hpp"
#include "cli/schema.hpp"

namespace cdvi::cli {

fs::path resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CDVI_OUTPUT_DIR"); env && *env) return env;
  return "cdvi_out";
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cli", fmt::format("cannot open '{}'", path.string()));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

nlohmann::json load_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaViolation(path.string(), "(root)", fmt::format("not valid JSON (byte {})", e.byte));
  }
}

nlohmann::json load_config(const fs::path& path, const char* schema) {
  nlohmann::json j = load_json(path);
  validate(j, schema, path.string());
  return j;
}

fs::path resolve_near(const fs::path& manifest, const std::string& entry) {
  const fs::path p(entry);
  if (p.is_absolute()) return p;
  return manifest.parent_path() / p;
}

std::string file_fnv1a(const fs::path& path) { return hex64(fnv1a(read_file(path))); }

nlohmann::json file_entry(const fs::path& base, const fs::path& path) {
  fs::path shown = path.lexically_relative(base);
  if (shown.empty() || *shown.begin() == "..") shown = path;
  return {{"path", shown.generic_string()}, {"fnv1a", file_fnv1a(path)}};
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("cli", fmt::format("cannot write '{}'", path.string()));
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json number_or_null(double value) {
  if (!std::isfinite(value)) return nullptr;
  return value;
}

std::string cell(double value, int precision) {
  if (!std::isfinite(value)) return "-";
  return fmt::format("{:.{}f}", value, precision);
}

}  // namespace cdvi::cli
