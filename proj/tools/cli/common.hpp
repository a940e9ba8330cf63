#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

namespace cdvi::cli {

namespace fs = std::filesystem;

/// Options shared by every command.
struct Common {
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

/// --out-dir, else $CDVI_OUTPUT_DIR, else "cdvi_out".
fs::path resolve_out_dir(const std::string& flag);

/// Parses a JSON file. Unreadable files raise cdvi::FormatError; malformed
/// JSON raises SchemaViolation at "(root)".
nlohmann::json load_json(const fs::path& path);

/// Reads `path` and validates it against `schema`.
nlohmann::json load_config(const fs::path& path, const char* schema);

/// Resolves `entry` relative to the directory holding `manifest`.
fs::path resolve_near(const fs::path& manifest, const std::string& entry);

std::string file_fnv1a(const fs::path& path);

/// {"path": path relative to `base`, "fnv1a": ...}
nlohmann::json file_entry(const fs::path& base, const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
void write_json(const fs::path& path, const nlohmann::json& j);

/// The value, or null when it is not finite.
nlohmann::json number_or_null(double value);

/// Fixed-precision number, "-" when not finite.
std::string cell(double value, int precision = 3);

}  // namespace cdvi::cli
