#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace cdvi::cli {

struct EmbeddedSchema {
  std::string_view name;  // path relative to schemas/, e.g. "output/plan.schema.json"
  std::string_view text;
};

const std::vector<EmbeddedSchema>& embedded_schemas();

/// Throws std::out_of_range for unknown names.
std::string_view schema_text(std::string_view name);

/// A document that does not conform to its schema. `path` names the
/// offending field ("stages[2].x", "sampler.n_steps", or "(root)").
class SchemaViolation : public std::runtime_error {
 public:
  SchemaViolation(std::string source, std::string path, std::string problem);
  const std::string& source() const noexcept { return source_; }
  const std::string& path() const noexcept { return path_; }
  const std::string& problem() const noexcept { return problem_; }

 private:
  std::string source_;
  std::string path_;
  std::string problem_;
};

/// Validates `doc` against the named schema. `source` labels the document
/// in messages and `prefix` is prepended to field paths (for nested
/// objects checked against their own schema).
void validate(const nlohmann::json& doc, std::string_view schema, const std::string& source,
              const std::string& prefix = "");

}  // namespace cdvi::cli
