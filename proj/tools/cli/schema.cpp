#include "cli/schema.hpp"

#include <map>
#include <memory>
#include <mutex>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <rapidjson/document.h>
#include <rapidjson/schema.h>
#include <rapidjson/stringbuffer.h>

namespace cdvi::cli {

namespace {

struct Compiled {
  nlohmann::json source;
  rapidjson::Document document;
  std::unique_ptr<rapidjson::SchemaDocument> schema;
};

const Compiled& compiled(std::string_view name) {
  static std::mutex mutex;
  static std::map<std::string, std::unique_ptr<Compiled>, std::less<>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(name); it != cache.end()) return *it->second;
  const std::string_view text = schema_text(name);
  auto c = std::make_unique<Compiled>();
  c->source = nlohmann::json::parse(text);
  c->document.Parse(text.data(), text.size());
  c->schema = std::make_unique<rapidjson::SchemaDocument>(c->document);
  return *cache.emplace(std::string(name), std::move(c)).first->second;
}

std::string pointer_string(const rapidjson::Pointer& p) {
  rapidjson::StringBuffer sb;
  p.Stringify(sb);
  return sb.GetString();
}

// "/stages/2/x" -> "stages[2].x"
std::string field_path(const std::string& pointer, const std::string& prefix) {
  std::string out = prefix;
  std::size_t at = 0;
  while (at < pointer.size()) {
    const std::size_t next = pointer.find('/', at + 1);
    std::string token = pointer.substr(at + 1, next == std::string::npos ? std::string::npos : next - at - 1);
    const bool index = !token.empty() && token.find_first_not_of("0123456789") == std::string::npos;
    if (index) {
      out += "[" + token + "]";
    } else {
      if (!out.empty()) out += '.';
      out += token;
    }
    at = next == std::string::npos ? pointer.size() : next;
  }
  return out.empty() ? "(root)" : out;
}

std::string join_field(const std::string& base, const std::string& name) {
  return base == "(root)" ? name : base + "." + name;
}

}  // namespace

std::string_view schema_text(std::string_view name) {
  for (const auto& s : embedded_schemas())
    if (s.name == name) return s.text;
  throw std::out_of_range(fmt::format("no embedded schema named '{}'", name));
}

SchemaViolation::SchemaViolation(std::string source, std::string path, std::string problem)
    : std::runtime_error(fmt::format("{}: field '{}': {}", source, path, problem)),
      source_(std::move(source)),
      path_(std::move(path)),
      problem_(std::move(problem)) {}

void validate(const nlohmann::json& doc, std::string_view schema, const std::string& source,
              const std::string& prefix) {
  const Compiled& c = compiled(schema);
  const std::string text = doc.dump();
  rapidjson::Document d;
  d.Parse(text.data(), text.size());
  rapidjson::SchemaValidator validator(*c.schema);
  if (d.Accept(validator)) return;

  const std::string doc_ptr = pointer_string(validator.GetInvalidDocumentPointer());
  const std::string schema_ptr = pointer_string(validator.GetInvalidSchemaPointer());
  const std::string keyword = validator.GetInvalidSchemaKeyword();
  std::string path = field_path(doc_ptr, prefix);
  std::string problem = fmt::format("violates '{}'", keyword);

  const auto node = doc.at(nlohmann::json::json_pointer(doc_ptr));
  const auto& rule = c.source.at(nlohmann::json::json_pointer(schema_ptr));
  if (keyword == "required" && node.is_object()) {
    for (const auto& name : rule.at("required"))
      if (!node.contains(name.get<std::string>())) {
        path = join_field(path, name.get<std::string>());
        problem = "is required but missing";
        break;
      }
  } else if (keyword == "additionalProperties" && !node.is_object()) {
    problem = "is not a recognized field";
  } else if (keyword == "additionalProperties") {
    const auto props = rule.value("properties", nlohmann::json::object());
    for (const auto& [key, value] : node.items())
      if (!props.contains(key)) {
        path = join_field(path, key);
        problem = "is not a recognized field";
        break;
      }
  } else if (keyword == "type" || keyword == "enum") {
    problem = fmt::format("value {} violates '{}' (allowed: {})", node.dump(), keyword, rule.value(keyword, nlohmann::json()).dump());
  } else if (keyword == "minimum" || keyword == "maximum" || keyword == "minItems" || keyword == "maxItems" ||
             keyword == "minLength" || keyword == "pattern") {
    problem = fmt::format("value {} violates '{}' {}", node.dump(), keyword, rule.value(keyword, nlohmann::json()).dump());
  }
  throw SchemaViolation(source, path, problem);
}

}  // namespace cdvi::cli
