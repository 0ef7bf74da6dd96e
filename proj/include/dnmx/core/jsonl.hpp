#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace dnmx {

using Json = nlohmann::json;

/// Calls `on_record(record, line_number)` for every non-blank line. Parse
/// failures raise DataError naming the file and 1-based line.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const Json&, std::size_t)>& on_record);

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& records);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// DataError naming the missing path when `path` does not exist.
void require_exists(const std::filesystem::path& path);

} // namespace dnmx
