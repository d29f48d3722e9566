#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace knobo::io {

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file then renames over the target, so readers
/// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Parses one JSON object per non-blank line. Errors name the 1-based line.
std::vector<nlohmann::json> parse_jsonl(const std::string& text, const std::string& source);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& records);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace knobo::io
