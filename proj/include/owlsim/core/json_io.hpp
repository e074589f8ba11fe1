#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>  // vendored nlohmann/json

namespace owlsim {

using Json = nlohmann::ordered_json;

/// Reads one JSON value per non-empty line.
std::vector<Json> read_jsonl(const std::string& path);

/// Writes one compact JSON value per line, replacing the file.
void write_jsonl(const std::string& path, const std::vector<Json>& rows);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace owlsim
