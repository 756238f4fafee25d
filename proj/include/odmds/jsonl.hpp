#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace odmds {

// Parses a JSONL file into (1-based line number, object) pairs. Blank lines
// are skipped; a malformed line raises DataError naming path and line.
std::vector<std::pair<std::size_t, nlohmann::json>> read_jsonl(const std::string& path);

std::string read_file(const std::string& path);

// Writes via a temp file in the same directory plus rename, so readers never
// observe a partial file and reruns overwrite identically.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace odmds
