#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace histax {

// Write tmp then rename, so a failed stage never leaves a torn checkpoint.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);
bool file_exists(const std::string& path);

nlohmann::json load_json_file(const std::string& path);

// Each non-empty line parsed as one JSON value. Line numbers are 1-based.
std::vector<std::pair<size_t, nlohmann::json>> load_jsonl_file(const std::string& path);

// FNV-1a over bytes; stable across platforms, used for run manifests.
uint64_t fnv1a(const std::string& bytes, uint64_t seed = 14695981039346656037ull);
std::string fnv1a_hex(const std::string& bytes);

} // namespace histax
