#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace medsum {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

std::string sha256_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Write to a sibling temp file then rename over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace medsum
