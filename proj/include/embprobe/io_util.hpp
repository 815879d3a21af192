#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace embprobe {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file and renames over `path`, so readers never see
// a partially written artifact. Parent directories are created.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace embprobe
