#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace adalog {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Lowercase hex SHA-256 of a file's contents. Throws MissingInput if unreadable.
std::string file_sha256_hex(const std::filesystem::path& path);

}  // namespace adalog
