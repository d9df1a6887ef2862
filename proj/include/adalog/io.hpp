#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace adalog {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_u64(std::string_view text, std::string_view what);

/// Lines without terminators; a trailing newline does not yield an empty line.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::string read_file(const std::filesystem::path& path);

/// Writes atomically enough for our purposes: full content, binary mode.
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> split(std::string_view text, char delimiter);

}  // namespace adalog
