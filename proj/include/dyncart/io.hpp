#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dyncart {

// %.17g, which round-trips every finite double.
std::string format_double(double v);

// RFC 4180 quoting, applied only when the field needs it.
std::string csv_escape(std::string_view field);

// Splits one CSV line, honoring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// Lowercase hex SHA-256 of the file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dyncart
