#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rav::util {

std::string trim(std::string_view s);
std::string lower(std::string_view s);

// Splits on a single delimiter, keeping empty tokens.
std::vector<std::string> split(std::string_view s, char delim);
// Splits on any of the delimiter characters, dropping empty tokens.
std::vector<std::string> split_any(std::string_view s, std::string_view delims);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// 64-bit FNV-1a as a 16-char lowercase hex string. Used for config hashes;
// not a cryptographic digest.
std::string fnv1a_hex(std::string_view data);

std::string read_file(const std::string& path);
std::vector<std::string> read_lines(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Best-effort date normalization to YYYY-MM-DD. Accepts ISO dates,
// M/D/YYYY, and "Month D, YYYY". Returns nullopt when unparseable.
std::optional<std::string> parse_date_iso(std::string_view raw);

std::int64_t steady_ms();

}  // namespace rav::util
