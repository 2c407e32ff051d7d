#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace halo {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Lowercase + collapse runs of whitespace to single spaces + trim.
// Comparison key used for query/answer dedup.
std::string normalize_for_compare(std::string_view s);

std::vector<std::string> split_lines(std::string_view s);

// Split on a single-char delimiter, no trimming.
std::vector<std::string> split(std::string_view s, char delim);

bool contains_casefold(std::string_view haystack, std::string_view needle);

std::string url_encode(std::string_view s);

// SHA-256 hex digest of a byte string.
std::string sha256_hex(std::string_view data);

}  // namespace halo
