#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mixpt::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_caption(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
// Strip leading and trailing ASCII punctuation.
std::string strip_punct(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);

// Quote-aware CSV field split (RFC 4180 style double quotes).
std::vector<std::string> split_csv(std::string_view line);
// Quote a field if it contains a comma, quote or newline.
std::string csv_field(std::string_view field);

}  // namespace mixpt::text
