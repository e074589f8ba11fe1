#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace owlsim::text {

std::string lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Case-insensitive substring test.
bool contains_ci(std::string_view haystack, std::string_view needle);

/// True when `word` occurs in `haystack` bounded by non-alphanumeric characters.
bool contains_word_ci(std::string_view haystack, std::string_view word);

std::size_t word_count(std::string_view s);

/// Keeps at most `max_words` whitespace-separated words.
std::string truncate_words(std::string_view s, std::size_t max_words);

/// "Order code" -> "order_code".
std::string to_key(std::string_view s);

/// Joins as "a", "a and b", "a, b and c".
std::string join_list(const std::vector<std::string>& items);

}  // namespace owlsim::text
