#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace inbedder::text {

std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Lowercases, drops subword boundary markers ("▁", "Ġ", leading "##") and
/// strips leading/trailing non-alphanumeric ASCII. "The," -> "the".
std::string normalize_token(std::string_view token);

/// Lowercase alphanumeric runs of at least `min_length` bytes. Non-ASCII
/// bytes count as word characters so UTF-8 words stay whole.
std::vector<std::string> word_tokens(std::string_view s, std::size_t min_length = 1);

}  // namespace inbedder::text
