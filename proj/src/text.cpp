#include "inbedder/text.hpp"

#include <array>

namespace inbedder::text {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_alnum_ascii(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

bool is_word_byte(char c) {
  return is_alnum_ascii(c) || (static_cast<unsigned char>(c) & 0x80) != 0;
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

}  // namespace

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && !is_space(s[i])) ++i;
    if (i > start) out.emplace_back(s.substr(start, i - start));
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = lower(c);
  return out;
}

std::string normalize_token(std::string_view token) {
  static constexpr std::array<std::string_view, 3> kMarkers = {"\xE2\x96\x81" /* ▁ */,
                                                               "\xC4\xA0" /* Ġ */, "##"};
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (auto m : kMarkers) {
      if (token.starts_with(m)) {
        token.remove_prefix(m.size());
        stripped = true;
      }
    }
  }
  while (!token.empty() && !is_word_byte(token.front())) token.remove_prefix(1);
  while (!token.empty() && !is_word_byte(token.back())) token.remove_suffix(1);
  return to_lower_ascii(token);
}

std::vector<std::string> word_tokens(std::string_view s, std::size_t min_length) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !is_word_byte(s[i])) ++i;
    const std::size_t start = i;
    while (i < s.size() && is_word_byte(s[i])) ++i;
    if (i - start >= min_length && i > start) out.push_back(to_lower_ascii(s.substr(start, i - start)));
  }
  return out;
}

}  // namespace inbedder::text
