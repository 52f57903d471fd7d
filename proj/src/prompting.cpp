#include "inbedder/prompting.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <vector>

#include "inbedder/error.hpp"

namespace inbedder {

namespace {

constexpr std::string_view kInputTag = "{input}";
constexpr std::string_view kInstructionTag = "{instruction}";
constexpr std::string_view kPrefixDirective = "PREFIX:";

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n\f\v") == std::string_view::npos;
}

// Substitutes both placeholders; input may be empty here (truncation probes).
RenderedPrompt render_unchecked(std::string_view input, std::string_view instruction,
                                const PromptTemplate& tmpl, std::size_t budget) {
  RenderedPrompt out;
  out.token_budget = budget;
  if (!tmpl.prefix.empty()) {
    out.text += tmpl.prefix;
    out.text += "\n\n";
  }
  const std::string_view pattern = tmpl.pattern;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const auto in_at = pattern.find(kInputTag, pos);
    const auto ins_at = pattern.find(kInstructionTag, pos);
    const auto next = std::min(in_at, ins_at);
    if (next == std::string_view::npos) {
      out.text.append(pattern.substr(pos));
      break;
    }
    out.text.append(pattern.substr(pos, next - pos));
    if (next == in_at) {
      out.input_span = {out.text.size(), input.size()};
      out.text.append(input);
      pos = next + kInputTag.size();
    } else {
      out.instruction_span = {out.text.size(), instruction.size()};
      out.text.append(instruction);
      pos = next + kInstructionTag.size();
    }
  }
  return out;
}

RenderedPrompt with_input(const RenderedPrompt& p, std::string_view new_input) {
  RenderedPrompt out = p;
  const std::string_view text = p.text;
  out.text = std::string(text.substr(0, p.input_span.offset));
  out.text += new_input;
  out.text += text.substr(p.input_span.end());
  out.input_span.length = new_input.size();
  if (p.instruction_span.offset > p.input_span.offset) {
    out.instruction_span.offset = p.instruction_span.offset - p.input_span.length + new_input.size();
  }
  return out;
}

bool utf8_continuation(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

}  // namespace

void PromptTemplate::validate() const {
  const auto n_in = count_occurrences(pattern, kInputTag);
  const auto n_ins = count_occurrences(pattern, kInstructionTag);
  if (n_in != 1 || n_ins != 1) {
    throw Error(ErrorCode::MalformedTemplate,
                "pattern needs exactly one {input} and one {instruction}, found " +
                    std::to_string(n_in) + " and " + std::to_string(n_ins));
  }
}

std::string_view PromptTemplate::response_header() const {
  const std::string_view p = pattern;
  const auto a = p.rfind(kInputTag);
  const auto b = p.rfind(kInstructionTag);
  if (a == std::string_view::npos || b == std::string_view::npos) return {};
  const auto tail = a > b ? a + kInputTag.size() : b + kInstructionTag.size();
  return p.substr(tail);
}

PromptTemplate default_template() { return PromptTemplate{}; }

PromptTemplate chat_template() {
  PromptTemplate t;
  t.prefix = std::string(kChatPrefix);
  return t;
}

PromptTemplate parse_template(std::string_view file_text) {
  PromptTemplate t;
  std::string_view body = file_text;
  if (body.starts_with(kPrefixDirective)) {
    const auto eol = body.find('\n');
    auto line = body.substr(kPrefixDirective.size(),
                            eol == std::string_view::npos ? std::string_view::npos
                                                          : eol - kPrefixDirective.size());
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    t.prefix = std::string(line);
    body = eol == std::string_view::npos ? std::string_view{} : body.substr(eol + 1);
  }
  if (body.ends_with("\r\n")) {
    body.remove_suffix(2);
  } else if (body.ends_with('\n')) {
    body.remove_suffix(1);
  }
  t.pattern = std::string(body);
  t.validate();
  return t;
}

PromptTemplate load_template(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open template " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_template(ss.str());
}

RenderedPrompt render_prompt(std::string_view input, std::string_view instruction,
                             const PromptTemplate& tmpl, std::size_t token_budget) {
  if (blank(input)) throw Error(ErrorCode::EmptyField, "input is empty");
  if (blank(instruction)) throw Error(ErrorCode::EmptyField, "instruction is empty");
  if (token_budget == 0) throw Error(ErrorCode::InvalidArgument, "token budget must be positive");
  tmpl.validate();
  return render_unchecked(input, instruction, tmpl, token_budget);
}

RenderedPrompt truncate_input(const RenderedPrompt& prompt,
                              const TokenLengthFn& tokenized_length) {
  const std::size_t budget = prompt.token_budget;
  if (tokenized_length(prompt.text) <= budget) return prompt;

  if (tokenized_length(with_input(prompt, {}).text) > budget) {
    throw Error(ErrorCode::BudgetTooSmall,
                "template and instruction alone exceed " + std::to_string(budget) + " tokens");
  }

  // Largest input prefix, cut on a code point boundary, that fits. Tokenized
  // length is assumed monotone in the prefix length.
  const std::string input(prompt.input());
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (!utf8_continuation(input[i])) cuts.push_back(i);
  }
  std::size_t lo = 0;             // cuts[lo] fits (cuts[0] == 0)
  std::size_t hi = cuts.size();   // full input does not fit
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const auto candidate = with_input(prompt, std::string_view(input).substr(0, cuts[mid]));
    if (tokenized_length(candidate.text) <= budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return with_input(prompt, std::string_view(input).substr(0, cuts.empty() ? 0 : cuts[lo]));
}

bool contains_separator(std::string_view text) {
  static constexpr std::array<std::string_view, 3> kHeaders = {
      "### Input:", "### Instruction:", "### Response:"};
  for (auto h : kHeaders) {
    if (text.find(h) != std::string_view::npos) return true;
  }
  return false;
}

}  // namespace inbedder
