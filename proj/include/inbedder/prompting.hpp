#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>

namespace inbedder {

inline constexpr std::string_view kDefaultPattern =
    "### Input:\n{input}\n\n### Instruction:\n{instruction}\n\n### Response:";
inline constexpr std::string_view kChatPrefix =
    "Your task is to give an answer according to the instruction and input. "
    "Please keep your answer short.";
inline constexpr std::size_t kDefaultTokenBudget = 512;

struct PromptTemplate {
  std::string pattern{kDefaultPattern};
  std::string prefix;  // empty means no prefix

  /// Throws MalformedTemplate unless the pattern has exactly one of each
  /// placeholder.
  void validate() const;

  /// The text after the last placeholder, e.g. "\n\n### Response:".
  std::string_view response_header() const;
};

PromptTemplate default_template();
PromptTemplate chat_template();

/// Template file: UTF-8 text with {input}/{instruction} placeholders and an
/// optional first line "PREFIX: <text>". One trailing newline is dropped.
PromptTemplate parse_template(std::string_view file_text);
PromptTemplate load_template(const std::string& path);

struct Span {
  std::size_t offset = 0;
  std::size_t length = 0;

  std::size_t end() const { return offset + length; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct RenderedPrompt {
  std::string text;
  Span instruction_span;
  Span input_span;
  std::size_t token_budget = kDefaultTokenBudget;

  std::string_view input() const { return std::string_view(text).substr(input_span.offset, input_span.length); }
  std::string_view instruction() const {
    return std::string_view(text).substr(instruction_span.offset, instruction_span.length);
  }

  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

/// Backend-supplied tokenized length of a full prompt.
using TokenLengthFn = std::function<std::size_t(std::string_view)>;

RenderedPrompt render_prompt(std::string_view input, std::string_view instruction,
                             const PromptTemplate& tmpl,
                             std::size_t token_budget = kDefaultTokenBudget);

/// Shortens the input from the right until the whole prompt fits the token
/// budget. The instruction and template bytes are never touched; a cut never
/// splits a UTF-8 sequence. Throws BudgetTooSmall when even an empty input
/// does not fit.
RenderedPrompt truncate_input(const RenderedPrompt& prompt,
                              const TokenLengthFn& tokenized_length);

/// Rejects benchmark texts that contain a literal section header of the
/// default pattern, which would make rendering ambiguous.
bool contains_separator(std::string_view text);

}  // namespace inbedder
