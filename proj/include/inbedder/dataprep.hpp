#pragma once

// Training-corpus preparation: paragraph/question/answer triplets rendered
// into the prompt pattern with stopword-stripped answers as targets.

#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "inbedder/prompting.hpp"

namespace inbedder {

struct QATriplet {
  std::string paragraph;  // the input
  std::string question;   // the instruction
  std::string answer;

  void validate() const;  // throws EmptyField
};

/// Drops whitespace tokens whose normalized form is a stopword and rejoins
/// with single spaces. If every token would go, the answer is returned as-is.
/// Throws EmptyAnswer.
std::string simplify_answer(std::string_view answer, const std::set<std::string>& stopwords);

struct TrainingExample {
  std::string prompt;
  std::string target;
};

TrainingExample format_training_example(const QATriplet& t, const PromptTemplate& tmpl,
                                        const std::set<std::string>& stopwords);

using TokenizeFn = std::function<std::vector<std::string>(std::string_view)>;
TokenizeFn whitespace_tokenizer();

struct MlmExample {
  std::string masked;                // prompt followed by one mask per target token
  std::vector<std::string> targets;  // aligned with the masks
};

/// Masked-LM training format: as many masks as the simplified answer has
/// tokens under `tokenize`.
MlmExample format_mlm_training_example(const QATriplet& t, const PromptTemplate& tmpl,
                                       std::string_view mask_token, const TokenizeFn& tokenize,
                                       const std::set<std::string>& stopwords);

/// Masked-LM inference format: a fixed number of masks (3 by default).
std::string format_mlm_inference(std::string_view input, std::string_view instruction,
                                 const PromptTemplate& tmpl, std::string_view mask_token,
                                 int mask_count = 3);

/// Reads {"paragraph","question","answer"} lines. Multiple-choice lines may
/// carry {"choices": [...], "label": i} instead of "answer"; only the correct
/// choice is kept. Errors carry the line number.
std::vector<QATriplet> load_qa_jsonl(const std::string& path);
std::vector<QATriplet> read_qa_jsonl(std::istream& in, const std::string& source);

struct PrepReport {
  std::size_t examples = 0;
  double mean_target_tokens = 0.0;
};

struct PrepOptions {
  PromptTemplate tmpl;
  std::set<std::string> stopwords;
  bool mlm = false;
  std::string mask_token = "<mask>";
};

/// Writes {"prompt","target"} lines, or {"masked","targets"} in MLM mode, in
/// input order. Target length is counted in whitespace tokens.
PrepReport write_training_jsonl(std::ostream& out, const std::vector<QATriplet>& triplets,
                                const PrepOptions& options);

}  // namespace inbedder
