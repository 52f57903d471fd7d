#include "inbedder/dataprep.hpp"

#include <fstream>
#include <ostream>

#include "inbedder/error.hpp"
#include "inbedder/jsonl.hpp"
#include "inbedder/text.hpp"

namespace inbedder {

void QATriplet::validate() const {
  if (text::trim(paragraph).empty()) throw Error(ErrorCode::EmptyField, "empty paragraph");
  if (text::trim(question).empty()) throw Error(ErrorCode::EmptyField, "empty question");
  if (text::trim(answer).empty()) throw Error(ErrorCode::EmptyField, "empty answer");
}

std::string simplify_answer(std::string_view answer, const std::set<std::string>& stopwords) {
  const auto tokens = text::split_whitespace(answer);
  if (tokens.empty()) throw Error(ErrorCode::EmptyAnswer, "answer is empty");
  std::vector<std::string> kept;
  for (const auto& t : tokens) {
    if (!stopwords.contains(text::normalize_token(t))) kept.push_back(t);
  }
  if (kept.empty()) return std::string(answer);
  return text::join(kept, " ");
}

TrainingExample format_training_example(const QATriplet& t, const PromptTemplate& tmpl,
                                        const std::set<std::string>& stopwords) {
  t.validate();
  return {render_prompt(t.paragraph, t.question, tmpl).text, simplify_answer(t.answer, stopwords)};
}

TokenizeFn whitespace_tokenizer() {
  return [](std::string_view s) { return text::split_whitespace(s); };
}

namespace {

std::string append_masks(std::string prompt, std::string_view mask_token, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    prompt += ' ';
    prompt += mask_token;
  }
  return prompt;
}

}  // namespace

MlmExample format_mlm_training_example(const QATriplet& t, const PromptTemplate& tmpl,
                                       std::string_view mask_token, const TokenizeFn& tokenize,
                                       const std::set<std::string>& stopwords) {
  if (text::trim(mask_token).empty()) throw Error(ErrorCode::EmptyField, "mask token is empty");
  const auto ex = format_training_example(t, tmpl, stopwords);
  auto targets = tokenize(ex.target);
  return {append_masks(ex.prompt, mask_token, targets.size()), std::move(targets)};
}

std::string format_mlm_inference(std::string_view input, std::string_view instruction,
                                 const PromptTemplate& tmpl, std::string_view mask_token,
                                 int mask_count) {
  if (text::trim(mask_token).empty()) throw Error(ErrorCode::EmptyField, "mask token is empty");
  if (mask_count < 1) throw Error(ErrorCode::InvalidArgument, "mask_count must be >= 1");
  return append_masks(render_prompt(input, instruction, tmpl).text, mask_token,
                      static_cast<std::size_t>(mask_count));
}

std::vector<QATriplet> read_qa_jsonl(std::istream& in, const std::string& source) {
  std::vector<QATriplet> out;
  jsonl::for_each(in, source, [&](const nlohmann::json& j, std::size_t) {
    QATriplet t;
    t.paragraph = jsonl::required_string(j, "paragraph");
    t.question = jsonl::required_string(j, "question");
    if (j.contains("answer")) {
      t.answer = jsonl::required_string(j, "answer");
    } else if (j.contains("choices") && j.contains("label")) {
      const auto choices = j.at("choices").get<std::vector<std::string>>();
      const auto label = j.at("label").get<std::size_t>();
      if (label >= choices.size()) throw Error(ErrorCode::ParseError, "label outside choices");
      t.answer = choices[label];
    } else {
      throw Error(ErrorCode::ParseError, "needs \"answer\" or \"choices\" + \"label\"");
    }
    t.validate();
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<QATriplet> load_qa_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return read_qa_jsonl(in, path);
}

PrepReport write_training_jsonl(std::ostream& out, const std::vector<QATriplet>& triplets,
                                const PrepOptions& options) {
  PrepReport report;
  double total_tokens = 0.0;
  const auto tokenize = whitespace_tokenizer();
  for (const auto& t : triplets) {
    if (options.mlm) {
      const auto ex = format_mlm_training_example(t, options.tmpl, options.mask_token, tokenize,
                                                  options.stopwords);
      jsonl::write_line(out, {{"masked", ex.masked}, {"targets", ex.targets}});
      total_tokens += static_cast<double>(ex.targets.size());
    } else {
      const auto ex = format_training_example(t, options.tmpl, options.stopwords);
      jsonl::write_line(out, {{"prompt", ex.prompt}, {"target", ex.target}});
      total_tokens += static_cast<double>(text::split_whitespace(ex.target).size());
    }
    ++report.examples;
  }
  if (report.examples) report.mean_target_tokens = total_tokens / static_cast<double>(report.examples);
  return report;
}

}  // namespace inbedder
