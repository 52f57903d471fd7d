#include "inbedder/encoding.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>

#include "inbedder/error.hpp"
#include "inbedder/kernels.hpp"
#include "inbedder/parallel.hpp"
#include "inbedder/stopwords.hpp"
#include "inbedder/text.hpp"

namespace inbedder {

namespace {

struct MethodName {
  Method method;
  std::string_view name;
};

constexpr MethodName kMethodNames[] = {
    {Method::AvgGen, "avg-gen"},   {Method::AvgPpt, "avg-ppt"}, {Method::FirstGen, "1st-gen"},
    {Method::LastGen, "last-gen"}, {Method::AvgAll, "avg-all"}, {Method::ReEnc, "re-enc"},
};

bool is_special(const GenerationSample& s, std::size_t row) {
  return std::find(s.special_token_positions.begin(), s.special_token_positions.end(), row) !=
         s.special_token_positions.end();
}

// Rows in [first, last] that are not special tokens.
std::vector<std::size_t> plain_rows(const GenerationSample& s, std::size_t first, std::size_t last) {
  std::vector<std::size_t> rows;
  for (std::size_t r = first; r <= last; ++r) {
    if (!is_special(s, r)) rows.push_back(r);
  }
  return rows;
}

Embedding average(const HiddenMatrix& m, const std::vector<std::size_t>& rows, Method method) {
  if (rows.empty()) {
    throw Error(ErrorCode::DegenerateRecord,
                std::string(to_string(method)) + " has nothing to average after special-token exclusion");
  }
  return Embedding(kernels::parallel::row_mean(m.view(), rows));
}

Embedding single_row(const HiddenMatrix& m, std::size_t row) {
  return Embedding(m.row(row));
}

// Normalized words of a phrase, e.g. "Based on" -> {"based", "on"}.
std::vector<std::string> phrase_words(std::string_view phrase) {
  std::vector<std::string> out;
  for (const auto& w : text::split_whitespace(phrase)) {
    auto n = text::normalize_token(w);
    if (!n.empty()) out.push_back(std::move(n));
  }
  return out;
}

}  // namespace

std::string_view to_string(Method m) {
  for (const auto& [method, name] : kMethodNames) {
    if (method == m) return name;
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (const auto& [method, n] : kMethodNames) {
    if (n == name) return method;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown aggregation method '" + std::string(name) + "'");
}

bool method_available(Method m, ArchitectureMode mode) {
  switch (mode) {
    case ArchitectureMode::Causal: return true;
    case ArchitectureMode::EncoderDecoder: return m != Method::AvgAll;
    case ArchitectureMode::EncoderOnly: return m != Method::FirstGen && m != Method::LastGen;
  }
  return false;
}

const std::vector<std::string>& default_phrases() {
  static const std::vector<std::string> phrases = {"Based on", "Sure", "The answer is"};
  return phrases;
}

void FilterConfig::validate() const {
  for (const auto& w : stopwords) {
    if (w != text::to_lower_ascii(w)) {
      throw Error(ErrorCode::InvalidArgument, "stopword '" + w + "' is not lowercase");
    }
  }
  for (const auto& p : phrases) {
    if (text::trim(p).empty()) throw Error(ErrorCode::InvalidArgument, "empty filter phrase");
  }
}

FilterConfig FilterConfig::defaults() {
  FilterConfig f;
  f.stopwords = default_stopwords();
  f.phrases = default_phrases();
  f.exclude_instruction_tokens = true;
  return f;
}

FilterConfig FilterConfig::from_json(const nlohmann::json& j) {
  FilterConfig f;
  try {
    if (j.contains("stopwords")) {
      for (const auto& w : j.at("stopwords")) f.stopwords.insert(text::to_lower_ascii(w.get<std::string>()));
    }
    f.phrases = j.value("phrases", std::vector<std::string>{});
    f.exclude_instruction_tokens = j.value("exclude_instruction_tokens", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("filter config: ") + e.what());
  }
  f.validate();
  return f;
}

nlohmann::json FilterConfig::to_json() const {
  return {{"stopwords", stopwords}, {"phrases", phrases}, {"exclude_instruction_tokens", exclude_instruction_tokens}};
}

EncodingSpec EncodingSpec::from_json(const nlohmann::json& j) {
  EncodingSpec s;
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "encoding spec must be an object");
  try {
    if (j.contains("method")) s.method = parse_method(j.at("method").get<std::string>());
    s.layer = j.value("layer", s.layer);
    if (j.contains("filter") && !j.at("filter").is_null()) {
      const auto& f = j.at("filter");
      if (f.is_string()) {
        if (f.get<std::string>() != "default") throw Error(ErrorCode::ParseError, "filter must be \"default\" or an object");
        s.filter = FilterConfig::defaults();
      } else {
        s.filter = FilterConfig::from_json(f);
      }
    }
    s.n_samples = j.value("n_samples", s.n_samples);
    s.temperature = j.value("temperature", s.temperature);
    s.max_new_tokens = j.value("max_new_tokens", s.max_new_tokens);
    s.mask_count = j.value("mask_count", s.mask_count);
    s.seed = j.value("seed", s.seed);
    s.normalize_samples = j.value("normalize_samples", s.normalize_samples);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("encoding spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json EncodingSpec::to_json() const {
  return {{"method", std::string(to_string(method))},
          {"layer", layer},
          {"filter", filter ? filter->to_json() : nlohmann::json(nullptr)},
          {"n_samples", n_samples},
          {"temperature", temperature},
          {"max_new_tokens", max_new_tokens},
          {"mask_count", mask_count},
          {"seed", seed},
          {"normalize_samples", normalize_samples}};
}

FilterConfig FilterConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open filter config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return from_json(j);
}

void EncodingSpec::validate() const {
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  if (temperature < 0.0) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  if (method == Method::ReEnc && temperature == 0.0 && n_samples > 1) {
    throw Error(ErrorCode::InvalidArgument, "sampling several answers needs temperature > 0");
  }
  if (max_new_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_new_tokens must be >= 1");
  if (filter && method != Method::AvgGen) {
    throw Error(ErrorCode::InvalidArgument, "token filtering applies to avg-gen only");
  }
  if (filter) filter->validate();
}

Embedding direct_aggregate(const GenerationRecord& record, Method method, int layer) {
  if (method == Method::ReEnc) {
    throw Error(ErrorCode::InvalidArgument, "re-enc is not a direct aggregation");
  }
  if (!method_available(method, record.architecture_mode)) {
    throw Error(ErrorCode::MethodUnavailableForMode,
                std::string(to_string(method)) + " is not available for " +
                    std::string(to_string(record.architecture_mode)) + " models");
  }
  if (record.samples.empty()) throw Error(ErrorCode::DegenerateRecord, "record has no samples");
  const auto& sample = record.samples.front();
  const auto& m = record.hidden_for(0, resolve_layer(layer, record.num_layers));

  const std::size_t n = record.prompt_len;
  const std::size_t n_g = sample.generated_length();
  const bool needs_generation = method != Method::AvgPpt;
  if (n < 1) throw Error(ErrorCode::DegenerateRecord, "empty prompt");
  if (needs_generation && n_g < 1) throw Error(ErrorCode::DegenerateRecord, "empty generation");
  if (m.rows != n + n_g) throw Error(ErrorCode::DegenerateRecord, "hidden rows do not match N + N_g");

  switch (method) {
    case Method::AvgGen: return average(m, plain_rows(sample, n - 1, n + n_g - 1), method);
    case Method::AvgPpt:
      if (n < 2) throw Error(ErrorCode::DegenerateRecord, "avg-ppt needs a prompt of at least 2 tokens");
      return average(m, plain_rows(sample, 0, n - 2), method);
    case Method::FirstGen: return single_row(m, n - 1);
    case Method::LastGen: return single_row(m, n + n_g - 1);
    case Method::AvgAll: return average(m, plain_rows(sample, 0, n + n_g - 1), method);
    case Method::ReEnc: break;
  }
  throw Error(ErrorCode::InvalidArgument, "unhandled method");
}

std::vector<std::size_t> surviving_generation_rows(const GenerationRecord& record,
                                                   const FilterConfig& filter,
                                                   std::string_view instruction) {
  if (record.samples.empty()) throw Error(ErrorCode::DegenerateRecord, "record has no samples");
  const auto& sample = record.samples.front();
  const std::size_t n = record.prompt_len;
  const std::size_t n_g = sample.generated_length();
  if (n_g < 1 || n < 1) throw Error(ErrorCode::DegenerateRecord, "filtering needs N >= 1 and N_g >= 1");

  std::vector<std::string> words;
  for (const auto& t : sample.tokens) words.push_back(text::normalize_token(t));

  std::set<std::string> instruction_words;
  if (filter.exclude_instruction_tokens) {
    for (const auto& w : text::split_whitespace(instruction)) {
      auto nw = text::normalize_token(w);
      if (!nw.empty()) instruction_words.insert(std::move(nw));
    }
  }

  std::vector<bool> dropped(n_g, false);
  for (std::size_t j = 0; j < n_g; ++j) {
    const auto& w = words[j];
    if (w.empty()) continue;
    if (filter.stopwords.contains(w) || instruction_words.contains(w)) dropped[j] = true;
  }
  for (const auto& phrase : filter.phrases) {
    const auto pw = phrase_words(phrase);
    if (pw.empty()) continue;
    for (std::size_t j = 0; j < n_g; ++j) {
      if (words[j] == pw.front()) dropped[j] = true;
      if (j + pw.size() <= n_g && std::equal(pw.begin(), pw.end(), words.begin() + static_cast<long>(j))) {
        for (std::size_t k = 0; k < pw.size(); ++k) dropped[j + k] = true;
      }
    }
  }

  std::vector<std::size_t> rows;
  for (std::size_t j = 0; j < n_g; ++j) {
    const std::size_t row = n - 1 + j;
    if (!dropped[j] && !is_special(sample, row)) rows.push_back(row);
  }
  const std::size_t terminal = n + n_g - 1;
  if (!dropped[n_g - 1] && !is_special(sample, terminal)) rows.push_back(terminal);
  return rows;
}

Embedding filtered_avg_gen(const GenerationRecord& record, int layer, const FilterConfig& filter,
                           std::string_view instruction) {
  const auto rows = surviving_generation_rows(record, filter, instruction);
  if (rows.empty()) return direct_aggregate(record, Method::AvgGen, layer);
  if (!method_available(Method::AvgGen, record.architecture_mode)) {
    throw Error(ErrorCode::MethodUnavailableForMode, "avg-gen unavailable");
  }
  const auto& m = record.hidden_for(0, resolve_layer(layer, record.num_layers));
  return average(m, rows, Method::AvgGen);
}

Embedding reencode(std::span<const GenerationSample> samples, EmbeddingBackend& embedder,
                   bool normalize_each) {
  if (samples.empty()) throw Error(ErrorCode::EmptySamples, "re-encoding needs at least one sample");
  // Canonical order so the mean does not depend on sample order.
  std::vector<std::string> texts;
  for (const auto& s : samples) {
    if (text::trim(s.text).empty()) throw Error(ErrorCode::EmptyField, "sample with empty answer text");
    texts.push_back(s.text);
  }
  std::sort(texts.begin(), texts.end());
  EmbedRequest request{texts, normalize_each};
  auto vectors = embedder.embed_texts(request);
  validate_embed_response(request, vectors);
  return mean_of(vectors);
}

InstructedEmbedding embed_instructed(std::string_view input, std::string_view instruction,
                                     const EncodingSpec& spec, const PromptTemplate& tmpl,
                                     GenerationBackend& generator, EmbeddingBackend* embedder,
                                     std::size_t token_budget) {
  spec.validate();
  const auto info = generator.info();
  if (spec.method != Method::ReEnc && !method_available(spec.method, info.architecture_mode)) {
    throw Error(ErrorCode::MethodUnavailableForMode,
                std::string(to_string(spec.method)) + " is not available for " +
                    std::string(to_string(info.architecture_mode)) + " models");
  }
  if (spec.method == Method::ReEnc && embedder == nullptr) {
    throw Error(ErrorCode::InvalidArgument, "re-enc needs an embedder backend");
  }

  auto prompt = render_prompt(input, instruction, tmpl, token_budget);
  prompt = truncate_input(prompt, [&](std::string_view t) { return generator.token_length(t); });

  GenerationRequest request;
  request.prompt = std::move(prompt);
  request.temperature = spec.temperature;
  request.n_samples = spec.method == Method::ReEnc ? spec.n_samples : 1;
  request.max_new_tokens = spec.max_new_tokens;
  request.layers = {spec.layer};
  request.architecture_mode = info.architecture_mode;
  request.mask_count = spec.mask_count;
  request.seed = spec.seed;

  const auto record = generator.generate(request);
  record.validate();

  std::optional<Embedding> e;
  if (spec.method == Method::ReEnc) {
    e = reencode(record.samples, *embedder, spec.normalize_samples);
  } else if (spec.filter) {
    e = filtered_avg_gen(record, spec.layer, *spec.filter, instruction);
  } else {
    e = direct_aggregate(record, spec.method, spec.layer);
  }
  return {std::move(*e), record.samples.front().text};
}

InstructedEmbedder::InstructedEmbedder(EncodingSpec spec, PromptTemplate tmpl,
                                       GenerationBackend& generator, EmbeddingBackend* embedder,
                                       std::size_t token_budget)
    : spec_(std::move(spec)),
      template_(std::move(tmpl)),
      generator_(generator),
      embedder_(embedder),
      token_budget_(token_budget) {
  spec_.validate();
  template_.validate();
}

InstructedEmbedding InstructedEmbedder::embed(std::string_view input, std::string_view instruction) const {
  return embed_instructed(input, instruction, spec_, template_, generator_, embedder_, token_budget_);
}

int InstructedEmbedder::concurrency() const {
  int bound = generator_.max_in_flight();
  if (spec_.method == Method::ReEnc && embedder_) bound = std::min(bound, embedder_->max_in_flight());
  return std::max(1, bound);
}

std::vector<InstructedEmbedding> InstructedEmbedder::embed_corpus(std::span<const std::string> inputs,
                                                                  std::string_view instruction) const {
  std::vector<std::optional<InstructedEmbedding>> slots(inputs.size());
  parallel_for_index(inputs.size(), concurrency(),
                     [&](std::size_t i) { slots[i] = embed(inputs[i], instruction); });
  std::vector<InstructedEmbedding> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace inbedder
