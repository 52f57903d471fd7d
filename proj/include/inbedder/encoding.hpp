#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "inbedder/backend.hpp"
#include "inbedder/core_math.hpp"
#include "inbedder/prompting.hpp"

namespace inbedder {

// How a generation record becomes an embedding. With prompt length N and
// generation length N_g, and 0-based hidden rows:
//   avg-gen   mean of rows N-1 .. N+N_g-1  (includes the first-gen state)
//   avg-ppt   mean of rows 0 .. N-2
//   1st-gen   row N-1, the state that predicts the first answer token
//   last-gen  row N+N_g-1
//   avg-all   mean of rows 0 .. N+N_g-1
//   re-enc    mean of a sentence embedder over the sampled answer texts
enum class Method { AvgGen, AvgPpt, FirstGen, LastGen, AvgAll, ReEnc };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);  // throws InvalidArgument

/// Encoder-decoder models have no avg-all (encoder and decoder states live in
/// different spaces); encoder-only models have no 1st-gen or last-gen.
bool method_available(Method m, ArchitectureMode mode);

struct FilterConfig {
  std::set<std::string> stopwords;
  std::vector<std::string> phrases;
  bool exclude_instruction_tokens = false;

  void validate() const;  // throws InvalidArgument

  /// Pinned stopword list, the shipped phrase list, instruction tokens on.
  static FilterConfig defaults();
  /// {stopwords: [...], phrases: [...], exclude_instruction_tokens: bool}
  static FilterConfig from_json(const nlohmann::json& j);
  static FilterConfig load(const std::string& path);
  nlohmann::json to_json() const;
};

/// "Based on", "Sure", "The answer is".
const std::vector<std::string>& default_phrases();

struct EncodingSpec {
  Method method = Method::FirstGen;
  int layer = -1;
  std::optional<FilterConfig> filter;  // only meaningful with avg-gen
  int n_samples = 1;
  double temperature = 0.0;
  int max_new_tokens = kShortAnswerMaxNewTokens;
  int mask_count = kDefaultMaskCount;
  std::uint64_t seed = 0;
  // Re-encoding only: unit-normalize each answer embedding before averaging.
  bool normalize_samples = false;

  void validate() const;

  /// Missing keys keep their defaults. "filter" may be null, "default" or an
  /// explicit filter object. Throws ParseError.
  static EncodingSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Throws LayerMissing, MethodUnavailableForMode or DegenerateRecord. Uses
/// the first sample; rows flagged as special tokens are left out of every
/// average. `layer` may be negative.
Embedding direct_aggregate(const GenerationRecord& record, Method method, int layer);

/// avg-gen restricted to generation rows whose linked token survives the
/// filter. Row N-1+(j-1) is linked to generated token j, and the terminal
/// row to the last token. A token is dropped when its normalized form is a
/// stopword, occurs in the instruction (if enabled), is the first word of a
/// configured phrase, or lies inside an occurrence of a configured phrase.
/// Falls back to plain avg-gen when every row is dropped.
Embedding filtered_avg_gen(const GenerationRecord& record, int layer, const FilterConfig& filter,
                           std::string_view instruction);

/// Rows of the first sample that `filtered_avg_gen` keeps (before fallback).
std::vector<std::size_t> surviving_generation_rows(const GenerationRecord& record,
                                                   const FilterConfig& filter,
                                                   std::string_view instruction);

/// Unweighted mean of the embedder over each sample's text. The result does
/// not depend on sample order.
Embedding reencode(std::span<const GenerationSample> samples, EmbeddingBackend& embedder,
                   bool normalize_each = false);

struct InstructedEmbedding {
  Embedding embedding;
  std::string generation;  // first sample's answer text
};

/// render -> truncate -> generate -> aggregate, for one input.
InstructedEmbedding embed_instructed(std::string_view input, std::string_view instruction,
                                     const EncodingSpec& spec, const PromptTemplate& tmpl,
                                     GenerationBackend& generator, EmbeddingBackend* embedder,
                                     std::size_t token_budget = kDefaultTokenBudget);

/// Corpus-level driver. Documents run concurrently up to the backend's
/// in-flight bound; results come back in input order.
class InstructedEmbedder {
 public:
  InstructedEmbedder(EncodingSpec spec, PromptTemplate tmpl, GenerationBackend& generator,
                     EmbeddingBackend* embedder, std::size_t token_budget = kDefaultTokenBudget);

  InstructedEmbedding embed(std::string_view input, std::string_view instruction) const;

  std::vector<InstructedEmbedding> embed_corpus(std::span<const std::string> inputs,
                                                std::string_view instruction) const;

  const EncodingSpec& spec() const { return spec_; }
  int concurrency() const;

 private:
  EncodingSpec spec_;
  PromptTemplate template_;
  GenerationBackend& generator_;
  EmbeddingBackend* embedder_;
  std::size_t token_budget_;
};

}  // namespace inbedder
