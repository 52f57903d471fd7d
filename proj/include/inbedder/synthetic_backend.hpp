#pragma once

// Deterministic stand-ins for a generative LM and a sentence embedder. They
// let the whole engine run, and be tested, without any model.
//
// The synthetic LM answers from a lookup table keyed by (input, instruction)
// and tokenizes on whitespace. Each hidden row is a pseudo-random unit
// vector derived from a stable hash of (layer, token), where the token is
// the one the row's position predicts: row i holds the next token of the
// prompt + answer sequence, and the terminal row repeats the last answer
// token. So row N-1 (the first-generation state) encodes the first answer
// token, and two prompts with the same answer share all generation rows.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "inbedder/backend.hpp"

namespace inbedder {

/// Unit-norm vector from a stable 64-bit hash of (salt, token); identical on
/// every platform since it uses only integer ops and sqrt.
std::vector<float> hash_unit_vector(std::string_view token, std::int64_t salt, std::size_t dim);

std::uint64_t stable_hash(std::string_view s, std::uint64_t seed = 0);

struct SyntheticConfig {
  // Candidate answers for an (input, instruction) pair. An empty input or
  // instruction in the key acts as a wildcard. Greedy decoding returns the
  // first candidate; sampling picks among them.
  std::map<std::pair<std::string, std::string>, std::vector<std::string>> answers;
  std::optional<std::vector<std::string>> default_answers;
  std::size_t dim = 32;
  int num_layers = 4;
  ArchitectureMode architecture_mode = ArchitectureMode::Causal;
  bool emit_bos = false;  // prepend a special "<s>" prompt token
  int max_in_flight = 4;

  void set_answer(std::string input, std::string instruction, std::string answer);

  /// {dim, num_layers, architecture_mode, emit_bos, default_answer,
  ///  entries: [{input?, instruction?, answer | answers}]}
  static SyntheticConfig from_json(const nlohmann::json& j);
  static SyntheticConfig load(const std::string& path);
};

class SyntheticBackend final : public GenerationBackend {
 public:
  using AnswerFn = std::function<std::optional<std::vector<std::string>>(
      std::string_view input, std::string_view instruction)>;

  explicit SyntheticBackend(SyntheticConfig config);
  /// Answers come from `answer_fn`; table entries in `config` are ignored.
  SyntheticBackend(SyntheticConfig config, AnswerFn answer_fn);

  BackendInfo info() const override;
  GenerationRecord generate(const GenerationRequest& request) override;
  std::size_t token_length(std::string_view text) const override;
  int max_in_flight() const override { return config_.max_in_flight; }

  const SyntheticConfig& config() const { return config_; }

 private:
  std::vector<std::string> candidates(std::string_view input, std::string_view instruction) const;

  SyntheticConfig config_;
  AnswerFn answer_fn_;
};

/// Embeds a text as the mean of hash vectors of its whitespace tokens, so
/// texts sharing words are similar and identical texts are identical.
class SyntheticEmbedder final : public EmbeddingBackend {
 public:
  explicit SyntheticEmbedder(std::size_t dim = 32, int max_in_flight = 4)
      : dim_(dim), max_in_flight_(max_in_flight) {}

  std::vector<Embedding> embed_texts(const EmbedRequest& request) override;
  int max_in_flight() const override { return max_in_flight_; }

 private:
  std::size_t dim_;
  int max_in_flight_;
};

}  // namespace inbedder
