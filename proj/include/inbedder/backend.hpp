#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inbedder/core_math.hpp"
#include "inbedder/kernels.hpp"
#include "inbedder/prompting.hpp"

namespace inbedder {

enum class ArchitectureMode { Causal, EncoderDecoder, EncoderOnly };

std::string_view to_string(ArchitectureMode mode);
ArchitectureMode parse_architecture_mode(std::string_view name);

// Generation length used with chat models, and with short-answer fine-tuned
// models; masks appended to the prompt in encoder-only mode.
inline constexpr int kChatMaxNewTokens = 40;
inline constexpr int kShortAnswerMaxNewTokens = 3;
inline constexpr int kDefaultMaskCount = 3;

struct GenerationRequest {
  RenderedPrompt prompt;
  int n_samples = 1;
  double temperature = 0.0;
  int max_new_tokens = kShortAnswerMaxNewTokens;
  // 0 = input embeddings, L = final layer, negative counts back from L.
  std::vector<int> layers{-1};
  ArchitectureMode architecture_mode = ArchitectureMode::Causal;
  int mask_count = kDefaultMaskCount;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on violated invariants.
  void validate() const;

  friend bool operator==(const GenerationRequest&, const GenerationRequest&) = default;
};

struct GenerationSample {
  std::vector<std::string> tokens;
  std::vector<std::int32_t> token_ids;
  std::string text;
  bool finished_with_eos = false;
  // Rows (0-based, over prompt + generation) that hold tokenizer special
  // tokens. Kept per sample because generation lengths differ.
  std::vector<std::size_t> special_token_positions;

  std::size_t generated_length() const { return tokens.size(); }

  friend bool operator==(const GenerationSample&, const GenerationSample&) = default;
};

// Row-major (positions x dim) hidden states for one layer of one sample.
struct HiddenMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  kernels::MatrixView<float> view() const { return {data, rows, cols}; }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data).subspan(r * cols, cols);
  }

  friend bool operator==(const HiddenMatrix&, const HiddenMatrix&) = default;
};

// Row i of every hidden matrix is the state at position i + 1: rows
// [0, prompt_len) cover the prompt and rows [prompt_len, prompt_len + N_g)
// the generation. In encoder-decoder mode prompt_len is also the boundary
// between encoder and decoder rows, and row prompt_len - 1 is the decoder
// BOS state.
struct GenerationRecord {
  std::size_t prompt_len = 0;
  std::vector<GenerationSample> samples;
  std::vector<std::map<int, HiddenMatrix>> hidden;  // per sample, by resolved layer
  ArchitectureMode architecture_mode = ArchitectureMode::Causal;
  std::size_t dim = 0;
  int num_layers = 0;

  /// Throws LayerMissing.
  const HiddenMatrix& hidden_for(std::size_t sample, int resolved_layer) const;

  /// Throws ProtocolError when shapes disagree with the row convention.
  void validate() const;

  friend bool operator==(const GenerationRecord&, const GenerationRecord&) = default;
};

struct BackendInfo {
  int num_layers = 0;
  std::size_t dim = 0;
  ArchitectureMode architecture_mode = ArchitectureMode::Causal;
  std::string tokenizer_name;

  friend bool operator==(const BackendInfo&, const BackendInfo&) = default;
};

/// Maps a possibly negative layer index onto [0, num_layers]; throws
/// LayerMissing when out of range.
int resolve_layer(int layer, int num_layers);

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;

  virtual BackendInfo info() const = 0;
  virtual GenerationRecord generate(const GenerationRequest& request) = 0;
  /// Tokenized length of a full prompt under the model's tokenizer.
  virtual std::size_t token_length(std::string_view text) const = 0;
  /// Bound on concurrent in-flight requests the backend accepts.
  virtual int max_in_flight() const { return 1; }
};

struct EmbedRequest {
  std::vector<std::string> texts;
  bool normalize = false;

  friend bool operator==(const EmbedRequest&, const EmbedRequest&) = default;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;

  virtual std::vector<Embedding> embed_texts(const EmbedRequest& request) = 0;
  virtual int max_in_flight() const { return 1; }
};

/// Checks an embed request and its response against the contract: non-empty
/// texts, one vector per text, uniform dim, unit norm when requested.
void validate_embed_request(const EmbedRequest& request);
void validate_embed_response(const EmbedRequest& request, std::span<const Embedding> vectors);

}  // namespace inbedder
