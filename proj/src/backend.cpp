#include "inbedder/backend.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "inbedder/error.hpp"

namespace inbedder {

std::string_view to_string(ArchitectureMode mode) {
  switch (mode) {
    case ArchitectureMode::Causal: return "causal";
    case ArchitectureMode::EncoderDecoder: return "encoder-decoder";
    case ArchitectureMode::EncoderOnly: return "encoder-only";
  }
  return "causal";
}

ArchitectureMode parse_architecture_mode(std::string_view name) {
  if (name == "causal") return ArchitectureMode::Causal;
  if (name == "encoder-decoder") return ArchitectureMode::EncoderDecoder;
  if (name == "encoder-only") return ArchitectureMode::EncoderOnly;
  throw Error(ErrorCode::UnsupportedMode, "unknown architecture mode '" + std::string(name) + "'");
}

void GenerationRequest::validate() const {
  if (n_samples < 1) throw Error(ErrorCode::InvalidArgument, "n_samples must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be finite and >= 0");
  }
  if (temperature == 0.0 && n_samples != 1) {
    throw Error(ErrorCode::InvalidArgument, "greedy decoding (T == 0) requires n_samples == 1");
  }
  if (max_new_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_new_tokens must be >= 1");
  if (mask_count < 1) throw Error(ErrorCode::InvalidArgument, "mask_count must be >= 1");
  if (layers.empty()) throw Error(ErrorCode::InvalidArgument, "at least one layer is required");
  std::set<int> seen(layers.begin(), layers.end());
  if (seen.size() != layers.size()) {
    throw Error(ErrorCode::InvalidArgument, "duplicate layer indices");
  }
  if (prompt.text.empty()) throw Error(ErrorCode::InvalidArgument, "prompt is empty");
}

const HiddenMatrix& GenerationRecord::hidden_for(std::size_t sample, int resolved_layer) const {
  if (sample >= hidden.size()) {
    throw Error(ErrorCode::DegenerateRecord, "record has no sample " + std::to_string(sample));
  }
  const auto it = hidden[sample].find(resolved_layer);
  if (it == hidden[sample].end()) {
    throw Error(ErrorCode::LayerMissing,
                "record has no hidden states for layer " + std::to_string(resolved_layer));
  }
  return it->second;
}

void GenerationRecord::validate() const {
  if (samples.empty()) throw Error(ErrorCode::ProtocolError, "record has no samples");
  if (hidden.size() != samples.size()) {
    throw Error(ErrorCode::ProtocolError, "hidden state list does not match sample count");
  }
  if (dim == 0) throw Error(ErrorCode::ProtocolError, "record dim is zero");
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& sample = samples[s];
    const std::size_t n_g = sample.tokens.size();
    if (n_g == 0) throw Error(ErrorCode::ProtocolError, "sample has no generated tokens");
    if (sample.token_ids.size() != n_g) {
      throw Error(ErrorCode::ProtocolError, "tokens and token_ids lengths differ");
    }
    const std::size_t rows = prompt_len + n_g;
    for (auto pos : sample.special_token_positions) {
      if (pos >= rows) throw Error(ErrorCode::ProtocolError, "special token position out of range");
    }
    if (hidden[s].empty()) throw Error(ErrorCode::ProtocolError, "sample has no hidden layers");
    for (const auto& [layer, m] : hidden[s]) {
      if (m.rows != rows || m.cols != dim || m.data.size() != rows * dim) {
        throw Error(ErrorCode::ProtocolError,
                    "layer " + std::to_string(layer) + " hidden shape " + std::to_string(m.rows) +
                        "x" + std::to_string(m.cols) + ", expected " + std::to_string(rows) +
                        "x" + std::to_string(dim));
      }
    }
  }
}

int resolve_layer(int layer, int num_layers) {
  const int resolved = layer < 0 ? num_layers + 1 + layer : layer;
  if (resolved < 0 || resolved > num_layers) {
    throw Error(ErrorCode::LayerMissing, "layer " + std::to_string(layer) +
                                             " out of range for a model with " +
                                             std::to_string(num_layers) + " layers");
  }
  return resolved;
}

void validate_embed_request(const EmbedRequest& request) {
  if (request.texts.empty()) throw Error(ErrorCode::InvalidArgument, "embed request has no texts");
  for (const auto& t : request.texts) {
    if (t.empty()) throw Error(ErrorCode::EmptyField, "embed request contains an empty text");
  }
}

void validate_embed_response(const EmbedRequest& request, std::span<const Embedding> vectors) {
  if (vectors.size() != request.texts.size()) {
    throw Error(ErrorCode::ProtocolError, "embedder returned " + std::to_string(vectors.size()) +
                                              " vectors for " +
                                              std::to_string(request.texts.size()) + " texts");
  }
  const std::size_t d = vectors.front().dim();
  for (const auto& v : vectors) {
    if (v.dim() != d) throw Error(ErrorCode::ProtocolError, "embedder returned mixed dims");
    if (request.normalize && std::abs(l2_norm(v.values()) - 1.0) > 1e-5) {
      throw Error(ErrorCode::ProtocolError, "embedder returned a non-unit vector");
    }
  }
}

}  // namespace inbedder
