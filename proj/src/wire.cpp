#include "inbedder/wire.hpp"

#include <bit>
#include <cstring>

#include <openssl/evp.h>

#include "inbedder/error.hpp"

namespace inbedder::wire {

namespace {

[[noreturn]] void protocol_error(const std::string& what) {
  throw Error(ErrorCode::ProtocolError, what);
}

template <typename T>
T field(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) protocol_error(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    protocol_error(std::string("bad field '") + key + "': " + e.what());
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    protocol_error(std::string("bad field '") + key + "': " + e.what());
  }
}

json span_to_json(const Span& s) { return json::array({s.offset, s.length}); }

Span span_from_json(const json& j, std::size_t text_size) {
  if (!j.is_array() || j.size() != 2) protocol_error("span must be [offset, length]");
  if (!j[0].is_number_unsigned() || !j[1].is_number_unsigned()) protocol_error("span entries must be unsigned");
  Span s{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
  if (s.end() > text_size) protocol_error("span outside prompt text");
  return s;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.empty()) return {};
  if (text.size() % 4 != 0) protocol_error("base64 length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) protocol_error("invalid base64 payload");
  // EVP_DecodeBlock keeps the zero bytes produced by '=' padding.
  std::size_t pad = 0;
  if (text.ends_with("==")) {
    pad = 2;
  } else if (text.ends_with('=')) {
    pad = 1;
  }
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::vector<std::uint8_t> floats_to_le_bytes(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(values[i]);
    out[4 * i + 0] = static_cast<std::uint8_t>(bits);
    out[4 * i + 1] = static_cast<std::uint8_t>(bits >> 8);
    out[4 * i + 2] = static_cast<std::uint8_t>(bits >> 16);
    out[4 * i + 3] = static_cast<std::uint8_t>(bits >> 24);
  }
  return out;
}

std::vector<float> le_bytes_to_floats(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0) protocol_error("float payload length is not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) |
                               static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8 |
                               static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16 |
                               static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24;
    out[i] = std::bit_cast<float>(bits);
  }
  return out;
}

std::string encode_floats(std::span<const float> values) {
  return base64_encode(floats_to_le_bytes(values));
}

std::vector<float> decode_floats(std::string_view b64) {
  return le_bytes_to_floats(base64_decode(b64));
}

json to_json(const GenerationRequest& r) {
  return json{{"prompt", r.prompt.text},
              {"instruction_span", span_to_json(r.prompt.instruction_span)},
              {"input_span", span_to_json(r.prompt.input_span)},
              {"token_budget", r.prompt.token_budget},
              {"n_samples", r.n_samples},
              {"temperature", r.temperature},
              {"max_new_tokens", r.max_new_tokens},
              {"layers", r.layers},
              {"architecture_mode", std::string(to_string(r.architecture_mode))},
              {"mask_count", r.mask_count},
              {"seed", r.seed}};
}

GenerationRequest request_from_json(const json& j) {
  if (!j.is_object()) protocol_error("generation request must be an object");
  GenerationRequest r;
  r.prompt.text = field<std::string>(j, "prompt");
  if (j.contains("input_span")) {
    r.prompt.input_span = span_from_json(j["input_span"], r.prompt.text.size());
  }
  if (j.contains("instruction_span")) {
    r.prompt.instruction_span = span_from_json(j["instruction_span"], r.prompt.text.size());
  }
  r.prompt.token_budget = field_or<std::size_t>(j, "token_budget", kDefaultTokenBudget);
  r.n_samples = field_or<int>(j, "n_samples", 1);
  r.temperature = field_or<double>(j, "temperature", 0.0);
  r.max_new_tokens = field_or<int>(j, "max_new_tokens", kShortAnswerMaxNewTokens);
  r.layers = field_or<std::vector<int>>(j, "layers", {-1});
  r.architecture_mode =
      parse_architecture_mode(field_or<std::string>(j, "architecture_mode", "causal"));
  r.mask_count = field_or<int>(j, "mask_count", kDefaultMaskCount);
  r.seed = field_or<std::uint64_t>(j, "seed", 0);
  return r;
}

json to_json(const GenerationRecord& r) {
  json samples = json::array();
  for (std::size_t s = 0; s < r.samples.size(); ++s) {
    const auto& sample = r.samples[s];
    json hidden = json::array();
    for (const auto& [layer, m] : r.hidden[s]) {
      hidden.push_back({{"layer", layer}, {"rows", m.rows}, {"data", encode_floats(m.data)}});
    }
    samples.push_back({{"tokens", sample.tokens},
                       {"token_ids", sample.token_ids},
                       {"text", sample.text},
                       {"finished_with_eos", sample.finished_with_eos},
                       {"special_token_positions", sample.special_token_positions},
                       {"hidden", std::move(hidden)}});
  }
  return json{{"prompt_len", r.prompt_len},
              {"dim", r.dim},
              {"num_layers", r.num_layers},
              {"architecture_mode", std::string(to_string(r.architecture_mode))},
              {"samples", std::move(samples)}};
}

GenerationRecord record_from_json(const json& j) {
  if (!j.is_object()) protocol_error("generation record must be an object");
  GenerationRecord r;
  r.prompt_len = field<std::size_t>(j, "prompt_len");
  r.dim = field<std::size_t>(j, "dim");
  r.num_layers = field_or<int>(j, "num_layers", 0);
  r.architecture_mode =
      parse_architecture_mode(field_or<std::string>(j, "architecture_mode", "causal"));
  const auto samples = field<json>(j, "samples");
  if (!samples.is_array()) protocol_error("samples must be an array");
  for (const auto& js : samples) {
    GenerationSample s;
    s.tokens = field<std::vector<std::string>>(js, "tokens");
    s.token_ids = field<std::vector<std::int32_t>>(js, "token_ids");
    s.text = field<std::string>(js, "text");
    s.finished_with_eos = field_or<bool>(js, "finished_with_eos", false);
    s.special_token_positions =
        field_or<std::vector<std::size_t>>(js, "special_token_positions", {});
    std::map<int, HiddenMatrix> layers;
    for (const auto& jh : field<json>(js, "hidden")) {
      HiddenMatrix m;
      m.rows = field<std::size_t>(jh, "rows");
      m.cols = r.dim;
      m.data = decode_floats(field<std::string>(jh, "data"));
      layers.emplace(field<int>(jh, "layer"), std::move(m));
    }
    r.samples.push_back(std::move(s));
    r.hidden.push_back(std::move(layers));
  }
  r.validate();
  return r;
}

json to_json(const BackendInfo& info) {
  return json{{"num_layers", info.num_layers},
              {"dim", info.dim},
              {"architecture_mode", std::string(to_string(info.architecture_mode))},
              {"tokenizer_name", info.tokenizer_name}};
}

BackendInfo info_from_json(const json& j) {
  BackendInfo info;
  info.num_layers = field<int>(j, "num_layers");
  info.dim = field<std::size_t>(j, "dim");
  info.architecture_mode = parse_architecture_mode(field<std::string>(j, "architecture_mode"));
  info.tokenizer_name = field_or<std::string>(j, "tokenizer_name", "");
  return info;
}

json to_json(const EmbedRequest& r) {
  return json{{"texts", r.texts}, {"normalize", r.normalize}};
}

EmbedRequest embed_request_from_json(const json& j) {
  EmbedRequest r;
  r.texts = field<std::vector<std::string>>(j, "texts");
  r.normalize = field_or<bool>(j, "normalize", false);
  return r;
}

json embed_response_to_json(std::span<const Embedding> vectors) {
  json out = json::array();
  std::size_t dim = vectors.empty() ? 0 : vectors.front().dim();
  for (const auto& v : vectors) {
    std::vector<float> f(v.values().begin(), v.values().end());
    out.push_back(encode_floats(f));
  }
  return json{{"vectors", std::move(out)}, {"dim", dim}};
}

std::vector<Embedding> embed_response_from_json(const json& j) {
  const auto dim = field<std::size_t>(j, "dim");
  std::vector<Embedding> out;
  for (const auto& v : field<json>(j, "vectors")) {
    if (!v.is_string()) protocol_error("vector must be a base64 string");
    auto f = decode_floats(v.get<std::string>());
    if (f.size() != dim) protocol_error("vector length does not match dim");
    out.emplace_back(std::span<const float>(f));
  }
  return out;
}

}  // namespace inbedder::wire
