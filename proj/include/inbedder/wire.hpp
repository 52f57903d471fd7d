#pragma once

// JSON messages for the generation and embedder endpoints. Hidden states
// travel as base64 of little-endian 32-bit floats, row-major.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "inbedder/backend.hpp"

namespace inbedder::wire {

using json = nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);  // throws ProtocolError

/// Little-endian byte image of the floats, independent of host order.
std::vector<std::uint8_t> floats_to_le_bytes(std::span<const float> values);
std::vector<float> le_bytes_to_floats(std::span<const std::uint8_t> bytes);

std::string encode_floats(std::span<const float> values);
std::vector<float> decode_floats(std::string_view b64);

json to_json(const GenerationRequest& r);
GenerationRequest request_from_json(const json& j);

json to_json(const GenerationRecord& r);
GenerationRecord record_from_json(const json& j);

json to_json(const BackendInfo& info);
BackendInfo info_from_json(const json& j);

json to_json(const EmbedRequest& r);
EmbedRequest embed_request_from_json(const json& j);

json embed_response_to_json(std::span<const Embedding> vectors);
std::vector<Embedding> embed_response_from_json(const json& j);

}  // namespace inbedder::wire
