#pragma once

// Embedding matrix file: "INBDEMB1", u32 count, u32 dim, count*dim f32, all
// little-endian.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "inbedder/core_math.hpp"

namespace inbedder {

inline constexpr std::string_view kEmbeddingMagic = "INBDEMB1";

/// Throws DimensionMismatch when rows differ in width, EmptyList when empty.
std::string serialize_embeddings(std::span<const Embedding> rows);
std::vector<Embedding> deserialize_embeddings(std::string_view bytes);  // throws CorruptFile

void save_embeddings(const std::string& path, std::span<const Embedding> rows);
std::vector<Embedding> load_embeddings(const std::string& path);

}  // namespace inbedder
