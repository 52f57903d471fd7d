#include "inbedder/embedding_file.hpp"

#include <fstream>
#include <sstream>

#include "inbedder/error.hpp"
#include "inbedder/wire.hpp"

namespace inbedder {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string serialize_embeddings(std::span<const Embedding> rows) {
  if (rows.empty()) throw Error(ErrorCode::EmptyList, "no embeddings to write");
  const std::size_t dim = rows[0].dim();
  if (rows.size() > 0xFFFFFFFFULL || dim > 0xFFFFFFFFULL) {
    throw Error(ErrorCode::InvalidArgument, "embedding matrix too large");
  }
  std::vector<float> flat;
  flat.reserve(rows.size() * dim);
  for (const auto& r : rows) {
    if (r.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "embeddings differ in dimension");
    for (double v : r.values()) flat.push_back(static_cast<float>(v));
  }
  std::string out(kEmbeddingMagic);
  put_u32(out, static_cast<std::uint32_t>(rows.size()));
  put_u32(out, static_cast<std::uint32_t>(dim));
  const auto bytes = wire::floats_to_le_bytes(flat);
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return out;
}

std::vector<Embedding> deserialize_embeddings(std::string_view bytes) {
  const std::size_t header = kEmbeddingMagic.size() + 8;
  if (bytes.size() < header || bytes.substr(0, kEmbeddingMagic.size()) != kEmbeddingMagic) {
    throw Error(ErrorCode::CorruptFile, "not an embedding file");
  }
  const std::size_t count = get_u32(bytes, kEmbeddingMagic.size());
  const std::size_t dim = get_u32(bytes, kEmbeddingMagic.size() + 4);
  if (count == 0 || dim == 0) throw Error(ErrorCode::CorruptFile, "embedding file has zero size");
  if (bytes.size() - header != count * dim * 4) {
    throw Error(ErrorCode::CorruptFile, "embedding file length does not match its header");
  }
  const auto* p = reinterpret_cast<const std::uint8_t*>(bytes.data() + header);
  const auto flat = wire::le_bytes_to_floats({p, count * dim * 4});
  std::vector<Embedding> out;
  out.reserve(count);
  try {
    for (std::size_t i = 0; i < count; ++i) {
      out.emplace_back(std::span<const float>(flat.data() + i * dim, dim));
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptFile, std::string("embedding file: ") + e.what());
  }
  return out;
}

void save_embeddings(const std::string& path, std::span<const Embedding> rows) {
  const auto bytes = serialize_embeddings(rows);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

std::vector<Embedding> load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_embeddings(ss.str());
}

}  // namespace inbedder
