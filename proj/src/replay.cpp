#include "inbedder/replay.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "inbedder/error.hpp"
#include "inbedder/wire.hpp"

namespace inbedder {

namespace {

using json = nlohmann::json;

[[noreturn]] void corrupt(const std::string& what) { throw Error(ErrorCode::CorruptFile, what); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFULL) throw Error(ErrorCode::InvalidArgument, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string replay_key(const GenerationRequest& r) {
  return json{{"prompt", r.prompt.text},
              {"n_samples", r.n_samples},
              {"temperature", r.temperature},
              {"max_new_tokens", r.max_new_tokens},
              {"layers", r.layers}}
      .dump();
}

void ReplayStore::put(const GenerationRequest& request, GenerationRecord record) {
  record.validate();
  records_.insert_or_assign(replay_key(request), std::move(record));
}

const GenerationRecord& ReplayStore::get(const GenerationRequest& request) const {
  const auto it = records_.find(replay_key(request));
  if (it == records_.end()) {
    throw Error(ErrorCode::MissingRecord,
                "no recorded generation for prompt '" + request.prompt.text.substr(0, 80) + "...'");
  }
  return it->second;
}

void ReplayStore::put_embeddings(const EmbedRequest& request, std::span<const Embedding> vectors) {
  for (std::size_t i = 0; i < request.texts.size() && i < vectors.size(); ++i) {
    std::vector<float> f(vectors[i].values().begin(), vectors[i].values().end());
    embeddings_.insert_or_assign({request.texts[i], request.normalize}, std::move(f));
  }
}

std::vector<Embedding> ReplayStore::get_embeddings(const EmbedRequest& request) const {
  std::vector<Embedding> out;
  for (const auto& t : request.texts) {
    const auto it = embeddings_.find({t, request.normalize});
    if (it == embeddings_.end()) {
      throw Error(ErrorCode::MissingRecord, "no recorded embedding for '" + t.substr(0, 80) + "'");
    }
    out.emplace_back(std::span<const float>(it->second));
  }
  return out;
}

void ReplayStore::put_token_length(const std::string& text, std::size_t length) {
  token_lengths_.insert_or_assign(text, length);
}

std::optional<std::size_t> ReplayStore::token_length(const std::string& text) const {
  const auto it = token_lengths_.find(text);
  if (it == token_lengths_.end()) return std::nullopt;
  return it->second;
}

std::string ReplayStore::serialize() const {
  std::vector<float> block;
  json records = json::array();
  for (const auto& [key, rec] : records_) {
    json jr = wire::to_json(rec);
    for (std::size_t s = 0; s < rec.samples.size(); ++s) {
      json hidden = json::array();
      for (const auto& [layer, m] : rec.hidden[s]) {
        hidden.push_back({{"layer", layer}, {"rows", m.rows}, {"offset", block.size()}});
        block.insert(block.end(), m.data.begin(), m.data.end());
      }
      jr["samples"][s]["hidden"] = std::move(hidden);
    }
    records.push_back({{"key", key}, {"record", std::move(jr)}});
  }
  json embeddings = json::array();
  for (const auto& [key, vec] : embeddings_) {
    embeddings.push_back({{"text", key.first},
                          {"normalize", key.second},
                          {"offset", block.size()},
                          {"dim", vec.size()}});
    block.insert(block.end(), vec.begin(), vec.end());
  }
  json index{{"version", 1},
             {"info", wire::to_json(info)},
             {"float_count", block.size()},
             {"token_lengths", token_lengths_},
             {"records", std::move(records)},
             {"embeddings", std::move(embeddings)}};
  const std::string index_text = index.dump();

  std::string out(kReplayMagic);
  put_u32(out, checked_u32(index_text.size(), "replay index"));
  out += index_text;
  const auto bytes = wire::floats_to_le_bytes(block);
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  return out;
}

ReplayStore ReplayStore::deserialize(std::string_view bytes) {
  if (bytes.size() < kReplayMagic.size() + 4 || !bytes.starts_with(kReplayMagic)) {
    corrupt("missing INBDREC1 header");
  }
  const std::size_t index_len = get_u32(bytes, kReplayMagic.size());
  const std::size_t index_at = kReplayMagic.size() + 4;
  if (bytes.size() - index_at < index_len) corrupt("index length runs past end of file");

  json index;
  try {
    index = json::parse(bytes.substr(index_at, index_len));
  } catch (const json::exception& e) {
    corrupt(std::string("index is not valid JSON: ") + e.what());
  }

  const auto payload = bytes.substr(index_at + index_len);
  ReplayStore store;
  try {
    const auto float_count = index.at("float_count").get<std::size_t>();
    if (payload.size() != float_count * 4) corrupt("float block size does not match index");
    const auto block = wire::le_bytes_to_floats(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));

    auto slice = [&](std::size_t offset, std::size_t count) {
      if (offset > block.size() || block.size() - offset < count) corrupt("float offset out of range");
      return std::vector<float>(block.begin() + static_cast<long>(offset),
                                block.begin() + static_cast<long>(offset + count));
    };

    store.info = wire::info_from_json(index.at("info"));
    store.token_lengths_ = index.at("token_lengths").get<std::map<std::string, std::size_t>>();
    for (const auto& entry : index.at("records")) {
      json jr = entry.at("record");
      const auto dim = jr.at("dim").get<std::size_t>();
      for (auto& js : jr.at("samples")) {
        for (auto& jh : js.at("hidden")) {
          const auto rows = jh.at("rows").get<std::size_t>();
          jh["data"] = wire::encode_floats(slice(jh.at("offset").get<std::size_t>(), rows * dim));
          jh.erase("offset");
        }
      }
      store.records_.emplace(entry.at("key").get<std::string>(), wire::record_from_json(jr));
    }
    for (const auto& e : index.at("embeddings")) {
      store.embeddings_.emplace(
          std::pair{e.at("text").get<std::string>(), e.at("normalize").get<bool>()},
          slice(e.at("offset").get<std::size_t>(), e.at("dim").get<std::size_t>()));
    }
  } catch (const json::exception& e) {
    corrupt(std::string("malformed index: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptFile) throw;
    corrupt(e.what());
  }
  return store;
}

void ReplayStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  const auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

ReplayStore ReplayStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

GenerationRecord ReplayBackend::generate(const GenerationRequest& request) {
  request.validate();
  return store_->get(request);
}

std::size_t ReplayBackend::token_length(std::string_view text) const {
  const auto n = store_->token_length(std::string(text));
  if (!n) throw Error(ErrorCode::MissingRecord, "no recorded token length for prompt");
  return *n;
}

std::vector<Embedding> ReplayBackend::embed_texts(const EmbedRequest& request) {
  validate_embed_request(request);
  return store_->get_embeddings(request);
}

std::shared_ptr<ReplayBackend> load_replay(const std::string& path) {
  return std::make_shared<ReplayBackend>(std::make_shared<const ReplayStore>(ReplayStore::load(path)));
}

RecordingBackend::RecordingBackend(GenerationBackend* generator, EmbeddingBackend* embedder)
    : generator_(generator), embedder_(embedder) {
  if (generator_) store_.info = generator_->info();
}

BackendInfo RecordingBackend::info() const {
  if (!generator_) throw Error(ErrorCode::UnsupportedMode, "no generation backend to record");
  return generator_->info();
}

GenerationRecord RecordingBackend::generate(const GenerationRequest& request) {
  if (!generator_) throw Error(ErrorCode::UnsupportedMode, "no generation backend to record");
  auto record = generator_->generate(request);
  std::lock_guard lock(mu_);
  store_.put(request, record);
  return record;
}

std::size_t RecordingBackend::token_length(std::string_view text) const {
  if (!generator_) throw Error(ErrorCode::UnsupportedMode, "no generation backend to record");
  const auto n = generator_->token_length(text);
  std::lock_guard lock(mu_);
  store_.put_token_length(std::string(text), n);
  return n;
}

std::vector<Embedding> RecordingBackend::embed_texts(const EmbedRequest& request) {
  if (!embedder_) throw Error(ErrorCode::UnsupportedMode, "no embedder to record");
  auto vectors = embedder_->embed_texts(request);
  std::lock_guard lock(mu_);
  store_.put_embeddings(request, vectors);
  return vectors;
}

int RecordingBackend::max_in_flight() const {
  return generator_ ? generator_->max_in_flight() : (embedder_ ? embedder_->max_in_flight() : 1);
}

ReplayStore RecordingBackend::snapshot() const {
  std::lock_guard lock(mu_);
  return store_;
}

}  // namespace inbedder
