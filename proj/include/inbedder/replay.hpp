#pragma once

// Record/replay of backend traffic for fixture regression.
//
// Container layout, all integers little-endian u32:
//   "INBDREC1" | index_length | index JSON (index_length bytes) | f32 block
// The index holds every record with its hidden matrices replaced by float
// offsets into the block, plus recorded embeddings and tokenizer lengths.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "inbedder/backend.hpp"

namespace inbedder {

inline constexpr std::string_view kReplayMagic = "INBDREC1";

/// Lookup key for a recorded generation: prompt, n_samples, temperature,
/// max_new_tokens and layers.
std::string replay_key(const GenerationRequest& request);

class ReplayStore {
 public:
  BackendInfo info;

  void put(const GenerationRequest& request, GenerationRecord record);
  /// Throws MissingRecord.
  const GenerationRecord& get(const GenerationRequest& request) const;

  void put_embeddings(const EmbedRequest& request, std::span<const Embedding> vectors);
  std::vector<Embedding> get_embeddings(const EmbedRequest& request) const;

  void put_token_length(const std::string& text, std::size_t length);
  std::optional<std::size_t> token_length(const std::string& text) const;

  std::size_t record_count() const { return records_.size(); }
  const std::map<std::string, GenerationRecord>& records() const { return records_; }

  std::string serialize() const;
  static ReplayStore deserialize(std::string_view bytes);  // throws CorruptFile

  void save(const std::string& path) const;
  static ReplayStore load(const std::string& path);

  friend bool operator==(const ReplayStore&, const ReplayStore&) = default;

 private:
  std::map<std::string, GenerationRecord> records_;
  std::map<std::pair<std::string, bool>, std::vector<float>> embeddings_;
  std::map<std::string, std::size_t> token_lengths_;
};

class ReplayBackend final : public GenerationBackend, public EmbeddingBackend {
 public:
  explicit ReplayBackend(std::shared_ptr<const ReplayStore> store)
      : store_(std::move(store)) {}

  BackendInfo info() const override { return store_->info; }
  GenerationRecord generate(const GenerationRequest& request) override;
  std::size_t token_length(std::string_view text) const override;
  std::vector<Embedding> embed_texts(const EmbedRequest& request) override;
  int max_in_flight() const override { return 8; }

 private:
  std::shared_ptr<const ReplayStore> store_;
};

/// Replays the file at `path`; throws CorruptFile.
std::shared_ptr<ReplayBackend> load_replay(const std::string& path);

/// Forwards to live backends and records everything that passes through.
class RecordingBackend final : public GenerationBackend, public EmbeddingBackend {
 public:
  RecordingBackend(GenerationBackend* generator, EmbeddingBackend* embedder);

  BackendInfo info() const override;
  GenerationRecord generate(const GenerationRequest& request) override;
  std::size_t token_length(std::string_view text) const override;
  std::vector<Embedding> embed_texts(const EmbedRequest& request) override;
  int max_in_flight() const override;

  ReplayStore snapshot() const;

 private:
  GenerationBackend* generator_;
  EmbeddingBackend* embedder_;
  mutable std::mutex mu_;
  mutable ReplayStore store_;
};

}  // namespace inbedder
