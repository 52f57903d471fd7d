#pragma once

// HTTP transport for the backend protocol.
//
//   GET  /v1/info      -> {num_layers, dim, architecture_mode, tokenizer_name}
//   POST /v1/generate  GenerationRequest JSON -> GenerationRecord JSON
//   POST /v1/tokenize  {text} -> {length}
//   POST /v1/embed     {texts, normalize} -> {vectors: [base64 f32 LE], dim}

#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include "inbedder/backend.hpp"

namespace httplib {
class Server;
}

namespace inbedder {

struct HttpClientOptions {
  int max_in_flight = 4;
  int connect_timeout_s = 5;
  int read_timeout_s = 600;
};

class HttpGenerationBackend final : public GenerationBackend {
 public:
  explicit HttpGenerationBackend(std::string base_url, HttpClientOptions options = {});

  BackendInfo info() const override;
  GenerationRecord generate(const GenerationRequest& request) override;
  std::size_t token_length(std::string_view text) const override;
  int max_in_flight() const override { return options_.max_in_flight; }

 private:
  std::string base_url_;
  HttpClientOptions options_;
  mutable std::counting_semaphore<1024> in_flight_;
  mutable std::mutex info_mu_;
  mutable std::optional<BackendInfo> info_;
};

class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(std::string base_url, HttpClientOptions options = {});

  std::vector<Embedding> embed_texts(const EmbedRequest& request) override;
  int max_in_flight() const override { return options_.max_in_flight; }

 private:
  std::string base_url_;
  HttpClientOptions options_;
  std::counting_semaphore<1024> in_flight_;
};

/// Serves local backends over the protocol. Either backend may be null, in
/// which case its endpoints answer 404.
class BackendServer {
 public:
  BackendServer(GenerationBackend* generator, EmbeddingBackend* embedder);
  ~BackendServer();

  BackendServer(const BackendServer&) = delete;
  BackendServer& operator=(const BackendServer&) = delete;

  /// Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Binds and serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace inbedder
