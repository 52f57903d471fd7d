#include "inbedder/http_backend.hpp"

#include <httplib.h>

#include "inbedder/error.hpp"
#include "inbedder/wire.hpp"

namespace inbedder {

namespace {

using json = nlohmann::json;

class SemaphoreGuard {
 public:
  explicit SemaphoreGuard(std::counting_semaphore<1024>& s) : s_(s) { s_.acquire(); }
  ~SemaphoreGuard() { s_.release(); }
  SemaphoreGuard(const SemaphoreGuard&) = delete;
  SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;

 private:
  std::counting_semaphore<1024>& s_;
};

std::ptrdiff_t clamp_in_flight(int n) { return std::clamp(n, 1, 1024); }

httplib::Client make_client(const std::string& url, const HttpClientOptions& o) {
  httplib::Client cli(url);
  cli.set_connection_timeout(o.connect_timeout_s, 0);
  cli.set_read_timeout(o.read_timeout_s, 0);
  cli.set_write_timeout(o.read_timeout_s, 0);
  return cli;
}

json checked_json(const httplib::Result& res, const std::string& url, const char* path) {
  if (!res) {
    throw Error(ErrorCode::BackendUnreachable,
                url + path + ": " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ProtocolError,
                url + path + " returned HTTP " + std::to_string(res->status) + ": " +
                    res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ProtocolError, url + path + " returned invalid JSON: " + e.what());
  }
}

void reply_error(httplib::Response& res, const Error& e) {
  switch (e.code()) {
    case ErrorCode::MissingRecord:
    case ErrorCode::MissingConfigEntry:
      res.status = 404;
      break;
    case ErrorCode::BackendUnreachable:
      res.status = 502;
      break;
    default:
      res.status = 400;
  }
  res.set_content(json{{"error", e.what()}, {"code", std::string(to_string(e.code()))}}.dump(),
                  "application/json");
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply_error(res, e);
  } catch (const json::exception& e) {
    reply_error(res, Error(ErrorCode::ProtocolError, e.what()));
  }
}

}  // namespace

HttpGenerationBackend::HttpGenerationBackend(std::string base_url, HttpClientOptions options)
    : base_url_(std::move(base_url)),
      options_(options),
      in_flight_(clamp_in_flight(options.max_in_flight)) {}

BackendInfo HttpGenerationBackend::info() const {
  std::lock_guard lock(info_mu_);
  if (!info_) {
    auto cli = make_client(base_url_, options_);
    const auto j = checked_json(cli.Get("/v1/info"), base_url_, "/v1/info");
    info_ = wire::info_from_json(j);
  }
  return *info_;
}

GenerationRecord HttpGenerationBackend::generate(const GenerationRequest& request) {
  request.validate();
  SemaphoreGuard guard(in_flight_);
  auto cli = make_client(base_url_, options_);
  const auto body = wire::to_json(request).dump();
  auto record = wire::record_from_json(
      checked_json(cli.Post("/v1/generate", body, "application/json"), base_url_, "/v1/generate"));
  if (record.samples.size() != static_cast<std::size_t>(request.n_samples)) {
    throw Error(ErrorCode::ProtocolError, "backend returned the wrong number of samples");
  }
  return record;
}

std::size_t HttpGenerationBackend::token_length(std::string_view text) const {
  SemaphoreGuard guard(in_flight_);
  auto cli = make_client(base_url_, options_);
  const auto body = json{{"text", std::string(text)}}.dump();
  const auto j =
      checked_json(cli.Post("/v1/tokenize", body, "application/json"), base_url_, "/v1/tokenize");
  if (!j.contains("length") || !j["length"].is_number_unsigned()) {
    throw Error(ErrorCode::ProtocolError, "tokenize response lacks a length");
  }
  return j["length"].get<std::size_t>();
}

HttpEmbeddingBackend::HttpEmbeddingBackend(std::string base_url, HttpClientOptions options)
    : base_url_(std::move(base_url)),
      options_(options),
      in_flight_(clamp_in_flight(options.max_in_flight)) {}

std::vector<Embedding> HttpEmbeddingBackend::embed_texts(const EmbedRequest& request) {
  validate_embed_request(request);
  SemaphoreGuard guard(in_flight_);
  auto cli = make_client(base_url_, options_);
  const auto body = wire::to_json(request).dump();
  auto vectors = wire::embed_response_from_json(
      checked_json(cli.Post("/v1/embed", body, "application/json"), base_url_, "/v1/embed"));
  validate_embed_response(request, vectors);
  return vectors;
}

BackendServer::BackendServer(GenerationBackend* generator, EmbeddingBackend* embedder)
    : server_(std::make_unique<httplib::Server>()) {
  auto& s = *server_;
  s.Get("/v1/info", [generator](const httplib::Request&, httplib::Response& res) {
    if (!generator) {
      res.status = 404;
      return;
    }
    guarded(res, [&] { res.set_content(wire::to_json(generator->info()).dump(), "application/json"); });
  });
  s.Post("/v1/generate", [generator](const httplib::Request& req, httplib::Response& res) {
    if (!generator) {
      res.status = 404;
      return;
    }
    guarded(res, [&] {
      const auto request = wire::request_from_json(json::parse(req.body));
      res.set_content(wire::to_json(generator->generate(request)).dump(), "application/json");
    });
  });
  s.Post("/v1/tokenize", [generator](const httplib::Request& req, httplib::Response& res) {
    if (!generator) {
      res.status = 404;
      return;
    }
    guarded(res, [&] {
      const auto j = json::parse(req.body);
      const auto length = generator->token_length(j.at("text").get<std::string>());
      res.set_content(json{{"length", length}}.dump(), "application/json");
    });
  });
  s.Post("/v1/embed", [embedder](const httplib::Request& req, httplib::Response& res) {
    if (!embedder) {
      res.status = 404;
      return;
    }
    guarded(res, [&] {
      const auto request = wire::embed_request_from_json(json::parse(req.body));
      res.set_content(wire::embed_response_to_json(embedder->embed_texts(request)).dump(),
                      "application/json");
    });
  });
}

BackendServer::~BackendServer() { stop(); }

int BackendServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void BackendServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void BackendServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace inbedder
