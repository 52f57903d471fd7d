#pragma once

// Asynchronous clustering service behind the explorer API.
//
//   POST /api/corpus                          JSON-lines body -> {corpus_id, size}
//   GET  /api/corpus/{id}                     -> {corpus_id, size, label_views}
//   POST /api/cluster                         {corpus_id, instruction, k, spec?, top_k?, seed?, gold_view?}
//                                             -> 202 {job_id}
//   GET  /api/cluster/{job_id}                -> job
//   GET  /api/cluster/{job_id}/members/{c}    -> {job_id, cluster, members: [...]}
//   GET  /api/health                          -> {status, corpora, jobs}

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "inbedder/backend.hpp"
#include "inbedder/encoding.hpp"
#include "inbedder/interpretation.hpp"
#include "inbedder/prompting.hpp"

namespace httplib {
class Server;
}

namespace inbedder {

struct Corpus {
  std::string id;
  std::vector<std::string> doc_ids;
  std::vector<std::string> documents;
  std::map<std::string, std::vector<std::string>> labels;  // view -> gold label per document
};

/// Lines {"text", "id"?, "labels"?: {view: label}}. Throws ParseError.
Corpus parse_corpus_jsonl(const std::string& body);

enum class JobStatus { Pending, Running, Done, Failed };
std::string_view to_string(JobStatus s);
JobStatus parse_job_status(std::string_view s);

struct ClusterRequest {
  std::string corpus_id;
  std::string instruction;
  int k = 0;
  EncodingSpec spec;
  std::size_t top_k = 8;
  std::uint64_t seed = 0;
  std::optional<std::string> gold_view;  // entropy-order the report by these labels

  static ClusterRequest from_json(const nlohmann::json& j);  // throws ParseError / InvalidArgument
  nlohmann::json to_json() const;
};

struct ClusterJob {
  std::string job_id;
  ClusterRequest request;
  JobStatus status = JobStatus::Pending;
  std::optional<ClusterReport> result;     // iff Done
  std::vector<int> labels;                 // per document, when Done
  std::vector<std::string> generations;    // per document, when Done
  std::optional<std::string> error;        // iff Failed

  nlohmann::json to_json(bool with_generations = false) const;
  static ClusterJob from_json(const nlohmann::json& j);
};

struct ClusterMember {
  std::size_t index = 0;
  std::string doc_id;
  std::string text;
  std::string generation;
};

struct ServiceOptions {
  int max_running_jobs = 2;
  std::size_t max_retained_jobs = 1000;  // finished jobs beyond this are evicted oldest first
  PromptTemplate tmpl = default_template();
  std::size_t token_budget = kDefaultTokenBudget;
  std::string snapshot_path;  // empty: in-memory only
};

class ClusterService {
 public:
  ClusterService(GenerationBackend& generator, EmbeddingBackend* embedder, ServiceOptions options = {});
  ~ClusterService();
  ClusterService(const ClusterService&) = delete;
  ClusterService& operator=(const ClusterService&) = delete;

  std::string add_corpus(Corpus corpus);  // returns the assigned id
  Corpus corpus(const std::string& id) const;  // throws UnknownCorpus

  /// Validates and enqueues. Throws UnknownCorpus, InvalidK, InvalidArgument.
  std::string submit(ClusterRequest request);
  ClusterJob job(const std::string& job_id) const;  // throws UnknownJob
  /// Throws UnknownJob, InvalidArgument (job not done), InvalidK (no such cluster).
  std::vector<ClusterMember> members(const std::string& job_id, int cluster) const;
  /// Blocks until the job is done or failed, or the timeout passes.
  ClusterJob wait(const std::string& job_id, std::chrono::milliseconds timeout) const;

  std::size_t corpus_count() const;
  std::size_t job_count() const;

  /// Corpora and finished jobs.
  nlohmann::json snapshot() const;
  void restore(const nlohmann::json& snapshot);  // unfinished jobs come back failed

 private:
  void worker_loop(std::stop_token stop);
  void run_job(const std::string& job_id);
  void finish(const std::string& job_id, ClusterJob done);
  void evict_locked();
  nlohmann::json snapshot_locked() const;
  void save_snapshot_locked() const;

  GenerationBackend& generator_;
  EmbeddingBackend* embedder_;
  ServiceOptions options_;

  mutable std::shared_mutex mu_;
  mutable std::condition_variable_any changed_;
  std::map<std::string, std::shared_ptr<const Corpus>> corpora_;
  std::map<std::string, ClusterJob> jobs_;
  std::deque<std::string> finished_order_;
  std::deque<std::string> queue_;
  std::uint64_t next_corpus_ = 1;
  std::uint64_t next_job_ = 1;
  std::vector<std::jthread> workers_;
};

struct ServerOptions {
  std::string cors_origin = "*";
};

class ServiceServer {
 public:
  explicit ServiceServer(ClusterService& service, ServerOptions options = {});
  ~ServiceServer();

  /// Binds (port 0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port = 0);
  /// Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  ClusterService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace inbedder
