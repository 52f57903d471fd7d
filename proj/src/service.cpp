#include "inbedder/service.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "inbedder/clustering.hpp"
#include "inbedder/error.hpp"
#include "inbedder/jsonl.hpp"
#include "inbedder/text.hpp"

namespace inbedder {

namespace {

using json = nlohmann::json;

bool finished(JobStatus s) { return s == JobStatus::Done || s == JobStatus::Failed; }

json corpus_to_json(const Corpus& c) {
  return {{"id", c.id}, {"doc_ids", c.doc_ids}, {"documents", c.documents}, {"labels", c.labels}};
}

Corpus corpus_from_json(const json& j) {
  Corpus c;
  c.id = j.at("id").get<std::string>();
  c.doc_ids = j.at("doc_ids").get<std::vector<std::string>>();
  c.documents = j.at("documents").get<std::vector<std::string>>();
  c.labels = j.at("labels").get<std::map<std::string, std::vector<std::string>>>();
  return c;
}

}  // namespace

Corpus parse_corpus_jsonl(const std::string& body) {
  Corpus c;
  std::istringstream in(body);
  std::set<std::string> views;
  std::size_t row = 0;
  jsonl::for_each(in, "corpus", [&](const json& j, std::size_t line_no) {
    auto doc = jsonl::required_string(j, "text");
    if (text::trim(doc).empty()) throw Error(ErrorCode::EmptyField, "empty text");
    c.doc_ids.push_back(!j.contains("id")       ? std::to_string(line_no)
                        : j["id"].is_string()   ? j["id"].get<std::string>()
                                                : j["id"].dump());
    c.documents.push_back(std::move(doc));
    std::set<std::string> here;
    if (j.contains("labels")) {
      if (!j["labels"].is_object()) throw Error(ErrorCode::ParseError, "\"labels\" must be an object");
      for (const auto& [view, label] : j["labels"].items()) {
        here.insert(view);
        c.labels[view].push_back(label.is_string() ? label.get<std::string>() : label.dump());
      }
    }
    if (row == 0) views = here;
    if (here != views) throw Error(ErrorCode::ParseError, "every line must carry the same label views");
    ++row;
  });
  if (c.documents.empty()) throw Error(ErrorCode::EmptyList, "corpus has no documents");
  return c;
}

std::string_view to_string(JobStatus s) {
  switch (s) {
    case JobStatus::Pending:
      return "pending";
    case JobStatus::Running:
      return "running";
    case JobStatus::Done:
      return "done";
    case JobStatus::Failed:
      return "failed";
  }
  return "?";
}

JobStatus parse_job_status(std::string_view s) {
  for (auto v : {JobStatus::Pending, JobStatus::Running, JobStatus::Done, JobStatus::Failed}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorCode::ParseError, "unknown job status: " + std::string(s));
}

ClusterRequest ClusterRequest::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "cluster request must be an object");
  ClusterRequest r;
  try {
    r.corpus_id = jsonl::required_string(j, "corpus_id");
    r.instruction = jsonl::required_string(j, "instruction");
    if (!j.contains("k") || !j["k"].is_number_integer()) throw Error(ErrorCode::ParseError, "missing integer \"k\"");
    r.k = j["k"].get<int>();
    if (j.contains("spec") && !j["spec"].is_null()) r.spec = EncodingSpec::from_json(j["spec"]);
    r.top_k = j.value("top_k", r.top_k);
    r.seed = j.value("seed", r.seed);
    if (j.contains("gold_view") && !j["gold_view"].is_null()) r.gold_view = j["gold_view"].get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cluster request: ") + e.what());
  }
  return r;
}

json ClusterRequest::to_json() const {
  return {{"corpus_id", corpus_id}, {"instruction", instruction}, {"k", k},
          {"spec", spec.to_json()},  {"top_k", top_k},             {"seed", seed},
          {"gold_view", gold_view ? json(*gold_view) : json(nullptr)}};
}

json ClusterJob::to_json(bool with_generations) const {
  json j = request.to_json();
  j["job_id"] = job_id;
  j["status"] = std::string(inbedder::to_string(status));
  j["result"] = result ? result->to_json() : json(nullptr);
  j["labels"] = status == JobStatus::Done ? json(labels) : json(nullptr);
  j["error"] = error ? json(*error) : json(nullptr);
  if (with_generations) j["generations"] = generations;
  return j;
}

ClusterJob ClusterJob::from_json(const json& j) {
  ClusterJob job;
  job.request = ClusterRequest::from_json(j);
  try {
    job.job_id = j.at("job_id").get<std::string>();
    job.status = parse_job_status(j.at("status").get<std::string>());
    if (!j.at("result").is_null()) job.result = ClusterReport::from_json(j["result"]);
    if (!j.at("labels").is_null()) job.labels = j["labels"].get<std::vector<int>>();
    if (!j.at("error").is_null()) job.error = j["error"].get<std::string>();
    job.generations = j.value("generations", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("cluster job: ") + e.what());
  }
  return job;
}

ClusterService::ClusterService(GenerationBackend& generator, EmbeddingBackend* embedder, ServiceOptions options)
    : generator_(generator), embedder_(embedder), options_(std::move(options)) {
  if (options_.max_running_jobs < 1) throw Error(ErrorCode::InvalidArgument, "max_running_jobs must be >= 1");
  if (!options_.snapshot_path.empty() && std::filesystem::exists(options_.snapshot_path)) {
    std::ifstream in(options_.snapshot_path);
    try {
      restore(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CorruptFile, options_.snapshot_path + ": " + e.what());
    }
  }
  for (int i = 0; i < options_.max_running_jobs; ++i) {
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
  }
}

ClusterService::~ClusterService() {
  for (auto& w : workers_) w.request_stop();
  changed_.notify_all();
  workers_.clear();
}

std::string ClusterService::add_corpus(Corpus corpus) {
  if (corpus.documents.empty()) throw Error(ErrorCode::EmptyList, "corpus has no documents");
  if (corpus.doc_ids.empty()) {
    for (std::size_t i = 0; i < corpus.documents.size(); ++i) corpus.doc_ids.push_back(std::to_string(i + 1));
  }
  if (corpus.doc_ids.size() != corpus.documents.size()) {
    throw Error(ErrorCode::LengthMismatch, "doc_ids and documents differ in length");
  }
  for (const auto& [view, labels] : corpus.labels) {
    if (labels.size() != corpus.documents.size()) {
      throw Error(ErrorCode::LengthMismatch, "labels for view " + view + " differ in length");
    }
  }
  std::unique_lock lock(mu_);
  corpus.id = "corpus-" + std::to_string(next_corpus_++);
  const auto id = corpus.id;
  corpora_.emplace(id, std::make_shared<const Corpus>(std::move(corpus)));
  save_snapshot_locked();
  return id;
}

Corpus ClusterService::corpus(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = corpora_.find(id);
  if (it == corpora_.end()) throw Error(ErrorCode::UnknownCorpus, "unknown corpus " + id);
  return *it->second;
}

std::string ClusterService::submit(ClusterRequest request) {
  if (text::trim(request.instruction).empty()) throw Error(ErrorCode::EmptyField, "instruction is empty");
  if (request.top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be >= 1");
  request.spec.validate();
  std::unique_lock lock(mu_);
  const auto it = corpora_.find(request.corpus_id);
  if (it == corpora_.end()) throw Error(ErrorCode::UnknownCorpus, "unknown corpus " + request.corpus_id);
  if (request.k < 1 || static_cast<std::size_t>(request.k) > it->second->documents.size()) {
    throw Error(ErrorCode::InvalidK, "k must be in [1, " + std::to_string(it->second->documents.size()) + "]");
  }
  if (request.gold_view && !it->second->labels.contains(*request.gold_view)) {
    throw Error(ErrorCode::InvalidArgument, "corpus has no label view " + *request.gold_view);
  }
  ClusterJob job;
  job.job_id = "job-" + std::to_string(next_job_++);
  job.request = std::move(request);
  const auto id = job.job_id;
  jobs_.emplace(id, std::move(job));
  queue_.push_back(id);
  changed_.notify_all();
  return id;
}

ClusterJob ClusterService::job(const std::string& job_id) const {
  std::shared_lock lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownJob, "unknown job " + job_id);
  return it->second;
}

std::vector<ClusterMember> ClusterService::members(const std::string& job_id, int cluster) const {
  std::shared_lock lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownJob, "unknown job " + job_id);
  const auto& job = it->second;
  if (job.status != JobStatus::Done) throw Error(ErrorCode::InvalidArgument, "job " + job_id + " is not done");
  if (cluster < 0 || cluster >= job.request.k) {
    throw Error(ErrorCode::InvalidK, "cluster " + std::to_string(cluster) + " out of range");
  }
  const auto& corpus = *corpora_.at(job.request.corpus_id);
  std::vector<ClusterMember> out;
  for (std::size_t i = 0; i < job.labels.size(); ++i) {
    if (job.labels[i] != cluster) continue;
    out.push_back({i, corpus.doc_ids[i], corpus.documents[i],
                   i < job.generations.size() ? job.generations[i] : std::string()});
  }
  return out;
}

ClusterJob ClusterService::wait(const std::string& job_id, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  changed_.wait_for(lock, timeout, [&] {
    const auto it = jobs_.find(job_id);
    return it == jobs_.end() || finished(it->second.status);
  });
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownJob, "unknown job " + job_id);
  return it->second;
}

std::size_t ClusterService::corpus_count() const {
  std::shared_lock lock(mu_);
  return corpora_.size();
}

std::size_t ClusterService::job_count() const {
  std::shared_lock lock(mu_);
  return jobs_.size();
}

void ClusterService::worker_loop(std::stop_token stop) {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(mu_);
      if (!changed_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
      id = queue_.front();
      queue_.pop_front();
    }
    run_job(id);
  }
}

void ClusterService::run_job(const std::string& job_id) {
  ClusterJob job;
  std::shared_ptr<const Corpus> corpus;
  {
    std::unique_lock lock(mu_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return;
    it->second.status = JobStatus::Running;
    job = it->second;
    corpus = corpora_.at(job.request.corpus_id);
    changed_.notify_all();
  }
  try {
    const auto& req = job.request;
    InstructedEmbedder embedder(req.spec, options_.tmpl, generator_, embedder_, options_.token_budget);
    auto embedded = embedder.embed_corpus(corpus->documents, req.instruction);
    std::vector<Embedding> points;
    points.reserve(embedded.size());
    for (auto& e : embedded) {
      points.push_back(l2_normalized(e.embedding));
      job.generations.push_back(std::move(e.generation));
    }
    const auto assignment = kmeans(points, req.k, req.seed);
    auto report = explain_clusters(job.generations, assignment, req.top_k);
    if (req.gold_view) {
      apply_entropy_ordering(report, order_clusters_by_entropy(assignment, corpus->labels.at(*req.gold_view)));
    }
    job.labels = assignment.labels;
    job.result = std::move(report);
    job.status = JobStatus::Done;
  } catch (const std::exception& e) {
    job.status = JobStatus::Failed;
    job.error = e.what();
    job.result.reset();
    job.labels.clear();
    job.generations.clear();
  }
  finish(job_id, std::move(job));
}

void ClusterService::finish(const std::string& job_id, ClusterJob done) {
  std::unique_lock lock(mu_);
  jobs_[job_id] = std::move(done);
  finished_order_.push_back(job_id);
  evict_locked();
  save_snapshot_locked();
  changed_.notify_all();
}

void ClusterService::evict_locked() {
  while (finished_order_.size() > options_.max_retained_jobs) {
    jobs_.erase(finished_order_.front());
    finished_order_.pop_front();
  }
}

json ClusterService::snapshot() const {
  std::shared_lock lock(mu_);
  return snapshot_locked();
}

json ClusterService::snapshot_locked() const {
  json corpora = json::array(), jobs = json::array();
  for (const auto& [_, c] : corpora_) corpora.push_back(corpus_to_json(*c));
  for (const auto& [_, j] : jobs_) {
    if (finished(j.status)) jobs.push_back(j.to_json(true));
  }
  return {{"next_corpus", next_corpus_}, {"next_job", next_job_}, {"corpora", corpora}, {"jobs", jobs}};
}

void ClusterService::restore(const json& snapshot) {
  std::unique_lock lock(mu_);
  try {
    corpora_.clear();
    jobs_.clear();
    finished_order_.clear();
    queue_.clear();
    next_corpus_ = snapshot.at("next_corpus").get<std::uint64_t>();
    next_job_ = snapshot.at("next_job").get<std::uint64_t>();
    for (const auto& c : snapshot.at("corpora")) {
      auto corpus = corpus_from_json(c);
      const auto id = corpus.id;
      corpora_.emplace(id, std::make_shared<const Corpus>(std::move(corpus)));
    }
    for (const auto& j : snapshot.at("jobs")) {
      auto job = ClusterJob::from_json(j);
      if (!finished(job.status)) {
        job.status = JobStatus::Failed;
        job.error = "interrupted by service restart";
      }
      finished_order_.push_back(job.job_id);
      jobs_.emplace(job.job_id, std::move(job));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("service snapshot: ") + e.what());
  }
}

void ClusterService::save_snapshot_locked() const {
  if (options_.snapshot_path.empty()) return;
  const auto snap = snapshot_locked();
  const auto tmp = options_.snapshot_path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
    out << snap.dump();
  }
  std::filesystem::rename(tmp, options_.snapshot_path);
}

// ---- HTTP -----------------------------------------------------------------

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownCorpus:
    case ErrorCode::UnknownJob:
      return 404;
    case ErrorCode::IoError:
      return 500;
    default:
      return 400;
  }
}

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  reply_json(res, status, {{"error", message}, {"code", code}});
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply_error(res, status_for(e.code()), std::string(to_string(e.code())), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, "ParseError", e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, "InternalError", e.what());
  }
}

json corpus_meta(const Corpus& c) {
  json views = json::array();
  for (const auto& [v, _] : c.labels) views.push_back(v);
  return {{"corpus_id", c.id}, {"size", c.documents.size()}, {"label_views", views}};
}

}  // namespace

ServiceServer::ServiceServer(ClusterService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ServiceServer::~ServiceServer() { stop(); }

void ServiceServer::install_routes() {
  auto& s = *server_;
  s.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                         {"Access-Control-Allow-Headers", "Content-Type"}});
  s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"status", "ok"}, {"corpora", service_.corpus_count()}, {"jobs", service_.job_count()}});
  });
  s.Post("/api/corpus", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = service_.add_corpus(parse_corpus_jsonl(req.body));
      reply_json(res, 201, corpus_meta(service_.corpus(id)));
    });
  });
  s.Get(R"(/api/corpus/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply_json(res, 200, corpus_meta(service_.corpus(req.matches[1]))); });
  });
  s.Post("/api/cluster", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto id = service_.submit(ClusterRequest::from_json(json::parse(req.body)));
      reply_json(res, 202, {{"job_id", id}});
    });
  });
  s.Get(R"(/api/cluster/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply_json(res, 200, service_.job(req.matches[1]).to_json()); });
  });
  s.Get(R"(/api/cluster/([^/]+)/members/(-?\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string job_id = req.matches[1];
      const auto job = service_.job(job_id);
      if (job.status != JobStatus::Done) {
        reply_error(res, 409, "JobNotDone", "job " + job_id + " is " + std::string(to_string(job.status)));
        return;
      }
      const int cluster = std::stoi(req.matches[2]);
      json members = json::array();
      for (const auto& m : service_.members(job_id, cluster)) {
        members.push_back({{"index", m.index}, {"id", m.doc_id}, {"text", m.text}, {"generation", m.generation}});
      }
      reply_json(res, 200, {{"job_id", job_id}, {"cluster", cluster}, {"members", members}});
    });
  });
}

int ServiceServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ServiceServer::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) {
    throw Error(ErrorCode::IoError, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void ServiceServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace inbedder
