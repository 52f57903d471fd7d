#include "inbedder/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "inbedder/benchmarks.hpp"
#include "inbedder/clustering.hpp"
#include "inbedder/dataprep.hpp"
#include "inbedder/embedding_file.hpp"
#include "inbedder/encoding.hpp"
#include "inbedder/error.hpp"
#include "inbedder/http_backend.hpp"
#include "inbedder/interpretation.hpp"
#include "inbedder/jsonl.hpp"
#include "inbedder/replay.hpp"
#include "inbedder/service.hpp"
#include "inbedder/stopwords.hpp"
#include "inbedder/synthesis.hpp"
#include "inbedder/synthetic_backend.hpp"

namespace inbedder {

namespace {

using json = nlohmann::json;

bool is_url(const std::string& s) { return s.starts_with("http://") || s.starts_with("https://"); }

std::string after_colon(const std::string& spec) {
  const auto pos = spec.find(':');
  return pos == std::string::npos ? std::string() : spec.substr(pos + 1);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

void emit(std::ostream& out, const std::string& output_path, const std::string& text) {
  if (output_path.empty()) {
    out << text;
  } else {
    write_text_file(output_path, text);
  }
}

// Options shared by every subcommand that talks to a backend.
struct BackendFlags {
  std::string backend;
  std::string embedder;

  void add_to(CLI::App* app) {
    app->add_option("--backend", backend,
                    "synthetic[:CFG] | replay:FILE | URL (default: $INBEDDER_BACKEND_URL, then config)");
    app->add_option("--embedder", embedder, "embedder for re-enc; defaults to the backend's own");
  }

  BackendSet open(const json& config) const {
    const auto gen = resolve_setting(backend, kBackendUrlEnv, config, "backend");
    if (!gen) throw Error(ErrorCode::UsageError, "no backend given (use --backend, $INBEDDER_BACKEND_URL or a config file)");
    const auto emb = resolve_setting(embedder, nullptr, config, "embedder");
    return open_backends(*gen, emb.value_or(""));
  }
};

struct EncodingFlags {
  std::string method = "1st-gen";
  int layer = -1;
  int samples = 1;
  double temperature = 0.0;
  int max_new_tokens = kShortAnswerMaxNewTokens;
  int mask_count = kDefaultMaskCount;
  std::string filter;
  std::uint64_t seed = 0;
  bool normalize_samples = false;
  std::string template_path;
  bool chat = false;
  std::size_t budget = kDefaultTokenBudget;

  void add_to(CLI::App* app) {
    app->add_option("--method", method, "avg-gen | avg-ppt | 1st-gen | last-gen | avg-all | re-enc")
        ->capture_default_str();
    app->add_option("--layer", layer, "hidden layer; negative counts from the top")->capture_default_str();
    app->add_option("--samples", samples, "answers sampled per input (re-enc)")->capture_default_str();
    app->add_option("--temperature", temperature)->capture_default_str();
    app->add_option("--max-new-tokens", max_new_tokens)->capture_default_str();
    app->add_option("--mask-count", mask_count, "masks appended for encoder-only models")->capture_default_str();
    app->add_option("--filter", filter, "\"default\" or a filter config file (avg-gen only)");
    app->add_option("--gen-seed", seed, "sampling seed")->capture_default_str();
    app->add_flag("--normalize-samples", normalize_samples, "unit-normalize each re-encoded answer");
    app->add_option("--template", template_path, "prompt template file");
    app->add_flag("--chat", chat, "use the chat prefix and 40-token answers");
    app->add_option("--budget", budget, "prompt token budget")->capture_default_str();
  }

  EncodingSpec spec() const {
    json j{{"method", method},           {"layer", layer},          {"n_samples", samples},
           {"temperature", temperature}, {"max_new_tokens", chat ? kChatMaxNewTokens : max_new_tokens},
           {"mask_count", mask_count},   {"seed", seed},            {"normalize_samples", normalize_samples}};
    auto s = EncodingSpec::from_json(j);
    if (filter == "default") {
      s.filter = FilterConfig::defaults();
    } else if (!filter.empty()) {
      s.filter = FilterConfig::load(filter);
    }
    s.validate();
    return s;
  }

  PromptTemplate tmpl() const {
    if (!template_path.empty()) return load_template(template_path);
    return chat ? chat_template() : default_template();
  }
};

// Keeps backends alive alongside the embedder that references them.
struct Pipeline {
  BackendSet backends;
  std::unique_ptr<InstructedEmbedder> embedder;
};

Pipeline make_pipeline(const BackendFlags& b, const EncodingFlags& e, const json& config) {
  Pipeline p;
  p.backends = b.open(config);
  p.embedder = std::make_unique<InstructedEmbedder>(e.spec(), e.tmpl(), *p.backends.generator,
                                                    p.backends.embedder.get(), e.budget);
  return p;
}

json assignment_json(const ClusterAssignment& a) {
  return {{"k", a.k}, {"labels", a.labels}, {"inertia", a.inertia}, {"seed", a.seed}};
}

ClusterAssignment assignment_from_json(const json& j) {
  try {
    ClusterAssignment a;
    a.k = j.at("k").get<int>();
    a.labels = j.at("labels").get<std::vector<int>>();
    a.inertia = j.value("inertia", 0.0);
    a.seed = j.value("seed", std::uint64_t{0});
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("assignment: ") + e.what());
  }
}

std::string render_report(const ClusterReport& r, const std::string& format) {
  if (format == "text") return r.render_text();
  return r.to_json().dump(2) + "\n";
}

}  // namespace

BackendSet open_backends(const std::string& generator_spec, const std::string& embedder_spec) {
  BackendSet set;
  std::size_t synthetic_dim = 32;
  if (generator_spec == "synthetic" || generator_spec.starts_with("synthetic:")) {
    const auto path = after_colon(generator_spec);
    auto cfg = path.empty() ? SyntheticConfig{} : SyntheticConfig::load(path);
    synthetic_dim = cfg.dim;
    set.generator = std::make_shared<SyntheticBackend>(std::move(cfg));
    if (embedder_spec.empty()) set.embedder = std::make_shared<SyntheticEmbedder>(synthetic_dim);
  } else if (generator_spec.starts_with("replay:")) {
    auto replay = load_replay(after_colon(generator_spec));
    set.generator = replay;
    if (embedder_spec.empty()) set.embedder = replay;
  } else if (is_url(generator_spec)) {
    set.generator = std::make_shared<HttpGenerationBackend>(generator_spec);
    if (embedder_spec.empty()) set.embedder = std::make_shared<HttpEmbeddingBackend>(generator_spec);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown backend spec: " + generator_spec);
  }
  if (embedder_spec.empty()) return set;
  if (embedder_spec == "synthetic" || embedder_spec.starts_with("synthetic:")) {
    const auto dim = after_colon(embedder_spec);
    set.embedder = std::make_shared<SyntheticEmbedder>(dim.empty() ? synthetic_dim : std::stoul(dim));
  } else if (embedder_spec.starts_with("replay:")) {
    set.embedder = load_replay(after_colon(embedder_spec));
  } else if (is_url(embedder_spec)) {
    set.embedder = std::make_shared<HttpEmbeddingBackend>(embedder_spec);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown embedder spec: " + embedder_spec);
  }
  return set;
}

std::optional<std::string> resolve_setting(const std::string& flag, const char* env_name,
                                           const json& config, const char* key) {
  if (!flag.empty()) return flag;
  if (env_name) {
    if (const char* v = std::getenv(env_name); v && *v) return std::string(v);
  }
  if (config.is_object() && config.contains(key) && config[key].is_string()) {
    return config[key].get<std::string>();
  }
  return std::nullopt;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instruction-conditioned text embeddings: embed, evaluate, cluster, explain."};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "show help for every subcommand");
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file (backend, embedder)");

  // embed
  auto* embed = app.add_subcommand("embed", "embed a corpus under an instruction");
  BackendFlags embed_backend;
  EncodingFlags embed_enc;
  std::string embed_input, embed_instruction, embed_output, embed_generations;
  embed->add_option("--input", embed_input, "corpus JSON-lines {text, id?}")->required();
  embed->add_option("--instruction", embed_instruction)->required();
  embed->add_option("--output", embed_output, "embedding file")->required();
  embed->add_option("--generations", embed_generations, "also write answers as JSON-lines");
  embed_backend.add_to(embed);
  embed_enc.add_to(embed);

  // eval
  auto* eval = app.add_subcommand("eval", "run a benchmark and print JSON scores");
  eval->require_subcommand(1);
  BackendFlags eval_backend;
  EncodingFlags eval_enc;
  std::string eval_output;
  std::uint64_t eval_seed = 0;
  auto add_eval_common = [&](CLI::App* sub) {
    eval_backend.add_to(sub);
    eval_enc.add_to(sub);
    sub->add_option("--output", eval_output, "write scores here instead of stdout");
    sub->add_option("--seed", eval_seed, "k-means seed")->capture_default_str();
  };
  std::string triplet_data;
  bool triplet_check = false;
  auto* eval_triplet = eval->add_subcommand("triplet", "triplet success rates per criterion");
  eval_triplet->add_option("--data", triplet_data, "triplet JSON-lines")->required();
  eval_triplet->add_flag("--check-counts", triplet_check, "require the official 12,320 / 6,160 sizes");
  add_eval_common(eval_triplet);
  std::string sts_data;
  bool sts_check = false;
  auto* eval_sts = eval->add_subcommand("sts", "Spearman correlation on rated pairs");
  eval_sts->add_option("--data", sts_data, "pair JSON-lines")->required();
  eval_sts->add_flag("--check-counts", sts_check, "require the official 2,758 pairs");
  add_eval_common(eval_sts);
  std::string cluster_corpus, cluster_manifest;
  auto* eval_cluster = eval->add_subcommand("cluster", "multi-view clustering V-measure");
  eval_cluster->add_option("--corpus", cluster_corpus)->required();
  eval_cluster->add_option("--manifest", cluster_manifest)->required();
  add_eval_common(eval_cluster);
  std::string robust_manifest;
  auto* eval_robust = eval->add_subcommand("robustness", "correct / implicit / incorrect instruction sets");
  eval_robust->add_option("--manifest", robust_manifest)->required();
  add_eval_common(eval_robust);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "cluster a corpus under an instruction and explain it");
  BackendFlags cluster_backend;
  EncodingFlags cluster_enc;
  std::string cl_input, cl_instruction, cl_output, cl_assignment, cl_generations, cl_gold_view;
  std::string cl_format = "json";
  int cl_k = 0;
  std::size_t cl_top_k = 8;
  std::uint64_t cl_seed = 0;
  cluster->add_option("--input", cl_input, "corpus JSON-lines {text, id?, labels?}")->required();
  cluster->add_option("--instruction", cl_instruction)->required();
  cluster->add_option("--k", cl_k)->required();
  cluster->add_option("--top-k", cl_top_k)->capture_default_str();
  cluster->add_option("--seed", cl_seed)->capture_default_str();
  cluster->add_option("--gold-view", cl_gold_view, "order clusters by entropy of this label view");
  cluster->add_option("--format", cl_format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  cluster->add_option("--output", cl_output);
  cluster->add_option("--assignment", cl_assignment, "also write the assignment JSON");
  cluster->add_option("--generations", cl_generations, "also write answers as JSON-lines");
  cluster_backend.add_to(cluster);
  cluster_enc.add_to(cluster);

  // explain
  auto* explain = app.add_subcommand("explain", "TF-IDF keywords for an existing assignment");
  std::string ex_generations, ex_assignment, ex_corpus, ex_gold_view, ex_output;
  std::string ex_format = "json";
  std::size_t ex_top_k = 8;
  explain->add_option("--generations", ex_generations, "JSON-lines {generation}")->required();
  explain->add_option("--assignment", ex_assignment, "assignment JSON {k, labels}")->required();
  explain->add_option("--top-k", ex_top_k)->capture_default_str();
  explain->add_option("--corpus", ex_corpus, "corpus with gold labels");
  explain->add_option("--gold-view", ex_gold_view, "label view for entropy ordering (needs --corpus)");
  explain->add_option("--format", ex_format)->check(CLI::IsMember({"json", "text"}))->capture_default_str();
  explain->add_option("--output", ex_output);

  // prep
  auto* prep = app.add_subcommand("prep", "turn QA triplets into training examples");
  std::string prep_input, prep_output, prep_template, prep_stopwords;
  std::string prep_mask = "<mask>";
  bool prep_mlm = false;
  prep->add_option("--input", prep_input, "JSON-lines {paragraph, question, answer}")->required();
  prep->add_option("--output", prep_output)->required();
  prep->add_option("--template", prep_template);
  prep->add_option("--stopwords", prep_stopwords, "one stopword per line");
  prep->add_flag("--mlm", prep_mlm, "masked-LM format");
  prep->add_option("--mask-token", prep_mask)->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "run the clustering HTTP service");
  BackendFlags serve_backend;
  std::string serve_host = "127.0.0.1", serve_snapshot, serve_origin = "*";
  int serve_port = 8080, serve_jobs = 2;
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--max-jobs", serve_jobs, "jobs running at once")->capture_default_str();
  serve->add_option("--snapshot", serve_snapshot, "persist corpora and finished jobs here");
  serve->add_option("--cors-origin", serve_origin)->capture_default_str();
  serve_backend.add_to(serve);

  // serve-backend
  auto* serve_be = app.add_subcommand("serve-backend", "expose a backend over the wire protocol");
  BackendFlags sb_backend;
  std::string sb_host = "127.0.0.1";
  int sb_port = 8000;
  sb_backend.add_to(serve_be);
  serve_be->add_option("--host", sb_host)->capture_default_str();
  serve_be->add_option("--port", sb_port)->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate benchmark items with a chat model for review");
  std::string sy_recipe, sy_seeds, sy_endpoint, sy_model, sy_review;
  std::string sy_key_env(kChatApiKeyEnv);
  synth->add_option("--recipe", sy_recipe)
      ->required()
      ->check(CLI::IsMember({"intent-emotion", "instruct-stsb", "robustness-instructions"}));
  synth->add_option("--seeds", sy_seeds, "seed JSON-lines")->required();
  synth->add_option("--endpoint", sy_endpoint, "chat completion URL")->required();
  synth->add_option("--model", sy_model)->required();
  synth->add_option("--api-key-env", sy_key_env)->capture_default_str();
  synth->add_option("--review", sy_review, "review file to write")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    const json config = config_path.empty() ? json::object() : read_json_file(config_path);

    if (*embed) {
      auto p = make_pipeline(embed_backend, embed_enc, config);
      const auto corpus = parse_corpus_jsonl(read_file(embed_input));
      const auto results = p.embedder->embed_corpus(corpus.documents, embed_instruction);
      std::vector<Embedding> vectors;
      std::ostringstream gens;
      for (std::size_t i = 0; i < results.size(); ++i) {
        vectors.push_back(results[i].embedding);
        jsonl::write_line(gens, {{"id", corpus.doc_ids[i]}, {"generation", results[i].generation}});
      }
      save_embeddings(embed_output, vectors);
      if (!embed_generations.empty()) write_text_file(embed_generations, gens.str());
      out << json{{"count", vectors.size()}, {"dim", vectors.front().dim()}, {"output", embed_output}}.dump() << '\n';
      return 0;
    }

    if (*eval) {
      auto p = make_pipeline(eval_backend, eval_enc, config);
      const auto pipeline = pipeline_for(*p.embedder);
      json result;
      if (*eval_triplet) {
        const auto examples = load_triplets(triplet_data);
        if (triplet_check) check_intent_emotion_counts(examples);
        const auto r = run_triplet_benchmark(examples, pipeline);
        for (const auto& [c, rate] : r.rates) result[c] = rate;
        result["harmonic_mean"] = r.overall;
        result["counts"] = r.counts;
      } else if (*eval_sts) {
        const auto pairs = load_pairs(sts_data);
        if (sts_check) check_instruct_stsb_counts(pairs);
        const auto r = run_sts_benchmark(pairs, pipeline);
        result = {{"spearman", r.spearman}, {"pairs", pairs.size()}};
      } else if (*eval_cluster) {
        const auto task = load_clustering_task(cluster_corpus, cluster_manifest);
        const auto r = run_multiview_clustering(task, pipeline, eval_seed);
        for (const auto& [name, v] : r.views) result["views"][name] = v.v_measure;
        result["harmonic_mean"] = r.overall;
      } else if (*eval_robust) {
        const auto suite = load_robustness_suite(robust_manifest);
        const auto r = run_robustness_suite(suite, pipeline, eval_seed);
        result = {{"means", r.means},
                  {"scores", r.scores},
                  {"delta_ci", r.deltas.delta_ci},
                  {"delta_ii", r.deltas.delta_ii}};
      }
      emit(out, eval_output, result.dump(2) + "\n");
      return 0;
    }

    if (*cluster) {
      auto p = make_pipeline(cluster_backend, cluster_enc, config);
      const auto corpus = parse_corpus_jsonl(read_file(cl_input));
      if (cl_k < 1 || static_cast<std::size_t>(cl_k) > corpus.documents.size()) {
        throw Error(ErrorCode::InvalidK, "k must be in [1, " + std::to_string(corpus.documents.size()) + "]");
      }
      const auto results = p.embedder->embed_corpus(corpus.documents, cl_instruction);
      std::vector<Embedding> points;
      std::vector<std::string> generations;
      std::ostringstream gens;
      for (std::size_t i = 0; i < results.size(); ++i) {
        points.push_back(l2_normalized(results[i].embedding));
        generations.push_back(results[i].generation);
        jsonl::write_line(gens, {{"id", corpus.doc_ids[i]}, {"generation", results[i].generation}});
      }
      const auto assignment = kmeans(points, cl_k, cl_seed);
      auto report = explain_clusters(generations, assignment, cl_top_k);
      if (!cl_gold_view.empty()) {
        const auto it = corpus.labels.find(cl_gold_view);
        if (it == corpus.labels.end()) throw Error(ErrorCode::InvalidArgument, "corpus has no label view " + cl_gold_view);
        apply_entropy_ordering(report, order_clusters_by_entropy(assignment, it->second));
      }
      if (!cl_assignment.empty()) write_text_file(cl_assignment, assignment_json(assignment).dump(2) + "\n");
      if (!cl_generations.empty()) write_text_file(cl_generations, gens.str());
      emit(out, cl_output, render_report(report, cl_format));
      return 0;
    }

    if (*explain) {
      std::vector<std::string> generations;
      jsonl::for_each_file(ex_generations, [&](const json& j, std::size_t) {
        generations.push_back(jsonl::required_string(j, "generation"));
      });
      const auto assignment = assignment_from_json(read_json_file(ex_assignment));
      auto report = explain_clusters(generations, assignment, ex_top_k);
      if (!ex_gold_view.empty()) {
        if (ex_corpus.empty()) throw Error(ErrorCode::UsageError, "--gold-view needs --corpus");
        const auto corpus = parse_corpus_jsonl(read_file(ex_corpus));
        const auto it = corpus.labels.find(ex_gold_view);
        if (it == corpus.labels.end()) throw Error(ErrorCode::InvalidArgument, "corpus has no label view " + ex_gold_view);
        apply_entropy_ordering(report, order_clusters_by_entropy(assignment, it->second));
      }
      emit(out, ex_output, render_report(report, ex_format));
      return 0;
    }

    if (*prep) {
      PrepOptions options;
      options.tmpl = prep_template.empty() ? default_template() : load_template(prep_template);
      options.stopwords = prep_stopwords.empty() ? default_stopwords() : load_stopwords(prep_stopwords);
      options.mlm = prep_mlm;
      options.mask_token = prep_mask;
      const auto triplets = load_qa_jsonl(prep_input);
      std::ostringstream buf;
      const auto report = write_training_jsonl(buf, triplets, options);
      write_text_file(prep_output, buf.str());
      out << json{{"examples", report.examples}, {"mean_target_tokens", report.mean_target_tokens}}.dump() << '\n';
      return 0;
    }

    if (*serve) {
      const auto backends = serve_backend.open(config);
      ServiceOptions options;
      options.max_running_jobs = serve_jobs;
      options.snapshot_path = serve_snapshot;
      ClusterService service(*backends.generator, backends.embedder.get(), options);
      ServiceServer server(service, {serve_origin});
      err << "serving on http://" << serve_host << ':' << serve_port << std::endl;
      server.listen(serve_host, serve_port);
      return 0;
    }

    if (*serve_be) {
      const auto backends = sb_backend.open(config);
      BackendServer server(backends.generator.get(), backends.embedder.get());
      err << "backend on http://" << sb_host << ':' << sb_port << std::endl;
      server.listen(sb_host, sb_port);
      return 0;
    }

    if (*synth) {
      std::vector<json> seeds;
      jsonl::for_each_file(sy_seeds, [&](const json& j, std::size_t) { seeds.push_back(j); });
      HttpChatClient client(sy_endpoint, sy_model, sy_key_env);
      const auto items = synthesize_benchmark_items(seeds, client, parse_recipe(sy_recipe));
      std::ostringstream buf;
      write_review_file(buf, items);
      write_text_file(sy_review, buf.str());
      const auto flagged = std::count_if(items.begin(), items.end(), [](const auto& i) { return i.flagged(); });
      out << json{{"items", items.size()}, {"flagged", flagged}, {"review", sy_review}}.dump() << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::UsageError ? 1 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace inbedder
