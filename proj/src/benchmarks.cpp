#include "inbedder/benchmarks.hpp"

#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>

#include "inbedder/encoding.hpp"
#include "inbedder/error.hpp"
#include "inbedder/jsonl.hpp"
#include "inbedder/metrics.hpp"
#include "inbedder/parallel.hpp"
#include "inbedder/prompting.hpp"
#include "inbedder/text.hpp"

namespace inbedder {

namespace {

using json = nlohmann::json;

void check_text(const std::string& s, const char* what) {
  if (text::trim(s).empty()) throw Error(ErrorCode::EmptyField, std::string(what) + " is empty");
  if (contains_separator(s)) {
    throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a prompt separator");
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return in;
}

json load_json_file(const std::string& path) {
  auto in = open_or_throw(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

}  // namespace

void TripletExample::validate() const {
  check_text(anchor, "anchor");
  check_text(positive, "positive");
  check_text(negative, "negative");
  check_text(instruction, "instruction");
  if (text::trim(criterion).empty()) throw Error(ErrorCode::EmptyField, "criterion is empty");
  if (anchor == positive || anchor == negative || positive == negative) {
    throw Error(ErrorCode::InvalidArgument, "triplet texts must be pairwise distinct");
  }
}

void PairExample::validate() const {
  check_text(sentence1, "sentence1");
  check_text(sentence2, "sentence2");
  check_text(instruction, "instruction");
  if (rating != 0 && rating != 1) throw Error(ErrorCode::InvalidArgument, "rating must be 0 or 1");
}

void ClusteringTask::validate() const {
  if (documents.empty()) throw Error(ErrorCode::EmptyList, "clustering task has no documents");
  if (!ids.empty() && ids.size() != documents.size()) {
    throw Error(ErrorCode::LengthMismatch, "ids and documents differ in length");
  }
  if (views.empty()) throw Error(ErrorCode::InvalidArgument, "clustering task has no views");
  for (const auto& d : documents) check_text(d, "document");
  for (const auto& [name, v] : views) {
    if (v.labels.size() != documents.size()) {
      throw Error(ErrorCode::LengthMismatch, "view " + name + " has " + std::to_string(v.labels.size()) +
                                                 " labels for " + std::to_string(documents.size()) +
                                                 " documents");
    }
    if (v.k < 1) throw Error(ErrorCode::InvalidK, "view " + name + " needs k >= 1");
    if (static_cast<std::size_t>(v.k) > documents.size()) {
      throw Error(ErrorCode::KTooLarge, "view " + name + " has k larger than the corpus");
    }
    check_text(v.instruction, "view instruction");
  }
}

void RobustnessSuite::validate() const {
  task.validate();
  if (task.views.size() != 1 || !task.views.contains(view)) {
    throw Error(ErrorCode::InvalidArgument, "robustness task must have exactly the view " + view);
  }
  for (const char* set : {"correct", "implicit", "incorrect"}) {
    const auto it = instruction_sets.find(set);
    if (it == instruction_sets.end()) {
      throw Error(ErrorCode::MissingCriterion, std::string("missing instruction set ") + set);
    }
    if (it->second.size() != 10) {
      throw Error(ErrorCode::CountMismatch, std::string("instruction set ") + set + " has " +
                                                std::to_string(it->second.size()) + " entries, expected 10");
    }
    for (const auto& i : it->second) check_text(i, "instruction");
  }
}

EmbedPipeline pipeline_for(const InstructedEmbedder& embedder) {
  return {[&embedder](std::string_view t, std::string_view i) { return embedder.embed(t, i).embedding; },
          embedder.concurrency()};
}

std::vector<Embedding> embed_all(const EmbedPipeline& pipeline,
                                 std::span<const std::pair<std::string, std::string>> jobs) {
  std::map<std::pair<std::string, std::string>, std::size_t> slot_of;
  std::vector<const std::pair<std::string, std::string>*> unique;
  std::vector<std::size_t> slot(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto [it, inserted] = slot_of.try_emplace(jobs[i], unique.size());
    if (inserted) unique.push_back(&jobs[i]);
    slot[i] = it->second;
  }
  std::vector<std::optional<Embedding>> vectors(unique.size());
  parallel_for_index(unique.size(), pipeline.workers, [&](std::size_t u) {
    vectors[u] = pipeline.embed(unique[u]->first, unique[u]->second);
  });
  std::vector<Embedding> out;
  out.reserve(jobs.size());
  for (std::size_t s : slot) out.push_back(*vectors[s]);
  return out;
}

std::vector<TripletExample> read_triplets(std::istream& in, const std::string& source) {
  std::vector<TripletExample> out;
  jsonl::for_each(in, source, [&](const json& j, std::size_t) {
    TripletExample t{jsonl::required_string(j, "anchor"), jsonl::required_string(j, "positive"),
                     jsonl::required_string(j, "negative"), jsonl::required_string(j, "criterion"),
                     jsonl::required_string(j, "instruction")};
    t.validate();
    out.push_back(std::move(t));
  });
  return out;
}

std::vector<TripletExample> load_triplets(const std::string& path) {
  auto in = open_or_throw(path);
  return read_triplets(in, path);
}

std::vector<PairExample> read_pairs(std::istream& in, const std::string& source) {
  std::vector<PairExample> out;
  jsonl::for_each(in, source, [&](const json& j, std::size_t) {
    const auto r = j.find("rating");
    if (r == j.end() || !r->is_number_integer()) {
      throw Error(ErrorCode::ParseError, "missing integer field \"rating\"");
    }
    PairExample p{jsonl::required_string(j, "sentence1"), jsonl::required_string(j, "sentence2"),
                  jsonl::required_string(j, "instruction"), r->get<int>()};
    p.validate();
    out.push_back(std::move(p));
  });
  return out;
}

std::vector<PairExample> load_pairs(const std::string& path) {
  auto in = open_or_throw(path);
  return read_pairs(in, path);
}

ClusteringTask read_clustering_task(std::istream& corpus, const std::string& source,
                                    const json& manifest) {
  ClusteringTask task;
  const auto views = manifest.find("views");
  if (views == manifest.end() || !views->is_object() || views->empty()) {
    throw Error(ErrorCode::ParseError, "manifest needs a non-empty \"views\" object");
  }
  for (const auto& [name, v] : views->items()) {
    ClusteringView view;
    if (!v.contains("instruction") || !v["instruction"].is_string()) {
      throw Error(ErrorCode::ParseError, "view " + name + " needs an instruction");
    }
    view.instruction = v["instruction"].get<std::string>();
    view.k = v.value("k", 0);
    task.views.emplace(name, std::move(view));
  }
  jsonl::for_each(corpus, source, [&](const json& j, std::size_t line_no) {
    task.ids.push_back(j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                        : std::to_string(line_no));
    auto doc = jsonl::required_string(j, "text");
    check_text(doc, "text");
    task.documents.push_back(std::move(doc));
    const auto labels = j.find("labels");
    if (labels == j.end() || !labels->is_object()) throw Error(ErrorCode::ParseError, "missing \"labels\" object");
    for (auto& [name, view] : task.views) {
      const auto l = labels->find(name);
      if (l == labels->end()) throw Error(ErrorCode::ParseError, "no label for view " + name);
      view.labels.push_back(l->is_string() ? l->get<std::string>() : l->dump());
    }
  });
  for (auto& [_, view] : task.views) {
    if (view.k == 0) view.k = static_cast<int>(std::set(view.labels.begin(), view.labels.end()).size());
  }
  task.validate();
  return task;
}

ClusteringTask load_clustering_task(const std::string& corpus_path, const std::string& manifest_path) {
  const auto manifest = load_json_file(manifest_path);
  auto in = open_or_throw(corpus_path);
  return read_clustering_task(in, corpus_path, manifest);
}

RobustnessSuite load_robustness_suite(const std::string& manifest_path) {
  const auto m = load_json_file(manifest_path);
  RobustnessSuite suite;
  try {
    std::filesystem::path corpus = m.at("corpus").get<std::string>();
    if (corpus.is_relative()) corpus = std::filesystem::path(manifest_path).parent_path() / corpus;
    suite.view = m.at("view").get<std::string>();
    json view{{"instruction", m.value("instruction", std::string("cluster the texts"))}};
    if (m.contains("k")) view["k"] = m["k"];
    auto in = open_or_throw(corpus.string());
    suite.task = read_clustering_task(in, corpus.string(), json{{"views", {{suite.view, view}}}});
    suite.instruction_sets =
        m.at("instructions").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, manifest_path + ": " + e.what());
  }
  suite.validate();
  return suite;
}

void check_intent_emotion_counts(std::span<const TripletExample> examples) {
  if (examples.size() != kIntentEmotionTriplets) {
    throw Error(ErrorCode::CountMismatch, "expected " + std::to_string(kIntentEmotionTriplets) +
                                              " triplets, found " + std::to_string(examples.size()));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& e : examples) ++counts[e.criterion];
  for (const char* c : {"intent", "emotion"}) {
    if (counts[c] != kIntentEmotionTriplets / 2) {
      throw Error(ErrorCode::CountMismatch, std::string("criterion ") + c + " has " +
                                                std::to_string(counts[c]) + " triplets, expected " +
                                                std::to_string(kIntentEmotionTriplets / 2));
    }
  }
}

void check_instruct_stsb_counts(std::span<const PairExample> pairs) {
  if (pairs.size() != kInstructStsbPairs) {
    throw Error(ErrorCode::CountMismatch, "expected " + std::to_string(kInstructStsbPairs) +
                                              " pairs, found " + std::to_string(pairs.size()));
  }
}

void write_triplets(std::ostream& out, std::span<const TripletExample> examples) {
  for (const auto& e : examples) {
    jsonl::write_line(out, {{"anchor", e.anchor},
                            {"positive", e.positive},
                            {"negative", e.negative},
                            {"criterion", e.criterion},
                            {"instruction", e.instruction}});
  }
}

void write_pairs(std::ostream& out, std::span<const PairExample> pairs) {
  for (const auto& p : pairs) {
    jsonl::write_line(out, {{"sentence1", p.sentence1},
                            {"sentence2", p.sentence2},
                            {"instruction", p.instruction},
                            {"rating", p.rating}});
  }
}

double harmonic_mean_all(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::EmptyList, "harmonic mean of nothing");
  if (values.size() == 1) {
    if (values[0] < 0) throw Error(ErrorCode::NegativeInput, "negative value");
    return values[0];
  }
  if (values.size() == 2) return harmonic_mean(values[0], values[1]);
  double inv = 0.0;
  for (double v : values) {
    if (v < 0) throw Error(ErrorCode::NegativeInput, "negative value");
    if (v == 0) return 0.0;
    inv += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv;
}

TripletResult run_triplet_benchmark(std::span<const TripletExample> examples,
                                    const EmbedPipeline& pipeline,
                                    std::span<const std::string> criteria) {
  if (examples.empty()) throw Error(ErrorCode::MissingCriterion, "no triplets");
  std::vector<std::pair<std::string, std::string>> jobs;
  jobs.reserve(examples.size() * 3);
  for (const auto& e : examples) {
    jobs.emplace_back(e.anchor, e.instruction);
    jobs.emplace_back(e.positive, e.instruction);
    jobs.emplace_back(e.negative, e.instruction);
  }
  const auto vectors = embed_all(pipeline, jobs);

  std::map<std::string, std::vector<TripletJudgment>> judgments;
  for (const auto& c : criteria) judgments[c];
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& a = vectors[3 * i];
    judgments[examples[i].criterion].push_back(
        {cosine_similarity(a, vectors[3 * i + 1]), cosine_similarity(a, vectors[3 * i + 2])});
  }
  TripletResult result;
  std::vector<double> rates;
  for (const auto& [c, js] : judgments) {
    if (js.empty()) throw Error(ErrorCode::MissingCriterion, "no triplets for criterion " + c);
    result.rates[c] = triplet_success_rate(js);
    result.counts[c] = js.size();
    rates.push_back(result.rates[c]);
  }
  result.overall = harmonic_mean_all(rates);
  return result;
}

StsResult run_sts_benchmark(std::span<const PairExample> pairs, const EmbedPipeline& pipeline) {
  std::vector<std::pair<std::string, std::string>> jobs;
  std::vector<double> ratings;
  for (const auto& p : pairs) {
    jobs.emplace_back(p.sentence1, p.instruction);
    jobs.emplace_back(p.sentence2, p.instruction);
    ratings.push_back(p.rating);
  }
  if (std::set(ratings.begin(), ratings.end()).size() < 2) {
    throw Error(ErrorCode::DegenerateInput, "pairs need both ratings 0 and 1");
  }
  const auto vectors = embed_all(pipeline, jobs);
  StsResult r;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    r.similarities.push_back(cosine_similarity(vectors[2 * i], vectors[2 * i + 1]));
  }
  r.spearman = spearman(r.similarities, ratings);
  return r;
}

ViewScore evaluate_view(std::span<const std::string> documents, std::span<const std::string> gold,
                        std::string_view instruction, int k, const EmbedPipeline& pipeline,
                        std::uint64_t seed) {
  if (documents.size() != gold.size()) throw Error(ErrorCode::LengthMismatch, "documents vs gold labels");
  std::vector<std::pair<std::string, std::string>> jobs;
  for (const auto& d : documents) jobs.emplace_back(d, std::string(instruction));
  const auto points = l2_normalized_all(embed_all(pipeline, jobs));
  ViewScore s;
  s.assignment = kmeans(points, k, seed);
  const auto truth = encode_labels(gold);
  s.v_measure = v_measure(truth, s.assignment.labels);
  return s;
}

MultiviewResult run_multiview_clustering(const ClusteringTask& task, const EmbedPipeline& pipeline,
                                         std::uint64_t seed) {
  task.validate();
  MultiviewResult r;
  std::vector<double> scores;
  for (const auto& [name, view] : task.views) {
    auto s = evaluate_view(task.documents, view.labels, view.instruction, view.k, pipeline, seed);
    scores.push_back(s.v_measure);
    r.views.emplace(name, std::move(s));
  }
  r.overall = harmonic_mean_all(scores);
  return r;
}

RobustnessDeltas robustness_deltas(double correct_mean, double implicit_mean, double incorrect_mean) {
  return {correct_mean - incorrect_mean, implicit_mean - incorrect_mean};
}

RobustnessResult run_robustness_suite(const RobustnessSuite& suite, const EmbedPipeline& pipeline,
                                      std::uint64_t seed) {
  suite.validate();
  const auto& view = suite.task.views.at(suite.view);
  RobustnessResult r;
  for (const auto& [set, instructions] : suite.instruction_sets) {
    auto& scores = r.scores[set];
    double sum = 0.0;
    for (const auto& instruction : instructions) {
      scores.push_back(
          evaluate_view(suite.task.documents, view.labels, instruction, view.k, pipeline, seed).v_measure);
      sum += scores.back();
    }
    r.means[set] = sum / static_cast<double>(scores.size());
  }
  r.deltas = robustness_deltas(r.means.at("correct"), r.means.at("implicit"), r.means.at("incorrect"));
  return r;
}

std::vector<TripletExample> group_triplets(const std::string& u_opt1, const std::string& u_fru1,
                                           const std::string& u_opt2, const std::string& u_fru2,
                                           std::string_view emotion_instruction,
                                           std::string_view intent_instruction) {
  if (std::set<std::string>{u_opt1, u_fru1, u_opt2, u_fru2}.size() != 4) {
    throw Error(ErrorCode::DuplicateUtterance, "the four utterances must be distinct");
  }
  const std::string emo(emotion_instruction), intent(intent_instruction);
  std::vector<TripletExample> out{{u_opt1, u_opt2, u_fru1, "emotion", emo},
                                  {u_fru1, u_fru2, u_opt1, "emotion", emo},
                                  {u_opt1, u_fru1, u_opt2, "intent", intent},
                                  {u_fru1, u_opt1, u_fru2, "intent", intent}};
  for (const auto& t : out) t.validate();
  return out;
}

}  // namespace inbedder
