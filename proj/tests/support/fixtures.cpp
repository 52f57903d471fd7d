#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "inbedder/embedding_file.hpp"
#include "inbedder/error.hpp"
#include "inbedder/interpretation.hpp"

namespace inbedder::testing {

GenerationRecord random_record(std::mt19937_64& rng, std::size_t n, std::size_t ng, std::size_t dim,
                               int num_layers) {
  std::uniform_real_distribution<float> value(-1.0f, 1.0f);
  GenerationRecord r;
  r.prompt_len = n;
  r.dim = dim;
  r.num_layers = num_layers;
  GenerationSample s;
  for (std::size_t j = 0; j < ng; ++j) {
    s.tokens.push_back("t" + std::to_string(j));
    s.token_ids.push_back(static_cast<std::int32_t>(j));
  }
  s.text = "answer";
  r.samples.push_back(s);
  HiddenMatrix m{n + ng, dim, {}};
  m.data.resize(m.rows * m.cols);
  for (auto& v : m.data) v = value(rng);
  r.hidden.push_back({{num_layers, std::move(m)}});
  return r;
}

GenerationRecord random_record(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> n(2, 64), ng(1, 16), d(4, 64);
  const auto a = n(rng), b = ng(rng), c = d(rng);
  return random_record(rng, a, b, c);
}

std::vector<double> oracle_aggregate(const GenerationRecord& record, const std::string& method) {
  const auto& m = record.hidden.at(0).begin()->second;
  const std::size_t big_n = record.prompt_len;
  const std::size_t big_ng = record.samples.at(0).tokens.size();
  // h(i) for 1-based position i.
  auto h = [&](std::size_t i, std::size_t d) { return static_cast<long double>(m.data[(i - 1) * m.cols + d]); };
  std::size_t first = 0, last = 0;
  if (method == "avg-gen") {
    first = big_n, last = big_n + big_ng;
  } else if (method == "avg-ppt") {
    first = 1, last = big_n - 1;
  } else if (method == "1st-gen") {
    first = last = big_n;
  } else if (method == "last-gen") {
    first = last = big_n + big_ng;
  } else if (method == "avg-all") {
    first = 1, last = big_n + big_ng;
  }
  std::vector<double> out(m.cols);
  for (std::size_t d = 0; d < m.cols; ++d) {
    long double sum = 0;
    for (std::size_t i = first; i <= last; ++i) sum += h(i, d);
    out[d] = static_cast<double>(sum / static_cast<long double>(last - first + 1));
  }
  return out;
}

namespace {

std::vector<double> tie_ranks(const std::vector<double>& v) {
  std::map<double, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < v.size(); ++i) groups[v[i]].push_back(i);
  std::vector<double> ranks(v.size());
  std::size_t below = 0;
  for (const auto& [_, idx] : groups) {
    // ranks below+1 .. below+size share their mean
    const double mean = static_cast<double>(below) + (static_cast<double>(idx.size()) + 1.0) / 2.0;
    for (auto i : idx) ranks[i] = mean;
    below += idx.size();
  }
  return ranks;
}

}  // namespace

double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = tie_ranks(x), ry = tie_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TempDir::TempDir() {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() / ("inbedder-test-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

TwoViewFixture two_view_fixture() {
  TwoViewFixture f;
  const std::vector<std::string> topics{"sports", "politics", "science"};
  const std::vector<std::string> cities{"paris", "tokyo"};
  f.config.dim = 32;
  f.config.num_layers = 4;
  int n = 0;
  for (const auto& t : topics) {
    for (const auto& c : cities) {
      for (int i = 0; i < 10; ++i) {
        const auto doc = "report " + std::to_string(++n) + " on " + t + " news from " + c;
        f.documents.push_back(doc);
        f.topics.push_back(t);
        f.cities.push_back(c);
        f.config.set_answer(doc, f.topic_instruction, t);
        f.config.set_answer(doc, f.city_instruction, c);
      }
    }
  }
  return f;
}

ClusteringTask TwoViewFixture::task() const {
  ClusteringTask t;
  t.documents = documents;
  t.views["topic"] = {topics, topic_instruction, 3};
  t.views["city"] = {cities, city_instruction, 2};
  return t;
}

std::vector<TripletExample> TwoViewFixture::triplets(std::size_t per_criterion, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, documents.size() - 1);
  std::vector<TripletExample> out;
  auto build = [&](const std::vector<std::string>& same, const std::vector<std::string>& other,
                   const std::string& criterion, const std::string& instruction) {
    std::size_t made = 0;
    while (made < per_criterion) {
      const auto a = pick(rng), p = pick(rng), q = pick(rng);
      if (a == p || a == q || p == q) continue;
      // positive: same label on this view, different on the other;
      // negative: different label on this view, same on the other.
      if (same[a] != same[p] || other[a] == other[p]) continue;
      if (same[a] == same[q] || other[a] != other[q]) continue;
      out.push_back({documents[a], documents[p], documents[q], criterion, instruction});
      ++made;
    }
  };
  build(topics, cities, "topic", topic_instruction);
  build(cities, topics, "city", city_instruction);
  return out;
}

SyntheticBackend instruction_blind_backend(std::size_t dim) {
  SyntheticConfig cfg;
  cfg.dim = dim;
  return SyntheticBackend(cfg, [](std::string_view input, std::string_view) {
    return std::optional<std::vector<std::string>>(
        std::vector<std::string>{"doc" + std::to_string(stable_hash(input) % 1000000007ULL)});
  });
}

RobustnessFixture robustness_fixture(const TwoViewFixture& base) {
  RobustnessFixture f;
  f.suite.view = "topic";
  f.suite.task.documents = base.documents;
  f.suite.task.views["topic"] = {base.topics, base.topic_instruction, 3};
  for (int i = 0; i < 10; ++i) {
    f.suite.instruction_sets["correct"].push_back("Which topic is covered, variant " + std::to_string(i) + "?");
    f.suite.instruction_sets["implicit"].push_back("What would a newspaper section call this, take " +
                                                   std::to_string(i) + "?");
    f.suite.instruction_sets["incorrect"].push_back("Count the letters of the text, attempt " + std::to_string(i) +
                                                    ".");
  }
  std::map<std::string, std::string> topic_of;
  for (std::size_t i = 0; i < base.documents.size(); ++i) topic_of[base.documents[i]] = base.topics[i];
  const std::set<std::string> responsive = [&] {
    std::set<std::string> s;
    for (const auto& set : {"correct", "implicit"}) {
      for (const auto& ins : f.suite.instruction_sets[set]) s.insert(ins);
    }
    return s;
  }();
  f.answer_fn = [topic_of, responsive](std::string_view input, std::string_view instruction) {
    if (responsive.contains(std::string(instruction))) {
      return std::optional<std::vector<std::string>>(std::vector<std::string>{topic_of.at(std::string(input))});
    }
    return std::optional<std::vector<std::string>>(
        std::vector<std::string>{"doc" + std::to_string(stable_hash(input) % 1000000007ULL)});
  };
  return f;
}

PlantedCorpus planted_corpus(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k_dist(2, 6), size_dist(5, 20), len_dist(5, 15), word(0, 199);
  PlantedCorpus out;
  const int k = k_dist(rng);
  out.assignment.k = k;
  for (int c = 0; c < k; ++c) out.keywords.push_back("planted" + std::to_string(c) + "kw");
  for (int c = 0; c < k; ++c) {
    const int docs = size_dist(rng);
    for (int d = 0; d < docs; ++d) {
      std::vector<std::string> words;
      const int len = len_dist(rng);
      for (int w = 0; w < len; ++w) words.push_back("vocab" + std::to_string(word(rng)));
      std::uniform_int_distribution<std::size_t> at(0, words.size());
      words.insert(words.begin() + static_cast<long>(at(rng)), out.keywords[static_cast<std::size_t>(c)]);
      std::string doc;
      for (const auto& w : words) doc += (doc.empty() ? "" : " ") + w;
      out.generations.push_back(std::move(doc));
      out.assignment.labels.push_back(c);
    }
  }
  return out;
}

ReplayCorpus replay_corpus() {
  ReplayCorpus c;
  const std::vector<std::string> themes{"music", "cooking", "travel", "finance", "weather"};
  const std::vector<std::string> details{"prices", "guide", "review", "forecast", "story",
                                         "tips",   "event", "report", "update",   "plan"};
  c.config.dim = 24;
  c.config.num_layers = 3;
  c.spec.method = Method::AvgGen;
  for (std::size_t t = 0; t < themes.size(); ++t) {
    for (std::size_t i = 0; i < details.size(); ++i) {
      const auto doc = "item " + std::to_string(t * details.size() + i) + " a " + details[i] + " about " + themes[t];
      c.documents.push_back(doc);
      c.themes.push_back(themes[t]);
      c.config.set_answer(doc, c.instruction, details[(i * 3 + t) % details.size()] + " " + themes[t]);
    }
  }
  return c;
}

ReplayOutputs replay_outputs(const ReplayCorpus& corpus, GenerationBackend& generator) {
  InstructedEmbedder embedder(corpus.spec, default_template(), generator, nullptr);
  const auto results = embedder.embed_corpus(corpus.documents, corpus.instruction);
  std::vector<Embedding> vectors, points;
  std::vector<std::string> generations;
  for (const auto& r : results) {
    vectors.push_back(r.embedding);
    points.push_back(l2_normalized(r.embedding));
    generations.push_back(r.generation);
  }
  const auto assignment = kmeans(points, corpus.k, 7);
  const auto gold = encode_labels(corpus.themes);
  auto report = explain_clusters(generations, assignment, 3);
  apply_entropy_ordering(report, order_clusters_by_entropy(assignment, corpus.themes));
  nlohmann::json scores{{"v_measure", v_measure(gold, assignment.labels)},
                        {"inertia", assignment.inertia},
                        {"labels", assignment.labels},
                        {"report", report.to_json()}};
  return {serialize_embeddings(vectors), scores.dump(2) + "\n"};
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << bytes;
}

}  // namespace inbedder::testing
