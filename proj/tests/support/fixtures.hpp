#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "inbedder/backend.hpp"
#include "inbedder/benchmarks.hpp"
#include "inbedder/clustering.hpp"
#include "inbedder/encoding.hpp"
#include "inbedder/synthetic_backend.hpp"

namespace inbedder::testing {

/// Record with one sample, N prompt rows and Ng generation rows of
/// uniform(-1, 1) floats at layer `num_layers`; no special tokens.
GenerationRecord random_record(std::mt19937_64& rng, std::size_t n, std::size_t ng, std::size_t dim,
                               int num_layers = 4);
/// Sizes drawn from N in [2,64], Ng in [1,16], D in [4,64].
GenerationRecord random_record(std::mt19937_64& rng);

/// Position-loop reference for the direct methods, written against 1-based
/// positions h^1 .. h^{N+Ng}, with long double sums.
std::vector<double> oracle_aggregate(const GenerationRecord& record, const std::string& method);

/// Rank-then-Pearson reference with ties averaged by explicit grouping.
double oracle_spearman(const std::vector<double>& x, const std::vector<double>& y);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// 60 documents over 3 topics x 2 cities (10 per combination). Under the
/// topic instruction the synthetic model answers the topic word, under the
/// city instruction the city word.
struct TwoViewFixture {
  std::vector<std::string> documents;
  std::vector<std::string> topics;
  std::vector<std::string> cities;
  std::string topic_instruction = "What is the topic of the text?";
  std::string city_instruction = "Where does the text take place?";
  SyntheticConfig config;

  ClusteringTask task() const;
  /// `per_criterion` triplets per view: positive shares the view's label
  /// with the anchor, negative shares the other view's label.
  std::vector<TripletExample> triplets(std::size_t per_criterion, std::uint64_t seed) const;
};
TwoViewFixture two_view_fixture();

/// Backend whose answer is a per-document token regardless of instruction.
SyntheticBackend instruction_blind_backend(std::size_t dim = 32);

/// Answers the topic for correct and implicit instructions and a
/// per-document token otherwise.
struct RobustnessFixture {
  RobustnessSuite suite;
  SyntheticBackend::AnswerFn answer_fn;
};
RobustnessFixture robustness_fixture(const TwoViewFixture& base);

/// Random generations over a 200-word vocabulary where every document of
/// cluster c carries the cluster-unique keyword once.
struct PlantedCorpus {
  std::vector<std::string> generations;
  ClusterAssignment assignment;
  std::vector<std::string> keywords;  // by cluster id
};
PlantedCorpus planted_corpus(std::mt19937_64& rng);

/// 50 documents over 5 themes, answered "<detail> <theme>" under one
/// instruction. Source of the committed replay fixture.
struct ReplayCorpus {
  std::vector<std::string> documents;
  std::vector<std::string> themes;
  std::string instruction = "What is the text about?";
  SyntheticConfig config;
  EncodingSpec spec;  // avg-gen, layer -1
  int k = 5;
};
ReplayCorpus replay_corpus();

/// Embedding file bytes and score JSON text for the replay corpus.
struct ReplayOutputs {
  std::string embeddings;
  std::string scores;
};
ReplayOutputs replay_outputs(const ReplayCorpus& corpus, GenerationBackend& generator);

inline constexpr const char* kReplayRecordFile = "replay50.inbdrec";
inline constexpr const char* kReplayEmbeddingFile = "replay50_embeddings.inbdemb";
inline constexpr const char* kReplayScoresFile = "replay50_scores.json";

std::string read_bytes(const std::string& path);
void write_bytes(const std::string& path, const std::string& bytes);

}  // namespace inbedder::testing
