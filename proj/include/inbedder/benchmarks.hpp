#pragma once

// Instruction-awareness and robustness benchmarks, run against any
// (text, instruction) -> Embedding pipeline.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "inbedder/clustering.hpp"
#include "inbedder/core_math.hpp"

namespace inbedder {

class InstructedEmbedder;

inline constexpr std::size_t kIntentEmotionTriplets = 12320;
inline constexpr std::size_t kInstructStsbPairs = 2758;

struct TripletExample {
  std::string anchor;
  std::string positive;
  std::string negative;
  std::string criterion;
  std::string instruction;

  void validate() const;  // throws InvalidArgument / EmptyField
};

struct PairExample {
  std::string sentence1;
  std::string sentence2;
  std::string instruction;
  int rating = 0;  // 0 or 1

  void validate() const;
};

struct ClusteringView {
  std::vector<std::string> labels;  // one per document
  std::string instruction;
  int k = 0;
};

struct ClusteringTask {
  std::vector<std::string> ids;
  std::vector<std::string> documents;
  std::map<std::string, ClusteringView> views;

  void validate() const;
};

struct RobustnessSuite {
  ClusteringTask task;  // single view
  std::string view;
  // "correct", "implicit", "incorrect" -> 10 instructions each
  std::map<std::string, std::vector<std::string>> instruction_sets;

  void validate() const;
};

using EmbedFn = std::function<Embedding(std::string_view text, std::string_view instruction)>;

/// How a benchmark reaches the embedding pipeline. `embed` must be safe to call
/// from `workers` threads at once.
struct EmbedPipeline {
  EmbedFn embed;
  int workers = 1;
};

EmbedPipeline pipeline_for(const InstructedEmbedder& embedder);

/// Embeds every distinct (text, instruction) pair once, in parallel, and
/// returns vectors in the order of `jobs`.
std::vector<Embedding> embed_all(const EmbedPipeline& pipeline,
                                 std::span<const std::pair<std::string, std::string>> jobs);

// ---- loaders -------------------------------------------------------------

/// JSON-lines {"anchor","positive","negative","criterion","instruction"}.
std::vector<TripletExample> load_triplets(const std::string& path);
std::vector<TripletExample> read_triplets(std::istream& in, const std::string& source);

/// JSON-lines {"sentence1","sentence2","instruction","rating"}.
std::vector<PairExample> load_pairs(const std::string& path);
std::vector<PairExample> read_pairs(std::istream& in, const std::string& source);

/// Corpus JSON-lines {"id","text","labels":{view: label}} plus a manifest
/// {"views": {name: {"instruction", "k"}}}.
ClusteringTask load_clustering_task(const std::string& corpus_path, const std::string& manifest_path);
ClusteringTask read_clustering_task(std::istream& corpus, const std::string& source,
                                    const nlohmann::json& manifest);

/// Manifest {"corpus", "view", "k"?, "instructions": {correct, implicit, incorrect}}.
/// A relative corpus path resolves against the manifest's directory; k
/// defaults to the number of distinct gold labels.
RobustnessSuite load_robustness_suite(const std::string& manifest_path);

/// Official-file size checks. Throw CountMismatch.
void check_intent_emotion_counts(std::span<const TripletExample> examples);
void check_instruct_stsb_counts(std::span<const PairExample> pairs);

void write_triplets(std::ostream& out, std::span<const TripletExample> examples);
void write_pairs(std::ostream& out, std::span<const PairExample> pairs);

// ---- runners -------------------------------------------------------------

struct TripletResult {
  std::map<std::string, double> rates;
  std::map<std::string, std::size_t> counts;
  double overall = 0.0;  // harmonic mean of the per-criterion rates
};

/// `criteria` lists the criteria that must be present (MissingCriterion
/// otherwise); empty means whatever the examples carry.
TripletResult run_triplet_benchmark(std::span<const TripletExample> examples,
                                    const EmbedPipeline& pipeline,
                                    std::span<const std::string> criteria = {});

/// Harmonic mean over any number of non-negative values (0 if any is 0).
double harmonic_mean_all(std::span<const double> values);

struct StsResult {
  std::vector<double> similarities;
  double spearman = 0.0;
};
StsResult run_sts_benchmark(std::span<const PairExample> pairs, const EmbedPipeline& pipeline);

/// Embeds, L2-normalizes, runs k-means and scores one instruction against
/// gold labels.
struct ViewScore {
  ClusterAssignment assignment;
  double v_measure = 0.0;
};
ViewScore evaluate_view(std::span<const std::string> documents, std::span<const std::string> gold,
                        std::string_view instruction, int k, const EmbedPipeline& pipeline,
                        std::uint64_t seed);

struct MultiviewResult {
  std::map<std::string, ViewScore> views;
  double overall = 0.0;
};
MultiviewResult run_multiview_clustering(const ClusteringTask& task, const EmbedPipeline& pipeline,
                                         std::uint64_t seed = 0);

struct RobustnessDeltas {
  double delta_ci = 0.0;
  double delta_ii = 0.0;
};
RobustnessDeltas robustness_deltas(double correct_mean, double implicit_mean, double incorrect_mean);

struct RobustnessResult {
  std::map<std::string, std::vector<double>> scores;
  std::map<std::string, double> means;
  RobustnessDeltas deltas;
};
RobustnessResult run_robustness_suite(const RobustnessSuite& suite, const EmbedPipeline& pipeline,
                                      std::uint64_t seed = 0);

// ---- construction --------------------------------------------------------

/// Four triplets from two intents x two emotions (subscript 1 = original
/// intent). Emotion triplets first, then intent. Throws DuplicateUtterance.
std::vector<TripletExample> group_triplets(const std::string& u_opt1, const std::string& u_fru1,
                                           const std::string& u_opt2, const std::string& u_fru2,
                                           std::string_view emotion_instruction,
                                           std::string_view intent_instruction);

// Shipped default criterion instructions. Not the canonical wording.
inline constexpr std::string_view kDefaultEmotionInstruction = "What is the emotion of the text?";
inline constexpr std::string_view kDefaultIntentInstruction = "What is the intent of the text?";

}  // namespace inbedder
