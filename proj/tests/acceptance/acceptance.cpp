// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "inbedder/benchmarks.hpp"
#include "inbedder/clustering.hpp"
#include "inbedder/core_math.hpp"
#include "inbedder/encoding.hpp"
#include "inbedder/error.hpp"
#include "inbedder/interpretation.hpp"
#include "inbedder/metrics.hpp"
#include "inbedder/replay.hpp"
#include "inbedder/wire.hpp"

using namespace inbedder;
using namespace inbedder::testing;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kOracleTol = 1e-9;
constexpr double kDecompositionTol = 1e-6;
constexpr double kMetricTol = 1e-9;
constexpr double kPaperTol = 1e-6;
constexpr double kCosineTol = 1e-6;
constexpr double kDistinctGap = 1e-3;
constexpr double kBlindCeiling = 0.55;
constexpr double kExact = 1e-12;
constexpr double kAggregationSeconds = 10.0;
constexpr double kEndToEndSeconds = 5.0;
constexpr double kSuiteSeconds = 120.0;
constexpr int kRecords = 1000;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(6);
  ss << v;
  return ss.str();
}

void check(Outcome& o, bool ok, const std::string& what) {
  if (!ok) {
    o.pass = false;
    o.detail += (o.detail.empty() ? "" : "; ") + what;
  }
}

template <typename Fn>
bool throws_code(Fn&& fn, ErrorCode code) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code() == code;
  }
  return false;
}

std::vector<GenerationRecord> random_records() {
  std::mt19937_64 rng(20240101);
  std::vector<GenerationRecord> out;
  for (int i = 0; i < kRecords; ++i) out.push_back(random_record(rng));
  return out;
}

const std::vector<GenerationRecord>& records() {
  static const auto r = random_records();
  return r;
}

constexpr Method kDirect[] = {Method::AvgGen, Method::AvgPpt, Method::FirstGen, Method::LastGen, Method::AvgAll};

Outcome aggregation_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  double worst = 0;
  for (const auto& r : records()) {
    for (auto m : kDirect) {
      const auto got = direct_aggregate(r, m, -1);
      const auto want = oracle_aggregate(r, std::string(to_string(m)));
      for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
    }
  }
  const double secs = seconds_since(t0);
  check(o, worst <= kOracleTol, "max error " + fmt(worst));
  check(o, secs < kAggregationSeconds, "took " + fmt(secs) + " s");
  if (o.pass) o.detail = "max error " + fmt(worst) + ", " + fmt(secs) + " s";
  return o;
}

Outcome decomposition_identity() {
  Outcome o;
  double worst = 0;
  for (const auto& r : records()) {
    const auto all = direct_aggregate(r, Method::AvgAll, -1);
    const auto ppt = direct_aggregate(r, Method::AvgPpt, -1);
    const auto gen = direct_aggregate(r, Method::AvgGen, -1);
    const double n = static_cast<double>(r.prompt_len);
    const double ng = static_cast<double>(r.samples[0].tokens.size());
    for (std::size_t i = 0; i < all.dim(); ++i) {
      const double rhs = ((n - 1) * ppt[i] + (ng + 1) * gen[i]) / (n + ng);
      worst = std::max(worst, std::abs(all[i] - rhs));
    }
  }
  check(o, worst <= kDecompositionTol, "max error " + fmt(worst));
  if (o.pass) o.detail = "max error " + fmt(worst);
  return o;
}

Outcome metric_oracles() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> len(2, 40), val(0, 5);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = len(rng);
    std::vector<double> x(n), y(n);
    do {
      for (int i = 0; i < n; ++i) x[i] = val(rng), y[i] = val(rng);
    } while (std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end() ||
             std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end());
    worst = std::max(worst, std::abs(spearman(x, y) - oracle_spearman(x, y)));
  }
  check(o, worst <= kMetricTol, "spearman error " + fmt(worst));
  const double v = v_measure(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, 1, 2});
  check(o, std::abs(v - 0.8) <= kMetricTol, "v_measure " + fmt(v));
  const double ap = average_precision({{0.9, 0.8, 0.7}, {false, true, true}});
  check(o, std::abs(ap - 0.583333) <= kPaperTol, "MAP " + fmt(ap));
  const double h = harmonic_mean(0.5, 1.0);
  check(o, std::abs(h - 0.666667) <= kPaperTol, "harmonic " + fmt(h));
  if (o.pass) o.detail = "spearman error " + fmt(worst) + ", v=" + fmt(v) + ", MAP=" + fmt(ap) + ", H=" + fmt(h);
  return o;
}

Outcome cats_and_dogs() {
  Outcome o;
  const auto t0 = Clock::now();
  SyntheticConfig c;
  c.dim = 16;
  c.set_answer("I love cats", "Do they love animals?", "Yes");
  c.set_answer("I love dogs", "Do they love animals?", "Yes");
  c.set_answer("I love cats", "What animals do they love?", "cats");
  c.set_answer("I love dogs", "What animals do they love?", "dogs");
  SyntheticBackend gen(c);
  SyntheticEmbedder emb(16);
  for (auto method : {Method::FirstGen, Method::ReEnc}) {
    EncodingSpec spec;
    spec.method = method;
    auto cosine_under = [&](const char* instruction) {
      const auto a = embed_instructed("I love cats", instruction, spec, default_template(), gen, &emb);
      const auto b = embed_instructed("I love dogs", instruction, spec, default_template(), gen, &emb);
      return cosine_similarity(a.embedding, b.embedding);
    };
    const double same = cosine_under("Do they love animals?");
    const double diff = cosine_under("What animals do they love?");
    const std::string m(to_string(method));
    check(o, std::abs(same - 1.0) <= kCosineTol, m + " shared cosine " + fmt(same));
    check(o, diff < 1.0 - kDistinctGap, m + " distinct cosine " + fmt(diff));
    o.detail += (o.pass ? (o.detail.empty() ? "" : ", ") + m + " " + fmt(same) + "/" + fmt(diff) : "");
  }
  const double secs = seconds_since(t0);
  check(o, secs < kEndToEndSeconds, "took " + fmt(secs) + " s");
  return o;
}

Outcome instruction_awareness() {
  Outcome o;
  const auto f = two_view_fixture();
  SyntheticBackend gen(f.config);
  InstructedEmbedder emb(EncodingSpec{}, default_template(), gen, nullptr);
  const std::vector<std::string> criteria{"topic", "city"};
  const auto tri = run_triplet_benchmark(f.triplets(500, 11), pipeline_for(emb), criteria);
  check(o, std::abs(tri.overall - 1.0) <= kExact, "triplet H " + fmt(tri.overall));
  const auto mv = run_multiview_clustering(f.task(), pipeline_for(emb), 5);
  check(o, std::abs(mv.overall - 1.0) <= kExact, "clustering H " + fmt(mv.overall));

  auto blind_gen = instruction_blind_backend(32);
  InstructedEmbedder blind(EncodingSpec{}, default_template(), blind_gen, nullptr);
  const auto triplets = f.triplets(500, 12);
  const auto b = run_triplet_benchmark(triplets, pipeline_for(blind), criteria);
  check(o, triplets.size() == 1000, "blind triplet count " + std::to_string(triplets.size()));
  check(o, b.overall <= kBlindCeiling, "blind triplet H " + fmt(b.overall));
  if (o.pass) o.detail = "triplet H 1, clustering H 1, blind H " + fmt(b.overall) + " over 1000";
  return o;
}

Outcome robustness() {
  Outcome o;
  const auto d = robustness_deltas(0.8, 0.6, 0.3);
  check(o, std::abs(d.delta_ci - 0.5) <= kExact && std::abs(d.delta_ii - 0.3) <= kExact,
        "injected deltas " + fmt(d.delta_ci) + "/" + fmt(d.delta_ii));
  const auto base = two_view_fixture();
  const auto rf = robustness_fixture(base);
  SyntheticBackend gen(base.config, rf.answer_fn);
  InstructedEmbedder emb(EncodingSpec{}, default_template(), gen, nullptr);
  const auto r = run_robustness_suite(rf.suite, pipeline_for(emb), 1);
  check(o, r.deltas.delta_ci > 0.5, "fixture delta_ci " + fmt(r.deltas.delta_ci));
  if (o.pass) o.detail = "injected 0.5/0.3, fixture delta_ci " + fmt(r.deltas.delta_ci);
  return o;
}

Outcome dataset_counts() {
  Outcome o;
  TempDir dir;
  std::vector<TripletExample> triplets;
  for (std::size_t i = 0; i < kIntentEmotionTriplets / 4; ++i) {
    const auto s = std::to_string(i);
    auto g = group_triplets("glad, order pizza " + s, "sigh, order pizza " + s, "glad, reset password " + s,
                            "sigh, reset password " + s, kDefaultEmotionInstruction, kDefaultIntentInstruction);
    triplets.insert(triplets.end(), g.begin(), g.end());
  }
  std::vector<PairExample> pairs;
  for (std::size_t i = 0; i < kInstructStsbPairs; ++i) {
    pairs.push_back({"left " + std::to_string(i), "right " + std::to_string(i), "Who acts?", static_cast<int>(i % 2)});
  }
  {
    std::ostringstream t, p;
    write_triplets(t, triplets);
    write_pairs(p, pairs);
    write_bytes(dir.file("ie.jsonl"), t.str());
    write_bytes(dir.file("sts.jsonl"), p.str());
  }
  const auto lt = load_triplets(dir.file("ie.jsonl"));
  const auto lp = load_pairs(dir.file("sts.jsonl"));
  check(o, lt.size() == 12320 && lp.size() == 2758, "loaded " + std::to_string(lt.size()) + "/" +
                                                        std::to_string(lp.size()));
  try {
    check_intent_emotion_counts(lt);
    check_instruct_stsb_counts(lp);
  } catch (const Error& e) {
    check(o, false, e.what());
  }
  std::vector<TripletExample> fewer(lt.begin(), lt.end() - 1);
  check(o, throws_code([&] { check_intent_emotion_counts(fewer); }, ErrorCode::CountMismatch),
        "short triplet file accepted");
  auto lopsided = lt;
  lopsided.back().criterion = "emotion";
  check(o, throws_code([&] { check_intent_emotion_counts(lopsided); }, ErrorCode::CountMismatch),
        "unbalanced criteria accepted");
  std::vector<PairExample> more = lp;
  more.push_back(lp.front());
  check(o, throws_code([&] { check_instruct_stsb_counts(more); }, ErrorCode::CountMismatch),
        "long pair file accepted");
  write_bytes(dir.file("bad.jsonl"), "{\"anchor\":\"a\"}\n");
  check(o, throws_code([&] { load_triplets(dir.file("bad.jsonl")); }, ErrorCode::ParseError),
        "malformed line accepted");
  if (o.pass) o.detail = "12320 triplets, 2758 pairs, violations rejected";
  return o;
}

Outcome interpretation() {
  Outcome o;
  std::mt19937_64 rng(777);
  int misses = 0;
  for (int t = 0; t < 100; ++t) {
    const auto corpus = planted_corpus(rng);
    const auto r = explain_clusters(corpus.generations, corpus.assignment, 5);
    for (const auto& c : r.clusters) {
      if (c.top_words.empty() || c.top_words[0].first != corpus.keywords[static_cast<std::size_t>(c.id)]) ++misses;
    }
  }
  check(o, misses == 0, std::to_string(misses) + " clusters missed their keyword");
  ClusterAssignment a;
  a.k = 3;
  a.labels = {0, 0, 1, 1, 2, 2};
  const std::vector<std::string> gold{"x", "y", "y", "x", "x", "x"};
  const auto ord = order_clusters_by_entropy(a, gold);
  check(o, ord.order.front() == 2, "pure cluster not first");
  check(o, ord.entropies[2] == 0.0, "pure cluster entropy " + fmt(ord.entropies[2]));
  if (o.pass) o.detail = "keyword #1 in 100 corpora, pure cluster first with entropy 0";
  return o;
}

Outcome replay_regression() {
  Outcome o;
  const std::string dir = INBEDDER_FIXTURE_DIR;
  const auto corpus = replay_corpus();
  std::vector<ReplayOutputs> runs;
  for (int i = 0; i < 2; ++i) {
    auto backend = load_replay(dir + "/" + kReplayRecordFile);
    runs.push_back(replay_outputs(corpus, *backend));
  }
  const auto emb = read_bytes(dir + "/" + kReplayEmbeddingFile);
  const auto scores = read_bytes(dir + "/" + kReplayScoresFile);
  check(o, runs[0].embeddings == runs[1].embeddings && runs[0].scores == runs[1].scores, "runs differ");
  check(o, runs[0].embeddings == emb, "embedding file differs from committed bytes");
  check(o, runs[0].scores == scores, "score JSON differs from committed bytes");
  if (o.pass) o.detail = std::to_string(emb.size()) + " embedding bytes and score JSON identical";
  return o;
}

Outcome wire_round_trip() {
  Outcome o;
  std::mt19937_64 rng(4242);
  int mismatches = 0;
  for (int i = 0; i < 100; ++i) {
    const auto rec = random_record(rng);
    const auto back = wire::record_from_json(nlohmann::json::parse(wire::to_json(rec).dump()));
    const auto& a = rec.hidden[0].begin()->second.data;
    const auto& b = back.hidden[0].begin()->second.data;
    if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) != 0 ||
        back.prompt_len != rec.prompt_len || back.samples[0].tokens != rec.samples[0].tokens) {
      ++mismatches;
    }
  }
  check(o, mismatches == 0, std::to_string(mismatches) + " records not bit-exact");
  if (o.pass) o.detail = "100 records bit-exact";
  return o;
}

std::vector<std::string> unit_binaries() {
  std::vector<std::string> out;
  std::string all = INBEDDER_UNIT_TESTS;
  std::size_t start = 0;
  while (start <= all.size()) {
    const auto end = all.find('|', start);
    const auto item = all.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!item.empty()) out.push_back(item);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

Outcome suite_runtime(Clock::time_point acceptance_start) {
  Outcome o;
  const auto t0 = Clock::now();
  for (const auto& bin : unit_binaries()) {
    const auto cmd = "\"" + bin + "\" --gtest_brief=1 > /dev/null 2>&1";
    check(o, std::system(cmd.c_str()) == 0, bin + " failed");
  }
  const double units = seconds_since(t0);
  const double total = seconds_since(acceptance_start);
  check(o, total < kSuiteSeconds, "took " + fmt(total) + " s");
  if (o.pass) o.detail = fmt(total) + " s (" + fmt(units) + " s unit binaries)";
  return o;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"aggregation-oracle", aggregation_oracle},
      {"decomposition-identity", decomposition_identity},
      {"metric-oracles", metric_oracles},
      {"embed-via-answering", cats_and_dogs},
      {"instruction-awareness", instruction_awareness},
      {"robustness-arithmetic", robustness},
      {"dataset-counts", dataset_counts},
      {"interpretation", interpretation},
      {"replay-regression", replay_regression},
      {"wire-round-trip", wire_round_trip},
      {"suite-runtime", [start] { return suite_runtime(start); }},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
