#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>

#include "fixtures.hpp"
#include "inbedder/encoding.hpp"
#include "inbedder/error.hpp"
#include "inbedder/synthetic_backend.hpp"

using namespace inbedder;
using inbedder::testing::oracle_aggregate;
using inbedder::testing::random_record;

namespace {

constexpr Method kDirect[] = {Method::AvgGen, Method::AvgPpt, Method::FirstGen, Method::LastGen, Method::AvgAll};

GenerationRecord record_from_rows(std::size_t n, std::vector<std::string> tokens,
                                  const std::vector<std::vector<float>>& rows) {
  GenerationRecord r;
  r.prompt_len = n;
  r.dim = rows.at(0).size();
  r.num_layers = 1;
  GenerationSample s;
  for (std::size_t i = 0; i < tokens.size(); ++i) s.token_ids.push_back(static_cast<std::int32_t>(i));
  s.tokens = std::move(tokens);
  s.text = "t";
  r.samples.push_back(s);
  HiddenMatrix m{rows.size(), r.dim, {}};
  for (const auto& row : rows) m.data.insert(m.data.end(), row.begin(), row.end());
  r.hidden.push_back({{1, m}});
  r.validate();
  return r;
}

std::vector<double> values(const Embedding& e) { return {e.values().begin(), e.values().end()}; }

class TableEmbedder final : public EmbeddingBackend {
 public:
  explicit TableEmbedder(std::map<std::string, std::vector<double>> table) : table_(std::move(table)) {}
  std::vector<Embedding> embed_texts(const EmbedRequest& request) override {
    std::vector<Embedding> out;
    for (const auto& t : request.texts) out.emplace_back(table_.at(t));
    return out;
  }

 private:
  std::map<std::string, std::vector<double>> table_;
};

GenerationSample sample_with_text(std::string text) {
  GenerationSample s;
  s.tokens = {text};
  s.token_ids = {0};
  s.text = std::move(text);
  return s;
}

SyntheticConfig animal_config() {
  SyntheticConfig c;
  c.dim = 16;
  c.set_answer("I love cats", "Do they love animals?", "Yes");
  c.set_answer("I love dogs", "Do they love animals?", "Yes");
  c.set_answer("I love cats", "What animals do they love?", "cats");
  c.set_answer("I love dogs", "What animals do they love?", "dogs");
  return c;
}

}  // namespace

TEST(Methods, ParseAndAvailability) {
  for (auto m : {Method::AvgGen, Method::AvgPpt, Method::FirstGen, Method::LastGen, Method::AvgAll, Method::ReEnc}) {
    EXPECT_EQ(parse_method(to_string(m)), m);
  }
  EXPECT_THROW(parse_method("median"), Error);
  EXPECT_FALSE(method_available(Method::AvgAll, ArchitectureMode::EncoderDecoder));
  EXPECT_TRUE(method_available(Method::FirstGen, ArchitectureMode::EncoderDecoder));
  EXPECT_FALSE(method_available(Method::FirstGen, ArchitectureMode::EncoderOnly));
  EXPECT_FALSE(method_available(Method::LastGen, ArchitectureMode::EncoderOnly));
  EXPECT_TRUE(method_available(Method::AvgGen, ArchitectureMode::EncoderOnly));
}

TEST(DirectAggregate, HandExample) {
  const auto r = record_from_rows(2, {"a"}, {{1, 1}, {3, 3}, {5, 5}});
  EXPECT_EQ(values(direct_aggregate(r, Method::AvgGen, -1)), (std::vector<double>{4, 4}));
  EXPECT_EQ(values(direct_aggregate(r, Method::AvgPpt, -1)), (std::vector<double>{1, 1}));
  EXPECT_EQ(values(direct_aggregate(r, Method::FirstGen, -1)), (std::vector<double>{3, 3}));
  EXPECT_EQ(values(direct_aggregate(r, Method::LastGen, -1)), (std::vector<double>{5, 5}));
  EXPECT_EQ(values(direct_aggregate(r, Method::AvgAll, -1)), (std::vector<double>{3, 3}));
}

TEST(DirectAggregate, FirstGenIsRowOneExactly) {
  const auto r = record_from_rows(2, {"a"}, {{0.1f, 0.7f}, {0.3f, 0.9f}, {0.5f, 0.2f}});
  EXPECT_EQ(values(direct_aggregate(r, Method::FirstGen, 1)),
            (std::vector<double>{static_cast<double>(0.3f), static_cast<double>(0.9f)}));
}

TEST(DirectAggregate, ConstantRows) {
  const std::vector<float> v{0.25f, -1.5f, 3.0f};
  const auto r = record_from_rows(4, {"a", "b", "c"}, std::vector<std::vector<float>>(7, v));
  for (auto m : kDirect) {
    EXPECT_EQ(values(direct_aggregate(r, m, -1)), (std::vector<double>{0.25, -1.5, 3.0})) << to_string(m);
  }
}

TEST(DirectAggregate, MatchesOracle) {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 300; ++t) {
    const auto rec = random_record(rng);
    for (auto m : kDirect) {
      const auto got = values(direct_aggregate(rec, m, -1));
      const auto want = oracle_aggregate(rec, std::string(to_string(m)));
      ASSERT_EQ(got.size(), want.size());
      for (std::size_t d = 0; d < got.size(); ++d) EXPECT_NEAR(got[d], want[d], 1e-9);
    }
  }
}

TEST(DirectAggregate, DecompositionIdentity) {
  std::mt19937_64 rng(202);
  for (int t = 0; t < 300; ++t) {
    const auto rec = random_record(rng);
    const double n = static_cast<double>(rec.prompt_len);
    const double ng = static_cast<double>(rec.samples[0].tokens.size());
    const auto all = values(direct_aggregate(rec, Method::AvgAll, -1));
    const auto ppt = values(direct_aggregate(rec, Method::AvgPpt, -1));
    const auto gen = values(direct_aggregate(rec, Method::AvgGen, -1));
    for (std::size_t d = 0; d < all.size(); ++d) {
      EXPECT_NEAR(all[d], ((n - 1) * ppt[d] + (ng + 1) * gen[d]) / (n + ng), 1e-6);
    }
  }
}

TEST(DirectAggregate, SpecialRowsExcluded) {
  auto r = record_from_rows(3, {"a"}, {{100, 100}, {1, 1}, {3, 3}, {5, 5}});
  r.samples[0].special_token_positions = {0};
  EXPECT_EQ(values(direct_aggregate(r, Method::AvgPpt, -1)), (std::vector<double>{1, 1}));
  EXPECT_EQ(values(direct_aggregate(r, Method::AvgAll, -1)), (std::vector<double>{3, 3}));
}

TEST(DirectAggregate, Errors) {
  auto r = record_from_rows(2, {"a"}, {{1, 1}, {3, 3}, {5, 5}});
  EXPECT_THROW(direct_aggregate(r, Method::AvgGen, 7), Error);
  r.architecture_mode = ArchitectureMode::EncoderDecoder;
  try {
    direct_aggregate(r, Method::AvgAll, -1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MethodUnavailableForMode);
  }
  auto one = record_from_rows(1, {"a"}, {{1, 1}, {2, 2}});
  try {
    direct_aggregate(one, Method::AvgPpt, -1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateRecord);
  }
}

TEST(Filter, SingleSurvivingToken) {
  // N=2, tokens Based/on/sports; the sports token links to row 3 and the
  // terminal row 4, which hold the same state.
  const auto r = record_from_rows(2, {"Based", "on", "sports"},
                                  {{9, 9}, {1, 2}, {3, 4}, {7, 8}, {7, 8}});
  FilterConfig f;
  f.stopwords = {"on"};
  f.phrases = {"Based on"};
  EXPECT_EQ(surviving_generation_rows(r, f, "q"), (std::vector<std::size_t>{3, 4}));
  EXPECT_EQ(values(filtered_avg_gen(r, -1, f, "q")), (std::vector<double>{7, 8}));
}

TEST(Filter, EmptyFilterIsAvgGen) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto rec = random_record(rng);
    EXPECT_EQ(filtered_avg_gen(rec, -1, FilterConfig{}, "what is it"), direct_aggregate(rec, Method::AvgGen, -1));
  }
}

TEST(Filter, AllFilteredFallsBack) {
  const auto r = record_from_rows(2, {"The", "of"}, {{9, 9}, {1, 2}, {3, 4}, {7, 8}});
  const auto f = FilterConfig::defaults();
  EXPECT_TRUE(surviving_generation_rows(r, f, "q").empty());
  EXPECT_EQ(filtered_avg_gen(r, -1, f, "q"), direct_aggregate(r, Method::AvgGen, -1));
}

TEST(Filter, InstructionTokensAndPunctuation) {
  const auto r = record_from_rows(1, {"Topic:", "Sports."}, {{1, 1}, {2, 2}, {4, 4}});
  FilterConfig f;
  f.exclude_instruction_tokens = true;
  EXPECT_EQ(surviving_generation_rows(r, f, "What is the topic?"), (std::vector<std::size_t>{1, 2}));
  f.exclude_instruction_tokens = false;
  EXPECT_EQ(surviving_generation_rows(r, f, "What is the topic?"), (std::vector<std::size_t>{0, 1, 2}));
}

TEST(Filter, PhraseOnlyWhenWhole) {
  FilterConfig f;
  f.phrases = {"The answer is"};
  const auto whole = record_from_rows(1, {"The", "answer", "is", "red"}, std::vector<std::vector<float>>(5, {1}));
  EXPECT_EQ(surviving_generation_rows(whole, f, "q"), (std::vector<std::size_t>{3, 4}));
  // First word of a phrase is dropped alone; the rest only inside a full occurrence.
  const auto partial = record_from_rows(1, {"The", "answer", "red"}, std::vector<std::vector<float>>(4, {1}));
  EXPECT_EQ(surviving_generation_rows(partial, f, "q"), (std::vector<std::size_t>{1, 2, 3}));
}

TEST(FilterConfig, JsonRoundTrip) {
  const auto d = FilterConfig::defaults();
  const auto back = FilterConfig::from_json(d.to_json());
  EXPECT_EQ(back.stopwords, d.stopwords);
  EXPECT_EQ(back.phrases, d.phrases);
  EXPECT_TRUE(back.exclude_instruction_tokens);
  EXPECT_EQ(default_phrases(), (std::vector<std::string>{"Based on", "Sure", "The answer is"}));
}

TEST(EncodingSpec, JsonRoundTripAndValidation) {
  auto s = EncodingSpec::from_json(nlohmann::json::parse(R"({"method": "avg-gen", "filter": "default", "layer": -2})"));
  EXPECT_EQ(s.method, Method::AvgGen);
  EXPECT_EQ(s.layer, -2);
  ASSERT_TRUE(s.filter.has_value());
  const auto again = EncodingSpec::from_json(s.to_json());
  EXPECT_EQ(again.to_json(), s.to_json());
  EXPECT_EQ(EncodingSpec::from_json(nlohmann::json::object()).method, Method::FirstGen);
  EXPECT_THROW(EncodingSpec::from_json(nlohmann::json::parse(R"({"method": "1st-gen", "filter": "default"})")),
               Error);
  EXPECT_THROW(EncodingSpec::from_json(nlohmann::json::parse(R"({"n_samples": "x"})")), Error);
}

TEST(Reencode, HandMean) {
  TableEmbedder e({{"a", {1, 0}}, {"b", {0, 1}}});
  const std::vector<GenerationSample> s{sample_with_text("a"), sample_with_text("b")};
  EXPECT_EQ(values(reencode(s, e)), (std::vector<double>{0.5, 0.5}));
  const std::vector<GenerationSample> one{sample_with_text("a")};
  EXPECT_EQ(values(reencode(one, e)), (std::vector<double>{1, 0}));
  const std::vector<GenerationSample> same(5, sample_with_text("b"));
  EXPECT_EQ(values(reencode(same, e)), (std::vector<double>{0, 1}));
  EXPECT_THROW(reencode(std::vector<GenerationSample>{}, e), Error);
}

TEST(Reencode, PermutationInvariant) {
  SyntheticEmbedder e(32);
  std::vector<GenerationSample> s;
  for (const char* t : {"north", "south wind", "east", "west coast", "up"}) s.push_back(sample_with_text(t));
  const auto base = reencode(s, e);
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(s.begin(), s.end(), rng);
    EXPECT_EQ(reencode(s, e), base);
  }
}

TEST(EndToEnd, CatsAndDogs) {
  SyntheticBackend gen(animal_config());
  SyntheticEmbedder emb(16);
  for (auto method : {Method::FirstGen, Method::ReEnc}) {
    EncodingSpec spec;
    spec.method = method;
    auto cosine_under = [&](const char* instruction) {
      const auto a = embed_instructed("I love cats", instruction, spec, default_template(), gen, &emb);
      const auto b = embed_instructed("I love dogs", instruction, spec, default_template(), gen, &emb);
      return cosine_similarity(a.embedding, b.embedding);
    };
    EXPECT_NEAR(cosine_under("Do they love animals?"), 1.0, 1e-6) << to_string(method);
    EXPECT_LT(cosine_under("What animals do they love?"), 1.0 - 1e-3) << to_string(method);
  }
}

TEST(EndToEnd, DeterministicAndCorpusOrder) {
  SyntheticBackend gen(animal_config());
  InstructedEmbedder embedder(EncodingSpec{}, default_template(), gen, nullptr);
  const auto a = embedder.embed("I love cats", "What animals do they love?");
  const auto b = embedder.embed("I love cats", "What animals do they love?");
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_EQ(a.generation, "cats");
  const std::vector<std::string> docs{"I love dogs", "I love cats", "I love dogs"};
  const auto out = embedder.embed_corpus(docs, "What animals do they love?");
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].generation, "dogs");
  EXPECT_EQ(out[1].embedding, a.embedding);
  EXPECT_EQ(out[2].embedding, out[0].embedding);
}

TEST(EndToEnd, ReencNeedsEmbedder) {
  SyntheticBackend gen(animal_config());
  EncodingSpec spec;
  spec.method = Method::ReEnc;
  EXPECT_THROW(embed_instructed("I love cats", "Do they love animals?", spec, default_template(), gen, nullptr),
               Error);
}

TEST(EndToEnd, EncoderOnlyMasks) {
  auto c = animal_config();
  c.architecture_mode = ArchitectureMode::EncoderOnly;
  SyntheticBackend gen(c);
  EncodingSpec spec;
  spec.method = Method::AvgGen;
  const auto r = embed_instructed("I love cats", "Do they love animals?", spec, default_template(), gen, nullptr);
  EXPECT_EQ(r.generation, "Yes [MASK] [MASK]");
  spec.method = Method::FirstGen;
  EXPECT_THROW(embed_instructed("I love cats", "Do they love animals?", spec, default_template(), gen, nullptr),
               Error);
}
