#include "inbedder/synthesis.hpp"

#include <cstdlib>
#include <ostream>

#include <httplib.h>

#include "inbedder/benchmarks.hpp"
#include "inbedder/error.hpp"
#include "inbedder/jsonl.hpp"

namespace inbedder {

namespace {

using json = nlohmann::json;

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::InvalidArgument, "endpoint needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace

HttpChatClient::HttpChatClient(std::string endpoint, std::string model, std::string api_key_env,
                               HttpClientOptions options)
    : model_(std::move(model)), options_(options) {
  std::tie(origin_, path_) = split_url(endpoint);
  if (const char* key = std::getenv(api_key_env.c_str())) api_key_ = key;
}

std::string HttpChatClient::complete(const std::vector<ChatMessage>& messages) {
  httplib::Client cli(origin_);
  cli.set_connection_timeout(options_.connect_timeout_s, 0);
  cli.set_read_timeout(options_.read_timeout_s, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  json body{{"model", model_}, {"messages", json::array()}};
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  const auto res = cli.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw Error(ErrorCode::ServiceError, origin_ + path_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw Error(ErrorCode::ServiceError,
                "chat service returned HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  try {
    const auto j = json::parse(res->body);
    if (j.contains("choices")) return j.at("choices").at(0).at("message").at("content").get<std::string>();
    return j.at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ServiceError, std::string("unexpected chat reply: ") + e.what());
  }
}

std::string_view to_string(Recipe r) {
  switch (r) {
    case Recipe::IntentEmotion:
      return "intent-emotion";
    case Recipe::InstructStsb:
      return "instruct-stsb";
    case Recipe::RobustnessInstructions:
      return "robustness-instructions";
  }
  return "?";
}

Recipe parse_recipe(std::string_view s) {
  for (auto r : {Recipe::IntentEmotion, Recipe::InstructStsb, Recipe::RobustnessInstructions}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown recipe: " + std::string(s));
}

std::string fill_placeholders(std::string_view pattern,
                              const std::vector<std::pair<std::string, std::string>>& values) {
  std::string out(pattern);
  for (const auto& [key, value] : values) {
    const std::string slot = "[" + key + "]";
    for (auto pos = out.find(slot); pos != std::string::npos; pos = out.find(slot, pos + value.size())) {
      out.replace(pos, slot.size(), value);
    }
  }
  return out;
}

std::optional<json> parse_reply_object(std::string_view reply, const std::vector<std::string>& keys) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  const auto j = json::parse(reply.substr(open, close - open + 1), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  for (const auto& k : keys) {
    const auto it = j.find(k);
    if (it == j.end()) return std::nullopt;
    if (k == "instructions") {
      if (!it->is_array() || it->size() != 10) return std::nullopt;
      for (const auto& s : *it) {
        if (!s.is_string() || s.get<std::string>().empty()) return std::nullopt;
      }
    } else if (!it->is_string() || it->get<std::string>().empty()) {
      return std::nullopt;
    }
  }
  return j;
}

json ask_until_parsed(ChatClient& client, std::vector<ChatMessage>& messages,
                      const std::vector<std::string>& keys) {
  std::string last;
  for (int attempt = 0; attempt < kChatAttempts; ++attempt) {
    last = client.complete(messages);
    if (auto parsed = parse_reply_object(last, keys)) {
      messages.push_back({"assistant", last});
      return *parsed;
    }
  }
  throw Error(ErrorCode::UnparseableResponse,
              "no usable reply after " + std::to_string(kChatAttempts) + " attempts; last: " + last.substr(0, 200));
}

json synthesize_item(const json& seed, ChatClient& client, Recipe recipe) {
  auto get = [&](const char* key) {
    try {
      return jsonl::required_string(seed, key);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, std::string("seed: ") + e.what());
    }
  };
  switch (recipe) {
    case Recipe::IntentEmotion: {
      const auto text = get("text");
      const auto intent = get("intent");
      std::vector<ChatMessage> chat{
          {"user", fill_placeholders(kEmotionPrompt, {{"INTENT", intent}, {"TEXT", text}})}};
      const auto first = ask_until_parsed(client, chat, {"optimistic", "frustrating"});
      chat.push_back({"user", fill_placeholders(kIntentPrompt, {{"INTENT", intent}})});
      const auto second = ask_until_parsed(client, chat, {"optimistic", "frustrating"});
      json out{{"u_opt1", first["optimistic"]},
               {"u_fru1", first["frustrating"]},
               {"u_opt2", second["optimistic"]},
               {"u_fru2", second["frustrating"]},
               {"triplets", json::array()}};
      const auto triplets =
          group_triplets(out["u_opt1"], out["u_fru1"], out["u_opt2"], out["u_fru2"],
                         kDefaultEmotionInstruction, kDefaultIntentInstruction);
      for (const auto& t : triplets) {
        out["triplets"].push_back({{"anchor", t.anchor},
                                   {"positive", t.positive},
                                   {"negative", t.negative},
                                   {"criterion", t.criterion},
                                   {"instruction", t.instruction}});
      }
      return out;
    }
    case Recipe::InstructStsb: {
      const auto s1 = get("sentence1");
      const auto s2 = get("sentence2");
      std::vector<ChatMessage> chat{
          {"user", fill_placeholders(kDiscriminativePrompt, {{"SENTENCE1", s1}, {"SENTENCE2", s2}})}};
      const auto disc = ask_until_parsed(client, chat, {"question"});
      chat.push_back({"user", std::string(kNonDiscriminativePrompt)});
      const auto same = ask_until_parsed(client, chat, {"question"});
      return {{"pairs",
               {{{"sentence1", s1}, {"sentence2", s2}, {"instruction", disc["question"]}, {"rating", 0}},
                {{"sentence1", s1}, {"sentence2", s2}, {"instruction", same["question"]}, {"rating", 1}}}}};
    }
    case Recipe::RobustnessInstructions: {
      const auto instruction = get("instruction");
      json out;
      const std::pair<const char*, std::string_view> sets[] = {{"correct", kCorrectInstructionsPrompt},
                                                               {"implicit", kImplicitInstructionsPrompt},
                                                               {"incorrect", kIncorrectInstructionsPrompt}};
      for (const auto& [name, prompt] : sets) {
        std::vector<ChatMessage> chat{{"user", fill_placeholders(prompt, {{"INSTRUCTION", instruction}})}};
        out[name] = ask_until_parsed(client, chat, {"instructions"})["instructions"];
      }
      return {{"instructions", out}};
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown recipe");
}

std::vector<SynthesizedItem> synthesize_benchmark_items(const std::vector<json>& seeds, ChatClient& client,
                                                        Recipe recipe) {
  std::vector<SynthesizedItem> items;
  for (const auto& seed : seeds) {
    SynthesizedItem item{seed, std::nullopt, {}};
    try {
      item.result = synthesize_item(seed, client, recipe);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableResponse && e.code() != ErrorCode::DuplicateUtterance &&
          e.code() != ErrorCode::InvalidArgument) {
        throw;
      }
      item.error = e.what();
    }
    items.push_back(std::move(item));
  }
  return items;
}

void write_review_file(std::ostream& out, const std::vector<SynthesizedItem>& items) {
  for (const auto& item : items) {
    json j{{"status", item.flagged() ? "flagged" : "needs-review"}, {"seed", item.seed}};
    if (item.result) j["result"] = *item.result;
    if (item.flagged()) j["error"] = item.error;
    jsonl::write_line(out, j);
  }
}

}  // namespace inbedder
