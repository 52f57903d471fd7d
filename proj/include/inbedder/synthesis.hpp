#pragma once

// Benchmark item generation through a chat-completion service. Generated
// items go to a review file; nothing here promotes them into a benchmark.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "inbedder/http_backend.hpp"

namespace inbedder {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant reply. Throws ServiceError.
  virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

inline constexpr std::string_view kChatApiKeyEnv = "INBEDDER_CHAT_API_KEY";

/// POSTs {model, messages} to `endpoint` (full URL) with a bearer key read
/// from the environment variable `api_key_env`. Accepts either
/// {"choices":[{"message":{"content"}}]} or {"content"} replies.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::string endpoint, std::string model,
                 std::string api_key_env = std::string(kChatApiKeyEnv), HttpClientOptions options = {});
  std::string complete(const std::vector<ChatMessage>& messages) override;

 private:
  std::string origin_;
  std::string path_;
  std::string model_;
  std::string api_key_;
  HttpClientOptions options_;
};

enum class Recipe { IntentEmotion, InstructStsb, RobustnessInstructions };
std::string_view to_string(Recipe r);
Recipe parse_recipe(std::string_view s);  // throws InvalidArgument

inline constexpr int kChatAttempts = 3;

// Prompt text with [PLACEHOLDER] slots.
inline constexpr std::string_view kEmotionPrompt =
    "Could you modify the emotion (one optimistic and one frustrating) of following utterance "
    "without changing the intent (\"[INTENT]\")?\n\"[TEXT]\"\nPlease output a JSON object "
    "containing keys \"optimistic\" and \"frustrating\", and no other things.";
inline constexpr std::string_view kIntentPrompt =
    "Modify the intent of the above utterances (i.e. from \"[INTENT]\" to another one that you "
    "brainstormed. Usually by modifying the objects or actions) without changing the emotions. "
    "Same as before, output a JSON object containing keys \"optimistic\" and \"frustrating\", and "
    "no other things.";
inline constexpr std::string_view kDiscriminativePrompt =
    "The following two sentences have similar surface forms:\n\n1. [SENTENCE1]\n2. [SENTENCE2]\n\n"
    "In order to discriminate the two sentences, what question would you ask? (e.g. what is the "
    "subject of the sentence?) Please output a JSON object that contains the key \"question\".";
inline constexpr std::string_view kNonDiscriminativePrompt =
    "Similar to the above, in order to make the answers to the two sentences immune to "
    "discrimination, what question would you ask? (e.g. what is the subject of the sentence?) "
    "Please output a JSON object that contains the key \"question\".";
inline constexpr std::string_view kCorrectInstructionsPrompt =
    "Paraphrase the following task instruction in 10 different ways that keep its meaning:\n"
    "\"[INSTRUCTION]\"\nPlease output a JSON object that contains the key \"instructions\" with a "
    "list of 10 strings.";
inline constexpr std::string_view kImplicitInstructionsPrompt =
    "Rewrite the following task instruction in 10 different ways that only convey the task "
    "implicitly:\n\"[INSTRUCTION]\"\nPlease output a JSON object that contains the key "
    "\"instructions\" with a list of 10 strings.";
inline constexpr std::string_view kIncorrectInstructionsPrompt =
    "Write 10 task instructions whose objective differs from that of the following task "
    "instruction:\n\"[INSTRUCTION]\"\nPlease output a JSON object that contains the key "
    "\"instructions\" with a list of 10 strings.";

/// Replaces every "[KEY]" with its value.
std::string fill_placeholders(std::string_view pattern,
                              const std::vector<std::pair<std::string, std::string>>& values);

/// First {...} object in a reply (code fences and chatter around it are
/// ignored) that has every key in `keys` as a string. nullopt otherwise.
std::optional<nlohmann::json> parse_reply_object(std::string_view reply,
                                                 const std::vector<std::string>& keys);

/// Sends `messages`, retrying the same turn until `parse` accepts the reply.
/// The accepted reply is appended to `messages` as the assistant turn.
/// Throws UnparseableResponse after kChatAttempts attempts.
nlohmann::json ask_until_parsed(ChatClient& client, std::vector<ChatMessage>& messages,
                                const std::vector<std::string>& keys);

/// One seed item through a recipe. Seeds:
///   intent-emotion          {"text", "intent"}
///   instruct-stsb           {"sentence1", "sentence2"}
///   robustness-instructions {"instruction"}
/// Throws ServiceError, UnparseableResponse, ParseError (bad seed).
nlohmann::json synthesize_item(const nlohmann::json& seed, ChatClient& client, Recipe recipe);

struct SynthesizedItem {
  nlohmann::json seed;
  std::optional<nlohmann::json> result;
  std::string error;  // set when flagged
  bool flagged() const { return !result.has_value(); }
};

/// Runs every seed in order. Unparseable replies flag the item and the run
/// continues; service failures abort.
std::vector<SynthesizedItem> synthesize_benchmark_items(const std::vector<nlohmann::json>& seeds,
                                                        ChatClient& client, Recipe recipe);

/// JSON-lines {"status": "needs-review"|"flagged", "seed", "result"?, "error"?}.
void write_review_file(std::ostream& out, const std::vector<SynthesizedItem>& items);

}  // namespace inbedder
