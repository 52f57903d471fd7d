#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inbedder/backend.hpp"

namespace inbedder {

inline constexpr const char* kBackendUrlEnv = "INBEDDER_BACKEND_URL";

struct BackendSet {
  std::shared_ptr<GenerationBackend> generator;
  std::shared_ptr<EmbeddingBackend> embedder;
};

/// Backend specs:
///   synthetic            built-in synthetic model with default settings
///   synthetic:CFG.json   synthetic model from a config file
///   replay:FILE          recorded responses
///   http(s)://HOST:PORT  remote backend
/// An empty embedder spec pairs the generator with its natural embedder.
/// Throws InvalidArgument for an unknown scheme.
BackendSet open_backends(const std::string& generator_spec, const std::string& embedder_spec = "");

/// Flag value, else environment variable, else config-file key.
std::optional<std::string> resolve_setting(const std::string& flag, const char* env_name,
                                           const nlohmann::json& config, const char* key);

/// Exit codes: 0 success, 1 usage error, 2 runtime error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace inbedder
