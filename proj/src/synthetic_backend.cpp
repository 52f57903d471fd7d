#include "inbedder/synthetic_backend.hpp"

#include <cmath>
#include <fstream>

#include "inbedder/error.hpp"
#include "inbedder/text.hpp"

namespace inbedder {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::int32_t token_id(std::string_view token) {
  return static_cast<std::int32_t>(stable_hash(token) & 0x7fffffffULL);
}

constexpr std::string_view kBos = "<s>";
constexpr std::string_view kMask = "[MASK]";
constexpr std::int64_t kEmbedderSalt = -1;

}  // namespace

std::uint64_t stable_hash(std::string_view s, std::uint64_t seed) {
  // FNV-1a, then one splitmix round to spread the low bits.
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(h);
}

std::vector<float> hash_unit_vector(std::string_view token, std::int64_t salt, std::size_t dim) {
  std::uint64_t state = stable_hash(token, static_cast<std::uint64_t>(salt));
  std::vector<double> v(dim);
  double sq = 0.0;
  for (auto& x : v) {
    x = 2.0 * static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53 - 1.0;
    sq += x * x;
  }
  const double norm = std::sqrt(sq);
  std::vector<float> out(dim, 0.0f);
  if (norm == 0.0) {
    out[0] = 1.0f;
    return out;
  }
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
  return out;
}

void SyntheticConfig::set_answer(std::string input, std::string instruction, std::string answer) {
  answers[{std::move(input), std::move(instruction)}] = {std::move(answer)};
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
    c.dim = j.value("dim", c.dim);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.architecture_mode = parse_architecture_mode(j.value("architecture_mode", "causal"));
    c.emit_bos = j.value("emit_bos", false);
    c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
    auto answers_of = [](const nlohmann::json& e) {
      if (e.contains("answers")) return e["answers"].get<std::vector<std::string>>();
      return std::vector<std::string>{e.at("answer").get<std::string>()};
    };
    if (j.contains("default_answer")) {
      const auto& d = j["default_answer"];
      c.default_answers = d.is_array() ? d.get<std::vector<std::string>>()
                                       : std::vector<std::string>{d.get<std::string>()};
    }
    for (const auto& e : j.value("entries", nlohmann::json::array())) {
      c.answers[{e.value("input", ""), e.value("instruction", "")}] = answers_of(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("synthetic backend config: ") + e.what());
  }
  if (c.dim == 0 || c.num_layers < 1) {
    throw Error(ErrorCode::InvalidArgument, "synthetic backend needs dim >= 1 and num_layers >= 1");
  }
  for (const auto& [key, list] : c.answers) {
    if (list.empty()) throw Error(ErrorCode::InvalidArgument, "entry with no answers");
    for (const auto& a : list) {
      if (text::split_whitespace(a).empty()) {
        throw Error(ErrorCode::InvalidArgument, "synthetic answers must be non-empty");
      }
    }
  }
  return c;
}

SyntheticConfig SyntheticConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  return from_json(j);
}

SyntheticBackend::SyntheticBackend(SyntheticConfig config) : config_(std::move(config)) {}

SyntheticBackend::SyntheticBackend(SyntheticConfig config, AnswerFn answer_fn)
    : config_(std::move(config)), answer_fn_(std::move(answer_fn)) {}

BackendInfo SyntheticBackend::info() const {
  return {config_.num_layers, config_.dim, config_.architecture_mode, "whitespace"};
}

std::size_t SyntheticBackend::token_length(std::string_view text) const {
  return text::split_whitespace(text).size() + (config_.emit_bos ? 1 : 0);
}

std::vector<std::string> SyntheticBackend::candidates(std::string_view input,
                                                      std::string_view instruction) const {
  if (answer_fn_) {
    if (auto found = answer_fn_(input, instruction); found && !found->empty()) return *found;
  } else {
    const std::string in(input), ins(instruction);
    for (const auto& key : {std::pair{in, ins}, std::pair{std::string{}, ins},
                            std::pair{in, std::string{}}}) {
      if (auto it = config_.answers.find(key); it != config_.answers.end()) return it->second;
    }
  }
  if (config_.default_answers) return *config_.default_answers;
  throw Error(ErrorCode::MissingConfigEntry,
              "no synthetic answer for input '" + std::string(input).substr(0, 60) +
                  "' under instruction '" + std::string(instruction) + "'");
}

GenerationRecord SyntheticBackend::generate(const GenerationRequest& request) {
  request.validate();
  if (request.architecture_mode != config_.architecture_mode) {
    throw Error(ErrorCode::UnsupportedMode,
                "backend runs in " + std::string(to_string(config_.architecture_mode)) +
                    " mode, request asked for " +
                    std::string(to_string(request.architecture_mode)));
  }
  std::vector<int> layers;
  for (int l : request.layers) layers.push_back(resolve_layer(l, config_.num_layers));

  const auto answers = candidates(request.prompt.input(), request.prompt.instruction());

  std::vector<std::string> prompt_tokens;
  if (config_.emit_bos) prompt_tokens.emplace_back(kBos);
  for (auto& t : text::split_whitespace(request.prompt.text)) prompt_tokens.push_back(std::move(t));

  GenerationRecord record;
  record.prompt_len = prompt_tokens.size();
  record.dim = config_.dim;
  record.num_layers = config_.num_layers;
  record.architecture_mode = config_.architecture_mode;

  std::uint64_t pick_state = stable_hash(request.prompt.text, request.seed);
  for (int s = 0; s < request.n_samples; ++s) {
    std::size_t pick = 0;
    if (request.temperature > 0.0) pick = splitmix64(pick_state) % answers.size();
    const auto answer_tokens = text::split_whitespace(answers[pick]);

    GenerationSample sample;
    if (config_.architecture_mode == ArchitectureMode::EncoderOnly) {
      for (int i = 0; i < request.mask_count; ++i) {
        sample.tokens.emplace_back(static_cast<std::size_t>(i) < answer_tokens.size()
                                       ? answer_tokens[static_cast<std::size_t>(i)]
                                       : std::string(kMask));
      }
      sample.finished_with_eos = true;
    } else {
      const auto n = std::min(answer_tokens.size(), static_cast<std::size_t>(request.max_new_tokens));
      sample.tokens.assign(answer_tokens.begin(), answer_tokens.begin() + static_cast<long>(n));
      sample.finished_with_eos = answer_tokens.size() <= n;
    }
    for (const auto& t : sample.tokens) sample.token_ids.push_back(token_id(t));
    sample.text = text::join(sample.tokens, " ");
    if (config_.emit_bos) sample.special_token_positions.push_back(0);

    std::vector<std::string_view> sequence(prompt_tokens.begin(), prompt_tokens.end());
    sequence.insert(sequence.end(), sample.tokens.begin(), sample.tokens.end());
    const std::size_t rows = sequence.size();

    std::map<int, HiddenMatrix> by_layer;
    for (int layer : layers) {
      HiddenMatrix m{rows, config_.dim, std::vector<float>(rows * config_.dim)};
      for (std::size_t r = 0; r < rows; ++r) {
        const auto& tok = sequence[r + 1 < rows ? r + 1 : rows - 1];
        const auto v = hash_unit_vector(tok, layer, config_.dim);
        std::copy(v.begin(), v.end(), m.data.begin() + static_cast<long>(r * config_.dim));
      }
      by_layer.emplace(layer, std::move(m));
    }
    record.samples.push_back(std::move(sample));
    record.hidden.push_back(std::move(by_layer));
  }
  record.validate();
  return record;
}

std::vector<Embedding> SyntheticEmbedder::embed_texts(const EmbedRequest& request) {
  validate_embed_request(request);
  std::vector<Embedding> out;
  out.reserve(request.texts.size());
  for (const auto& t : request.texts) {
    auto tokens = text::split_whitespace(t);
    if (tokens.empty()) tokens.push_back(t);
    std::vector<double> mean(dim_, 0.0);
    std::size_t count = 0;
    for (const auto& tok : tokens) {
      const auto v = hash_unit_vector(tok, kEmbedderSalt, dim_);
      ++count;
      for (std::size_t i = 0; i < dim_; ++i) {
        mean[i] += (static_cast<double>(v[i]) - mean[i]) / static_cast<double>(count);
      }
    }
    if (request.normalize) {
      const double n = l2_norm(mean);
      for (auto& x : mean) x /= n;
    }
    std::vector<float> narrowed(mean.begin(), mean.end());
    out.emplace_back(std::span<const float>(narrowed));
  }
  return out;
}

}  // namespace inbedder
