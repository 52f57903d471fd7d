#include "inbedder/jsonl.hpp"

#include <fstream>

#include "inbedder/error.hpp"
#include "inbedder/text.hpp"

namespace inbedder::jsonl {

void for_each(std::istream& in, const std::string& source,
              const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const auto where = source + ":" + std::to_string(line_no) + ": ";
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, where + "invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw Error(ErrorCode::ParseError, where + "expected a JSON object");
    try {
      fn(j, line_no);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, where + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, where + e.what());
    }
  }
}

void for_each_file(const std::string& path,
                   const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  for_each(in, path, fn);
}

void write_line(std::ostream& out, const nlohmann::json& j) { out << j.dump() << '\n'; }

std::string required_string(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::ParseError, std::string("missing string field \"") + key + "\"");
  }
  return it->get<std::string>();
}

}  // namespace inbedder::jsonl
