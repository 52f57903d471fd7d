#pragma once

#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

namespace inbedder::jsonl {

/// Calls fn(object, line_number) for every non-blank line. Parse failures
/// and exceptions thrown by fn surface as ParseError "<source>:<line>: ...".
void for_each(std::istream& in, const std::string& source,
              const std::function<void(const nlohmann::json&, std::size_t)>& fn);
void for_each_file(const std::string& path,
                   const std::function<void(const nlohmann::json&, std::size_t)>& fn);

void write_line(std::ostream& out, const nlohmann::json& j);

/// Required string field; throws ParseError naming the key.
std::string required_string(const nlohmann::json& j, const char* key);

}  // namespace inbedder::jsonl
