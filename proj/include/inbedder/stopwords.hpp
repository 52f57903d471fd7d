#pragma once

#include <set>
#include <string>

namespace inbedder {

/// The classic 179-entry English stopword list (lowercase, with the
/// contracted forms such as "don't" and their clitic pieces "don", "t").
const std::set<std::string>& default_stopwords();

/// One word per line; blank lines and lines starting with '#' are skipped.
/// Entries are lowercased.
std::set<std::string> load_stopwords(const std::string& path);

}  // namespace inbedder
