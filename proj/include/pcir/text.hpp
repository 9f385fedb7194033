#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace pcir::text {

struct AnalyzerConfig {
    bool stem = true;
};

/// Lowercased maximal ASCII-alphanumeric runs, in order of appearance.
std::vector<std::string> tokenize(std::string_view input);

/// Porter's suffix-stripping algorithm (1980), applied to a lowercase word.
/// Words shorter than three letters are returned unchanged.
std::string porter_stem(std::string word);

/// tokenize + optional stemming; the same analyzer must be applied to
/// documents and queries.
std::vector<std::string> analyze(std::string_view input, const AnalyzerConfig& config);

}  // namespace pcir::text
