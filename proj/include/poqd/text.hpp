#pragma once

#include <set>
#include <string>
#include <vector>

namespace poqd {

std::string trim(const std::string& s);
std::string to_lower(std::string s);

/// Maximal runs of non-whitespace characters.
std::vector<std::string> split_whitespace(const std::string& s);

/// Lowercased tokens split on whitespace and ASCII punctuation.
/// Bytes outside ASCII are kept as token characters.
std::vector<std::string> tokenize(const std::string& s);

/// Token set of tokenize(s).
std::set<std::string> token_set(const std::string& s);

std::vector<std::string> split_lines(const std::string& s);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

} // namespace poqd
