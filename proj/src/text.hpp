// SPDX-License-Identifier: Apache-2.0
#pragma once

// Line tokenizing shared by the sequence and config parsers.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace pfc::text {

struct Token {
    std::string text;
    std::size_t column;  // 1-based
};

/// Drops everything after `#` and splits on whitespace.
std::vector<Token> tokenize(std::string_view line);

/// Splits text into lines, accepting both LF and CRLF.
std::vector<std::string_view> lines(std::string_view text);

std::string_view trim(std::string_view s);

std::string read_file(const std::string& path);

} // namespace pfc::text
