// Copyright 2026 The hopper authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace hopper {

/// Splits `key = value` lines. Blank lines and `#` comments are skipped;
/// a line without `=` raises ConfigError.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);

double parse_double(const std::string& key, const std::string& value);
int parse_int(const std::string& key, const std::string& value);

/// Throws ConfigError when the file cannot be read.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace hopper
