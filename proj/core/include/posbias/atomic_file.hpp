#pragma once

#include <filesystem>
#include <string_view>

namespace posbias {

/// Writes `content` to a temporary file next to `path`, then renames it over
/// `path`. Readers never observe a truncated file.
void write_file_atomic(const std::filesystem::path &path, std::string_view content);

std::string read_file(const std::filesystem::path &path);

}  // namespace posbias
