#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace svytree {

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partial artifact. Throws IoError.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

/// Throws IoError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace svytree
