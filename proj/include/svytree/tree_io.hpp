#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "svytree/tree.hpp"

namespace svytree {

/// JSON tree document:
///
///   { "format": "svytree.tree/1", "study": ..., "schema": [...],
///     "controls": {...},
///     "nodes": [ { "id", "path", "rule", "value", "weighted_count",
///                  "sample_count", "sse", "reduction" }, ... ] }
///
/// Node ids use heap numbering (root 1, children 2k / 2k+1) and `path` spells
/// the same route as a string of 'L' / 'R'. Categorical rules list both
/// sides by label; numeric rules carry a threshold (x <= t goes left).
/// Unknown quantities are null.
std::string export_tree(const Partition& partition);

/// Throws InvalidDocument.
Partition import_tree(std::string_view document);

Partition load_tree(const std::filesystem::path& path);
void save_tree(const std::filesystem::path& path, const Partition& partition);

}  // namespace svytree
