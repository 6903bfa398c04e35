#include "svytree/tree_io.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "json.hpp"
#include "svytree/error.hpp"
#include "svytree/io.hpp"

namespace svytree {

namespace {

using ojson = nlohmann::ordered_json;
constexpr const char* kFormat = "svytree.tree/1";

std::string path_of(std::uint64_t id) {
  std::string p;
  while (id > 1) {
    p.push_back((id & 1U) ? 'R' : 'L');
    id >>= 1;
  }
  return {p.rbegin(), p.rend()};
}

ojson number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

[[noreturn]] void bad(const std::string& m) {
  throw Error(Errc::InvalidDocument, m);
}

double read_number(const ojson& node, const char* key) {
  if (!node.contains(key) || node[key].is_null()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  if (!node[key].is_number()) bad(std::string("field '") + key + "' is not a number");
  return node[key].get<double>();
}

}  // namespace

std::string export_tree(const Partition& partition) {
  ojson doc;
  doc["format"] = kFormat;
  doc["study"] = partition.study();
  ojson schema = ojson::array();
  for (const auto& s : partition.schema()) {
    ojson v;
    v["name"] = s.name;
    v["kind"] = s.is_categorical() ? "categorical" : "numeric";
    if (s.is_categorical()) v["levels"] = s.levels;
    schema.push_back(v);
  }
  doc["schema"] = schema;
  const auto& c = partition.controls();
  doc["controls"] = {{"min_node", c.min_node},
                     {"min_weight", c.min_weight},
                     {"min_improve", c.min_improve},
                     {"max_depth", c.max_depth},
                     {"exhaustive_cutoff", c.exhaustive_cutoff}};
  ojson nodes = ojson::array();
  for (const auto& n : partition.nodes()) {
    ojson j;
    j["id"] = n.id;
    j["path"] = path_of(n.id);
    if (n.rule) {
      const auto& spec = partition.schema()[n.rule->variable];
      ojson rule;
      rule["variable"] = spec.name;
      if (n.rule->numeric) {
        rule["threshold"] = n.rule->threshold;
      } else {
        ojson left = ojson::array(), right = ojson::array();
        for (std::size_t l = 0; l < spec.levels.size(); ++l) {
          (n.rule->goes_left(static_cast<double>(l)) ? left : right)
              .push_back(spec.levels[l]);
        }
        rule["left"] = left;
        rule["right"] = right;
      }
      j["rule"] = rule;
    } else {
      j["rule"] = nullptr;
    }
    j["value"] = number_or_null(n.value);
    j["weighted_count"] = number_or_null(n.weighted_count);
    j["sample_count"] = n.sample_count;
    j["sse"] = number_or_null(n.sse);
    if (n.rule) j["reduction"] = number_or_null(n.reduction);
    nodes.push_back(j);
  }
  doc["nodes"] = nodes;
  return doc.dump(2) + "\n";
}

Partition import_tree(std::string_view document) {
  ojson doc;
  try {
    doc = ojson::parse(document.begin(), document.end());
  } catch (const ojson::exception& e) {
    bad(std::string("not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) bad("document is not an object");
    if (doc.value("format", std::string(kFormat)) != kFormat) {
      bad("unsupported format '" + doc["format"].get<std::string>() + "'");
    }
    std::vector<VariableSpec> schema;
    for (const auto& v : doc.at("schema")) {
      const auto name = v.at("name").get<std::string>();
      const auto kind = v.at("kind").get<std::string>();
      if (kind == "categorical") {
        schema.push_back(VariableSpec::categorical(
            name, v.at("levels").get<std::vector<std::string>>()));
      } else if (kind == "numeric") {
        schema.push_back(VariableSpec::numeric(name, VariableRole::Predictor));
      } else {
        bad("unknown variable kind '" + kind + "'");
      }
    }
    GrowControls controls;
    if (doc.contains("controls")) {
      const auto& c = doc["controls"];
      controls.min_node = c.value("min_node", controls.min_node);
      controls.min_weight = c.value("min_weight", controls.min_weight);
      controls.min_improve = c.value("min_improve", controls.min_improve);
      controls.max_depth = c.value("max_depth", controls.max_depth);
      controls.exhaustive_cutoff =
          c.value("exhaustive_cutoff", controls.exhaustive_cutoff);
    }

    std::map<std::uint64_t, TreeNode> by_id;
    for (const auto& j : doc.at("nodes")) {
      TreeNode n;
      n.id = j.at("id").get<std::uint64_t>();
      if (n.id == 0) bad("node id 0");
      if (j.contains("path") && j["path"].get<std::string>() != path_of(n.id)) {
        bad("path of node " + std::to_string(n.id) + " does not match its id");
      }
      if (j.contains("rule") && !j["rule"].is_null()) {
        const auto& r = j["rule"];
        const auto var = r.at("variable").get<std::string>();
        std::size_t vi = schema.size();
        for (std::size_t i = 0; i < schema.size(); ++i) {
          if (schema[i].name == var) vi = i;
        }
        if (vi == schema.size()) bad("rule on unknown variable '" + var + "'");
        SplitRule rule;
        rule.variable = vi;
        if (r.contains("threshold")) {
          rule.numeric = true;
          rule.threshold = r["threshold"].get<double>();
        } else {
          const auto& spec = schema[vi];
          std::vector<bool> seen(spec.levels.size(), false);
          for (const char* side : {"left", "right"}) {
            for (const auto& label : r.at(side)) {
              auto idx = spec.level_index(label.get<std::string>());
              if (!idx) bad("unknown level '" + label.get<std::string>() + "'");
              if (seen[*idx]) bad("level listed twice in a rule on '" + var + "'");
              seen[*idx] = true;
              if (std::string(side) == "left") rule.left_levels.push_back(*idx);
            }
          }
          for (bool s : seen) {
            if (!s) bad("rule on '" + var + "' does not cover every level");
          }
          std::sort(rule.left_levels.begin(), rule.left_levels.end());
        }
        n.rule = std::move(rule);
      }
      n.value = read_number(j, "value");
      n.weighted_count = read_number(j, "weighted_count");
      n.sse = read_number(j, "sse");
      n.reduction = j.contains("reduction") ? read_number(j, "reduction") : 0.0;
      if (j.contains("sample_count") && !j["sample_count"].is_null()) {
        n.sample_count = j["sample_count"].get<std::size_t>();
      }
      if (!by_id.emplace(n.id, std::move(n)).second) bad("duplicate node id");
    }

    // Rebuild preorder with child indices.
    std::vector<TreeNode> nodes;
    auto place = [&](auto&& self, std::uint64_t id) -> int {
      auto it = by_id.find(id);
      if (it == by_id.end()) bad("missing node " + std::to_string(id));
      const int idx = static_cast<int>(nodes.size());
      nodes.push_back(it->second);
      if (it->second.rule) {
        const int l = self(self, 2 * id);
        const int r = self(self, 2 * id + 1);
        nodes[static_cast<std::size_t>(idx)].left = l;
        nodes[static_cast<std::size_t>(idx)].right = r;
      }
      return idx;
    };
    place(place, 1);
    if (nodes.size() != by_id.size()) bad("document has unreachable nodes");
    return Partition(std::move(schema), doc.value("study", std::string()),
                     std::move(nodes), controls);
  } catch (const ojson::exception& e) {
    bad(std::string("malformed tree document: ") + e.what());
  }
}

Partition load_tree(const std::filesystem::path& path) {
  return import_tree(read_file(path));
}

void save_tree(const std::filesystem::path& path, const Partition& partition) {
  write_file_atomic(path, export_tree(partition));
}

}  // namespace svytree
