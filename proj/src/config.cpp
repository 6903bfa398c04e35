#include "svytree/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "svytree/error.hpp"
#include "svytree/io.hpp"

namespace svytree {

namespace {

constexpr ConfigKey kKeys[] = {
    {"seed", "integer", "1",
     "Seed for sampling (tree, estimate, diagnose) and the replicate base seed "
     "(simulate). The synth command uses it as population.seed."},
    {"n", "integer", "1000", "Target sample size for tree, estimate and diagnose."},
    {"study", "string", "first study variable", "Study variable to model."},
    {"predictors", "list of strings", "all predictors",
     "Predictors offered to the tree and the stepwise model."},
    {"population.source", "synthetic | csv", "synthetic", "Where the frame comes from."},
    {"population.path", "path", "", "Frame CSV (population.source = csv)."},
    {"population.schema", "list of {name, kind, role, levels}", "synthetic schema",
     "CSV column declarations; kind is categorical or numeric, role is "
     "predictor or study."},
    {"population.N", "integer", "187115", "Synthetic population size."},
    {"population.seed", "integer", "20170826", "Synthetic population seed."},
    {"population.noise", "poisson | none", "poisson",
     "Noise around the cell means; none writes the means themselves."},
    {"population.predictors", "list of {name, levels, weights}", "reference",
     "Categorical predictors and their marginal frequencies."},
    {"population.studies", "list of {name, default_mean, default_zero_inflation, cells}",
     "reference",
     "Study variables. cells is a list of {when: {predictor: [levels]}, mean, "
     "zero_inflation}; the first matching cell wins."},
    {"design.kind", "stratified | srswor | pps | census", "stratified", "Sampling design."},
    {"design.variable", "string", "size",
     "Strata variable (stratified) or size measure (pps)."},
    {"design.rates", "map label -> rate", "{1: 0.005, 2: 0.01, 3: 0.02, 4: 0.05, 5: 0.15, 6: 0.40}",
     "Relative stratum sampling rates, rescaled to the target n."},
    {"design.counts", "map label -> count", "none",
     "Fixed stratum sample sizes for single draws; overrides design.rates."},
    {"tree.min_node", "integer", "25", "Minimum sample units in each child."},
    {"tree.min_weight", "number", "25", "Minimum sum of design weights in each child."},
    {"tree.min_improve", "number", "0.001",
     "Minimum SSE reduction as a fraction of the root SSE."},
    {"tree.max_depth", "integer", "8", "Maximum tree depth."},
    {"tree.exhaustive_cutoff", "integer", "12",
     "Categorical predictors with at most this many levels in a node are "
     "searched exhaustively."},
    {"stepwise.penalty", "number", "2", "Criterion charge per parameter."},
    {"stepwise.max_steps", "integer", "unlimited", "Maximum accepted blocks."},
    {"stepwise.interactions", "boolean", "false",
     "Also offer two-way cross-classifications as candidate blocks."},
    {"estimate.estimator", "ht | greg-linear | greg-tree", "greg-tree",
     "Estimator for the estimate command."},
    {"estimate.tree", "path", "", "Tree document to use instead of growing one."},
    {"simulate.sample_sizes", "list of integers", "[500, 1000, 2000]", "Sample sizes."},
    {"simulate.replicates", "integer", "200", "Replicates per sample size."},
    {"simulate.estimators", "list of estimator names", "[ht, greg-linear, greg-tree]",
     "Estimators to evaluate."},
    {"simulate.studies", "list of strings", "all study variables",
     "Study variables to estimate."},
    {"simulate.threads", "integer", "0", "Worker threads; 0 uses the runtime default."},
    {"simulate.long", "boolean", "false",
     "Full scale: 1000 replicates at n = 2000, 3000, 4000, 5000, 6000."},
    {"simulate.svg", "boolean", "false", "Also write report.svg."},
    {"simulate.progress", "boolean", "false", "Replicate counter on standard error."},
};

[[noreturn]] void fail(const std::string& msg) { throw Error(Errc::ConfigError, msg); }

bool is_key(std::string_view path) {
  return std::any_of(std::begin(kKeys), std::end(kKeys),
                     [&](const ConfigKey& k) { return k.key == path; });
}

bool is_section(std::string_view path) {
  return std::any_of(std::begin(kKeys), std::end(kKeys), [&](const ConfigKey& k) {
    return k.key.size() > path.size() && k.key.substr(0, path.size()) == path &&
           k.key[path.size()] == '.';
  });
}

void check_keys(const YAML::Node& node, const std::string& prefix) {
  if (!node.IsMap()) {
    fail(prefix.empty() ? "configuration must be a mapping"
                        : "'" + prefix + "' must be a mapping");
  }
  for (const auto& kv : node) {
    const std::string name = kv.first.as<std::string>();
    const std::string path = prefix.empty() ? name : prefix + "." + name;
    if (is_key(path)) continue;
    if (is_section(path)) {
      check_keys(kv.second, path);
      continue;
    }
    fail("unknown configuration key '" + path + "'");
  }
}

YAML::Node lookup(const YAML::Node& root, std::string_view path) {
  YAML::Node cur = YAML::Clone(root);
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part(path.substr(start, dot - start));
    if (!cur.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
    const YAML::Node& view = cur;
    YAML::Node next = view[part];
    if (!next.IsDefined()) return YAML::Node(YAML::NodeType::Undefined);
    cur.reset(next);
    if (dot == std::string_view::npos) return cur;
    start = dot + 1;
  }
}

void assign(YAML::Node& root, const std::string& path, const YAML::Node& value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    parts.push_back(path.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  YAML::Node cur = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = cur[parts[i]];
    if (!next.IsDefined() || !next.IsMap()) {
      cur[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next.reset(cur[parts[i]]);
    }
    cur.reset(next);
  }
  cur[parts.back()] = value;
}

std::string scalar(const YAML::Node& n, std::string_view key) {
  if (!n.IsScalar()) fail(std::string(key) + ": expected a scalar");
  return n.Scalar();
}

std::int64_t integer(const YAML::Node& n, std::string_view key) {
  const std::string s = scalar(n, key);
  const auto v = parse_number(s);
  if (!v || *v != std::floor(*v) || std::fabs(*v) > 9.0e15) {
    fail(std::string(key) + ": expected an integer, got '" + s + "'");
  }
  return static_cast<std::int64_t>(*v);
}

std::uint64_t seed_value(const YAML::Node& n, std::string_view key) {
  const std::string s = scalar(n, key);
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    fail(std::string(key) + ": expected a non-negative 64-bit integer, got '" + s + "'");
  }
  return v;
}

std::size_t count(const YAML::Node& n, std::string_view key, std::int64_t min = 0) {
  const std::int64_t v = integer(n, key);
  if (v < min) fail(std::string(key) + " must be >= " + std::to_string(min));
  return static_cast<std::size_t>(v);
}

double number(const YAML::Node& n, std::string_view key) {
  const std::string s = scalar(n, key);
  const auto v = parse_number(s);
  if (!v) fail(std::string(key) + ": expected a number, got '" + s + "'");
  return *v;
}

bool boolean(const YAML::Node& n, std::string_view key) {
  const std::string s = scalar(n, key);
  if (s == "true" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "no" || s == "off") return false;
  fail(std::string(key) + ": expected true or false, got '" + s + "'");
}

std::vector<std::string> strings(const YAML::Node& n, std::string_view key) {
  if (n.IsScalar()) {
    // Accept a comma-separated scalar for convenience on the command line.
    std::vector<std::string> out;
    std::stringstream ss(n.Scalar());
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(' '));
      item.erase(item.find_last_not_of(' ') + 1);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }
  if (!n.IsSequence()) fail(std::string(key) + ": expected a list");
  std::vector<std::string> out;
  for (const auto& item : n) out.push_back(scalar(item, key));
  return out;
}

std::vector<EstimatorKind> estimators(const YAML::Node& n, std::string_view key) {
  std::vector<EstimatorKind> out;
  for (const std::string& s : strings(n, key)) {
    const auto kind = parse_estimator(s);
    if (!kind) fail(std::string(key) + ": unknown estimator '" + s + "'");
    out.push_back(*kind);
  }
  return out;
}

template <class T, class F>
std::map<std::string, T> label_map(const YAML::Node& n, std::string_view key, F conv) {
  if (!n.IsMap()) fail(std::string(key) + ": expected a mapping of level -> value");
  std::map<std::string, T> out;
  for (const auto& kv : n) {
    out[scalar(kv.first, key)] = conv(kv.second, key);
  }
  return out;
}

std::vector<VariableSpec> parse_schema(const YAML::Node& n) {
  constexpr std::string_view key = "population.schema";
  if (!n.IsSequence()) fail("population.schema: expected a list");
  std::vector<VariableSpec> out;
  for (const auto& item : n) {
    if (!item.IsMap()) fail("population.schema: entries must be mappings");
    for (const auto& kv : item) {
      const std::string f = kv.first.as<std::string>();
      if (f != "name" && f != "kind" && f != "role" && f != "levels") {
        fail("population.schema: unknown field '" + f + "'");
      }
    }
    if (!item["name"]) fail("population.schema: entry without a name");
    const std::string name = scalar(item["name"], key);
    const std::string kind = item["kind"] ? scalar(item["kind"], key) : "numeric";
    const std::string role = item["role"] ? scalar(item["role"], key) : "study";
    VariableRole r;
    if (role == "predictor") {
      r = VariableRole::Predictor;
    } else if (role == "study") {
      r = VariableRole::Study;
    } else {
      fail("population.schema: role of '" + name + "' must be predictor or study");
    }
    if (kind == "categorical") {
      if (!item["levels"]) fail("population.schema: '" + name + "' needs levels");
      out.push_back(VariableSpec::categorical(name, strings(item["levels"], key), r));
    } else if (kind == "numeric") {
      out.push_back(VariableSpec::numeric(name, r));
    } else {
      fail("population.schema: kind of '" + name + "' must be categorical or numeric");
    }
  }
  try {
    validate_schema(out);
  } catch (const Error& e) {
    fail(std::string("population.schema: ") + e.what());
  }
  return out;
}

std::vector<PredictorMarginal> parse_marginals(const YAML::Node& n) {
  constexpr std::string_view key = "population.predictors";
  if (!n.IsSequence()) fail("population.predictors: expected a list");
  std::vector<PredictorMarginal> out;
  for (const auto& item : n) {
    if (!item.IsMap() || !item["name"] || !item["levels"]) {
      fail("population.predictors: entries need name and levels");
    }
    PredictorMarginal m;
    m.name = scalar(item["name"], key);
    m.levels = strings(item["levels"], key);
    if (item["weights"]) {
      if (!item["weights"].IsSequence()) fail("population.predictors: weights must be a list");
      for (const auto& w : item["weights"]) m.weights.push_back(number(w, key));
    } else {
      m.weights.assign(m.levels.size(), 1.0);
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<StudyModel> parse_studies(const YAML::Node& n) {
  constexpr std::string_view key = "population.studies";
  if (!n.IsSequence()) fail("population.studies: expected a list");
  std::vector<StudyModel> out;
  for (const auto& item : n) {
    if (!item.IsMap() || !item["name"]) fail("population.studies: entries need a name");
    StudyModel s;
    s.name = scalar(item["name"], key);
    if (item["default_mean"]) s.default_mean = number(item["default_mean"], key);
    if (item["default_zero_inflation"]) {
      s.default_zero_inflation = number(item["default_zero_inflation"], key);
    }
    if (item["cells"]) {
      if (!item["cells"].IsSequence()) fail("population.studies: cells must be a list");
      for (const auto& c : item["cells"]) {
        CellRule rule;
        if (c["when"]) {
          if (!c["when"].IsMap()) fail("population.studies: when must be a mapping");
          for (const auto& kv : c["when"]) {
            rule.when[scalar(kv.first, key)] = strings(kv.second, key);
          }
        }
        if (!c["mean"]) fail("population.studies: every cell needs a mean");
        rule.mean = number(c["mean"], key);
        if (c["zero_inflation"]) rule.zero_inflation = number(c["zero_inflation"], key);
        s.cells.push_back(std::move(rule));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

AppConfig build(const YAML::Node& root) {
  check_keys(root, "");
  AppConfig c;
  auto get = [&](std::string_view k) { return lookup(root, k); };

  if (auto v = get("seed")) c.seed = seed_value(v, "seed");
  if (auto v = get("n")) c.n = count(v, "n", 1);
  if (auto v = get("study")) c.study = scalar(v, "study");
  if (auto v = get("predictors")) c.predictors = strings(v, "predictors");

  auto& p = c.population;
  if (auto v = get("population.source")) {
    const std::string s = scalar(v, "population.source");
    if (s == "synthetic") {
      p.source = PopulationConfig::Source::Synthetic;
    } else if (s == "csv") {
      p.source = PopulationConfig::Source::Csv;
    } else {
      fail("population.source must be synthetic or csv, got '" + s + "'");
    }
  }
  if (auto v = get("population.path")) p.path = scalar(v, "population.path");
  if (auto v = get("population.schema")) p.schema = parse_schema(v);
  if (auto v = get("population.N")) p.synth.N = count(v, "population.N", 1);
  if (auto v = get("population.seed")) p.synth.seed = seed_value(v, "population.seed");
  if (auto v = get("population.noise")) {
    const std::string s = scalar(v, "population.noise");
    if (s == "poisson") {
      p.synth.noise = Noise::Poisson;
    } else if (s == "none") {
      p.synth.noise = Noise::None;
    } else {
      fail("population.noise must be poisson or none, got '" + s + "'");
    }
  }
  if (auto v = get("population.predictors")) p.synth.predictors = parse_marginals(v);
  if (auto v = get("population.studies")) p.synth.studies = parse_studies(v);
  if (p.source == PopulationConfig::Source::Csv && p.path.empty()) {
    fail("population.path is required when population.source = csv");
  }
  try {
    (void)SuperpopulationModel(p.synth);
  } catch (const Error& e) {
    fail(std::string("population: ") + e.what());
  }

  if (auto v = get("design.kind")) {
    const std::string s = scalar(v, "design.kind");
    if (s == "stratified") {
      c.design.kind = DesignFamily::Kind::Stratified;
    } else if (s == "srswor") {
      c.design.kind = DesignFamily::Kind::Srswor;
    } else if (s == "pps") {
      c.design.kind = DesignFamily::Kind::PoissonPps;
    } else if (s == "census") {
      c.design.kind = DesignFamily::Kind::Census;
    } else {
      fail("design.kind must be stratified, srswor, pps or census, got '" + s + "'");
    }
  }
  if (auto v = get("design.variable")) c.design.variable = scalar(v, "design.variable");
  if (auto v = get("design.rates")) {
    c.design.rates = label_map<double>(v, "design.rates", number);
    for (const auto& [label, r] : c.design.rates) {
      if (!(r >= 0.0) || !std::isfinite(r)) fail("design.rates: rate of '" + label + "' must be >= 0");
    }
  }
  if (auto v = get("design.counts")) {
    c.design_counts = label_map<std::size_t>(
        v, "design.counts", [](const YAML::Node& n, std::string_view k) { return count(n, k); });
  }

  if (auto v = get("tree.min_node")) c.tree.min_node = count(v, "tree.min_node");
  if (auto v = get("tree.min_weight")) c.tree.min_weight = number(v, "tree.min_weight");
  if (auto v = get("tree.min_improve")) c.tree.min_improve = number(v, "tree.min_improve");
  if (auto v = get("tree.max_depth")) c.tree.max_depth = count(v, "tree.max_depth");
  if (auto v = get("tree.exhaustive_cutoff")) {
    c.tree.exhaustive_cutoff = count(v, "tree.exhaustive_cutoff");
  }
  c.tree.validate();

  if (auto v = get("stepwise.penalty")) c.stepwise.penalty = number(v, "stepwise.penalty");
  if (auto v = get("stepwise.max_steps")) c.stepwise.max_steps = count(v, "stepwise.max_steps");
  if (auto v = get("stepwise.interactions")) {
    c.stepwise.interactions = boolean(v, "stepwise.interactions");
  }

  if (auto v = get("estimate.estimator")) {
    const std::string s = scalar(v, "estimate.estimator");
    const auto kind = parse_estimator(s);
    if (!kind) fail("estimate.estimator: unknown estimator '" + s + "'");
    c.estimator = *kind;
  }
  if (auto v = get("estimate.tree")) c.tree_document = scalar(v, "estimate.tree");

  auto& sim = c.simulate;
  if (auto v = get("simulate.sample_sizes")) {
    if (!v.IsSequence()) fail("simulate.sample_sizes: expected a list");
    sim.sample_sizes.clear();
    for (const auto& item : v) sim.sample_sizes.push_back(count(item, "simulate.sample_sizes", 1));
  }
  if (auto v = get("simulate.replicates")) {
    sim.replicates = count(v, "simulate.replicates", 1);
  }
  if (auto v = get("simulate.estimators")) sim.estimators = estimators(v, "simulate.estimators");
  if (auto v = get("simulate.studies")) sim.studies = strings(v, "simulate.studies");
  if (auto v = get("simulate.threads")) {
    sim.threads = static_cast<int>(count(v, "simulate.threads"));
  }
  if (auto v = get("simulate.long")) c.long_mode = boolean(v, "simulate.long");
  if (auto v = get("simulate.svg")) c.svg = boolean(v, "simulate.svg");
  if (auto v = get("simulate.progress")) sim.progress = boolean(v, "simulate.progress");
  if (c.long_mode) {
    sim.sample_sizes = {2000, 3000, 4000, 5000, 6000};
    sim.replicates = 1000;
  }
  sim.design = c.design;
  sim.predictors = c.predictors;
  sim.base_seed = c.seed;
  sim.grow = c.tree;
  sim.stepwise = c.stepwise;
  sim.validate();
  return c;
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

std::string config_help() {
  std::ostringstream out;
  out << "Configuration keys (YAML; override with --set key=value):\n";
  for (const ConfigKey& k : kKeys) {
    out << "  " << k.key << " (" << k.type << ", default " << k.default_value
        << ")\n      " << k.description << "\n";
  }
  return out.str();
}

DesignSpec AppConfig::single_design(const Frame& frame) const {
  if (design_counts && design.kind == DesignFamily::Kind::Stratified) {
    return StratifiedDesign{design.variable, *design_counts};
  }
  return design.at(frame, n);
}

AppConfig parse_config(std::string_view yaml, const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    fail(std::string("invalid YAML: ") + e.what());
  }
  if (!root.IsDefined() || root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  for (const std::string& o : overrides) {
    const std::size_t eq = o.find('=');
    if (eq == std::string::npos || eq == 0) fail("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    if (!is_key(key)) fail("unknown configuration key '" + key + "'");
    YAML::Node value;
    try {
      value = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::Exception& e) {
      fail("override '" + o + "': " + e.what());
    }
    if (!value.IsDefined() || value.IsNull()) value = YAML::Node(std::string());
    if (!root.IsMap()) fail("configuration must be a mapping");
    assign(root, key, value);
  }
  try {
    return build(root);
  } catch (const YAML::Exception& e) {
    fail(std::string("configuration: ") + e.what());
  }
}

AppConfig load_config(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    fail(std::string("cannot read configuration: ") + e.what());
  }
  return parse_config(text, overrides);
}

std::vector<VariableSpec> population_schema(const PopulationConfig& population) {
  if (!population.schema.empty()) return population.schema;
  return SuperpopulationModel(population.synth).schema();
}

Frame make_frame(const PopulationConfig& population) {
  if (population.source == PopulationConfig::Source::Csv) {
    return load_frame(population.path, population_schema(population));
  }
  return synth_population(population.synth);
}

}  // namespace svytree
