#include "svytree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "svytree/error.hpp"
#include "svytree/numeric.hpp"

namespace svytree {

void GrowControls::validate() const {
  if (min_node < 2) throw Error(Errc::ConfigError, "tree.min_node must be >= 2");
  if (!(min_weight >= 0.0) || !std::isfinite(min_weight)) {
    throw Error(Errc::ConfigError, "tree.min_weight must be >= 0");
  }
  if (!(min_improve >= 0.0) || !std::isfinite(min_improve)) {
    throw Error(Errc::ConfigError, "tree.min_improve must be >= 0");
  }
  if (max_depth > 62) throw Error(Errc::ConfigError, "tree.max_depth must be <= 62");
  if (exhaustive_cutoff > 24) {
    throw Error(Errc::ConfigError, "tree.exhaustive_cutoff must be <= 24");
  }
}

bool SplitRule::goes_left(double value) const {
  if (numeric) return value <= threshold;
  const auto code = static_cast<std::size_t>(value);
  return std::binary_search(left_levels.begin(), left_levels.end(), code);
}

TrainingData make_training_data(const Frame& frame, const SampleDraw& sample,
                                std::span<const std::string> predictors,
                                const std::string& study) {
  if (sample.size() == 0) throw Error(Errc::EmptySample, "sample is empty");
  if (predictors.empty()) {
    throw Error(Errc::UnknownVariable, "no predictors given");
  }
  TrainingData d;
  d.study = study;
  const std::size_t ycol = frame.column_index(study);
  if (frame.spec(ycol).is_categorical()) {
    throw Error(Errc::UnknownVariable,
                "study variable '" + study + "' is categorical");
  }
  for (const auto& name : predictors) {
    const std::size_t col = frame.column_index(name);
    d.predictors.push_back(frame.spec(col));
    const auto values = frame.column(col);
    std::vector<double> xs;
    xs.reserve(sample.size());
    for (std::size_t j : sample.members) xs.push_back(values[j]);
    d.x.push_back(std::move(xs));
  }
  const auto yv = frame.column(ycol);
  d.y.reserve(sample.size());
  for (std::size_t j : sample.members) d.y.push_back(yv[j]);
  d.w = sample.weights;
  return d;
}

double weighted_node_mean(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) {
    throw Error(Errc::LengthMismatch, "y and w differ in length");
  }
  if (y.empty()) throw Error(Errc::EmptyNode, "node has no units");
  CompensatedSum sw, swy;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(w[i] > 0.0)) throw Error(Errc::NonpositiveWeight, "weight must be > 0");
    sw.add(w[i]);
    swy.add(w[i] * y[i]);
  }
  return swy.value() / sw.value();
}

double weighted_sse(const TrainingData& data, std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  CompensatedSum sw, swy;
  for (std::size_t r : rows) {
    sw.add(data.w[r]);
    swy.add(data.w[r] * data.y[r]);
  }
  const double mu = swy.value() / sw.value();
  CompensatedSum sse;
  for (std::size_t r : rows) {
    const double e = data.y[r] - mu;
    sse.add(data.w[r] * e * e);
  }
  return sse.value();
}

namespace {

struct SideStats {
  double w = 0.0;
  double s = 0.0;
  std::size_t n = 0;
};

// Between-group weighted sum of squares. Symmetric in its arguments bit for
// bit, so a bipartition scores the same whichever side is called left.
double between_ss(const SideStats& a, const SideStats& b) {
  const double diff = a.s / a.w - b.s / b.w;
  return (a.w * b.w / (a.w + b.w)) * (diff * diff);
}

bool admissible(const SideStats& s, std::size_t min_node, double min_weight_abs) {
  return s.n >= min_node && s.w >= min_weight_abs && s.w > 0.0;
}

struct LevelTable {
  std::vector<std::size_t> present;  // ascending level codes with units
  std::vector<double> w;             // per present level
  std::vector<double> s;
  std::vector<std::size_t> n;
};

LevelTable level_table(const TrainingData& data,
                       std::span<const std::size_t> rows, std::size_t variable) {
  const std::size_t L = data.predictors[variable].levels.size();
  std::vector<CompensatedSum> w(L), s(L);
  std::vector<std::size_t> n(L, 0);
  const auto& x = data.x[variable];
  for (std::size_t r : rows) {
    const auto code = static_cast<std::size_t>(x[r]);
    w[code].add(data.w[r]);
    s[code].add(data.w[r] * data.y[r]);
    ++n[code];
  }
  LevelTable t;
  for (std::size_t l = 0; l < L; ++l) {
    if (n[l] == 0) continue;
    t.present.push_back(l);
    t.w.push_back(w[l].value());
    t.s.push_back(s[l].value());
    t.n.push_back(n[l]);
  }
  return t;
}

// Sums the levels whose membership flag equals `side`, in ascending level
// order. `in_a` is indexed by position in table.present.
SideStats sum_side(const LevelTable& t, const std::vector<char>& in_a, char side) {
  CompensatedSum w, s;
  SideStats out;
  for (std::size_t i = 0; i < t.present.size(); ++i) {
    if (in_a[i] != side) continue;
    w.add(t.w[i]);
    s.add(t.s[i]);
    out.n += t.n[i];
  }
  out.w = w.value();
  out.s = s.value();
  return out;
}

std::vector<std::size_t> codes_of(const LevelTable& t, const std::vector<char>& in_a) {
  std::vector<std::size_t> codes;
  for (std::size_t i = 0; i < t.present.size(); ++i) {
    if (in_a[i]) codes.push_back(t.present[i]);
  }
  return codes;
}

struct CategoricalBest {
  std::vector<char> in_a;
  double reduction = -1.0;
  SideStats a, b;
  bool found = false;
};

// Offers a bipartition (side A must contain present[0]) to the running best.
void offer(CategoricalBest& best, const LevelTable& t, const std::vector<char>& in_a,
           std::size_t min_node, double min_weight_abs) {
  const SideStats a = sum_side(t, in_a, 1);
  const SideStats b = sum_side(t, in_a, 0);
  if (!admissible(a, min_node, min_weight_abs) ||
      !admissible(b, min_node, min_weight_abs)) {
    return;
  }
  const double red = between_ss(a, b);
  bool take = !best.found || red > best.reduction;
  if (best.found && red == best.reduction) {
    take = codes_of(t, in_a) < codes_of(t, best.in_a);
  }
  if (take) {
    best.in_a = in_a;
    best.reduction = red;
    best.a = a;
    best.b = b;
    best.found = true;
  }
}

}  // namespace

std::optional<SplitCandidate> best_categorical_split(
    const TrainingData& data, std::span<const std::size_t> rows,
    std::size_t variable, std::size_t min_node, double min_weight_abs,
    CategoricalSearch mode, std::size_t exhaustive_cutoff) {
  const auto& spec = data.predictors.at(variable);
  const LevelTable t = level_table(data, rows, variable);
  const std::size_t P = t.present.size();
  if (P < 2) return std::nullopt;

  if (mode == CategoricalSearch::Auto) {
    mode = P <= exhaustive_cutoff ? CategoricalSearch::Exhaustive
                                  : CategoricalSearch::OrderedScan;
  }
  if (mode == CategoricalSearch::Exhaustive && P > 24) {
    throw Error(Errc::ConfigError, "exhaustive search over more than 24 levels");
  }

  CategoricalBest best;
  std::vector<char> in_a(P, 0);
  if (mode == CategoricalSearch::Exhaustive) {
    const std::uint64_t limit = (std::uint64_t{1} << (P - 1)) - 1;
    for (std::uint64_t mask = 0; mask < limit; ++mask) {
      in_a[0] = 1;
      for (std::size_t i = 1; i < P; ++i) in_a[i] = (mask >> (i - 1)) & 1U;
      offer(best, t, in_a, min_node, min_weight_abs);
    }
  } else {
    std::vector<std::size_t> order(P);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return t.s[a] / t.w[a] < t.s[b] / t.w[b];
    });
    for (std::size_t k = 1; k < P; ++k) {
      std::fill(in_a.begin(), in_a.end(), 0);
      for (std::size_t i = 0; i < k; ++i) in_a[order[i]] = 1;
      if (!in_a[0]) {
        for (auto& f : in_a) f = static_cast<char>(!f);
      }
      offer(best, t, in_a, min_node, min_weight_abs);
    }
  }
  if (!best.found) return std::nullopt;

  // Levels without units in this node follow the heavier child.
  SplitCandidate out;
  out.rule.variable = variable;
  out.rule.numeric = false;
  out.rule.left_levels = codes_of(t, best.in_a);
  if (best.a.w >= best.b.w) {
    for (std::size_t l = 0; l < spec.levels.size(); ++l) {
      if (!std::binary_search(t.present.begin(), t.present.end(), l)) {
        out.rule.left_levels.push_back(l);
      }
    }
    std::sort(out.rule.left_levels.begin(), out.rule.left_levels.end());
  }
  out.reduction = best.reduction;
  return out;
}

std::optional<SplitCandidate> best_numeric_split(
    const TrainingData& data, std::span<const std::size_t> rows,
    std::size_t variable, std::size_t min_node, double min_weight_abs) {
  const auto& x = data.x.at(variable);
  std::vector<std::size_t> sorted(rows.begin(), rows.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const std::size_t m = sorted.size();
  if (m < 2) return std::nullopt;

  std::vector<SideStats> prefix(m), suffix(m);
  {
    CompensatedSum w, s;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t r = sorted[i];
      w.add(data.w[r]);
      s.add(data.w[r] * data.y[r]);
      prefix[i] = {w.value(), s.value(), i + 1};
    }
  }
  {
    CompensatedSum w, s;
    for (std::size_t i = m; i-- > 0;) {
      const std::size_t r = sorted[i];
      w.add(data.w[r]);
      s.add(data.w[r] * data.y[r]);
      suffix[i] = {w.value(), s.value(), m - i};
    }
  }

  std::optional<SplitCandidate> best;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const double lo = x[sorted[i]];
    const double hi = x[sorted[i + 1]];
    if (!(lo < hi)) continue;
    const SideStats& a = prefix[i];
    const SideStats& b = suffix[i + 1];
    if (!admissible(a, min_node, min_weight_abs) ||
        !admissible(b, min_node, min_weight_abs)) {
      continue;
    }
    const double red = between_ss(a, b);
    if (!best || red > best->reduction) {
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid < hi)) mid = lo;
      SplitCandidate c;
      c.rule.variable = variable;
      c.rule.numeric = true;
      c.rule.threshold = mid;
      c.reduction = red;
      best = std::move(c);
    }
  }
  return best;
}

std::optional<SplitCandidate> best_split(const TrainingData& data,
                                         std::span<const std::size_t> rows,
                                         const GrowControls& controls,
                                         double root_sse) {
  if (rows.size() < 2 * controls.min_node) return std::nullopt;

  CompensatedSum sw, swyy;
  for (std::size_t r : rows) {
    sw.add(data.w[r]);
    swyy.add(data.w[r] * data.y[r] * data.y[r]);
  }
  // Effectively constant response: every reduction is rounding noise.
  const double node_sse = weighted_sse(data, rows);
  if (!(node_sse > 1e-12 * swyy.value())) return std::nullopt;

  const double min_weight_abs = controls.min_weight;

  std::optional<SplitCandidate> best;
  for (std::size_t v = 0; v < data.predictors.size(); ++v) {
    std::optional<SplitCandidate> c;
    if (data.predictors[v].is_categorical()) {
      c = best_categorical_split(data, rows, v, controls.min_node,
                                 min_weight_abs, CategoricalSearch::Auto,
                                 controls.exhaustive_cutoff);
    } else {
      c = best_numeric_split(data, rows, v, controls.min_node, min_weight_abs);
    }
    if (c && (!best || c->reduction > best->reduction)) best = std::move(c);
  }
  if (!best) return std::nullopt;
  if (!(best->reduction > 0.0) ||
      best->reduction < controls.min_improve * root_sse) {
    return std::nullopt;
  }
  return best;
}

namespace {

class Grower {
 public:
  Grower(const TrainingData& data, const GrowControls& controls)
      : data_(data), controls_(controls) {}

  std::vector<TreeNode> run() {
    std::vector<std::size_t> rows(data_.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    root_sse_ = weighted_sse(data_, rows);
    build(std::move(rows), 0, 1);
    return std::move(nodes_);
  }

 private:
  std::size_t build(std::vector<std::size_t> rows, std::size_t depth,
                    std::uint64_t id) {
    TreeNode node;
    node.id = id;
    CompensatedSum sw, swy;
    for (std::size_t r : rows) {
      sw.add(data_.w[r]);
      swy.add(data_.w[r] * data_.y[r]);
    }
    node.weighted_count = sw.value();
    node.value = swy.value() / sw.value();
    node.sample_count = rows.size();
    node.sse = weighted_sse(data_, rows);
    const std::size_t idx = nodes_.size();
    nodes_.push_back(node);

    if (depth >= controls_.max_depth) return idx;
    auto cand = best_split(data_, rows, controls_, root_sse_);
    if (!cand) return idx;

    std::vector<std::size_t> left, right;
    const auto& x = data_.x[cand->rule.variable];
    for (std::size_t r : rows) {
      (cand->rule.goes_left(x[r]) ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[idx].rule = cand->rule;
    nodes_[idx].reduction = cand->reduction;
    const std::size_t l = build(std::move(left), depth + 1, 2 * id);
    const std::size_t r = build(std::move(right), depth + 1, 2 * id + 1);
    nodes_[idx].left = static_cast<int>(l);
    nodes_[idx].right = static_cast<int>(r);
    return idx;
  }

  const TrainingData& data_;
  const GrowControls& controls_;
  double root_sse_ = 0.0;
  std::vector<TreeNode> nodes_;
};

}  // namespace

Partition grow_tree(const TrainingData& data, const GrowControls& controls) {
  controls.validate();
  if (data.size() == 0) throw Error(Errc::EmptySample, "sample is empty");
  if (data.w.size() != data.y.size() || data.x.size() != data.predictors.size()) {
    throw Error(Errc::LengthMismatch, "training columns are misaligned");
  }
  for (double w : data.w) {
    if (!(w > 0.0)) throw Error(Errc::NonpositiveWeight, "weight must be > 0");
  }
  Grower g(data, controls);
  return Partition(data.predictors, data.study, g.run(), controls);
}

Partition grow_tree(const Frame& frame, const SampleDraw& sample,
                    std::span<const std::string> predictors,
                    const std::string& study, const GrowControls& controls) {
  return grow_tree(make_training_data(frame, sample, predictors, study),
                   controls);
}

Partition::Partition(std::vector<VariableSpec> schema, std::string study,
                     std::vector<TreeNode> nodes, GrowControls controls)
    : schema_(std::move(schema)),
      study_(std::move(study)),
      nodes_(std::move(nodes)),
      controls_(controls) {
  auto bad = [](const std::string& m) { throw Error(Errc::InvalidDocument, m); };
  if (schema_.empty()) bad("tree has no predictors");
  if (nodes_.empty()) bad("tree has no nodes");
  if (nodes_[0].id != 1) bad("root node must have id 1");

  std::vector<int> refs(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) {
      if (n.left != -1 || n.right != -1) bad("leaf node has children");
      if (!std::isfinite(n.value)) {
        bad("leaf " + std::to_string(n.id) + " has no value");
      }
      continue;
    }
    const auto& rule = *n.rule;
    if (rule.variable >= schema_.size()) bad("rule references unknown variable");
    const auto& spec = schema_[rule.variable];
    if (rule.numeric) {
      if (spec.is_categorical()) bad("threshold rule on categorical variable");
      if (!std::isfinite(rule.threshold)) bad("non-finite threshold");
    } else {
      if (!spec.is_categorical()) bad("subset rule on numeric variable");
      const auto& ll = rule.left_levels;
      if (ll.empty() || ll.size() >= spec.levels.size()) {
        bad("split of '" + spec.name + "' is not a proper nonempty subset");
      }
      if (!std::is_sorted(ll.begin(), ll.end()) ||
          std::adjacent_find(ll.begin(), ll.end()) != ll.end() ||
          ll.back() >= spec.levels.size()) {
        bad("invalid left level set for '" + spec.name + "'");
      }
    }
    for (int c : {n.left, n.right}) {
      if (c <= 0 || static_cast<std::size_t>(c) >= nodes_.size()) {
        bad("child index out of range");
      }
      ++refs[static_cast<std::size_t>(c)];
    }
    if (nodes_[static_cast<std::size_t>(n.left)].id != 2 * n.id ||
        nodes_[static_cast<std::size_t>(n.right)].id != 2 * n.id + 1) {
      bad("child ids of node " + std::to_string(n.id) + " are not 2k, 2k+1");
    }
  }
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i] != 1) bad("node " + std::to_string(nodes_[i].id) + " is not reachable exactly once");
  }

  // Depth-first, left-first leaf order.
  std::vector<std::size_t> stack{0};
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    auto& n = nodes_[i];
    if (n.is_leaf()) {
      n.box = static_cast<int>(leaves_.size());
      leaves_.push_back(i);
    } else {
      n.box = -1;
      stack.push_back(static_cast<std::size_t>(n.right));
      stack.push_back(static_cast<std::size_t>(n.left));
    }
  }
}

std::vector<Box> Partition::boxes() const {
  std::vector<Box> out(leaves_.size());
  std::vector<std::pair<SplitRule, Side>> path;
  // Recursive walk carrying the rule path.
  auto walk = [&](auto&& self, std::size_t i) -> void {
    const auto& n = nodes_[i];
    if (n.is_leaf()) {
      Box& b = out[static_cast<std::size_t>(n.box)];
      b.id = n.id;
      b.rule_path = path;
      b.mu = n.value;
      b.weighted_count = n.weighted_count;
      b.sample_count = n.sample_count;
      b.sse = n.sse;
      return;
    }
    path.emplace_back(*n.rule, Side::Left);
    self(self, static_cast<std::size_t>(n.left));
    path.back().second = Side::Right;
    self(self, static_cast<std::size_t>(n.right));
    path.pop_back();
  };
  walk(walk, 0);
  return out;
}

std::size_t Partition::box_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& rule = *nodes_[i].rule;
    i = static_cast<std::size_t>(rule.goes_left(x[rule.variable]) ? nodes_[i].left
                                                                   : nodes_[i].right);
  }
  return static_cast<std::size_t>(nodes_[i].box);
}

double Partition::predict(std::span<const double> x) const {
  return nodes_[leaves_[box_index(x)]].value;
}

double Partition::predict(const std::map<std::string, std::string>& record) const {
  std::vector<double> x(schema_.size());
  for (std::size_t v = 0; v < schema_.size(); ++v) {
    const auto& spec = schema_[v];
    auto it = record.find(spec.name);
    if (it == record.end()) {
      throw Error(Errc::UnknownVariable, "record lacks '" + spec.name + "'");
    }
    if (spec.is_categorical()) {
      auto idx = spec.level_index(it->second);
      if (!idx) {
        throw Error(Errc::UnknownLevel, "level '" + it->second + "' not in '" +
                                            spec.name + "'");
      }
      x[v] = static_cast<double>(*idx);
    } else {
      auto num = parse_number(it->second);
      if (!num) {
        throw Error(Errc::NonNumeric, "'" + it->second + "' for '" + spec.name + "'");
      }
      x[v] = *num;
    }
  }
  return predict(x);
}

double predict(const Partition& partition,
               const std::map<std::string, std::string>& record) {
  return partition.predict(record);
}

FrameBinding::FrameBinding(const Partition& partition, const Frame& frame)
    : partition_(&partition) {
  const auto& schema = partition.schema();
  code_map_.resize(schema.size());
  for (std::size_t v = 0; v < schema.size(); ++v) {
    const std::size_t col = frame.column_index(schema[v].name);
    const auto& fspec = frame.spec(col);
    columns_.push_back(frame.column(col));
    if (schema[v].is_categorical() != fspec.is_categorical()) {
      throw Error(Errc::UnknownVariable,
                  "variable '" + schema[v].name + "' differs in kind");
    }
    if (!fspec.is_categorical() || fspec.levels == schema[v].levels) continue;
    auto& map = code_map_[v];
    for (const auto& label : fspec.levels) {
      auto idx = schema[v].level_index(label);
      if (!idx) {
        throw Error(Errc::UnknownLevel, "level '" + label + "' of '" +
                                            fspec.name + "' unknown to tree");
      }
      map.push_back(static_cast<double>(*idx));
    }
  }
}

std::size_t FrameBinding::box_of_row(std::size_t row) const {
  const auto& nodes = partition_->nodes();
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& rule = *nodes[i].rule;
    const std::size_t v = rule.variable;
    double value = columns_[v][row];
    if (!code_map_[v].empty()) value = code_map_[v][static_cast<std::size_t>(value)];
    i = static_cast<std::size_t>(rule.goes_left(value) ? nodes[i].left : nodes[i].right);
  }
  return static_cast<std::size_t>(nodes[i].box);
}

std::vector<std::size_t> box_population_counts(const Partition& partition,
                                               const Frame& frame) {
  std::vector<std::size_t> counts(partition.num_boxes(), 0);
  for (auto b : classify_rows(partition, frame)) ++counts[b];
  return counts;
}

}  // namespace svytree
