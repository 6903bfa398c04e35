#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svytree/design.hpp"
#include "svytree/frame.hpp"

namespace svytree {

/// Stopping and admissibility controls for recursive partitioning.
struct GrowControls {
  /// Minimum raw sample units in each child.
  std::size_t min_node = 25;
  /// Minimum weighted count (sum of design weights) of each child.
  double min_weight = 25.0;
  /// A split is accepted only if its SSE reduction is at least this
  /// fraction of the root SSE.
  double min_improve = 0.001;
  std::size_t max_depth = 8;
  /// Categorical variables with at most this many levels present in a node
  /// are searched over all bipartitions; larger ones use the mean-ordered
  /// scan.
  std::size_t exhaustive_cutoff = 12;

  /// Throws ConfigError when a control is out of range.
  void validate() const;
};

enum class Side : std::uint8_t { Left, Right };

struct SplitRule {
  /// Index into the partition's predictor schema.
  std::size_t variable = 0;
  bool numeric = false;
  /// Categorical: level codes sent left, ascending. Every other level goes
  /// right.
  std::vector<std::size_t> left_levels;
  /// Numeric: x <= threshold goes left.
  double threshold = 0.0;

  bool goes_left(double value) const;

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

/// Sample columns prepared for growing: predictors in schema order, study
/// values and design weights aligned by sample position.
struct TrainingData {
  std::vector<VariableSpec> predictors;
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  std::vector<double> w;
  std::string study;

  std::size_t size() const noexcept { return y.size(); }
};

/// Throws EmptySample or UnknownVariable.
TrainingData make_training_data(const Frame& frame, const SampleDraw& sample,
                                std::span<const std::string> predictors,
                                const std::string& study);

/// Hajek mean (sum w y) / (sum w). Throws EmptyNode, NonpositiveWeight or
/// LengthMismatch.
double weighted_node_mean(std::span<const double> y, std::span<const double> w);

struct SplitCandidate {
  SplitRule rule;
  double reduction = 0.0;
};

enum class CategoricalSearch { Auto, Exhaustive, OrderedScan };

/// Best admissible split of one categorical predictor over `rows`, with no
/// improvement threshold applied. `min_weight_abs` is the absolute weighted
/// floor per child.
std::optional<SplitCandidate> best_categorical_split(
    const TrainingData& data, std::span<const std::size_t> rows,
    std::size_t variable, std::size_t min_node, double min_weight_abs,
    CategoricalSearch mode, std::size_t exhaustive_cutoff = 12);

/// Best admissible threshold split of one numeric predictor over `rows`.
std::optional<SplitCandidate> best_numeric_split(
    const TrainingData& data, std::span<const std::size_t> rows,
    std::size_t variable, std::size_t min_node, double min_weight_abs);

/// Best split over all predictors, or nullopt when none reduces the SSE by
/// at least controls.min_improve * root_sse. Ties go to the lowest
/// predictor index, then the smallest left subset or threshold.
std::optional<SplitCandidate> best_split(const TrainingData& data,
                                         std::span<const std::size_t> rows,
                                         const GrowControls& controls,
                                         double root_sse);

/// Weighted residual sum of squares about the Hajek mean.
double weighted_sse(const TrainingData& data, std::span<const std::size_t> rows);

struct TreeNode {
  /// Heap numbering: root 1, children 2k and 2k + 1.
  std::uint64_t id = 1;
  std::optional<SplitRule> rule;
  int left = -1;
  int right = -1;
  /// Hajek mean of the node; NaN when unknown (transcribed trees).
  double value = 0.0;
  double weighted_count = 0.0;
  std::size_t sample_count = 0;
  double sse = 0.0;
  /// SSE reduction of this node's split (internal nodes of grown trees).
  double reduction = 0.0;
  /// Position among the leaves (depth-first, left first); -1 for internal.
  int box = -1;

  bool is_leaf() const noexcept { return !rule.has_value(); }
};

struct Box {
  std::uint64_t id = 0;
  std::vector<std::pair<SplitRule, Side>> rule_path;
  double mu = 0.0;
  double weighted_count = 0.0;
  std::size_t sample_count = 0;
  double sse = 0.0;
};

/// A fitted regression tree. Its leaves are disjoint, exhaustive boxes over
/// the predictor space of `schema`.
class Partition {
 public:
  /// Nodes must be in depth-first preorder with the root first. Throws
  /// InvalidDocument when the structure is inconsistent.
  Partition(std::vector<VariableSpec> schema, std::string study,
            std::vector<TreeNode> nodes, GrowControls controls = {});

  const std::vector<VariableSpec>& schema() const noexcept { return schema_; }
  const std::string& study() const noexcept { return study_; }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const GrowControls& controls() const noexcept { return controls_; }

  std::size_t num_boxes() const noexcept { return leaves_.size(); }
  std::vector<Box> boxes() const;
  /// Node index of each box.
  const std::vector<std::size_t>& leaf_nodes() const noexcept { return leaves_; }

  /// Box containing x (values in schema order: level codes or numbers).
  std::size_t box_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
  /// Labelled record keyed by predictor name. Throws UnknownLevel or
  /// UnknownVariable.
  double predict(const std::map<std::string, std::string>& record) const;

 private:
  std::vector<VariableSpec> schema_;
  std::string study_;
  std::vector<TreeNode> nodes_;
  GrowControls controls_;
  std::vector<std::size_t> leaves_;
};

/// Recursive partitioning with Hajek leaf means. Deterministic; returns a
/// root-only partition when no split is admissible.
Partition grow_tree(const TrainingData& data, const GrowControls& controls);
Partition grow_tree(const Frame& frame, const SampleDraw& sample,
                    std::span<const std::string> predictors,
                    const std::string& study, const GrowControls& controls);

double predict(const Partition& partition,
               const std::map<std::string, std::string>& record);

/// Maps the partition's predictors onto frame columns by name, translating
/// categorical codes by label. Throws UnknownVariable or UnknownLevel.
class FrameBinding {
 public:
  FrameBinding(const Partition& partition, const Frame& frame);

  std::size_t box_of_row(std::size_t row) const;

 private:
  const Partition* partition_;
  std::vector<std::span<const double>> columns_;
  std::vector<std::vector<double>> code_map_;  // empty when identity/numeric
};

/// Box index of every frame row. OpenMP-parallel over rows.
std::vector<std::uint32_t> classify_rows(const Partition& partition,
                                         const Frame& frame);
/// Serial reference for classify_rows.
std::vector<std::uint32_t> classify_rows_serial(const Partition& partition,
                                                const Frame& frame);

/// Population count N_k of every box.
std::vector<std::size_t> box_population_counts(const Partition& partition,
                                               const Frame& frame);

}  // namespace svytree
