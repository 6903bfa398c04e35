#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svytree/design.hpp"
#include "svytree/frame.hpp"
#include "svytree/tree.hpp"

namespace svytree {

enum class EstimatorKind { HT, GregLinear, GregTree };

std::string_view estimator_name(EstimatorKind kind) noexcept;
/// Accepts "ht", "greg-linear", "greg-tree" (case-insensitive; "linear" and
/// "tree" also accepted).
std::optional<EstimatorKind> parse_estimator(std::string_view name);

struct WeightSummary {
  std::size_t count = 0;
  double min = 0.0;
  double max = 0.0;
  std::size_t negative = 0;
};

WeightSummary summarize_weights(std::span<const double> weights);

struct EstimateResult {
  EstimatorKind kind = EstimatorKind::HT;
  std::string study;
  double total = 0.0;
  /// Selected variables or a tree reference.
  std::string model_summary;
  /// One entry per sampled unit when the estimator is a weighting.
  std::optional<std::vector<double>> calibration_weights;
  /// Set when the requested estimator failed and HT was substituted.
  std::optional<std::string> fallback_reason;
};

/// Structured JSON record: estimator, study, total, model, weight summary.
std::string to_json(const EstimateResult& result);

/// sum w_j y_j. Throws LengthMismatch or NonpositiveWeight.
double ht_total(std::span<const double> y, std::span<const double> w);

/// Study values of the sampled units.
std::vector<double> sample_values(const Frame& frame, const SampleDraw& sample,
                                  const std::string& study);

/// Generalized regression estimator from precomputed predictions:
/// sum_s w_j (y_j - yhat_j) + population_prediction_total.
double greg_total(std::span<const double> y, std::span<const double> w,
                  std::span<const double> sample_predictions,
                  double population_prediction_total);

/// Generalized regression estimator with a row-level prediction function
/// evaluated over every unit of the frame. Exceptions raised by `predict`
/// are reported as PredictionFailure.
double greg_total(const SampleDraw& sample, const Frame& frame,
                  const std::string& study,
                  const std::function<double(std::size_t row)>& predict);

// ---------------------------------------------------------------------------
// Linear calibration

struct LinearCalibration {
  std::vector<double> weights;
  /// Columns retained by the rank-revealing factorisation.
  std::vector<bool> kept;
  /// Weighted least-squares coefficients on the kept columns.
  Eigen::VectorXd coefficients;
  WeightSummary summary;
};

/// Calibrated weights w_j [1 + (t_x - t_x,ht)^T (sum_s w x x^T)^{-1} x_j].
/// `x` is n x p over the sample; `population_totals` has p entries. Collinear
/// columns are dropped first-come-first-kept; SingularSystem is thrown when
/// the remaining columns cannot reproduce every population total.
LinearCalibration linear_weights(std::span<const double> design_weights,
                                 const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& population_totals,
                                 std::span<const double> y = {});

/// Working linear model: intercept plus whole indicator blocks (or numeric
/// columns) for main effects, and optional two-way cross-classifications.
struct LinearModelSpec {
  bool intercept = true;
  std::vector<std::string> variables;
  std::vector<std::pair<std::string, std::string>> interactions;

  std::string describe() const;
  friend bool operator==(const LinearModelSpec&, const LinearModelSpec&) = default;
};

struct DesignMatrix {
  Eigen::MatrixXd sample_x;
  Eigen::VectorXd population_totals;
  std::vector<std::string> column_names;
};

DesignMatrix build_design_matrix(const Frame& frame, const SampleDraw& sample,
                                 const LinearModelSpec& model);

EstimateResult linear_estimator(const Frame& frame, const SampleDraw& sample,
                                const std::string& study,
                                const LinearModelSpec& model);

struct StepwiseControls {
  /// Charge per parameter; 2 is AIC-style, log(n) is BIC-style.
  double penalty = 2.0;
  std::size_t max_steps = std::numeric_limits<std::size_t>::max();
  /// Also offer every two-way cross-classification as a candidate block.
  bool interactions = false;
};

struct StepwiseResult {
  LinearModelSpec model;
  /// Criterion after each accepted step, starting with the intercept only.
  std::vector<double> criterion_path;
};

/// Greedy forward selection of whole variable blocks minimising
/// n log(RSS_w / n) + penalty * rank, where RSS_w is the design-weighted
/// residual sum of squares. Stops when no block lowers the criterion; ties go
/// to the earlier candidate.
StepwiseResult stepwise_select(const Frame& frame, const SampleDraw& sample,
                               std::span<const std::string> candidates,
                               const std::string& study,
                               const StepwiseControls& controls);

// ---------------------------------------------------------------------------
// Regression-tree estimator

struct TreeEstimate {
  EstimateResult result;
  double greg_form = 0.0;
  double poststratified_form = 0.0;
  std::vector<std::size_t> box_population;  ///< N_k
  std::vector<double> box_weighted_count;   ///< HT estimate of N_k
  std::vector<double> box_mean;             ///< Hajek mean from this sample
};

/// Evaluates both the GREG plug-in and the post-stratified total, throws
/// IdentityViolation if they differ by more than 1e-8 relative, and returns
/// the post-stratified value with calibration weights. Throws EmptySampleBox
/// when a box holds no sampled unit.
TreeEstimate tree_estimator(const SampleDraw& sample, const Frame& frame,
                            const Partition& partition);

/// Same, with the box of every frame row precomputed (classify_rows).
TreeEstimate tree_estimator(const SampleDraw& sample, const Frame& frame,
                            const Partition& partition,
                            std::span<const std::uint32_t> row_boxes,
                            const std::string& study);

/// (N_k / #(B_k)) / pi_j for unit j in box k.
std::vector<double> calibration_weights(const Partition& partition,
                                        const SampleDraw& sample,
                                        const Frame& frame);

}  // namespace svytree
