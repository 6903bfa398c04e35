#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svytree/design.hpp"
#include "svytree/estimate.hpp"
#include "svytree/frame.hpp"
#include "svytree/tree.hpp"

namespace svytree {

/// A design parameterised by the target sample size.
struct DesignFamily {
  enum class Kind { Stratified, Srswor, PoissonPps, Census };
  Kind kind = Kind::Stratified;
  /// Strata variable (Stratified) or size variable (PoissonPps).
  std::string variable = "size";
  /// Relative sampling rate per stratum label (Stratified).
  std::map<std::string, double> rates;

  /// Stratified by size class with rates 0.5%, 1%, 2%, 5%, 15%, 40% for
  /// classes 1-6, rescaled to each target n.
  static DesignFamily reference();

  DesignSpec at(const Frame& frame, std::size_t n) const;
};

struct SimConfig {
  DesignFamily design = DesignFamily::reference();
  std::vector<std::size_t> sample_sizes{500, 1000, 2000};
  std::size_t replicates = 200;
  std::vector<EstimatorKind> estimators{EstimatorKind::HT,
                                        EstimatorKind::GregLinear,
                                        EstimatorKind::GregTree};
  /// Study variables; empty means every study column of the frame.
  std::vector<std::string> studies;
  /// Predictors offered to the tree and the stepwise model; empty means
  /// every predictor column.
  std::vector<std::string> predictors;
  std::uint64_t base_seed = 1;
  GrowControls grow;
  StepwiseControls stepwise;
  /// OpenMP threads for the replicate loop; 0 uses the runtime default.
  int threads = 0;
  /// When set, replicates execute in an order shuffled with this seed.
  /// Results never depend on it.
  std::optional<std::uint64_t> execution_shuffle;
  /// Replicate counter on standard error.
  bool progress = false;

  /// Throws ConfigError.
  void validate() const;
};

struct SimCell {
  std::string study;
  EstimatorKind estimator = EstimatorKind::HT;
  std::size_t n = 0;
  std::size_t replicates = 0;
  std::size_t successes = 0;
  std::size_t fallbacks = 0;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  /// Standard error of the replicate mean.
  double bias_se = 0.0;
  /// (1/R) sum (t - mean)^2, so that mse = variance + bias^2.
  double variance = 0.0;
  double mse = 0.0;
  /// Delta-method standard error of mse from the fourth moment.
  double mse_se = 0.0;
  /// mse / mse of HT for the same study and n (NaN without HT).
  double relative_efficiency = 0.0;
  /// mean |t - truth| / N and its standard error.
  double mean_abs_error_per_unit = 0.0;
  double mae_se = 0.0;
  std::optional<std::string> first_fallback_reason;
  /// Per-replicate estimates in replicate order.
  std::vector<double> estimates;
};

struct SimReport {
  std::size_t population = 0;
  std::size_t replicates = 0;
  std::vector<std::size_t> sample_sizes;
  std::map<std::string, double> truth;
  std::vector<SimCell> cells;
  double seconds = 0.0;

  const SimCell& cell(const std::string& study, EstimatorKind est,
                      std::size_t n) const;
};

/// Throws InfeasibleDesign (bad sizes) and ConfigError; estimator failures
/// within a replicate become recorded HT fallbacks.
SimReport run_simulation(const Frame& frame, const SimConfig& config);

/// (1/R) sum_r (t_r - truth)^2. Throws EmptyVector.
double empirical_mse(std::span<const double> estimates, double truth);

/// Summary statistics of one cell from its replicate estimates.
SimCell summarize_cell(std::span<const double> estimates, double truth,
                       std::size_t population);

struct ConsistencyPoint {
  std::size_t n = 0;
  double mean_abs_error_per_unit = 0.0;
  double se = 0.0;
};

struct ConsistencyResult {
  bool pass = false;
  std::vector<ConsistencyPoint> trend;
};

/// Passes when mean |t - t_y| / N is non-increasing in n up to a slack of
/// two standard errors of each step's difference. Throws
/// InsufficientSampleSizes with fewer than three sizes.
ConsistencyResult consistency_check(const SimReport& report,
                                    const std::string& study,
                                    EstimatorKind estimator);

/// One row per study x estimator x n.
std::string report_csv(const SimReport& report);
/// Plain-text summary including wall-clock time.
std::string report_summary(const SimReport& report);
/// MSE against n, one panel per study and one line per estimator.
std::string report_svg(const SimReport& report);

}  // namespace svytree
