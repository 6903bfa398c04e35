#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "svytree/frame.hpp"

namespace svytree {

struct CensusDesign {};

struct SrsworDesign {
  std::size_t n = 0;
};

/// Independent SRSWOR within the strata of a categorical variable. Levels
/// without an entry in `counts` are not sampled (n_h = 0).
struct StratifiedDesign {
  std::string strata;
  std::map<std::string, std::size_t> counts;
};

/// Poisson sampling with probability proportional to a positive size
/// measure; `n` is the expected sample size.
struct PoissonPpsDesign {
  std::string size_variable;
  double n = 0.0;
};

using DesignSpec =
    std::variant<CensusDesign, SrsworDesign, StratifiedDesign, PoissonPpsDesign>;

std::string describe(const DesignSpec& design);

/// Population count of every level of a categorical column.
std::vector<std::size_t> level_counts(const Frame& frame, std::size_t column);

/// Stratified allocation whose per-stratum sampling rates are proportional
/// to `rates` (keyed by level label) and sum to exactly n units. Strata that
/// would exceed their population are taken in full and the remainder is
/// redistributed; integer sizes use largest-remainder rounding with ties
/// going to the earlier level. Throws InfeasibleDesign when n exceeds the
/// units in strata with a positive rate.
StratifiedDesign allocate_by_rates(const Frame& frame, const std::string& strata,
                                   const std::map<std::string, double>& rates,
                                   std::size_t n);

/// Realised sample. `members` is ascending; pi and weights align with it.
struct SampleDraw {
  std::vector<std::size_t> members;
  std::vector<double> pi;
  std::vector<double> weights;

  std::size_t size() const noexcept { return members.size(); }
};

/// First-order inclusion probabilities for every unit of the frame.
/// Throws OversampledStratum, NonpositiveSize, InfeasibleDesign or
/// UnknownVariable.
std::vector<double> compute_inclusion_probs(const DesignSpec& design,
                                            const Frame& frame);

/// Poisson-PPS probabilities min(1, n s_j / sum s) with iterative capping:
/// units reaching 1 are fixed and the remaining expected size is spread over
/// the rest until no further unit caps. Exposed for direct testing.
std::vector<double> pps_probabilities(std::span<const double> sizes, double n);

/// Precomputes probabilities and stratum membership once, then draws any
/// number of samples. Immutable after construction; draw() is safe to call
/// concurrently.
class Sampler {
 public:
  Sampler(DesignSpec design, const Frame& frame);

  SampleDraw draw(std::uint64_t seed) const;

  const std::vector<double>& inclusion_probs() const noexcept { return pi_; }
  const DesignSpec& design() const noexcept { return design_; }
  double expected_size() const noexcept { return expected_n_; }

 private:
  DesignSpec design_;
  std::size_t population_ = 0;
  std::vector<double> pi_;
  std::vector<std::vector<std::size_t>> strata_members_;
  std::vector<std::size_t> strata_n_;
  double expected_n_ = 0.0;
};

SampleDraw draw_sample(const DesignSpec& design, const Frame& frame,
                       std::uint64_t seed);

struct DesignDiagnostics {
  std::size_t population = 0;
  double min_pi = 0.0;
  double max_pi = 0.0;
  double n_min_pi = 0.0;      ///< N * min pi
  double max_weight = 0.0;    ///< 1 / min pi
  double weight_ratio = 0.0;  ///< max pi / min pi
  double expected_n = 0.0;    ///< sum of pi
  double sampling_fraction = 0.0;
};

/// Throws ZeroInclusionProbability if any unit has pi = 0.
DesignDiagnostics design_diagnostics(const DesignSpec& design,
                                     const Frame& frame);
DesignDiagnostics diagnostics_from_probs(std::span<const double> pi);

}  // namespace svytree
