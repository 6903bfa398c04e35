#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "svytree/frame.hpp"

namespace svytree {

/// One categorical predictor of the synthetic frame and its marginal
/// frequencies (relative weights, normalised internally).
struct PredictorMarginal {
  std::string name;
  std::vector<std::string> levels;
  std::vector<double> weights;
};

/// A block of cells sharing one superpopulation mean. A predictor missing
/// from `when` matches every level.
struct CellRule {
  std::map<std::string, std::vector<std::string>> when;
  double mean = 0.0;
  /// Probability of a structural zero; nonzero draws are Poisson with mean
  /// mean / (1 - zero_inflation), so E[Y | x] stays equal to `mean`.
  double zero_inflation = 0.0;
};

enum class Noise { Poisson, None };

struct StudyModel {
  std::string name;
  double default_mean = 0.0;
  double default_zero_inflation = 0.0;
  /// First matching rule wins.
  std::vector<CellRule> cells;
};

struct SynthConfig {
  std::uint64_t N = 0;
  std::uint64_t seed = 0;
  Noise noise = Noise::Poisson;
  std::vector<PredictorMarginal> predictors;
  std::vector<StudyModel> studies;

  /// industry (24 two-digit sector codes), size (1-6), multi (0/1),
  /// region (1-6) with this toolkit's own marginals.
  static std::vector<PredictorMarginal> default_predictors();

  /// Reference population: N = 187115 with four occupation-like study
  /// variables (teachers, waitstaff, bartenders, sales_managers).
  static SynthConfig reference();
};

/// Validated, index-based form of the superpopulation mean function.
class SuperpopulationModel {
 public:
  /// Throws EmptyPopulation, InvalidCellMean, UnknownVariable, UnknownLevel
  /// or SchemaMismatch.
  explicit SuperpopulationModel(const SynthConfig& config);

  std::vector<VariableSpec> schema() const;

  std::size_t num_predictors() const noexcept { return predictors_.size(); }
  std::size_t num_studies() const noexcept { return studies_.size(); }
  std::size_t study_index(std::string_view name) const;

  /// Conditional mean h(x) for level codes in predictor order.
  double mean(std::size_t study, std::span<const std::size_t> codes) const;
  double zero_inflation(std::size_t study,
                        std::span<const std::size_t> codes) const;

  /// Codes for a labelled record; throws UnknownLevel / UnknownVariable.
  std::vector<std::size_t> encode(
      const std::map<std::string, std::string>& x) const;

  const std::vector<PredictorMarginal>& predictors() const noexcept {
    return predictors_;
  }

 private:
  struct CompiledRule {
    std::vector<std::vector<bool>> allowed;  // [predictor][level]
    double mean;
    double zero_inflation;
  };
  struct CompiledStudy {
    std::string name;
    double default_mean;
    double default_zero_inflation;
    std::vector<CompiledRule> rules;
  };
  const CompiledRule* match(std::size_t study,
                            std::span<const std::size_t> codes) const;

  std::vector<PredictorMarginal> predictors_;
  std::vector<CompiledStudy> studies_;
};

/// Deterministic in config.seed; single-threaded by construction.
Frame synth_population(const SynthConfig& config);

/// Superpopulation mean of `study` (first study when empty) at x.
double true_mean(const SynthConfig& config,
                 const std::map<std::string, std::string>& x,
                 std::string_view study = {});

}  // namespace svytree
