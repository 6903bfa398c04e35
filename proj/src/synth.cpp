#include "svytree/synth.hpp"

#include <cmath>
#include <set>

#include "svytree/error.hpp"
#include "svytree/rng.hpp"

namespace svytree {

std::vector<PredictorMarginal> SynthConfig::default_predictors() {
  return {
      {"industry",
       {"11", "21", "22", "23", "31", "32", "33", "42", "44", "45", "48", "49",
        "51", "52", "53", "54", "55", "56", "61", "62", "71", "72", "81", "99"},
       {2.0, 1.5, 1.5, 8.0, 2.0, 2.0, 3.0, 6.0, 7.0, 3.0, 2.5, 1.5,
        2.0, 5.0, 4.0, 9.0, 1.5, 6.0, 12.0, 9.0, 2.5, 8.0, 7.0, 1.5}},
      {"size",
       {"1", "2", "3", "4", "5", "6"},
       {0.50, 0.22, 0.13, 0.08, 0.045, 0.025}},
      {"multi", {"0", "1"}, {0.8, 0.2}},
      {"region",
       {"1", "2", "3", "4", "5", "6"},
       {0.25, 0.20, 0.18, 0.15, 0.12, 0.10}},
  };
}

SynthConfig SynthConfig::reference() {
  SynthConfig c;
  c.N = 187115;
  c.seed = 20170826;
  c.noise = Noise::Poisson;
  c.predictors = default_predictors();
  using W = std::map<std::string, std::vector<std::string>>;

  StudyModel teachers{"teachers", 0.0, 0.0, {}};
  teachers.cells = {
      {W{{"size", {"1", "2", "3", "4"}}}, 0.0, 0.0},
      {W{{"industry", {"61"}}, {"multi", {"1"}}}, 75.0, 0.02},
      {W{{"industry", {"61"}}}, 60.0, 0.02},
      {W{{"industry", {"62", "81"}}}, 14.0, 0.3},
  };
  teachers.default_mean = 8.0;
  teachers.default_zero_inflation = 0.5;

  StudyModel waitstaff{"waitstaff", 0.0, 0.0, {}};
  waitstaff.cells = {
      {W{{"industry", {"72"}}, {"size", {"1", "2"}}}, 3.0, 0.3},
      {W{{"size", {"1", "2"}}}, 0.0, 0.0},
      {W{{"industry", {"72"}}, {"multi", {"1"}}}, 55.0, 0.05},
      {W{{"industry", {"72"}}}, 35.0, 0.05},
      {W{{"industry", {"71"}}}, 8.0, 0.3},
      {W{{"industry", {"44", "45"}}}, 1.5, 0.6},
  };
  waitstaff.default_mean = 0.3;
  waitstaff.default_zero_inflation = 0.8;

  StudyModel bartenders{"bartenders", 0.0, 0.0, {}};
  bartenders.cells = {
      {W{{"industry", {"71", "72"}}, {"size", {"1"}}}, 1.2, 0.4},
      {W{{"industry", {"71", "72"}}, {"size", {"2"}}}, 2.0, 0.3},
      {W{{"industry", {"71", "72"}}, {"multi", {"1"}}}, 4.5, 0.2},
      {W{{"industry", {"71", "72"}}}, 3.0, 0.2},
      {W{{"size", {"1", "2"}}}, 0.0, 0.0},
  };
  bartenders.default_mean = 0.02;
  bartenders.default_zero_inflation = 0.9;

  StudyModel sales{"sales_managers", 0.0, 0.0, {}};
  sales.cells = {
      {W{{"industry", {"42", "44", "45", "52", "54", "55"}}, {"size", {"5", "6"}}},
       2.0, 0.4},
      {W{{"industry", {"42", "44", "45", "52", "54", "55"}}, {"size", {"3", "4"}}},
       0.5, 0.6},
      {W{{"size", {"4", "5", "6"}}}, 0.4, 0.7},
  };
  sales.default_mean = 0.1;
  sales.default_zero_inflation = 0.8;

  c.studies = {teachers, waitstaff, bartenders, sales};
  return c;
}

SuperpopulationModel::SuperpopulationModel(const SynthConfig& config)
    : predictors_(config.predictors) {
  if (config.N == 0) {
    throw Error(Errc::EmptyPopulation, "population size N must be positive");
  }
  if (predictors_.empty()) {
    throw Error(Errc::SchemaMismatch, "no predictors configured");
  }
  if (config.studies.empty()) {
    throw Error(Errc::SchemaMismatch, "no study variables configured");
  }
  for (const auto& p : predictors_) {
    if (p.weights.size() != p.levels.size()) {
      throw Error(Errc::SchemaMismatch,
                  "predictor '" + p.name + "' has " +
                      std::to_string(p.levels.size()) + " levels but " +
                      std::to_string(p.weights.size()) + " weights");
    }
    double total = 0.0;
    for (double w : p.weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) {
        throw Error(Errc::SchemaMismatch,
                    "predictor '" + p.name + "' has an invalid weight");
      }
      total += w;
    }
    if (total <= 0.0) {
      throw Error(Errc::SchemaMismatch,
                  "predictor '" + p.name + "' has zero total weight");
    }
  }
  {
    std::vector<VariableSpec> specs;
    for (const auto& p : predictors_) {
      specs.push_back(VariableSpec::categorical(p.name, p.levels));
    }
    for (const auto& st : config.studies) {
      specs.push_back(VariableSpec::numeric(st.name, VariableRole::Study));
    }
    validate_schema(specs);
  }

  auto check_mean = [](const std::string& where, double mean, double zi) {
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
      throw Error(Errc::InvalidCellMean, where + ": mean must be finite and >= 0");
    }
    if (!(zi >= 0.0 && zi < 1.0)) {
      throw Error(Errc::InvalidCellMean,
                  where + ": zero_inflation must lie in [0, 1)");
    }
  };

  for (const auto& s : config.studies) {
    CompiledStudy cs{s.name, s.default_mean, s.default_zero_inflation, {}};
    check_mean(s.name + " default", s.default_mean, s.default_zero_inflation);
    for (std::size_t r = 0; r < s.cells.size(); ++r) {
      const auto& rule = s.cells[r];
      const std::string where = s.name + " cell " + std::to_string(r + 1);
      check_mean(where, rule.mean, rule.zero_inflation);
      CompiledRule cr;
      cr.mean = rule.mean;
      cr.zero_inflation = rule.zero_inflation;
      for (const auto& p : predictors_) {
        cr.allowed.emplace_back(p.levels.size(), true);
      }
      for (const auto& [var, levels] : rule.when) {
        std::size_t pi = predictors_.size();
        for (std::size_t i = 0; i < predictors_.size(); ++i) {
          if (predictors_[i].name == var) pi = i;
        }
        if (pi == predictors_.size()) {
          throw Error(Errc::UnknownVariable,
                      where + ": unknown predictor '" + var + "'");
        }
        std::vector<bool> mask(predictors_[pi].levels.size(), false);
        for (const auto& l : levels) {
          bool found = false;
          for (std::size_t k = 0; k < predictors_[pi].levels.size(); ++k) {
            if (predictors_[pi].levels[k] == l) {
              mask[k] = true;
              found = true;
            }
          }
          if (!found) {
            throw Error(Errc::UnknownLevel,
                        where + ": level '" + l + "' not in '" + var + "'");
          }
        }
        cr.allowed[pi] = std::move(mask);
      }
      cs.rules.push_back(std::move(cr));
    }
    studies_.push_back(std::move(cs));
  }
}

std::vector<VariableSpec> SuperpopulationModel::schema() const {
  std::vector<VariableSpec> specs;
  for (const auto& p : predictors_) {
    specs.push_back(VariableSpec::categorical(p.name, p.levels));
  }
  for (const auto& s : studies_) {
    specs.push_back(VariableSpec::numeric(s.name, VariableRole::Study));
  }
  return specs;
}

std::size_t SuperpopulationModel::study_index(std::string_view name) const {
  if (name.empty()) return 0;
  for (std::size_t i = 0; i < studies_.size(); ++i) {
    if (studies_[i].name == name) return i;
  }
  throw Error(Errc::UnknownVariable,
              "no study variable '" + std::string(name) + "'");
}

const SuperpopulationModel::CompiledRule* SuperpopulationModel::match(
    std::size_t study, std::span<const std::size_t> codes) const {
  for (const auto& rule : studies_.at(study).rules) {
    bool ok = true;
    for (std::size_t p = 0; p < codes.size() && ok; ++p) {
      ok = rule.allowed[p][codes[p]];
    }
    if (ok) return &rule;
  }
  return nullptr;
}

double SuperpopulationModel::mean(std::size_t study,
                                  std::span<const std::size_t> codes) const {
  const auto* r = match(study, codes);
  return r ? r->mean : studies_.at(study).default_mean;
}

double SuperpopulationModel::zero_inflation(
    std::size_t study, std::span<const std::size_t> codes) const {
  const auto* r = match(study, codes);
  return r ? r->zero_inflation : studies_.at(study).default_zero_inflation;
}

std::vector<std::size_t> SuperpopulationModel::encode(
    const std::map<std::string, std::string>& x) const {
  std::vector<std::size_t> codes(predictors_.size());
  for (std::size_t p = 0; p < predictors_.size(); ++p) {
    auto it = x.find(predictors_[p].name);
    if (it == x.end()) {
      throw Error(Errc::UnknownVariable,
                  "record lacks predictor '" + predictors_[p].name + "'");
    }
    const auto& levels = predictors_[p].levels;
    std::size_t k = 0;
    while (k < levels.size() && levels[k] != it->second) ++k;
    if (k == levels.size()) {
      throw Error(Errc::UnknownLevel, "level '" + it->second + "' not in '" +
                                          predictors_[p].name + "'");
    }
    codes[p] = k;
  }
  return codes;
}

Frame synth_population(const SynthConfig& config) {
  const SuperpopulationModel model(config);
  const std::size_t n = config.N;
  const std::size_t np = model.num_predictors();
  const std::size_t ns = model.num_studies();

  std::vector<std::vector<double>> cumulative(np);
  for (std::size_t p = 0; p < np; ++p) {
    double acc = 0.0;
    for (double w : model.predictors()[p].weights) {
      acc += w;
      cumulative[p].push_back(acc);
    }
  }

  std::vector<std::vector<double>> columns(np + ns, std::vector<double>(n));
  Rng rng(config.seed);
  std::vector<std::size_t> codes(np);
  for (std::size_t row = 0; row < n; ++row) {
    for (std::size_t p = 0; p < np; ++p) {
      codes[p] = rng.categorical(cumulative[p]);
      columns[p][row] = static_cast<double>(codes[p]);
    }
    for (std::size_t s = 0; s < ns; ++s) {
      const double mu = model.mean(s, codes);
      double y = mu;
      if (config.noise == Noise::Poisson) {
        const double zi = model.zero_inflation(s, codes);
        if (zi > 0.0 && rng.uniform() < zi) {
          y = 0.0;
        } else {
          y = static_cast<double>(rng.poisson(mu / (1.0 - zi)));
        }
      }
      columns[np + s][row] = y;
    }
  }
  return Frame(model.schema(), std::move(columns));
}

double true_mean(const SynthConfig& config,
                 const std::map<std::string, std::string>& x,
                 std::string_view study) {
  const SuperpopulationModel model(config);
  return model.mean(model.study_index(study), model.encode(x));
}

}  // namespace svytree
