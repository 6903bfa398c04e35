#include "svytree/design.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "svytree/error.hpp"
#include "svytree/numeric.hpp"
#include "svytree/rng.hpp"

namespace svytree {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t categorical_column(const Frame& frame, const std::string& name) {
  const std::size_t col = frame.column_index(name);
  if (!frame.spec(col).is_categorical()) {
    throw Error(Errc::InfeasibleDesign,
                "strata variable '" + name + "' is not categorical");
  }
  return col;
}

std::vector<double> size_measure(const Frame& frame, const std::string& name) {
  const std::size_t col = frame.column_index(name);
  const auto& spec = frame.spec(col);
  const auto values = frame.column(col);
  std::vector<double> sizes(values.size());
  std::vector<double> level_value;
  if (spec.is_categorical()) {
    for (const auto& l : spec.levels) {
      auto v = parse_number(l);
      if (!v) {
        throw Error(Errc::NonpositiveSize, "size variable '" + name +
                                               "' has non-numeric level '" +
                                               l + "'");
      }
      level_value.push_back(*v);
    }
  }
  for (std::size_t j = 0; j < values.size(); ++j) {
    sizes[j] = spec.is_categorical()
                   ? level_value[static_cast<std::size_t>(values[j])]
                   : values[j];
  }
  return sizes;
}

// Stratum sizes n_h per level index; throws OversampledStratum.
std::vector<std::size_t> stratum_allocation(const StratifiedDesign& d,
                                            const Frame& frame,
                                            std::size_t col) {
  const auto& spec = frame.spec(col);
  const auto counts = level_counts(frame, col);
  std::vector<std::size_t> n_h(spec.levels.size(), 0);
  for (const auto& [label, n] : d.counts) {
    auto idx = spec.level_index(label);
    if (!idx) {
      throw Error(Errc::UnknownLevel, "stratum '" + label + "' not a level of '" +
                                          spec.name + "'");
    }
    if (n > counts[*idx]) {
      throw Error(Errc::OversampledStratum,
                  "stratum " + label + ": n_h = " + std::to_string(n) +
                      " > N_h = " + std::to_string(counts[*idx]));
    }
    n_h[*idx] = n;
  }
  return n_h;
}

}  // namespace

std::string describe(const DesignSpec& design) {
  return std::visit(
      overloaded{
          [](const CensusDesign&) { return std::string("census"); },
          [](const SrsworDesign& d) {
            return "srswor(n=" + std::to_string(d.n) + ")";
          },
          [](const StratifiedDesign& d) {
            std::ostringstream ss;
            ss << "stratified(" << d.strata;
            for (const auto& [k, v] : d.counts) ss << ", " << k << ":" << v;
            ss << ")";
            return ss.str();
          },
          [](const PoissonPpsDesign& d) {
            return "poisson-pps(" + d.size_variable +
                   ", n=" + format_number(d.n) + ")";
          },
      },
      design);
}

std::vector<std::size_t> level_counts(const Frame& frame, std::size_t column) {
  const auto& spec = frame.spec(column);
  std::vector<std::size_t> counts(spec.levels.size(), 0);
  for (double v : frame.column(column)) ++counts[static_cast<std::size_t>(v)];
  return counts;
}

StratifiedDesign allocate_by_rates(const Frame& frame, const std::string& strata,
                                   const std::map<std::string, double>& rates,
                                   std::size_t n) {
  const std::size_t col = categorical_column(frame, strata);
  const auto& spec = frame.spec(col);
  const auto counts = level_counts(frame, col);
  const std::size_t L = spec.levels.size();

  std::vector<double> rate(L, 0.0);
  for (const auto& [label, r] : rates) {
    auto idx = spec.level_index(label);
    if (!idx) {
      throw Error(Errc::UnknownLevel, "rate given for unknown level '" + label +
                                          "' of '" + strata + "'");
    }
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw Error(Errc::InfeasibleDesign, "negative sampling rate for " + label);
    }
    rate[*idx] = r;
  }
  std::size_t available = 0;
  for (std::size_t h = 0; h < L; ++h) {
    if (rate[h] > 0.0) available += counts[h];
  }
  if (n > available) {
    throw Error(Errc::InfeasibleDesign,
                "n = " + std::to_string(n) + " exceeds the " +
                    std::to_string(available) + " units in sampled strata");
  }

  // Continuous allocation with capping at N_h.
  std::vector<double> target(L, 0.0);
  std::vector<bool> full(L, false);
  for (;;) {
    double fixed = 0.0;
    double free_mass = 0.0;
    for (std::size_t h = 0; h < L; ++h) {
      if (full[h]) {
        fixed += static_cast<double>(counts[h]);
      } else {
        free_mass += rate[h] * static_cast<double>(counts[h]);
      }
    }
    const double scale =
        free_mass > 0.0 ? (static_cast<double>(n) - fixed) / free_mass : 0.0;
    bool capped = false;
    for (std::size_t h = 0; h < L; ++h) {
      if (full[h]) {
        target[h] = static_cast<double>(counts[h]);
        continue;
      }
      target[h] = scale * rate[h] * static_cast<double>(counts[h]);
      if (target[h] >= static_cast<double>(counts[h]) && counts[h] > 0 &&
          rate[h] > 0.0) {
        full[h] = true;
        capped = true;
      }
    }
    if (!capped) break;
  }

  std::vector<std::size_t> alloc(L, 0);
  std::size_t assigned = 0;
  for (std::size_t h = 0; h < L; ++h) {
    alloc[h] = std::min(counts[h],
                        static_cast<std::size_t>(std::floor(target[h] + 1e-9)));
    assigned += alloc[h];
  }
  std::vector<std::size_t> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (target[a] - std::floor(target[a])) > (target[b] - std::floor(target[b]));
  });
  while (assigned < n) {
    bool progressed = false;
    for (std::size_t h : order) {
      if (assigned == n) break;
      if (rate[h] > 0.0 && alloc[h] < counts[h]) {
        ++alloc[h];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  while (assigned > n) {
    for (auto it = order.rbegin(); it != order.rend() && assigned > n; ++it) {
      if (alloc[*it] > 0) {
        --alloc[*it];
        --assigned;
      }
    }
  }

  StratifiedDesign out{strata, {}};
  for (std::size_t h = 0; h < L; ++h) {
    if (alloc[h] > 0) out.counts[spec.levels[h]] = alloc[h];
  }
  return out;
}

std::vector<double> pps_probabilities(std::span<const double> sizes, double n) {
  const std::size_t N = sizes.size();
  if (N == 0) throw Error(Errc::InfeasibleDesign, "empty population");
  for (double s : sizes) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(Errc::NonpositiveSize, "PPS size values must be positive");
    }
  }
  if (!(n > 0.0) || n > static_cast<double>(N)) {
    throw Error(Errc::InfeasibleDesign,
                "expected size must lie in (0, N]");
  }
  std::vector<double> pi(N, 0.0);
  std::vector<bool> capped(N, false);
  std::size_t num_capped = 0;
  for (;;) {
    CompensatedSum free_size;
    for (std::size_t j = 0; j < N; ++j) {
      if (!capped[j]) free_size.add(sizes[j]);
    }
    const double remaining = n - static_cast<double>(num_capped);
    const double S = free_size.value();
    bool changed = false;
    for (std::size_t j = 0; j < N; ++j) {
      if (capped[j]) continue;
      const double p = remaining * sizes[j] / S;
      if (p >= 1.0 - 1e-12) {
        capped[j] = true;
        ++num_capped;
        changed = true;
      }
      pi[j] = std::min(p, 1.0);
    }
    if (!changed || num_capped == N) break;
  }
  for (std::size_t j = 0; j < N; ++j) {
    if (capped[j]) pi[j] = 1.0;
  }
  return pi;
}

std::vector<double> compute_inclusion_probs(const DesignSpec& design,
                                            const Frame& frame) {
  const std::size_t N = frame.size();
  return std::visit(
      overloaded{
          [&](const CensusDesign&) { return std::vector<double>(N, 1.0); },
          [&](const SrsworDesign& d) {
            if (d.n == 0 || d.n > N) {
              throw Error(Errc::InfeasibleDesign,
                          "SRSWOR needs 0 < n <= N (n = " + std::to_string(d.n) +
                              ", N = " + std::to_string(N) + ")");
            }
            return std::vector<double>(
                N, static_cast<double>(d.n) / static_cast<double>(N));
          },
          [&](const StratifiedDesign& d) {
            const std::size_t col = categorical_column(frame, d.strata);
            const auto n_h = stratum_allocation(d, frame, col);
            const auto N_h = level_counts(frame, col);
            std::vector<double> pi(N);
            const auto codes = frame.column(col);
            for (std::size_t j = 0; j < N; ++j) {
              const auto h = static_cast<std::size_t>(codes[j]);
              pi[j] = static_cast<double>(n_h[h]) / static_cast<double>(N_h[h]);
            }
            return pi;
          },
          [&](const PoissonPpsDesign& d) {
            const auto sizes = size_measure(frame, d.size_variable);
            return pps_probabilities(sizes, d.n);
          },
      },
      design);
}

Sampler::Sampler(DesignSpec design, const Frame& frame)
    : design_(std::move(design)), population_(frame.size()) {
  pi_ = compute_inclusion_probs(design_, frame);
  expected_n_ = compensated_sum(pi_);
  if (const auto* d = std::get_if<StratifiedDesign>(&design_)) {
    const std::size_t col = categorical_column(frame, d->strata);
    strata_n_ = stratum_allocation(*d, frame, col);
    strata_members_.resize(strata_n_.size());
    const auto codes = frame.column(col);
    for (std::size_t j = 0; j < codes.size(); ++j) {
      strata_members_[static_cast<std::size_t>(codes[j])].push_back(j);
    }
  }
}

namespace {

// First k entries of `pool` become a uniform random k-subset.
void partial_shuffle(std::vector<std::size_t>& pool, std::size_t k, Rng& rng) {
  const std::size_t m = pool.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace

SampleDraw Sampler::draw(std::uint64_t seed) const {
  Rng rng(seed);
  SampleDraw s;
  std::visit(
      overloaded{
          [&](const CensusDesign&) {
            s.members.resize(population_);
            std::iota(s.members.begin(), s.members.end(), std::size_t{0});
          },
          [&](const SrsworDesign& d) {
            std::vector<std::size_t> pool(population_);
            std::iota(pool.begin(), pool.end(), std::size_t{0});
            partial_shuffle(pool, d.n, rng);
            s.members.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(d.n));
          },
          [&](const StratifiedDesign&) {
            for (std::size_t h = 0; h < strata_members_.size(); ++h) {
              if (strata_n_[h] == 0) continue;
              std::vector<std::size_t> pool = strata_members_[h];
              partial_shuffle(pool, strata_n_[h], rng);
              s.members.insert(s.members.end(), pool.begin(),
                               pool.begin() + static_cast<std::ptrdiff_t>(strata_n_[h]));
            }
          },
          [&](const PoissonPpsDesign&) {
            for (std::size_t j = 0; j < population_; ++j) {
              if (rng.uniform() < pi_[j]) s.members.push_back(j);
            }
          },
      },
      design_);
  std::sort(s.members.begin(), s.members.end());
  s.pi.reserve(s.members.size());
  s.weights.reserve(s.members.size());
  for (std::size_t j : s.members) {
    s.pi.push_back(pi_[j]);
    s.weights.push_back(1.0 / pi_[j]);
  }
  return s;
}

SampleDraw draw_sample(const DesignSpec& design, const Frame& frame,
                       std::uint64_t seed) {
  return Sampler(design, frame).draw(seed);
}

DesignDiagnostics diagnostics_from_probs(std::span<const double> pi) {
  if (pi.empty()) throw Error(Errc::InfeasibleDesign, "empty population");
  DesignDiagnostics d;
  d.population = pi.size();
  const auto [lo, hi] = std::minmax_element(pi.begin(), pi.end());
  d.min_pi = *lo;
  d.max_pi = *hi;
  if (!(d.min_pi > 0.0)) {
    throw Error(Errc::ZeroInclusionProbability,
                "unit " + std::to_string(lo - pi.begin()) +
                    " has zero inclusion probability");
  }
  d.n_min_pi = static_cast<double>(d.population) * d.min_pi;
  d.max_weight = 1.0 / d.min_pi;
  d.weight_ratio = d.max_pi / d.min_pi;
  d.expected_n = compensated_sum(pi);
  d.sampling_fraction = d.expected_n / static_cast<double>(d.population);
  return d;
}

DesignDiagnostics design_diagnostics(const DesignSpec& design,
                                     const Frame& frame) {
  return diagnostics_from_probs(compute_inclusion_probs(design, frame));
}

}  // namespace svytree
