#include "svytree/mc.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "svytree/error.hpp"
#include "svytree/numeric.hpp"
#include "svytree/rng.hpp"

namespace svytree {

DesignFamily DesignFamily::reference() {
  DesignFamily f;
  f.kind = Kind::Stratified;
  f.variable = "size";
  f.rates = {{"1", 0.005}, {"2", 0.01}, {"3", 0.02},
             {"4", 0.05},  {"5", 0.15}, {"6", 0.40}};
  return f;
}

DesignSpec DesignFamily::at(const Frame& frame, std::size_t n) const {
  switch (kind) {
    case Kind::Stratified:
      return allocate_by_rates(frame, variable, rates, n);
    case Kind::Srswor:
      if (n > frame.size()) {
        throw Error(Errc::InfeasibleDesign,
                    "n = " + std::to_string(n) + " exceeds N = " +
                        std::to_string(frame.size()));
      }
      return SrsworDesign{n};
    case Kind::PoissonPps:
      if (n > frame.size()) {
        throw Error(Errc::InfeasibleDesign,
                    "expected n = " + std::to_string(n) + " exceeds N = " +
                        std::to_string(frame.size()));
      }
      return PoissonPpsDesign{variable, static_cast<double>(n)};
    case Kind::Census:
      return CensusDesign{};
  }
  return CensusDesign{};
}

void SimConfig::validate() const {
  if (replicates < 1) throw Error(Errc::ConfigError, "simulate.replicates must be >= 1");
  if (replicates > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(Errc::ConfigError, "simulate.replicates is too large");
  }
  if (sample_sizes.empty()) {
    throw Error(Errc::ConfigError, "simulate.sample_sizes must not be empty");
  }
  std::set<std::size_t> seen_n;
  for (std::size_t n : sample_sizes) {
    if (n == 0 || n > std::numeric_limits<std::uint32_t>::max()) {
      throw Error(Errc::ConfigError, "simulate.sample_sizes entries must be positive");
    }
    if (!seen_n.insert(n).second) {
      throw Error(Errc::ConfigError, "simulate.sample_sizes has a duplicate entry");
    }
  }
  if (estimators.empty()) {
    throw Error(Errc::ConfigError, "simulate.estimators must not be empty");
  }
  std::set<EstimatorKind> seen_e(estimators.begin(), estimators.end());
  if (seen_e.size() != estimators.size()) {
    throw Error(Errc::ConfigError, "simulate.estimators has a duplicate entry");
  }
  if (!(stepwise.penalty >= 0.0) || !std::isfinite(stepwise.penalty)) {
    throw Error(Errc::ConfigError, "stepwise.penalty must be >= 0");
  }
  if (threads < 0) throw Error(Errc::ConfigError, "simulate.threads must be >= 0");
  grow.validate();
}

const SimCell& SimReport::cell(const std::string& study, EstimatorKind est,
                               std::size_t n) const {
  for (const SimCell& c : cells) {
    if (c.study == study && c.estimator == est && c.n == n) return c;
  }
  throw Error(Errc::UnknownVariable,
              "no cell for " + study + "/" + std::string(estimator_name(est)) +
                  "/n=" + std::to_string(n));
}

double empirical_mse(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw Error(Errc::EmptyVector, "no estimates");
  CompensatedSum s;
  for (double t : estimates) s.add((t - truth) * (t - truth));
  return s.value() / static_cast<double>(estimates.size());
}

SimCell summarize_cell(std::span<const double> estimates, double truth,
                       std::size_t population) {
  if (estimates.empty()) throw Error(Errc::EmptyVector, "no estimates");
  const auto r = static_cast<double>(estimates.size());
  SimCell c;
  c.replicates = estimates.size();
  c.truth = truth;
  c.estimates.assign(estimates.begin(), estimates.end());

  c.mean = compensated_sum(estimates) / r;
  CompensatedSum ss, sq, s4, sabs;
  for (double t : estimates) {
    const double d = t - c.mean;
    ss.add(d * d);
    const double e = t - truth;
    sq.add(e * e);
    s4.add(e * e * e * e);
    sabs.add(std::fabs(e));
  }
  c.bias = c.mean - truth;
  c.variance = ss.value() / r;
  c.mse = sq.value() / r;
  c.bias_se = estimates.size() > 1 ? std::sqrt(ss.value() / (r - 1.0) / r) : 0.0;
  const double m4 = s4.value() / r;
  c.mse_se = std::sqrt(std::max(0.0, m4 - c.mse * c.mse) / r);

  const double mae = sabs.value() / r;
  CompensatedSum sdev;
  for (double t : estimates) {
    const double d = std::fabs(t - truth) - mae;
    sdev.add(d * d);
  }
  const double scale = population > 0 ? static_cast<double>(population) : 1.0;
  c.mean_abs_error_per_unit = mae / scale;
  c.mae_se = estimates.size() > 1
                 ? std::sqrt(sdev.value() / (r - 1.0) / r) / scale
                 : 0.0;
  c.relative_efficiency = std::numeric_limits<double>::quiet_NaN();
  return c;
}

namespace {

struct Outcome {
  double estimate = 0.0;
  bool fallback = false;
  std::string reason;
};

struct ReplicateContext {
  const Frame& frame;
  const SimConfig& config;
  const std::vector<std::string>& studies;
  const std::vector<std::string>& predictors;
};

// One replicate: draw, then fit and evaluate every estimator for every study.
// Results are laid out [study][estimator].
std::vector<Outcome> run_replicate(const ReplicateContext& ctx,
                                   const Sampler& sampler, std::uint64_t seed) {
  const SampleDraw sample = sampler.draw(seed);
  std::vector<Outcome> out;
  out.reserve(ctx.studies.size() * ctx.config.estimators.size());
  for (const std::string& study : ctx.studies) {
    const std::vector<double> y = sample_values(ctx.frame, sample, study);
    double ht = std::numeric_limits<double>::quiet_NaN();
    std::string ht_error;
    try {
      ht = ht_total(y, sample.weights);
    } catch (const Error& e) {
      ht_error = std::string(errc_name(e.code())) + ": " + e.what();
    }
    for (EstimatorKind kind : ctx.config.estimators) {
      Outcome o;
      try {
        switch (kind) {
          case EstimatorKind::HT:
            if (!ht_error.empty()) throw Error(Errc::EmptySample, ht_error);
            o.estimate = ht;
            break;
          case EstimatorKind::GregLinear: {
            const StepwiseResult sel = stepwise_select(
                ctx.frame, sample, ctx.predictors, study, ctx.config.stepwise);
            o.estimate = linear_estimator(ctx.frame, sample, study, sel.model).total;
            break;
          }
          case EstimatorKind::GregTree: {
            const Partition tree = grow_tree(ctx.frame, sample, ctx.predictors,
                                             study, ctx.config.grow);
            const std::vector<std::uint32_t> boxes =
                classify_rows_serial(tree, ctx.frame);
            o.estimate =
                tree_estimator(sample, ctx.frame, tree, boxes, study).result.total;
            break;
          }
        }
      } catch (const Error& e) {
        if (kind == EstimatorKind::HT || !ht_error.empty()) throw;
        o.estimate = ht;
        o.fallback = true;
        o.reason = std::string(errc_name(e.code())) + ": " + e.what();
      }
      out.push_back(std::move(o));
    }
  }
  return out;
}

}  // namespace

SimReport run_simulation(const Frame& frame, const SimConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();

  std::vector<std::string> studies = config.studies;
  if (studies.empty()) {
    for (std::size_t c : frame.study_columns()) studies.push_back(frame.spec(c).name);
  }
  for (const std::string& s : studies) {
    const std::size_t c = frame.column_index(s);
    if (frame.spec(c).is_categorical()) {
      throw Error(Errc::ConfigError, "study variable '" + s + "' is not numeric");
    }
  }
  std::vector<std::string> predictors = config.predictors;
  if (predictors.empty()) {
    for (std::size_t c : frame.predictor_columns()) {
      predictors.push_back(frame.spec(c).name);
    }
  }
  for (const std::string& p : predictors) (void)frame.column_index(p);

  std::vector<Sampler> samplers;
  samplers.reserve(config.sample_sizes.size());
  for (std::size_t n : config.sample_sizes) {
    samplers.emplace_back(config.design.at(frame, n), frame);
  }

  const std::size_t R = config.replicates;
  const std::size_t A = config.sample_sizes.size();
  const std::size_t tasks = A * R;

  std::vector<std::size_t> order(tasks);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.execution_shuffle) {
    Rng rng(*config.execution_shuffle);
    for (std::size_t i = tasks; i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
  }

  std::vector<std::vector<Outcome>> results(tasks);
  const ReplicateContext ctx{frame, config, studies, predictors};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::string failure_message;
  Errc failure_code = Errc::InfeasibleDesign;

  const int threads = config.threads;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(tasks); ++i) {
    if (failed.load(std::memory_order_relaxed)) continue;
    const std::size_t task = order[static_cast<std::size_t>(i)];
    const std::size_t a = task / R;
    const std::size_t r = task % R;
    const std::uint64_t seed =
        replicate_seed(config.base_seed,
                       static_cast<std::uint32_t>(config.sample_sizes[a]),
                       static_cast<std::uint32_t>(r));
    try {
      results[task] = run_replicate(ctx, samplers[a], seed);
    } catch (const Error& e) {
#pragma omp critical(svytree_mc_failure)
      {
        if (!failed.exchange(true)) {
          failure_code = e.code();
          failure_message = e.what();
        }
      }
    } catch (const std::exception& e) {
#pragma omp critical(svytree_mc_failure)
      {
        if (!failed.exchange(true)) {
          failure_code = Errc::IoError;
          failure_message = e.what();
        }
      }
    }
    const std::size_t k = done.fetch_add(1) + 1;
    if (config.progress) {
#pragma omp critical(svytree_mc_progress)
      std::fprintf(stderr, "\rreplicate %zu/%zu", k, tasks);
    }
  }
  if (config.progress) std::fprintf(stderr, "\n");
  if (failed) throw Error(failure_code, failure_message);

  SimReport report;
  report.population = frame.size();
  report.replicates = R;
  report.sample_sizes = config.sample_sizes;
  for (const std::string& s : studies) report.truth[s] = frame.total(frame.column_index(s));

  for (std::size_t si = 0; si < studies.size(); ++si) {
    for (std::size_t ei = 0; ei < config.estimators.size(); ++ei) {
      for (std::size_t a = 0; a < A; ++a) {
        const std::size_t slot = si * config.estimators.size() + ei;
        std::vector<double> est(R);
        std::size_t fallbacks = 0;
        std::optional<std::string> reason;
        for (std::size_t r = 0; r < R; ++r) {
          const Outcome& o = results[a * R + r][slot];
          est[r] = o.estimate;
          if (o.fallback) {
            ++fallbacks;
            if (!reason) reason = o.reason;
          }
        }
        SimCell c = summarize_cell(est, report.truth[studies[si]], frame.size());
        c.study = studies[si];
        c.estimator = config.estimators[ei];
        c.n = config.sample_sizes[a];
        c.fallbacks = fallbacks;
        c.successes = R - fallbacks;
        c.first_fallback_reason = std::move(reason);
        report.cells.push_back(std::move(c));
      }
    }
  }
  for (SimCell& c : report.cells) {
    for (const SimCell& h : report.cells) {
      if (h.study == c.study && h.n == c.n && h.estimator == EstimatorKind::HT) {
        c.relative_efficiency = h.mse > 0.0 ? c.mse / h.mse
                                : c.mse == 0.0 ? 1.0
                                               : std::numeric_limits<double>::infinity();
      }
    }
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

ConsistencyResult consistency_check(const SimReport& report,
                                    const std::string& study,
                                    EstimatorKind estimator) {
  std::vector<std::size_t> sizes = report.sample_sizes;
  std::sort(sizes.begin(), sizes.end());
  if (sizes.size() < 3) {
    throw Error(Errc::InsufficientSampleSizes,
                "consistency check needs at least 3 sample sizes, got " +
                    std::to_string(sizes.size()));
  }
  ConsistencyResult res;
  for (std::size_t n : sizes) {
    const SimCell& c = report.cell(study, estimator, n);
    res.trend.push_back({n, c.mean_abs_error_per_unit, c.mae_se});
  }
  res.pass = true;
  for (std::size_t i = 1; i < res.trend.size(); ++i) {
    const ConsistencyPoint& p = res.trend[i - 1];
    const ConsistencyPoint& q = res.trend[i];
    const double slack = 2.0 * std::sqrt(p.se * p.se + q.se * q.se);
    if (q.mean_abs_error_per_unit > p.mean_abs_error_per_unit + slack) res.pass = false;
  }
  return res;
}

std::string report_csv(const SimReport& report) {
  std::ostringstream out;
  out << "study,estimator,n,replicates,successes,fallbacks,truth,mean,bias,"
         "bias_se,variance,mse,mse_se,relative_efficiency,"
         "mean_abs_error_per_unit,mae_se\n";
  for (const SimCell& c : report.cells) {
    out << c.study << ',' << estimator_name(c.estimator) << ',' << c.n << ','
        << c.replicates << ',' << c.successes << ',' << c.fallbacks << ','
        << format_number(c.truth) << ',' << format_number(c.mean) << ','
        << format_number(c.bias) << ',' << format_number(c.bias_se) << ','
        << format_number(c.variance) << ',' << format_number(c.mse) << ','
        << format_number(c.mse_se) << ','
        << format_number(c.relative_efficiency) << ','
        << format_number(c.mean_abs_error_per_unit) << ','
        << format_number(c.mae_se) << '\n';
  }
  return out.str();
}

std::string report_summary(const SimReport& report) {
  std::ostringstream out;
  out << "population: " << report.population << "\n";
  out << "replicates: " << report.replicates << "\n";
  out << "wall_clock_seconds: " << std::fixed << std::setprecision(3)
      << report.seconds << "\n";
  out.unsetf(std::ios::floatfield);
  std::string current;
  for (const SimCell& c : report.cells) {
    if (c.study != current) {
      current = c.study;
      out << "\n[" << c.study << "] truth = " << format_number(report.truth.at(c.study))
          << "\n";
      out << "  estimator       n        bias          rmse     rel_eff  fallbacks\n";
    }
    out << "  " << std::left << std::setw(12) << estimator_name(c.estimator)
        << std::right << std::setw(6) << c.n << std::setw(14)
        << std::setprecision(6) << c.bias << std::setw(14) << std::sqrt(c.mse)
        << std::setw(10) << std::setprecision(4) << c.relative_efficiency
        << std::setw(10) << c.fallbacks << "\n";
    if (c.first_fallback_reason) {
      out << "    first fallback: " << *c.first_fallback_reason << "\n";
    }
  }
  return out.str();
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

}  // namespace

std::string report_svg(const SimReport& report) {
  static constexpr const char* kColors[] = {"#1b9e77", "#d95f02", "#7570b3",
                                            "#e7298a"};
  constexpr double kWidth = 640, kHeight = 320, kLeft = 90, kRight = 150,
                   kTop = 40, kBottom = 50;
  std::vector<std::string> studies;
  for (const SimCell& c : report.cells) {
    if (std::find(studies.begin(), studies.end(), c.study) == studies.end()) {
      studies.push_back(c.study);
    }
  }
  std::vector<std::size_t> sizes = report.sample_sizes;
  std::sort(sizes.begin(), sizes.end());

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight * static_cast<double>(studies.size())
      << "\">\n";
  for (std::size_t p = 0; p < studies.size(); ++p) {
    const std::string& study = studies[p];
    double ymax = 0.0;
    std::vector<EstimatorKind> ests;
    for (const SimCell& c : report.cells) {
      if (c.study != study) continue;
      if (std::isfinite(c.mse)) ymax = std::max(ymax, c.mse);
      if (std::find(ests.begin(), ests.end(), c.estimator) == ests.end()) {
        ests.push_back(c.estimator);
      }
    }
    if (ymax <= 0.0) ymax = 1.0;
    const double x0 = kLeft, x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom, y1 = kTop;
    const double nmin = static_cast<double>(sizes.front());
    const double nmax = static_cast<double>(sizes.back());
    auto xpos = [&](std::size_t n) {
      if (nmax == nmin) return (x0 + x1) / 2;
      return x0 + (static_cast<double>(n) - nmin) / (nmax - nmin) * (x1 - x0);
    };
    auto ypos = [&](double v) { return y0 - v / ymax * (y0 - y1); };

    out << "<g class=\"panel\" data-study=\"" << svg_escape(study)
        << "\" transform=\"translate(0," << fmt(kHeight * static_cast<double>(p))
        << ")\">\n";
    out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\">"
        << svg_escape(study) << "</text>\n";
    out << "<line class=\"axis\" x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0)
        << "\" x2=\"" << fmt(x1) << "\" y2=\"" << fmt(y0) << "\" stroke=\"black\"/>\n";
    out << "<line class=\"axis\" x1=\"" << fmt(x0) << "\" y1=\"" << fmt(y0)
        << "\" x2=\"" << fmt(x0) << "\" y2=\"" << fmt(y1) << "\" stroke=\"black\"/>\n";
    for (std::size_t n : sizes) {
      out << "<text class=\"xtick\" data-n=\"" << n << "\" x=\"" << fmt(xpos(n))
          << "\" y=\"" << fmt(y0 + 18) << "\" text-anchor=\"middle\">" << n
          << "</text>\n";
    }
    for (int t = 0; t <= 4; ++t) {
      const double v = ymax * t / 4.0;
      out << "<text class=\"ytick\" data-value=\"" << format_number(v) << "\" x=\""
          << fmt(x0 - 6) << "\" y=\"" << fmt(ypos(v) + 4)
          << "\" text-anchor=\"end\">" << std::setprecision(3) << v << "</text>\n";
    }
    out << "<text x=\"" << fmt((x0 + x1) / 2) << "\" y=\"" << fmt(kHeight - 10)
        << "\" text-anchor=\"middle\">sample size</text>\n";
    out << "<text x=\"15\" y=\"" << fmt((y0 + y1) / 2)
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
        << fmt((y0 + y1) / 2) << ")\">MSE</text>\n";

    for (std::size_t e = 0; e < ests.size(); ++e) {
      const char* color = kColors[e % 4];
      const std::string name(estimator_name(ests[e]));
      std::ostringstream pts;
      std::ostringstream marks;
      for (std::size_t n : sizes) {
        const SimCell& c = report.cell(study, ests[e], n);
        pts << fmt(xpos(n)) << ',' << fmt(ypos(c.mse)) << ' ';
        marks << "<circle class=\"point\" data-estimator=\"" << name
              << "\" data-n=\"" << n << "\" data-mse=\"" << format_number(c.mse)
              << "\" cx=\"" << fmt(xpos(n)) << "\" cy=\"" << fmt(ypos(c.mse))
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      }
      std::string points = pts.str();
      if (!points.empty()) points.pop_back();
      out << "<polyline class=\"series\" data-estimator=\"" << name
          << "\" fill=\"none\" stroke=\"" << color << "\" points=\"" << points
          << "\"/>\n"
          << marks.str();
      const double ly = kTop + 20.0 * static_cast<double>(e);
      out << "<text class=\"legend\" x=\"" << fmt(x1 + 20) << "\" y=\"" << fmt(ly)
          << "\" fill=\"" << color << "\">" << name << "</text>\n";
    }
    out << "</g>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace svytree
