#include "svytree/estimate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "json.hpp"
#include "svytree/error.hpp"
#include "svytree/linalg.hpp"
#include "svytree/numeric.hpp"

namespace svytree {

std::string_view estimator_name(EstimatorKind kind) noexcept {
  switch (kind) {
    case EstimatorKind::HT: return "ht";
    case EstimatorKind::GregLinear: return "greg-linear";
    case EstimatorKind::GregTree: return "greg-tree";
  }
  return "unknown";
}

std::optional<EstimatorKind> parse_estimator(std::string_view name) {
  std::string s(name);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "ht") return EstimatorKind::HT;
  if (s == "greg-linear" || s == "linear") return EstimatorKind::GregLinear;
  if (s == "greg-tree" || s == "tree") return EstimatorKind::GregTree;
  return std::nullopt;
}

WeightSummary summarize_weights(std::span<const double> weights) {
  WeightSummary s;
  s.count = weights.size();
  if (weights.empty()) return s;
  s.min = *std::min_element(weights.begin(), weights.end());
  s.max = *std::max_element(weights.begin(), weights.end());
  s.negative = static_cast<std::size_t>(
      std::count_if(weights.begin(), weights.end(), [](double w) { return w < 0.0; }));
  return s;
}

std::string to_json(const EstimateResult& r) {
  nlohmann::ordered_json j;
  j["estimator"] = estimator_name(r.kind);
  j["study"] = r.study;
  j["total"] = r.total;
  j["model"] = r.model_summary;
  if (r.calibration_weights) {
    const auto s = summarize_weights(*r.calibration_weights);
    j["weights"] = {{"count", s.count},
                    {"min", s.min},
                    {"max", s.max},
                    {"negative_count", s.negative}};
  } else {
    j["weights"] = nullptr;
  }
  if (r.fallback_reason) j["fallback"] = *r.fallback_reason;
  return j.dump(2) + "\n";
}

double ht_total(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) {
    throw Error(Errc::LengthMismatch, "y has " + std::to_string(y.size()) +
                                          " values but w has " +
                                          std::to_string(w.size()));
  }
  CompensatedSum t;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(w[i] > 0.0)) throw Error(Errc::NonpositiveWeight, "weight must be > 0");
    t.add(w[i] * y[i]);
  }
  return t.value();
}

std::vector<double> sample_values(const Frame& frame, const SampleDraw& sample,
                                  const std::string& study) {
  const auto col = frame.column(study);
  std::vector<double> y;
  y.reserve(sample.size());
  for (std::size_t j : sample.members) y.push_back(col[j]);
  return y;
}

double greg_total(std::span<const double> y, std::span<const double> w,
                  std::span<const double> sample_predictions,
                  double population_prediction_total) {
  if (y.size() != w.size() || y.size() != sample_predictions.size()) {
    throw Error(Errc::LengthMismatch, "sample vectors differ in length");
  }
  CompensatedSum t;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(w[i] > 0.0)) throw Error(Errc::NonpositiveWeight, "weight must be > 0");
    t.add(w[i] * (y[i] - sample_predictions[i]));
  }
  t.add(population_prediction_total);
  return t.value();
}

double greg_total(const SampleDraw& sample, const Frame& frame,
                  const std::string& study,
                  const std::function<double(std::size_t row)>& predict) {
  const auto y = sample_values(frame, sample, study);
  std::vector<double> pred_s(sample.size());
  CompensatedSum pop;
  try {
    for (std::size_t i = 0; i < sample.size(); ++i) {
      pred_s[i] = predict(sample.members[i]);
    }
    for (std::size_t row = 0; row < frame.size(); ++row) pop.add(predict(row));
  } catch (const Error& e) {
    throw Error(Errc::PredictionFailure,
                std::string(errc_name(e.code())) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::PredictionFailure, e.what());
  }
  return greg_total(y, sample.weights, pred_s, pop.value());
}

// ---------------------------------------------------------------------------

LinearCalibration linear_weights(std::span<const double> design_weights,
                                 const Eigen::MatrixXd& x,
                                 const Eigen::VectorXd& population_totals,
                                 std::span<const double> y) {
  const auto n = static_cast<Eigen::Index>(design_weights.size());
  if (x.rows() != n || population_totals.size() != x.cols() ||
      (!y.empty() && static_cast<Eigen::Index>(y.size()) != n)) {
    throw Error(Errc::LengthMismatch, "design matrix, totals and weights disagree");
  }
  Eigen::VectorXd w(n), sw(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double wi = design_weights[static_cast<std::size_t>(i)];
    if (!(wi > 0.0)) throw Error(Errc::NonpositiveWeight, "weight must be > 0");
    w(i) = wi;
    sw(i) = std::sqrt(wi);
  }

  OrderedQR qr(n);
  if (!y.empty()) {
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = sw(i) * y[static_cast<std::size_t>(i)];
    qr.set_response(z);
  }
  const Eigen::MatrixXd a = sw.asDiagonal() * x;
  LinearCalibration out;
  out.kept = qr.append(a);

  // HT totals and the calibration gap on the kept columns.
  Eigen::VectorXd ht(x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    CompensatedSum s;
    for (Eigen::Index i = 0; i < n; ++i) s.add(w(i) * x(i, c));
    ht(c) = s.value();
  }
  std::vector<Eigen::Index> kept_idx;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (out.kept[static_cast<std::size_t>(c)]) kept_idx.push_back(c);
  }
  const auto r = static_cast<Eigen::Index>(kept_idx.size());
  Eigen::VectorXd gap(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    gap(k) = population_totals(kept_idx[static_cast<std::size_t>(k)]) -
             ht(kept_idx[static_cast<std::size_t>(k)]);
  }
  const Eigen::VectorXd lambda = r > 0 ? qr.solve_normal(gap) : Eigen::VectorXd();
  if (!y.empty()) out.coefficients = qr.coefficients();

  out.weights.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double g = 1.0;
    for (Eigen::Index k = 0; k < r; ++k) {
      g += x(i, kept_idx[static_cast<std::size_t>(k)]) * lambda(k);
    }
    out.weights[static_cast<std::size_t>(i)] = w(i) * g;
  }
  if (!std::all_of(out.weights.begin(), out.weights.end(),
                   [](double v) { return std::isfinite(v); })) {
    throw Error(Errc::SingularSystem, "calibration produced non-finite weights");
  }

  // Every column, kept or dropped, must be reproduced.
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    CompensatedSum s;
    double scale = std::fabs(population_totals(c));
    for (Eigen::Index i = 0; i < n; ++i) {
      const double term = out.weights[static_cast<std::size_t>(i)] * x(i, c);
      s.add(term);
      scale += std::fabs(term);
    }
    if (std::fabs(s.value() - population_totals(c)) > 1e-8 * std::max(scale, 1.0)) {
      throw Error(Errc::SingularSystem,
                  "column " + std::to_string(c) +
                      " cannot be calibrated: sample total " +
                      format_number(s.value()) + " vs population total " +
                      format_number(population_totals(c)));
    }
  }
  out.summary = summarize_weights(out.weights);
  return out;
}

namespace {

// One block of design-matrix columns.
struct Block {
  std::size_t a = 0;
  std::optional<std::size_t> b;  // second variable for interactions
  std::size_t width = 0;
  std::size_t width_b = 1;
  bool a_cat = false;
  bool b_cat = false;
  std::vector<std::string> names;
};

Block make_block(const Frame& frame, const std::string& va,
                 const std::string* vb) {
  Block blk;
  blk.a = frame.column_index(va);
  const auto& sa = frame.spec(blk.a);
  if (sa.role != VariableRole::Predictor) {
    throw Error(Errc::UnknownVariable, "'" + va + "' is not a predictor");
  }
  blk.a_cat = sa.is_categorical();
  std::vector<std::string> na;
  if (blk.a_cat) {
    for (const auto& l : sa.levels) na.push_back(va + "=" + l);
  } else {
    na.push_back(va);
  }
  if (!vb) {
    blk.width = na.size();
    blk.names = na;
    return blk;
  }
  blk.b = frame.column_index(*vb);
  const auto& sb = frame.spec(*blk.b);
  if (sb.role != VariableRole::Predictor) {
    throw Error(Errc::UnknownVariable, "'" + *vb + "' is not a predictor");
  }
  blk.b_cat = sb.is_categorical();
  std::vector<std::string> nb;
  if (blk.b_cat) {
    for (const auto& l : sb.levels) nb.push_back(*vb + "=" + l);
  } else {
    nb.push_back(*vb);
  }
  blk.width_b = nb.size();
  blk.width = na.size() * nb.size();
  for (const auto& x : na) {
    for (const auto& y : nb) blk.names.push_back(x + ":" + y);
  }
  return blk;
}

// Column offset within the block and the value placed there for `row`.
std::pair<std::size_t, double> block_entry(const Frame& frame, const Block& blk,
                                           std::size_t row) {
  const double va = frame.column(blk.a)[row];
  std::size_t ia = 0;
  double val = 1.0;
  if (blk.a_cat) {
    ia = static_cast<std::size_t>(va);
  } else {
    val = va;
  }
  if (!blk.b) return {ia, val};
  const double vb = frame.column(*blk.b)[row];
  std::size_t ib = 0;
  if (blk.b_cat) {
    ib = static_cast<std::size_t>(vb);
  } else {
    val *= vb;
  }
  return {ia * blk.width_b + ib, val};
}

std::vector<Block> model_blocks(const Frame& frame, const LinearModelSpec& model) {
  std::vector<Block> blocks;
  for (const auto& v : model.variables) blocks.push_back(make_block(frame, v, nullptr));
  for (const auto& [a, b] : model.interactions) {
    blocks.push_back(make_block(frame, a, &b));
  }
  return blocks;
}

Eigen::MatrixXd block_sample_columns(const Frame& frame, const SampleDraw& sample,
                                     const Block& blk) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sample.size()),
                                            static_cast<Eigen::Index>(blk.width));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto [off, val] = block_entry(frame, blk, sample.members[i]);
    m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(off)) = val;
  }
  return m;
}

}  // namespace

std::string LinearModelSpec::describe() const {
  std::string s = intercept ? "intercept" : "";
  for (const auto& v : variables) s += (s.empty() ? "" : " + ") + v;
  for (const auto& [a, b] : interactions) {
    s += (s.empty() ? "" : " + ") + a + ":" + b;
  }
  return s.empty() ? "empty" : s;
}

DesignMatrix build_design_matrix(const Frame& frame, const SampleDraw& sample,
                                 const LinearModelSpec& model) {
  const auto blocks = model_blocks(frame, model);
  std::size_t p = model.intercept ? 1 : 0;
  for (const auto& b : blocks) p += b.width;
  DesignMatrix dm;
  dm.sample_x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sample.size()),
                                      static_cast<Eigen::Index>(p));
  dm.population_totals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  std::size_t offset = 0;
  if (model.intercept) {
    dm.sample_x.col(0).setOnes();
    dm.population_totals(0) = static_cast<double>(frame.size());
    dm.column_names.push_back("(intercept)");
    offset = 1;
  }
  for (const auto& blk : blocks) {
    dm.sample_x.middleCols(static_cast<Eigen::Index>(offset),
                           static_cast<Eigen::Index>(blk.width)) =
        block_sample_columns(frame, sample, blk);
    std::vector<CompensatedSum> totals(blk.width);
    for (std::size_t row = 0; row < frame.size(); ++row) {
      const auto [off, val] = block_entry(frame, blk, row);
      totals[off].add(val);
    }
    for (std::size_t k = 0; k < blk.width; ++k) {
      dm.population_totals(static_cast<Eigen::Index>(offset + k)) = totals[k].value();
    }
    dm.column_names.insert(dm.column_names.end(), blk.names.begin(), blk.names.end());
    offset += blk.width;
  }
  return dm;
}

namespace {

double weighted_total(std::span<const double> weights, std::span<const double> y) {
  CompensatedSum t;
  for (std::size_t i = 0; i < y.size(); ++i) t.add(weights[i] * y[i]);
  return t.value();
}

}  // namespace

EstimateResult linear_estimator(const Frame& frame, const SampleDraw& sample,
                                const std::string& study,
                                const LinearModelSpec& model) {
  const auto dm = build_design_matrix(frame, sample, model);
  const auto y = sample_values(frame, sample, study);
  auto cal = linear_weights(sample.weights, dm.sample_x, dm.population_totals);
  EstimateResult r;
  r.kind = EstimatorKind::GregLinear;
  r.study = study;
  r.total = weighted_total(cal.weights, y);
  r.model_summary = model.describe();
  r.calibration_weights = std::move(cal.weights);
  return r;
}

StepwiseResult stepwise_select(const Frame& frame, const SampleDraw& sample,
                               std::span<const std::string> candidates,
                               const std::string& study,
                               const StepwiseControls& controls) {
  if (!(controls.penalty >= 0.0)) {
    throw Error(Errc::ConfigError, "stepwise.penalty must be >= 0");
  }
  StepwiseResult result;
  const std::size_t n = sample.size();
  if (n == 0) throw Error(Errc::EmptySample, "sample is empty");

  // Candidate blocks in schema order, then two-way interactions.
  std::vector<std::string> mains(candidates.begin(), candidates.end());
  std::sort(mains.begin(), mains.end(), [&](const auto& a, const auto& b) {
    return frame.column_index(a) < frame.column_index(b);
  });
  mains.erase(std::unique(mains.begin(), mains.end()), mains.end());
  struct Candidate {
    std::string a;
    std::optional<std::string> b;
    Block block;
  };
  std::vector<Candidate> pool;
  for (const auto& v : mains) pool.push_back({v, std::nullopt, make_block(frame, v, nullptr)});
  if (controls.interactions) {
    for (std::size_t i = 0; i < mains.size(); ++i) {
      for (std::size_t k = i + 1; k < mains.size(); ++k) {
        pool.push_back({mains[i], mains[k], make_block(frame, mains[i], &mains[k])});
      }
    }
  }

  const auto y = sample_values(frame, sample, study);
  const auto nn = static_cast<Eigen::Index>(n);
  Eigen::VectorXd sw(nn), z(nn);
  CompensatedSum scale;
  for (std::size_t i = 0; i < n; ++i) {
    sw(static_cast<Eigen::Index>(i)) = std::sqrt(sample.weights[i]);
    z(static_cast<Eigen::Index>(i)) = sw(static_cast<Eigen::Index>(i)) * y[i];
    scale.add(sample.weights[i] * y[i] * y[i]);
  }
  OrderedQR qr(nn);
  qr.set_response(z);
  qr.append_column(sw);

  const double dn = static_cast<double>(n);
  const double floor_rss = 1e-12 * scale.value();
  auto criterion = [&](const OrderedQR& q) {
    const double rss = std::max(q.rss(), std::numeric_limits<double>::min());
    return dn * std::log(rss / dn) + controls.penalty * static_cast<double>(q.rank());
  };
  double current = criterion(qr);
  result.criterion_path.push_back(current);

  std::vector<bool> used(pool.size(), false);
  for (std::size_t step = 0; step < controls.max_steps; ++step) {
    if (!(qr.rss() > floor_rss)) break;
    std::optional<std::size_t> best;
    double best_crit = current;
    OrderedQR best_qr = qr;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (used[c]) continue;
      OrderedQR trial = qr;
      trial.append(sw.asDiagonal() * block_sample_columns(frame, sample, pool[c].block));
      if (trial.rank() == qr.rank()) continue;
      const double crit = criterion(trial);
      if (crit < best_crit) {
        best_crit = crit;
        best = c;
        best_qr = std::move(trial);
      }
    }
    if (!best) break;
    used[*best] = true;
    qr = std::move(best_qr);
    current = best_crit;
    result.criterion_path.push_back(current);
    const auto& cand = pool[*best];
    if (cand.b) {
      result.model.interactions.emplace_back(cand.a, *cand.b);
    } else {
      result.model.variables.push_back(cand.a);
    }
  }
  return result;
}

TreeEstimate tree_estimator(const SampleDraw& sample, const Frame& frame,
                            const Partition& partition,
                            std::span<const std::uint32_t> row_boxes,
                            const std::string& study) {
  if (row_boxes.size() != frame.size()) {
    throw Error(Errc::LengthMismatch, "box assignment does not cover the frame");
  }
  const std::size_t q = partition.num_boxes();
  const auto yv = frame.column(study);
  TreeEstimate out;
  out.box_population.assign(q, 0);
  for (auto b : row_boxes) ++out.box_population[b];

  std::vector<CompensatedSum> wsum(q), ysum(q);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const std::size_t j = sample.members[i];
    const double w = sample.weights[i];
    if (!(w > 0.0)) throw Error(Errc::NonpositiveWeight, "weight must be > 0");
    wsum[row_boxes[j]].add(w);
    ysum[row_boxes[j]].add(w * yv[j]);
  }
  out.box_weighted_count.resize(q);
  out.box_mean.resize(q);
  for (std::size_t k = 0; k < q; ++k) {
    out.box_weighted_count[k] = wsum[k].value();
    if (!(out.box_weighted_count[k] > 0.0)) {
      throw Error(Errc::EmptySampleBox,
                  "box " + std::to_string(partition.nodes()[partition.leaf_nodes()[k]].id) +
                      " has no sampled units");
    }
    out.box_mean[k] = ysum[k].value() / out.box_weighted_count[k];
  }

  CompensatedSum post;
  for (std::size_t k = 0; k < q; ++k) {
    post.add(static_cast<double>(out.box_population[k]) * out.box_mean[k]);
  }
  out.poststratified_form = post.value();

  CompensatedSum greg;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const std::size_t j = sample.members[i];
    greg.add(sample.weights[i] * (yv[j] - out.box_mean[row_boxes[j]]));
  }
  for (std::size_t row = 0; row < frame.size(); ++row) {
    greg.add(out.box_mean[row_boxes[row]]);
  }
  out.greg_form = greg.value();

  const double scale =
      std::max({std::fabs(out.greg_form), std::fabs(out.poststratified_form), 1e-300});
  if (std::fabs(out.greg_form - out.poststratified_form) > 1e-8 * scale &&
      std::fabs(out.greg_form - out.poststratified_form) > 1e-12) {
    throw Error(Errc::IdentityViolation,
                "GREG form " + format_number(out.greg_form) +
                    " differs from post-stratified form " +
                    format_number(out.poststratified_form));
  }

  std::vector<double> cal(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto k = row_boxes[sample.members[i]];
    cal[i] = static_cast<double>(out.box_population[k]) / out.box_weighted_count[k] *
             sample.weights[i];
  }
  out.result.kind = EstimatorKind::GregTree;
  out.result.study = study;
  out.result.total = out.poststratified_form;
  out.result.model_summary =
      "regression tree with " + std::to_string(q) + " boxes";
  out.result.calibration_weights = std::move(cal);
  return out;
}

TreeEstimate tree_estimator(const SampleDraw& sample, const Frame& frame,
                            const Partition& partition) {
  const auto boxes = classify_rows(partition, frame);
  return tree_estimator(sample, frame, partition, boxes, partition.study());
}

std::vector<double> calibration_weights(const Partition& partition,
                                        const SampleDraw& sample,
                                        const Frame& frame) {
  return *tree_estimator(sample, frame, partition).result.calibration_weights;
}

}  // namespace svytree
