#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "svytree/design.hpp"
#include "svytree/error.hpp"
#include "svytree/io.hpp"
#include "svytree/synth.hpp"
#include "svytree/tree.hpp"
#include "svytree/tree_io.hpp"

using namespace svytree;

namespace {

// Weighted SSE about the weighted mean, computed in two passes.
double two_pass_sse(const std::vector<double>& y, const std::vector<double>& w) {
  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sw += w[i];
    swy += w[i] * y[i];
  }
  const double m = swy / sw;
  double sse = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sse += w[i] * (y[i] - m) * (y[i] - m);
  return sse;
}

struct Brute {
  std::vector<std::size_t> left;  // level codes, contains the lowest present level
  double reduction = -1.0;
};

// Every bipartition of the present levels, scored as parent SSE minus child SSE.
Brute brute_force(const TrainingData& d, std::size_t var) {
  std::vector<std::size_t> present;
  for (std::size_t l = 0; l < d.predictors[var].levels.size(); ++l) {
    if (std::find(d.x[var].begin(), d.x[var].end(), static_cast<double>(l)) != d.x[var].end()) {
      present.push_back(l);
    }
  }
  const double parent = two_pass_sse(d.y, d.w);
  Brute best;
  const std::size_t P = present.size();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << P) - 1; ++mask) {
    if (!(mask & 1U)) continue;
    std::vector<double> yl, wl, yr, wr;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const auto pos = static_cast<std::size_t>(
          std::find(present.begin(), present.end(), static_cast<std::size_t>(d.x[var][i])) -
          present.begin());
      if ((mask >> pos) & 1U) {
        yl.push_back(d.y[i]);
        wl.push_back(d.w[i]);
      } else {
        yr.push_back(d.y[i]);
        wr.push_back(d.w[i]);
      }
    }
    const double red = parent - two_pass_sse(yl, wl) - two_pass_sse(yr, wr);
    if (red > best.reduction) {
      best.reduction = red;
      best.left.clear();
      for (std::size_t i = 0; i < P; ++i) {
        if ((mask >> i) & 1U) best.left.push_back(present[i]);
      }
    }
  }
  return best;
}

TrainingData random_node(Rng& rng, std::size_t levels, std::size_t per_level) {
  TrainingData d;
  std::vector<std::string> labels;
  for (std::size_t l = 0; l < levels; ++l) labels.push_back("L" + std::to_string(l));
  d.predictors = {VariableSpec::categorical("v", labels)};
  d.x.resize(1);
  d.study = "y";
  std::vector<double> level_mean(levels);
  for (double& m : level_mean) m = 10.0 * rng.uniform();
  for (std::size_t l = 0; l < levels; ++l) {
    const std::size_t count = per_level + rng.below(per_level);
    for (std::size_t k = 0; k < count; ++k) {
      d.x[0].push_back(static_cast<double>(l));
      d.y.push_back(level_mean[l] + 4.0 * rng.uniform());
      d.w.push_back(1.0 + 50.0 * rng.uniform());
    }
  }
  return d;
}

std::vector<std::size_t> all_rows(const TrainingData& d) {
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

std::map<std::string, std::string> record(const std::string& industry, const std::string& size,
                                          const std::string& multi = "0",
                                          const std::string& region = "1") {
  return {{"industry", industry}, {"size", size}, {"multi", multi}, {"region", region}};
}

}  // namespace

TEST_CASE("hajek node mean") {
  CHECK(weighted_node_mean(std::vector{1.0, 2.0, 3.0}, std::vector{1.0, 1.0, 1.0}) == 2.0);
  CHECK(weighted_node_mean(std::vector{0.0, 10.0}, std::vector{3.0, 1.0}) == 2.5);
  try {
    weighted_node_mean(std::vector<double>{}, std::vector<double>{});
    FAIL("expected EmptyNode");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyNode);
  }
}

TEST_CASE("binary categorical split takes the between-group sum of squares") {
  TrainingData d;
  d.predictors = {VariableSpec::categorical("v", {"p", "q"})};
  d.x = {std::vector<double>(20)};
  for (std::size_t i = 0; i < 20; ++i) {
    d.x[0][i] = i < 10 ? 0.0 : 1.0;
    d.y.push_back(i < 10 ? 0.0 : 10.0);
    d.w.push_back(1.0);
  }
  const auto rows = all_rows(d);
  GrowControls c;
  c.min_node = 2;
  c.min_weight = 0.0;
  const auto s = best_split(d, rows, c, weighted_sse(d, rows));
  REQUIRE(s);
  CHECK(s->rule.left_levels == std::vector<std::size_t>{0});
  // Total SSE 20 * 25 = 500, within-group SSE 0.
  CHECK(s->reduction == doctest::Approx(500.0));

  std::fill(d.y.begin(), d.y.end(), 4.0);
  CHECK_FALSE(best_split(d, rows, c, weighted_sse(d, rows)));
}

TEST_CASE("categorical search agrees with brute-force enumeration") {
  Rng rng(2024);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t levels = 5 + static_cast<std::size_t>(rep % 4);
    const TrainingData d = random_node(rng, levels, 3);
    const auto rows = all_rows(d);
    const Brute oracle = brute_force(d, 0);
    const auto ex = best_categorical_split(d, rows, 0, 2, 0.0, CategoricalSearch::Exhaustive, 8);
    const auto scan = best_categorical_split(d, rows, 0, 2, 0.0, CategoricalSearch::OrderedScan);
    REQUIRE(ex);
    REQUIRE(scan);
    CHECK(ex->rule.left_levels == oracle.left);
    CHECK(testutil::rel_diff(ex->reduction, oracle.reduction) < 1e-9);
    CHECK(scan->reduction == ex->reduction);
    CHECK(scan->rule == ex->rule);
  }
}

TEST_CASE("split score is invariant to weight scale") {
  Rng rng(8);
  TrainingData d = random_node(rng, 6, 5);
  const auto rows = all_rows(d);
  GrowControls c;
  c.min_node = 2;
  c.min_weight = 0.0;
  const auto a = best_split(d, rows, c, weighted_sse(d, rows));
  for (double& w : d.w) w *= 8.0;
  const auto b = best_split(d, rows, c, weighted_sse(d, rows));
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->rule == b->rule);
  CHECK(b->reduction == doctest::Approx(8.0 * a->reduction).epsilon(1e-12));
}

TEST_CASE("numeric threshold split") {
  TrainingData d;
  d.predictors = {VariableSpec::numeric("x", VariableRole::Predictor)};
  d.x = {{1, 2, 3, 4, 5, 6}};
  d.y = {1, 1, 1, 9, 9, 9};
  d.w = {1, 1, 1, 1, 1, 1};
  const auto rows = all_rows(d);
  const auto s = best_numeric_split(d, rows, 0, 2, 0.0);
  REQUIRE(s);
  CHECK(s->rule.numeric);
  CHECK(s->rule.threshold > 3.0);
  CHECK(s->rule.threshold < 4.0);
  CHECK(s->reduction == doctest::Approx(96.0));
}

TEST_CASE("grown trees recover a two-cell interaction") {
  SynthConfig c;
  c.N = 60000;
  c.seed = 31;
  c.predictors = SynthConfig::default_predictors();
  StudyModel s;
  s.name = "y";
  s.default_mean = 0.5;
  s.cells.push_back(CellRule{{{"industry", {"72"}}, {"size", {"5", "6"}}}, 20.0, 0.0});
  c.studies = {s};
  const Frame f = synth_population(c);
  const auto design = allocate_by_rates(
      f, "size", {{"1", 1}, {"2", 1}, {"3", 1}, {"4", 2}, {"5", 4}, {"6", 8}}, 2000);
  const SampleDraw sample = draw_sample(design, f, 4);
  const std::vector<std::string> preds{"industry", "size", "multi", "region"};
  GrowControls g;
  g.min_improve = 0.01;
  const Partition p = grow_tree(f, sample, preds, "y", g);
  REQUIRE(p.num_boxes() >= 2);

  // Every box is either inside the generating cell or disjoint from it.
  const auto boxes = classify_rows(p, f);
  const auto ind = f.column("industry");
  const auto size = f.column("size");
  const double c72 = static_cast<double>(*f.spec(0).level_index("72"));
  std::vector<int> inside(p.num_boxes(), 0), outside(p.num_boxes(), 0);
  for (std::size_t j = 0; j < f.size(); ++j) {
    const bool in_cell = ind[j] == c72 && size[j] >= 4.0;
    (in_cell ? inside : outside)[boxes[j]] = 1;
  }
  for (std::size_t k = 0; k < p.num_boxes(); ++k) CHECK(inside[k] + outside[k] == 1);

  // Leaf means lie within 3 s.e. of the generating means.
  const TrainingData td = make_training_data(f, sample, preds, "y");
  const auto bs = p.boxes();
  for (std::size_t k = 0; k < bs.size(); ++k) {
    double sw = 0.0, sv = 0.0;
    for (std::size_t i = 0; i < td.size(); ++i) {
      std::vector<double> x{td.x[0][i], td.x[1][i], td.x[2][i], td.x[3][i]};
      if (p.box_index(x) != k) continue;
      sw += td.w[i];
      sv += td.w[i] * td.w[i] * (td.y[i] - bs[k].mu) * (td.y[i] - bs[k].mu);
    }
    const double se = std::sqrt(sv) / sw;
    const double truth = inside[k] ? 20.0 : 0.5;
    CHECK(std::fabs(bs[k].mu - truth) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("growth controls") {
  const Frame f = testutil::random_frame(17, 20000);
  const SampleDraw sample = draw_sample(SrsworDesign{400}, f, 3);
  const std::vector<std::string> preds{"a", "b"};

  GrowControls big;
  big.min_node = 201;
  CHECK(grow_tree(f, sample, preds, "y", big).num_boxes() == 1);

  GrowControls shallow;
  shallow.max_depth = 1;
  CHECK(grow_tree(f, sample, preds, "y", shallow).num_boxes() <= 2);

  GrowControls deep;
  deep.min_node = 10;
  deep.min_weight = 0.0;
  const Partition p = grow_tree(f, sample, preds, "y", deep);
  CHECK(p.num_boxes() > 2);
  for (const Box& b : p.boxes()) CHECK(b.sample_count >= deep.min_node);

  // Child SSEs never exceed the parent's.
  for (const TreeNode& n : p.nodes()) {
    if (n.is_leaf()) continue;
    const TreeNode& l = p.nodes()[static_cast<std::size_t>(n.left)];
    const TreeNode& r = p.nodes()[static_cast<std::size_t>(n.right)];
    CHECK(l.sse + r.sse <= n.sse * (1.0 + 1e-12));
    CHECK(n.sse - l.sse - r.sse == doctest::Approx(n.reduction).epsilon(1e-9));
    CHECK(l.id == 2 * n.id);
    CHECK(r.id == 2 * n.id + 1);
  }

  GrowControls bad;
  bad.min_node = 1;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(grow_tree(f, sample, std::vector<std::string>{"zzz"}, "y", deep), Error);
}

TEST_CASE("boxes partition the frame and classification is thread-independent") {
  const Frame f = testutil::random_frame(19, 30000, 7, 4);
  const SampleDraw sample = draw_sample(SrsworDesign{1500}, f, 8);
  GrowControls g;
  g.min_node = 15;
  g.min_weight = 0.0;
  const Partition p = grow_tree(f, sample, std::vector<std::string>{"a", "b"}, "y", g);
  const auto par = classify_rows(p, f);
  const auto ser = classify_rows_serial(p, f);
  CHECK(par == ser);
  const auto counts = box_population_counts(p, f);
  CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == f.size());
  // Membership follows from the rule path alone.
  const auto bs = p.boxes();
  for (std::size_t j = 0; j < f.size(); j += 97) {
    std::size_t hits = 0;
    for (std::size_t k = 0; k < bs.size(); ++k) {
      bool in = true;
      for (const auto& [rule, side] : bs[k].rule_path) {
        const double v = f.column(rule.variable)[j];
        in = in && (rule.goes_left(v) == (side == Side::Left));
      }
      if (in) {
        ++hits;
        CHECK(k == ser[j]);
      }
    }
    CHECK(hits == 1);
  }
}

TEST_CASE("single-box tree predicts the overall hajek mean") {
  const Frame f = testutil::random_frame(23, 3000);
  const SampleDraw sample = draw_sample(SrsworDesign{100}, f, 1);
  GrowControls g;
  g.max_depth = 0;
  const Partition p = grow_tree(f, sample, std::vector<std::string>{"a", "b"}, "y", g);
  REQUIRE(p.num_boxes() == 1);
  const auto y = [&] {
    std::vector<double> v;
    for (std::size_t j : sample.members) v.push_back(f.column("y")[j]);
    return v;
  }();
  const double hajek = weighted_node_mean(y, sample.weights);
  CHECK(predict(p, {{"a", "a1"}, {"b", "b2"}}) == hajek);
  CHECK(predict(p, {{"a", "a5"}, {"b", "b3"}}) == hajek);
}

TEST_CASE("census leaf means are population box means") {
  const Frame f = testutil::random_frame(29, 800);
  const SampleDraw census = draw_sample(CensusDesign{}, f, 0);
  GrowControls g;
  g.min_node = 20;
  g.min_weight = 0.0;
  const Partition p = grow_tree(f, census, std::vector<std::string>{"a", "b"}, "y", g);
  const auto rows = classify_rows(p, f);
  std::vector<double> sum(p.num_boxes(), 0.0), n(p.num_boxes(), 0.0);
  for (std::size_t j = 0; j < f.size(); ++j) {
    sum[rows[j]] += f.column("y")[j];
    n[rows[j]] += 1.0;
  }
  const auto bs = p.boxes();
  for (std::size_t k = 0; k < bs.size(); ++k) {
    CHECK(bs[k].mu == doctest::Approx(sum[k] / n[k]).epsilon(1e-12));
  }
}

TEST_CASE("tree documents round-trip") {
  const Frame f = testutil::random_frame(31, 20000, 6, 4);
  const SampleDraw sample = draw_sample(SrsworDesign{1000}, f, 2);
  GrowControls g;
  g.min_node = 10;
  g.min_weight = 0.0;
  const Partition p = grow_tree(f, sample, std::vector<std::string>{"a", "b"}, "y", g);
  const std::string doc = export_tree(p);
  const Partition q = import_tree(doc);
  CHECK(export_tree(q) == doc);
  CHECK(classify_rows(q, f) == classify_rows(p, f));

  CHECK_THROWS_AS(import_tree("{not json"), Error);
  CHECK_THROWS_AS(import_tree(R"({"schema": [], "nodes": [{"id": 2}]})"), Error);
}

TEST_CASE("figure 1 bartender fixture") {
  const Partition p = load_tree(testutil::data_dir() / "figure1_bartenders.json");
  CHECK(p.study() == "bartenders");
  REQUIRE(p.num_boxes() == 14);
  std::multiset<double> values;
  for (const Box& b : p.boxes()) values.insert(b.mu);
  CHECK(values == std::multiset<double>{0, 0, 0, 0.01, 0, 0.01, 0.12, 0.08, 0.12, 0.15,
                                        0.41, 0.65, 1.09, 2.88});
  CHECK(predict(p, record("72", "4")) == 2.88);
  CHECK(predict(p, record("71", "2", "0", "4")) == 1.09);
  CHECK(predict(p, record("71", "2", "0", "5")) == 0.65);
  CHECK(predict(p, record("72", "1", "1")) == 0.15);
  CHECK(predict(p, record("56", "5")) == 0.12);
  CHECK(predict(p, record("81", "1", "0", "4")) == 0.12);
  CHECK(predict(p, record("99", "1", "0", "2")) == 0.08);
  try {
    predict(p, record("70", "4"));
    FAIL("expected UnknownLevel");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownLevel);
  }
}

TEST_CASE("figure 2 teacher fixture") {
  const Partition p = load_tree(testutil::data_dir() / "figure2_teachers.json");
  REQUIRE(p.num_boxes() == 10);
  std::multiset<double> values;
  for (const Box& b : p.boxes()) values.insert(b.mu);
  CHECK(values.count(3.59) == 1);
  CHECK(values.count(30.44) == 1);
  CHECK(predict(p, record("61", "5")) == 30.44);
  CHECK(predict(p, record("61", "4")) == 3.59);
  CHECK(predict(p, record("62", "2")) == 0.01);
  CHECK(predict(p, record("56", "6")) == 0.18);
  // The fixture survives a round trip through the exporter.
  CHECK(export_tree(import_tree(export_tree(p))) == export_tree(p));
}
