#include "svytree/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "svytree/config.hpp"
#include "svytree/design.hpp"
#include "svytree/error.hpp"
#include "svytree/estimate.hpp"
#include "svytree/io.hpp"
#include "svytree/mc.hpp"
#include "svytree/synth.hpp"
#include "svytree/tree_io.hpp"

namespace svytree {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::optional<std::string> seed;
  std::string out = "svytree-out";
  std::optional<std::size_t> n;
  std::optional<std::size_t> replicates;
  std::optional<std::string> estimators;
  std::optional<std::string> estimator;
  std::optional<std::string> tree;
  std::optional<int> threads;
  bool long_mode = false;
  bool svg = false;
  bool progress = false;
  std::vector<std::string> set;
};

void print_error(std::ostream& err, std::string_view name, std::string_view module,
                 std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = name;
  j["module"] = module;
  j["message"] = message;
  err << j.dump() << '\n';
}

std::string archived_config(const Options& o) {
  std::string text = o.config.empty() ? std::string() : read_file(o.config);
  if (!text.empty() && text.back() != '\n') text += '\n';
  std::ostringstream extra;
  for (const std::string& s : o.set) extra << "# --set " << s << '\n';
  return text + extra.str();
}

AppConfig load(const Options& o, const std::string& command) {
  std::vector<std::string> overrides = o.set;
  if (o.seed) overrides.push_back((command == "synth" ? "population.seed=" : "seed=") + *o.seed);
  if (o.n) {
    overrides.push_back(command == "simulate"
                            ? "simulate.sample_sizes=[" + std::to_string(*o.n) + "]"
                            : "n=" + std::to_string(*o.n));
  }
  if (o.replicates) overrides.push_back("simulate.replicates=" + std::to_string(*o.replicates));
  if (o.estimators) overrides.push_back("simulate.estimators=" + *o.estimators);
  if (o.estimator) overrides.push_back("estimate.estimator=" + *o.estimator);
  if (o.tree) overrides.push_back("estimate.tree=" + *o.tree);
  if (o.threads) overrides.push_back("simulate.threads=" + std::to_string(*o.threads));
  if (o.long_mode) overrides.push_back("simulate.long=true");
  if (o.svg) overrides.push_back("simulate.svg=true");
  if (o.progress) overrides.push_back("simulate.progress=true");
  if (o.config.empty()) return parse_config("", overrides);
  return load_config(o.config, overrides);
}

std::string default_study(const AppConfig& c, const Frame& frame) {
  if (!c.study.empty()) return c.study;
  const auto cols = frame.study_columns();
  if (cols.empty()) throw Error(Errc::ConfigError, "frame has no study variable");
  return frame.spec(cols.front()).name;
}

std::vector<std::string> default_predictors(const AppConfig& c, const Frame& frame) {
  if (!c.predictors.empty()) return c.predictors;
  std::vector<std::string> out;
  for (std::size_t col : frame.predictor_columns()) out.push_back(frame.spec(col).name);
  return out;
}

int cmd_synth(const Options& o, std::ostream& out) {
  const AppConfig c = load(o, "synth");
  const Frame frame = synth_population(c.population.synth);
  const fs::path dir(o.out);
  write_frame(dir / "frame.csv", frame);
  write_file_atomic(dir / "config.yaml", archived_config(o));
  out << "wrote " << (dir / "frame.csv").string() << " (" << frame.size() << " rows)\n";
  return kExitOk;
}

int cmd_tree(const Options& o, std::ostream& out) {
  const AppConfig c = load(o, "tree");
  const Frame frame = make_frame(c.population);
  const SampleDraw sample = draw_sample(c.single_design(frame), frame, c.seed);
  const std::string study = default_study(c, frame);
  const Partition tree = grow_tree(frame, sample, default_predictors(c, frame), study, c.tree);
  const fs::path dir(o.out);
  save_tree(dir / "tree.json", tree);
  write_file_atomic(dir / "config.yaml", archived_config(o));
  out << "wrote " << (dir / "tree.json").string() << " (" << tree.num_boxes()
      << " boxes, n = " << sample.size() << ")\n";
  return kExitOk;
}

int cmd_estimate(const Options& o, std::ostream& out) {
  const AppConfig c = load(o, "estimate");
  const Frame frame = make_frame(c.population);
  const SampleDraw sample = draw_sample(c.single_design(frame), frame, c.seed);
  EstimateResult result;
  switch (c.estimator) {
    case EstimatorKind::HT: {
      const std::string study = default_study(c, frame);
      result.kind = EstimatorKind::HT;
      result.study = study;
      result.total = ht_total(sample_values(frame, sample, study), sample.weights);
      result.model_summary = "none";
      result.calibration_weights = sample.weights;
      break;
    }
    case EstimatorKind::GregLinear: {
      const std::string study = default_study(c, frame);
      const auto preds = default_predictors(c, frame);
      const StepwiseResult sel = stepwise_select(frame, sample, preds, study, c.stepwise);
      result = linear_estimator(frame, sample, study, sel.model);
      break;
    }
    case EstimatorKind::GregTree: {
      std::optional<Partition> tree;
      if (!c.tree_document.empty()) {
        tree = load_tree(c.tree_document);
        if (!c.study.empty() && c.study != tree->study()) {
          throw Error(Errc::ConfigError, "study '" + c.study +
                                             "' does not match the tree's study '" +
                                             tree->study() + "'");
        }
      } else {
        tree = grow_tree(frame, sample, default_predictors(c, frame),
                         default_study(c, frame), c.tree);
      }
      result = tree_estimator(sample, frame, *tree).result;
      if (!c.tree_document.empty()) {
        result.model_summary = "tree document " + c.tree_document.string() + ", " +
                               std::to_string(tree->num_boxes()) + " boxes";
      }
      break;
    }
  }
  const fs::path dir(o.out);
  write_file_atomic(dir / "estimate.json", to_json(result) + "\n");
  write_file_atomic(dir / "config.yaml", archived_config(o));
  out << estimator_name(result.kind) << " total of " << result.study << ": "
      << format_number(result.total) << "\n";
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const AppConfig c = load(o, "simulate");
  const Frame frame = make_frame(c.population);
  const SimReport report = run_simulation(frame, c.simulate);
  const fs::path dir(o.out);
  write_file_atomic(dir / "report.csv", report_csv(report));
  const std::string summary = report_summary(report);
  write_file_atomic(dir / "summary.txt", summary);
  if (c.svg) write_file_atomic(dir / "report.svg", report_svg(report));
  write_file_atomic(dir / "config.yaml", archived_config(o));
  out << summary;
  return kExitOk;
}

int cmd_diagnose(const Options& o, std::ostream& out) {
  const AppConfig c = load(o, "diagnose");
  const Frame frame = make_frame(c.population);
  const DesignSpec design = c.single_design(frame);
  const DesignDiagnostics d = design_diagnostics(design, frame);
  nlohmann::ordered_json j;
  j["design"] = describe(design);
  j["population"] = d.population;
  j["expected_n"] = d.expected_n;
  j["sampling_fraction"] = d.sampling_fraction;
  j["min_pi"] = d.min_pi;
  j["max_pi"] = d.max_pi;
  j["n_min_pi"] = d.n_min_pi;
  j["max_weight"] = d.max_weight;
  j["weight_ratio"] = d.weight_ratio;
  const fs::path dir(o.out);
  write_file_atomic(dir / "diagnostics.json", j.dump(2) + "\n");
  write_file_atomic(dir / "config.yaml", archived_config(o));
  out << j.dump(2) << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Design-based survey estimation with regression-tree model assistance",
               "svytree"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  Options o;
  const std::string keys = config_help();

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "YAML configuration file");
    sub->add_option("--seed", o.seed, "Random seed (overrides the config)");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--set", o.set, "Override a configuration key: key=value")
        ->take_all()
        ->allow_extra_args(false);
    sub->footer(keys);
  };

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic population frame");
  common(synth);
  CLI::App* tree = app.add_subcommand("tree", "Grow a regression tree on one sample");
  common(tree);
  tree->add_option("--n", o.n, "Sample size");
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate a total from one sample");
  common(estimate);
  estimate->add_option("--n", o.n, "Sample size");
  estimate->add_option("--estimator", o.estimator, "ht, greg-linear or greg-tree");
  estimate->add_option("--tree", o.tree, "Tree document to use instead of growing one");
  CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo comparison");
  common(simulate);
  simulate->add_option("--n", o.n, "Single sample size");
  simulate->add_option("--replicates", o.replicates, "Replicates per sample size");
  simulate->add_option("--estimators", o.estimators, "Comma-separated estimator names");
  simulate->add_option("--threads", o.threads, "Worker threads (0 = runtime default)");
  simulate->add_flag("--long", o.long_mode, "Full scale: 1000 replicates, n = 2000..6000");
  simulate->add_flag("--svg", o.svg, "Also write report.svg");
  simulate->add_flag("--progress", o.progress, "Replicate counter on standard error");
  CLI::App* diagnose = app.add_subcommand("diagnose", "Report design diagnostics");
  common(diagnose);
  diagnose->add_option("--n", o.n, "Sample size");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (CLI::App* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "BadArguments", "cli", e.what());
    return kExitBadArguments;
  }

  try {
    if (synth->parsed()) return cmd_synth(o, out);
    if (tree->parsed()) return cmd_tree(o, out);
    if (estimate->parsed()) return cmd_estimate(o, out);
    if (simulate->parsed()) return cmd_simulate(o, out);
    return cmd_diagnose(o, out);
  } catch (const Error& e) {
    print_error(err, errc_name(e.code()), errc_module(e.code()), e.what());
    switch (e.code()) {
      case Errc::BadArguments: return kExitBadArguments;
      case Errc::ConfigError: return kExitConfig;
      default: return kExitComputation;
    }
  } catch (const std::exception& e) {
    print_error(err, "InternalError", "cli", e.what());
    return kExitComputation;
  }
}

}  // namespace svytree
