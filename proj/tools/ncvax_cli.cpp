// ncvax: simulate studies, analyze cohort CSVs, export plot data.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <boost/algorithm/string.hpp>

#include "ncvax/estimators.hpp"
#include "ncvax/harness.hpp"
#include "ncvax/kernels.hpp"
#include "ncvax/simulator.hpp"

namespace fs = std::filesystem;
using namespace ncvax;

namespace {

std::vector<Method> parse_methods(const std::vector<std::string>& tags) {
  std::vector<Method> out;
  for (const auto& t : tags) out.push_back(parse_method(t));
  return out;
}

// "age=18,20" -> ("age", {18, 20})
std::pair<std::string, std::vector<double>> parse_cut(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw Error(ErrorCode::InvalidOptions, "--cuts expects name=a,b,... got '" + text + "'");
  std::vector<std::string> parts;
  const std::string values = text.substr(eq + 1);
  boost::algorithm::split(parts, values, boost::algorithm::is_any_of(","));
  std::vector<double> cuts;
  for (auto p : parts) {
    boost::algorithm::trim(p);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), v);
    if (ec != std::errc() || ptr != p.data() + p.size())
      throw Error(ErrorCode::InvalidOptions, "--cuts: cannot parse '" + p + "'");
    cuts.push_back(v);
  }
  return {text.substr(0, eq), cuts};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorCode::InvalidOptions, "cannot write " + path.string());
}

struct SimulateArgs {
  std::string scenario;
  std::optional<std::size_t> n;
  int reps = 1000;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"unaug", "aug", "mh", "joint_nc", "joint_mh", "joint_reg"};
  int workers = 1;
  int bootstrap_reps = 500;
  std::string out = "study";
};

int run_simulate(const SimulateArgs& a) {
  auto config = sim::load_scenario(a.scenario);
  if (a.n) {
    config.n = *a.n;
    sim::validate(config);
  }
  harness::StudyOptions options;
  options.methods = parse_methods(a.methods);
  options.reps = a.reps;
  options.seed = a.seed;
  options.workers = a.workers;
  options.method_options.estimator.bootstrap_reps = a.bootstrap_reps;
  const auto result = harness::run_study(config, options);

  fs::create_directories(a.out);
  harness::write_rep_csv(result.records, fs::path(a.out) / "reps.csv");
  write_text(fs::path(a.out) / "summary.json", harness::to_json(result.summary).dump(2) + "\n");
  const auto table = harness::format_table(result.summary);
  write_text(fs::path(a.out) / "summary.txt", table);
  std::cout << table;

  const auto failed = harness::all_failed(result.summary);
  if (!failed.empty()) throw Error(ErrorCode::AllRepsFailed, "every replicate failed for " + std::string(to_string(failed.front())));
  return 0;
}

struct AnalyzeArgs {
  std::string input;
  std::string method;
  std::vector<std::string> strata;
  std::vector<std::string> cuts;
  std::string regress;
  std::string augment;
  std::vector<std::string> categorical;
  std::string y2_prefix;
  double ci = 0.95;
  int bootstrap_reps = 500;
  std::uint64_t seed = 20240917;
  int workers = 1;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  ColumnMap columns;
  columns.y2_type_prefix = a.y2_prefix;
  auto schema = infer_schema(a.input, columns);
  for (const auto& name : a.categorical) {
    auto it = std::find_if(schema.begin(), schema.end(), [&](const auto& e) { return e.first == name; });
    if (it == schema.end()) throw Error(ErrorCode::MissingColumn, "no covariate column '" + name + "'");
    it->second = CovariateKind::categorical;
  }
  const Dataset data = load_csv(a.input, schema, columns);

  Method method = parse_method(a.method);
  MethodOptions mo;
  mo.estimator.ci_level = a.ci;
  mo.estimator.bootstrap_reps = a.bootstrap_reps;
  mo.estimator.bootstrap_seed = a.seed;
  mo.estimator.workers = a.workers;
  if (!(a.ci > 0.0 && a.ci < 1.0)) throw Error(ErrorCode::InvalidOptions, "--ci must lie in (0, 1)");

  harness::AnalysisContext ctx;
  ctx.input = a.input;
  ctx.n = data.size();
  if (!a.augment.empty()) {
    if (method != Method::aug && method != Method::aug_w && method != Method::aug_y2w)
      throw Error(ErrorCode::InvalidOptions, "--augment applies to the aug methods only");
    const auto aug = parse_augmentation(a.augment);
    method = aug == Augmentation::y2 ? Method::aug : aug == Augmentation::w ? Method::aug_w : Method::aug_y2w;
  }
  if (method == Method::aug || method == Method::aug_w || method == Method::aug_y2w)
    ctx.augmentation = method == Method::aug ? "y2" : method == Method::aug_w ? "w" : "y2w";
  if (!a.strata.empty() || !a.cuts.empty()) {
    StratumSpec spec;
    spec.keys = a.strata;
    for (const auto& c : a.cuts) spec.numeric_cuts.insert(parse_cut(c));
    validate(spec, data);
    mo.strata = spec;
    ctx.strata = boost::algorithm::join(a.strata, ",");
    for (const auto& c : a.cuts) ctx.strata += "; " + c;
  }
  if (!a.regress.empty()) {
    mo.regression = parse_regression_spec(a.regress);
    ctx.regression = "primary=" + to_string(mo.regression->primary_terms) +
                     ",secondary=" + to_string(mo.regression->secondary_terms);
  }

  const auto result = estimate(method, data, mo);
  const auto table = harness::format_table(result, ctx);
  std::cout << table;
  if (!a.out.empty()) {
    write_text(a.out, harness::to_json(result, ctx).dump(2) + "\n");
    write_text(a.out + ".txt", table);
  }
  return 0;
}

int run_plotdata(const std::string& input, const std::string& out, const std::vector<std::string>& methods,
                 bool methods_given) {
  const auto records = harness::read_rep_csv(input);
  std::optional<std::vector<Method>> selection;
  if (methods_given) selection = parse_methods(methods);
  const auto rows = harness::emit_plot_data(records, selection, out);
  std::cout << "wrote " << rows << " rows to " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Negative-control adjusted vaccine effect estimation"};
  app.require_subcommand(1);
  bool force_scalar = false;
  app.add_flag("--scalar", force_scalar, "Use the scalar reference kernels");

  SimulateArgs sa;
  auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo study on a scenario");
  simulate->add_option("--scenario", sa.scenario, "Preset name or config file")->required();
  simulate->add_option("--n", sa.n, "Cohort size (overrides the scenario)");
  simulate->add_option("--reps", sa.reps, "Replicates")->capture_default_str();
  simulate->add_option("--seed", sa.seed, "Study seed")->capture_default_str();
  simulate->add_option("--methods", sa.methods, "Comma-separated method tags")->delimiter(',')->capture_default_str();
  simulate->add_option("--workers", sa.workers, "Worker threads")->capture_default_str();
  simulate->add_option("--bootstrap-reps", sa.bootstrap_reps, "Bootstrap resamples for mh/joint_mh")->capture_default_str();
  simulate->add_option("--out", sa.out, "Output directory")->capture_default_str();

  AnalyzeArgs aa;
  auto* analyze = app.add_subcommand("analyze", "Estimate the treatment effect in a cohort CSV");
  analyze->add_option("--input", aa.input, "Cohort CSV (columns t, y1, y2, covariates)")->required();
  analyze->add_option("--method", aa.method, "Method tag")->required();
  analyze->add_option("--strata", aa.strata, "Stratification keys")->delimiter(',');
  analyze->add_option("--cuts", aa.cuts, "Bin edges for a numeric key: name=a,b,... (repeatable)");
  analyze->add_option("--regress", aa.regress, "primary=...,secondary=... covariate terms");
  analyze->add_option("--augment", aa.augment, "y2 | w | y2w");
  analyze->add_option("--categorical", aa.categorical, "Treat these numeric-looking columns as categorical")
      ->delimiter(',');
  analyze->add_option("--y2-prefix", aa.y2_prefix, "Sum columns with this prefix into y2");
  analyze->add_option("--ci", aa.ci, "Confidence level")->capture_default_str();
  analyze->add_option("--bootstrap-reps", aa.bootstrap_reps, "Bootstrap resamples")->capture_default_str();
  analyze->add_option("--seed", aa.seed, "Bootstrap seed")->capture_default_str();
  analyze->add_option("--workers", aa.workers, "Bootstrap worker threads")->capture_default_str();
  analyze->add_option("--out", aa.out, "JSON report path (a .txt table is written next to it)");

  std::string plot_in, plot_out;
  std::vector<std::string> plot_methods;
  auto* plot = app.add_subcommand("plotdata", "Long-format estimates for box plots");
  plot->add_option("--input", plot_in, "Replicate CSV from simulate")->required();
  plot->add_option("--out", plot_out, "Output CSV")->required();
  auto* plot_methods_opt = plot->add_option("--methods", plot_methods, "Restrict to these methods")
                               ->delimiter(',')
                               ->expected(0, -1);

  auto* presets = app.add_subcommand("presets", "Shipped scenarios");
  auto* presets_list = presets->add_subcommand("list", "List preset names");
  presets->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (force_scalar) kernels::set_active_isa(kernels::Isa::scalar);
    if (*simulate) return run_simulate(sa);
    if (*analyze) return run_analyze(aa);
    if (*plot) return run_plotdata(plot_in, plot_out, plot_methods, plot_methods_opt->count() > 0);
    if (*presets_list) {
      for (const auto& name : sim::list_presets()) std::cout << name << '\n';
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_validation_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
