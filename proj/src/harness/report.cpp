#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/tokenizer.hpp>

#include "ncvax/harness.hpp"

namespace ncvax::harness {
namespace {

const std::vector<std::string> kRepColumns = {"scenario", "n",       "rep",      "method",     "seed",
                                              "status",   "beta1_hat", "std_err", "ci_lo",      "ci_hi",
                                              "covered",  "corr_y1_y2", "true_beta1c", "error"};

std::string num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

[[noreturn]] void malformed(const std::filesystem::path& path, std::size_t line, const std::string& msg) {
  throw Error(ErrorCode::MalformedInput, path.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) malformed(path, line, "cannot parse number '" + s + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    malformed(path, line, "cannot parse integer '" + s + "'");
  return v;
}

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

}  // namespace

void write_rep_csv(const std::vector<RepRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidOptions, "cannot write " + path.string());
  for (std::size_t i = 0; i < kRepColumns.size(); ++i) out << (i ? "," : "") << kRepColumns[i];
  out << '\n';
  for (const auto& r : records) {
    out << quoted(r.scenario) << ',' << r.n << ',' << r.rep << ',' << to_string(r.method) << ',' << r.seed << ','
        << (r.ok ? "ok" : "failed") << ',';
    if (r.ok)
      out << num(r.beta1_hat) << ',' << num(r.std_err) << ',' << num(r.ci_lo) << ',' << num(r.ci_hi) << ','
          << r.covered;
    else
      out << ",,,,";
    out << ',' << num(r.corr_y1_y2) << ',' << num(r.true_beta1c) << ',' << quoted(r.error) << '\n';
  }
  if (!out) throw Error(ErrorCode::InvalidOptions, "failed writing " + path.string());
}

std::vector<RepRecord> read_rep_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open " + path.string());
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> col;
  std::vector<RepRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    try {
      Tokenizer tok(line);
      f.assign(tok.begin(), tok.end());
    } catch (const boost::escaped_list_error& e) {
      malformed(path, lineno, e.what());
    }
    if (col.empty()) {
      for (std::size_t i = 0; i < f.size(); ++i) col[f[i]] = i;
      for (const auto& name : kRepColumns)
        if (!col.contains(name)) malformed(path, lineno, "missing column '" + name + "'");
      continue;
    }
    if (f.size() != col.size()) malformed(path, lineno, "wrong number of fields");
    auto get = [&](const char* name) -> const std::string& { return f[col.at(name)]; };
    RepRecord r;
    r.scenario = get("scenario");
    r.n = parse_int<std::size_t>(get("n"), path, lineno);
    r.rep = parse_int<int>(get("rep"), path, lineno);
    try {
      r.method = parse_method(get("method"));
    } catch (const Error&) {
      malformed(path, lineno, "unknown method '" + get("method") + "'");
    }
    r.seed = parse_int<std::uint64_t>(get("seed"), path, lineno);
    if (get("status") != "ok" && get("status") != "failed") malformed(path, lineno, "status must be ok or failed");
    r.ok = get("status") == "ok";
    r.corr_y1_y2 = parse_double(get("corr_y1_y2"), path, lineno);
    r.true_beta1c = parse_double(get("true_beta1c"), path, lineno);
    r.error = get("error");
    if (r.ok) {
      r.beta1_hat = parse_double(get("beta1_hat"), path, lineno);
      r.std_err = parse_double(get("std_err"), path, lineno);
      r.ci_lo = parse_double(get("ci_lo"), path, lineno);
      r.ci_hi = parse_double(get("ci_hi"), path, lineno);
      r.covered = parse_int<int>(get("covered"), path, lineno);
      if (!std::isfinite(r.beta1_hat) || (r.covered != 0 && r.covered != 1))
        malformed(path, lineno, "successful row needs beta1_hat and covered in {0,1}");
    }
    out.push_back(std::move(r));
  }
  if (col.empty()) throw Error(ErrorCode::MalformedInput, path.string() + ": empty file");
  return out;
}

nlohmann::json to_json(const StudySummary& s) {
  nlohmann::json j;
  j["scenario"] = s.scenario;
  j["design"] = s.design;
  j["n"] = s.n;
  j["reps"] = s.reps;
  j["seed"] = s.seed;
  j["true_beta1c"] = finite_or_null(s.true_beta1c);
  j["mean_corr_y1_y2"] = finite_or_null(s.mean_corr_y1_y2);
  j["warnings"] = s.warnings;
  auto& methods = j["methods"] = nlohmann::json::array();
  for (const auto& m : s.methods)
    methods.push_back({{"method", to_string(m.method)},
                       {"successes", m.successes},
                       {"failures", m.failures},
                       {"mean_estimate", finite_or_null(m.mean_estimate)},
                       {"bias", finite_or_null(m.bias)},
                       {"empirical_variance", finite_or_null(m.empirical_variance)},
                       {"variance_ratio", finite_or_null(m.variance_ratio)},
                       {"coverage", finite_or_null(m.coverage)},
                       {"mean_se", finite_or_null(m.mean_se)}});
  return j;
}

std::string format_table(const StudySummary& s) {
  std::ostringstream out;
  out << "scenario " << s.scenario << " (" << s.design << ", n=" << s.n << ", reps=" << s.reps << ", seed=" << s.seed
      << ")\n";
  out << "true beta1c " << fixed(s.true_beta1c) << ", mean corr(y1,y2) " << fixed(s.mean_corr_y1_y2, 3) << "\n\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %9s %9s %9s %9s %9s %9s %6s\n", "method", "mean", "bias", "emp.var",
                "var.ratio", "coverage", "mean.se", "failed");
  out << buf;
  for (const auto& m : s.methods) {
    std::snprintf(buf, sizeof buf, "%-10s %9s %9s %9s %9s %9s %9s %6d\n", std::string(to_string(m.method)).c_str(),
                  fixed(m.mean_estimate).c_str(), fixed(m.bias).c_str(), fixed(m.empirical_variance, 5).c_str(),
                  fixed(m.variance_ratio, 3).c_str(), fixed(m.coverage, 3).c_str(), fixed(m.mean_se).c_str(),
                  m.failures);
    out << buf;
  }
  for (const auto& w : s.warnings) out << "warning: " << w << '\n';
  return out.str();
}

nlohmann::json to_json(const EstimateResult& r, const AnalysisContext& c) {
  nlohmann::json j;
  j["input"] = c.input;
  j["n"] = c.n;
  j["method"] = to_string(r.method);
  if (!c.strata.empty()) j["strata"] = c.strata;
  if (!c.regression.empty()) j["regression"] = c.regression;
  if (!c.augmentation.empty()) j["augmentation"] = c.augmentation;
  j["beta1_hat"] = finite_or_null(r.beta1_hat);
  j["std_err"] = finite_or_null(r.std_err);
  j["ci_level"] = r.ci_level;
  j["ci"] = {finite_or_null(r.ci_lo), finite_or_null(r.ci_hi)};
  j["ve"] = finite_or_null(r.ve);
  if (r.components) j["components"] = {{"beta1_star", r.components->first}, {"beta2_star", r.components->second}};
  j["diagnostics"] = {{"iterations", r.diagnostics.iterations},
                      {"excluded_strata", r.diagnostics.excluded_strata},
                      {"warnings", r.diagnostics.warnings},
                      {"bootstrap_reps", r.diagnostics.bootstrap_reps},
                      {"bootstrap_failures", r.diagnostics.bootstrap_failures}};
  return j;
}

std::string format_table(const EstimateResult& r, const AnalysisContext& c) {
  std::ostringstream out;
  out << "input      " << c.input << " (n=" << c.n << ")\n";
  out << "method     " << to_string(r.method) << '\n';
  if (!c.augmentation.empty()) out << "augment    " << c.augmentation << '\n';
  if (!c.strata.empty()) out << "strata     " << c.strata << '\n';
  if (!c.regression.empty()) out << "regression " << c.regression << '\n';
  out << "beta1_hat  " << fixed(r.beta1_hat, 5) << '\n';
  out << "std_err    " << fixed(r.std_err, 5) << '\n';
  out << "ci(" << fixed(r.ci_level, 2) << ")  [" << fixed(r.ci_lo, 5) << ", " << fixed(r.ci_hi, 5) << "]\n";
  out << "ve         " << fixed(r.ve, 4) << '\n';
  if (r.components)
    out << "components beta1*=" << fixed(r.components->first, 5) << " beta2*=" << fixed(r.components->second, 5)
        << '\n';
  if (r.diagnostics.iterations > 0) out << "iterations " << r.diagnostics.iterations << '\n';
  if (r.diagnostics.bootstrap_reps > 0)
    out << "bootstrap  " << r.diagnostics.bootstrap_reps << " resamples, " << r.diagnostics.bootstrap_failures
        << " undefined\n";
  for (const auto& s : r.diagnostics.excluded_strata) out << "excluded   " << s << '\n';
  for (const auto& w : r.diagnostics.warnings) out << "warning    " << w << '\n';
  return out.str();
}

}  // namespace ncvax::harness
