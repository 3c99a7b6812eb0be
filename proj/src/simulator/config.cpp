#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>

#include "ncvax/simulator.hpp"

namespace ncvax::sim {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); }

double parse_number(std::string text, const std::string& key) {
  boost::algorithm::trim(text);
  bool take_log = false;
  if (text.starts_with("log(") && text.ends_with(")")) {
    take_log = true;
    text = text.substr(4, text.size() - 5);
    boost::algorithm::trim(text);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    bad("key '" + key + "': cannot parse number '" + text + "'");
  if (take_log) {
    if (!(v > 0.0)) bad("key '" + key + "': log of a nonpositive number");
    v = std::log(v);
  }
  return v;
}

/// Either a comma list or "a .. b", which is expanded to `count` evenly
/// spaced values once the count is known.
struct NumberList {
  std::vector<double> values;
  std::optional<std::pair<double, double>> range;

  std::vector<double> expand(std::size_t count, const std::string& key) const {
    if (range) {
      std::vector<double> out(count);
      for (std::size_t i = 0; i < count; ++i)
        out[i] = count == 1 ? range->first
                            : range->first + (range->second - range->first) * static_cast<double>(i) /
                                                 static_cast<double>(count - 1);
      return out;
    }
    if (values.size() == 1) return std::vector<double>(count, values[0]);
    if (values.size() != count)
      bad("key '" + key + "' needs 1 or " + std::to_string(count) + " values, got " +
          std::to_string(values.size()));
    return values;
  }
};

NumberList parse_list(const std::string& text, const std::string& key) {
  NumberList out;
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    out.range = std::pair{parse_number(text.substr(0, dots), key), parse_number(text.substr(dots + 2), key)};
    return out;
  }
  std::vector<std::string> parts;
  boost::algorithm::split(parts, text, boost::algorithm::is_any_of(","));
  for (const auto& p : parts) out.values.push_back(parse_number(p, key));
  return out;
}

template <std::size_t N>
std::array<double, N> parse_fixed(const std::string& text, const std::string& key) {
  const auto list = parse_list(text, key);
  if (list.range || list.values.size() != N) bad("key '" + key + "' needs exactly " + std::to_string(N) + " values");
  std::array<double, N> out{};
  std::copy(list.values.begin(), list.values.end(), out.begin());
  return out;
}

bool parse_bool(std::string text, const std::string& key) {
  boost::algorithm::to_lower(text);
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  bad("key '" + key + "' must be true or false");
}

struct ParseState {
  GeneratorConfig config;
  bool preset = false;
  std::optional<fs::path> a_probs_file;
  std::size_t n_nt = 20;
  std::map<std::string, NumberList> negative;  // mu, beta, alpha
  std::array<double, kSites> negative_site{};
  std::vector<fs::path> stack;
};

void parse_into(ParseState& st, const fs::path& file);

void apply(ParseState& st, const std::string& key, const std::string& value, const fs::path& file) {
  auto& c = st.config;
  if (key == "include") {
    fs::path base = value;
    if (base.is_relative()) base = file.parent_path() / base;
    parse_into(st, base);
  } else if (key == "preset") {
    st.preset = parse_bool(value, key);
  } else if (key == "name") {
    c.name = value;
  } else if (key == "n") {
    const double v = parse_number(value, key);
    if (v < 1 || v != std::floor(v)) bad("n must be a positive integer");
    c.n = static_cast<std::size_t>(v);
  } else if (key == "design") {
    if (value == "randomized") c.design = Design::randomized;
    else if (value == "observational") c.design = Design::observational;
    else bad("design must be randomized or observational");
  } else if (key == "age_levels") {
    const auto list = parse_list(value, key);
    if (list.range) bad("age_levels must be an explicit list");
    c.age_levels = list.values;
  } else if (key == "a_values") {
    c.a_values = parse_fixed<3>(value, key);
  } else if (key == "a_probs_file") {
    fs::path p = value;
    if (p.is_relative()) p = file.parent_path() / p;
    st.a_probs_file = p;
  } else if (key == "treatment") {
    const auto v = parse_fixed<4>(value, key);
    c.treatment = {v[0], v[1], v[2], v[3]};
  } else if (key == "primary18.enabled") {
    c.second_primary_enabled = parse_bool(value, key);
  } else if (key.starts_with("primary16.") || key.starts_with("primary18.")) {
    auto& type = c.primary[key.starts_with("primary16.") ? 0 : 1];
    const std::string field = key.substr(10);
    if (field == "mu") type.mu = parse_number(value, key);
    else if (field == "beta") type.beta = parse_number(value, key);
    else if (field == "alpha") type.alpha = parse_number(value, key);
    else if (field == "site") type.site = parse_fixed<kSites>(value, key);
    else bad("unknown key '" + key + "'");
  } else if (key == "n_nt") {
    const double v = parse_number(value, key);
    if (v < 1 || v != std::floor(v)) bad("n_nt must be a positive integer");
    st.n_nt = static_cast<std::size_t>(v);
  } else if (key == "negative.mu" || key == "negative.beta" || key == "negative.alpha") {
    st.negative[key.substr(9)] = parse_list(value, key);
  } else if (key == "negative.site") {
    st.negative_site = parse_fixed<kSites>(value, key);
  } else if (key == "target_incidence") {
    if (value == "none") {
      c.target_incidence.reset();
    } else {
      const auto v = parse_fixed<2>(value, key);
      c.target_incidence = std::pair{v[0], v[1]};
    }
  } else if (key == "target_y2_mean") {
    if (value == "none") c.target_y2_mean.reset();
    else c.target_y2_mean = parse_number(value, key);
  } else {
    bad("unknown key '" + key + "' in " + file.string());
  }
}

void parse_into(ParseState& st, const fs::path& file) {
  const auto canonical = fs::weakly_canonical(file);
  if (std::find(st.stack.begin(), st.stack.end(), canonical) != st.stack.end())
    bad("include cycle at " + file.string());
  std::ifstream in(file);
  if (!in) bad("cannot open config " + file.string());
  st.stack.push_back(canonical);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) bad(file.string() + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    boost::algorithm::trim(key);
    boost::algorithm::trim(value);
    apply(st, key, value, file);
  }
  st.stack.pop_back();
}

std::vector<std::array<double, 3>> read_a_probs(const fs::path& path, const std::vector<double>& ages) {
  std::ifstream in(path);
  if (!in) bad("cannot open a_probs file " + path.string());
  std::vector<std::array<double, 3>> rows(kSites * ages.size());
  std::vector<bool> seen(rows.size(), false);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    boost::algorithm::trim(line);
    if (line.empty()) continue;
    if (header) {  // site,age,p_low,p_med,p_high
      header = false;
      continue;
    }
    std::vector<std::string> f;
    boost::algorithm::split(f, line, boost::algorithm::is_any_of(","));
    if (f.size() != 5) bad(path.string() + ": rows need site,age,p_low,p_med,p_high");
    const double site = parse_number(f[0], "site"), age = parse_number(f[1], "age");
    const auto it = std::find(ages.begin(), ages.end(), age);
    if (site < 0 || site >= kSites || site != std::floor(site) || it == ages.end())
      bad(path.string() + ": row for unknown (site, age) " + f[0] + "," + f[1]);
    const std::size_t r = static_cast<std::size_t>(site) * ages.size() + static_cast<std::size_t>(it - ages.begin());
    rows[r] = {parse_number(f[2], "p_low"), parse_number(f[3], "p_med"), parse_number(f[4], "p_high")};
    seen[r] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    bad(path.string() + ": missing (site, age) rows");
  return rows;
}

GeneratorConfig build(ParseState& st) {
  auto& c = st.config;
  if (c.age_levels.empty()) c.age_levels = default_age_levels();
  if (st.a_probs_file) c.a_probs = read_a_probs(*st.a_probs_file, c.age_levels);
  c.negative_controls.assign(st.n_nt, TypeEffects{});
  for (const auto& [field, list] : st.negative) {
    const auto v = list.expand(st.n_nt, "negative." + field);
    for (std::size_t k = 0; k < st.n_nt; ++k) {
      auto& type = c.negative_controls[k];
      (field == "mu" ? type.mu : field == "beta" ? type.beta : type.alpha) = v[k];
    }
  }
  for (auto& type : c.negative_controls) type.site = st.negative_site;
  return c;
}

fs::path scenario_path(const std::string& name) { return preset_dir() / (name + ".cfg"); }

}  // namespace

std::string_view to_string(Design d) { return d == Design::randomized ? "randomized" : "observational"; }

std::vector<double> default_age_levels() {
  std::vector<double> ages;
  for (int i = 0; i <= 12; ++i) ages.push_back(15.0 + 0.5 * i);
  return ages;
}

void validate(const GeneratorConfig& c) {
  if (c.n < 1) bad("n must be positive");
  if (c.age_levels.empty()) bad("age_levels is empty");
  for (double a : c.a_values)
    if (!(a >= 0.0) || !std::isfinite(a)) bad("a_values must be finite and nonnegative");
  if (c.a_probs.size() != kSites * c.age_levels.size()) bad("a_probs must have one row per (site, age) pair");
  for (const auto& row : c.a_probs) {
    double sum = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) bad("a_probs entries must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) bad("a_probs rows must sum to 1");
  }
  if (c.negative_controls.empty()) bad("at least one negative-control type is required");

  const auto cells = enumerate_cells(c);
  for (const auto& cell : cells) {
    if (!(cell.p_treat >= 0.0 && cell.p_treat <= 1.0 + 1e-12))
      bad("treatment probability outside [0, 1] at site " + std::to_string(cell.site) + ", age " +
          std::to_string(cell.age));
    for (int t : {0, 1}) {
      auto check = [&](const TypeEffects& type, const std::string& what) {
        const double p = outcome_probability(type, cell, t);
        if (!(p <= 1.0) || !std::isfinite(p))
          bad(what + " probability " + std::to_string(p) + " exceeds 1 at site " + std::to_string(cell.site) +
              ", age " + std::to_string(cell.age) + ", A=" + std::to_string(cell.a) + ", T=" + std::to_string(t));
      };
      check(c.primary[0], "primary type 16");
      if (c.second_primary_enabled) check(c.primary[1], "primary type 18");
      for (std::size_t k = 0; k < c.negative_controls.size(); ++k)
        check(c.negative_controls[k], "negative-control type " + std::to_string(k + 1));
    }
  }
}

GeneratorConfig finalize(GeneratorConfig config) {
  if (config.target_incidence || config.target_y2_mean) {
    const auto incidence = config.target_incidence.value_or(
        std::pair{marginal_incidence(config, 0),
                  config.second_primary_enabled ? marginal_incidence(config, 1) : 0.5});
    config = calibrate_intercepts(std::move(config), incidence, config.target_y2_mean);
  }
  validate(config);
  return config;
}

GeneratorConfig parse_config_file(const fs::path& path) {
  ParseState st;
  parse_into(st, path);
  return build(st);
}

fs::path preset_dir() {
  if (const char* env = std::getenv("NCVAX_PRESET_DIR"); env != nullptr && *env != '\0') return env;
  return NCVAX_PRESET_DIR;
}

std::vector<std::string> list_presets() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(preset_dir(), ec)) {
    if (entry.path().extension() != ".cfg") continue;
    ParseState st;
    try {
      parse_into(st, entry.path());
    } catch (const Error&) {
      continue;
    }
    if (st.preset) names.push_back(entry.path().stem().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

GeneratorConfig load_scenario(const std::string& name_or_path) {
  fs::path path = name_or_path;
  if (!fs::is_regular_file(path)) {
    path = scenario_path(name_or_path);
    if (!fs::is_regular_file(path)) throw Error(ErrorCode::InvalidScenario, "no scenario file or preset named '" + name_or_path + "'");
  }
  auto config = parse_config_file(path);
  if (config.name == "custom") config.name = path.stem().string();
  return finalize(std::move(config));
}

}  // namespace ncvax::sim
