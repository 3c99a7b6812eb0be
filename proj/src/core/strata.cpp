#include <algorithm>
#include <cmath>
#include <map>

#include "ncvax/core.hpp"

namespace ncvax {
namespace {

std::string format_cut(double v) {
  std::string s = std::to_string(v);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

std::size_t bin_index(double value, std::span<const double> cuts) {
  return static_cast<std::size_t>(std::upper_bound(cuts.begin(), cuts.end(), value) - cuts.begin());
}

std::string bin_label(std::size_t bin, std::span<const double> cuts) {
  const std::string lo = bin == 0 ? "(-inf" : "[" + format_cut(cuts[bin - 1]);
  const std::string hi = bin == cuts.size() ? "inf)" : format_cut(cuts[bin]) + ")";
  return lo + "," + hi;
}

void validate(const StratumSpec& spec, const Dataset& data) {
  for (const auto& key : spec.keys) {
    if (!data.has_covariate(key))
      throw Error(ErrorCode::InvalidOptions, "stratum key '" + key + "' is not a covariate");
    const auto& col = data.covariate(key);
    auto cuts = spec.numeric_cuts.find(key);
    if (col.kind == CovariateKind::numeric) {
      if (cuts == spec.numeric_cuts.end())
        throw Error(ErrorCode::UnbinnedNumericKey, "numeric stratum key '" + key + "' needs cut points");
      const auto& c = cuts->second;
      for (std::size_t i = 0; i < c.size(); ++i) {
        if (!std::isfinite(c[i]))
          throw Error(ErrorCode::InvalidOptions, "cut points for '" + key + "' must be finite");
        if (i > 0 && !(c[i] > c[i - 1]))
          throw Error(ErrorCode::InvalidOptions,
                      "cut points for '" + key + "' must be strictly ascending");
      }
    }
  }
  for (const auto& [name, cuts] : spec.numeric_cuts)
    if (std::find(spec.keys.begin(), spec.keys.end(), name) == spec.keys.end())
      throw Error(ErrorCode::InvalidOptions, "cut points given for '" + name + "', which is not a key");
}

StratumAssignment assign_strata(const Dataset& data, const StratumSpec& spec) {
  validate(spec, data);
  const std::size_t n = data.size();
  const std::size_t k = spec.keys.size();

  std::vector<const CovariateColumn*> cols;
  std::vector<std::span<const double>> cuts;
  for (const auto& key : spec.keys) {
    cols.push_back(&data.covariate(key));
    auto it = spec.numeric_cuts.find(key);
    cuts.emplace_back(it == spec.numeric_cuts.end() ? std::span<const double>{}
                                                    : std::span<const double>(it->second));
  }

  std::vector<std::uint32_t> cells(n * k);
  std::map<std::vector<std::uint32_t>, std::uint32_t> order;
  std::vector<std::uint32_t> key(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& c = *cols[j];
      key[j] = c.kind == CovariateKind::numeric
                   ? static_cast<std::uint32_t>(bin_index(c.values[i], cuts[j]))
                   : static_cast<std::uint32_t>(c.codes[i]);
      cells[i * k + j] = key[j];
    }
    order.try_emplace(key, 0);
  }

  StratumAssignment out;
  out.strata.reserve(order.size());
  std::uint32_t next = 0;
  for (auto& [cell, idx] : order) {
    idx = next++;
    StratumCounts s;
    if (k == 0) s.label = "all";
    for (std::size_t j = 0; j < k; ++j) {
      if (j > 0) s.label += "|";
      const auto& c = *cols[j];
      s.label += c.name + "=" +
                 (c.kind == CovariateKind::numeric ? bin_label(cell[j], cuts[j]) : c.levels[cell[j]]);
    }
    out.strata.push_back(std::move(s));
  }

  out.index.resize(n);
  const auto t = data.t(), y1 = data.y1(), y2 = data.y2();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(cells.begin() + static_cast<std::ptrdiff_t>(i * k), k, key.begin());
    const std::uint32_t s = order.at(key);
    out.index[i] = s;
    auto& c = out.strata[s];
    const bool treated = t[i] == 1.0;
    const auto ev = static_cast<std::int64_t>(y1[i]);
    const auto nc = static_cast<std::int64_t>(y2[i]);
    ++c.n;
    if (treated) {
      ++c.n1;
      c.x1 += ev;
      c.x2 += nc;
    } else {
      ++c.n0;
      c.z1 += ev;
      c.z2 += nc;
    }
  }
  return out;
}

std::vector<StratumCounts> stratify(const Dataset& data, const StratumSpec& spec) {
  return assign_strata(data, spec).strata;
}

std::vector<StratumCounts> tally_strata(const Dataset& data, const StratumAssignment& assignment,
                                        std::span<const std::size_t> rows) {
  std::vector<StratumCounts> out(assignment.strata.size());
  for (std::size_t s = 0; s < out.size(); ++s) out[s].label = assignment.strata[s].label;
  const auto t = data.t(), y1 = data.y1(), y2 = data.y2();
  for (std::size_t i : rows) {
    auto& c = out[assignment.index[i]];
    const auto ev = static_cast<std::int64_t>(y1[i]);
    const auto nc = static_cast<std::int64_t>(y2[i]);
    ++c.n;
    if (t[i] == 1.0) {
      ++c.n1;
      c.x1 += ev;
      c.x2 += nc;
    } else {
      ++c.n0;
      c.z1 += ev;
      c.z2 += nc;
    }
  }
  return out;
}

}  // namespace ncvax
