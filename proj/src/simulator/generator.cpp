#include <cmath>

#include "ncvax/rng.hpp"
#include "ncvax/simulator.hpp"

namespace ncvax::sim {

SimulatedCohort generate(const GeneratorConfig& config, std::uint64_t seed) {
  validate(config);
  const auto cells = enumerate_cells(config);
  const std::size_t ages = config.age_levels.size();
  const std::size_t n = config.n;

  DatasetColumns cols;
  cols.t.resize(n);
  cols.y1.resize(n);
  cols.y2.resize(n);
  CovariateColumn site{.name = "site", .kind = CovariateKind::categorical, .values = {}, .codes = std::vector<int>(n),
                       .levels = {"0", "1", "2"}};
  CovariateColumn age{.name = "age", .kind = CovariateKind::numeric, .values = std::vector<double>(n), .codes = {},
                      .levels = {}};
  std::vector<double> a(n);

  // Per-cell outcome probabilities under each arm, looked up per subject.
  const std::size_t types = config.negative_controls.size();
  std::vector<std::array<double, 2>> p16(cells.size()), p18(cells.size());
  std::vector<double> pnc(cells.size() * 2 * types);
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int t : {0, 1}) {
      p16[c][t] = outcome_probability(config.primary[0], cells[c], t);
      p18[c][t] = config.second_primary_enabled ? outcome_probability(config.primary[1], cells[c], t) : 0.0;
      for (std::size_t k = 0; k < types; ++k)
        pnc[(c * 2 + static_cast<std::size_t>(t)) * types + k] =
            outcome_probability(config.negative_controls[k], cells[c], t);
    }

  rng::Stream rng(seed, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(rng.index(kSites));
    const auto k = static_cast<std::size_t>(rng.index(ages));
    const auto& probs = config.a_probs[s * ages + k];
    const double u = rng.uniform();
    const std::size_t ai = u < probs[0] ? 0 : u < probs[0] + probs[1] ? 1 : 2;
    const std::size_t c = (s * ages + k) * 3 + ai;
    const int t = rng.bernoulli(cells[c].p_treat) ? 1 : 0;
    const bool y16 = rng.bernoulli(p16[c][t]);
    const bool y18 = rng.bernoulli(p18[c][t]);
    int count = 0;
    const double* q = &pnc[(c * 2 + static_cast<std::size_t>(t)) * types];
    for (std::size_t j = 0; j < types; ++j) count += rng.bernoulli(q[j]) ? 1 : 0;

    site.codes[i] = static_cast<int>(s);
    age.values[i] = config.age_levels[k];
    a[i] = config.a_values[ai];
    cols.t[i] = t;
    cols.y1[i] = (y16 || y18) ? 1.0 : 0.0;
    cols.y2[i] = count;
  }
  cols.covariates.push_back(std::move(site));
  cols.covariates.push_back(std::move(age));
  return {Dataset(std::move(cols)), std::move(a)};
}

}  // namespace ncvax::sim
