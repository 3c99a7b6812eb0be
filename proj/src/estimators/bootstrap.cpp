#include <algorithm>
#include <cmath>
#include <thread>

#include "ncvax/estimators.hpp"
#include "ncvax/rng.hpp"

namespace ncvax {

BootstrapSummary bootstrap_stratified(const Dataset& data, const StratumAssignment& assignment,
                                      StratifiedStatistic statistic, int reps, std::uint64_t seed,
                                      int workers) {
  if (reps < 2) throw Error(ErrorCode::InvalidOptions, "bootstrap needs at least 2 resamples");
  const std::size_t n = data.size();
  std::vector<std::optional<double>> values(static_cast<std::size_t>(reps));

  auto run = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> rows(n);
    for (std::size_t b = begin; b < end; ++b) {
      rng::Stream stream(seed, b);
      for (auto& r : rows) r = static_cast<std::size_t>(stream.index(n));
      values[b] = statistic(tally_strata(data, assignment, rows));
    }
  };
  const std::size_t w = static_cast<std::size_t>(std::clamp(workers, 1, reps));
  if (w == 1) {
    run(0, values.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (values.size() + w - 1) / w;
    for (std::size_t begin = 0; begin < values.size(); begin += chunk)
      pool.emplace_back(run, begin, std::min(values.size(), begin + chunk));
  }

  BootstrapSummary out;
  out.reps = reps;
  double sum = 0.0;
  int ok = 0;
  for (const auto& v : values)
    if (v && std::isfinite(*v)) {
      sum += *v;
      ++ok;
    }
  out.failures = reps - ok;
  if (ok < 2) throw Error(ErrorCode::AllRepsFailed, "fewer than two bootstrap resamples gave an estimate");
  const double mean = sum / ok;
  double ss = 0.0;
  for (const auto& v : values)
    if (v && std::isfinite(*v)) ss += (*v - mean) * (*v - mean);
  out.std_err = std::sqrt(ss / (ok - 1));
  return out;
}

}  // namespace ncvax
