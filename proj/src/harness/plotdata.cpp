#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>

#include "ncvax/harness.hpp"

namespace ncvax::harness {

std::size_t emit_plot_data(const std::vector<RepRecord>& records,
                           const std::optional<std::vector<Method>>& methods,
                           const std::filesystem::path& out_path) {
  if (methods && methods->empty()) throw Error(ErrorCode::MalformedInput, "empty method selection");
  auto selected = [&](Method m) {
    return !methods || std::find(methods->begin(), methods->end(), m) != methods->end();
  };
  auto num = [](double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
  };
  auto cell = [](const std::string& s) {
    return s.find_first_of(",\"") == std::string::npos ? s : "\"" + s + "\"";
  };

  std::vector<std::string> rows;
  // scenario, n -> truth, in first-seen order
  std::vector<std::pair<std::pair<std::string, std::size_t>, double>> references;
  for (const auto& r : records) {
    if (!r.ok || !selected(r.method)) continue;
    rows.push_back(cell(r.scenario) + "," + std::to_string(r.n) + "," + std::string(to_string(r.method)) + "," +
                   num(r.beta1_hat));
    const auto key = std::pair{r.scenario, r.n};
    if (std::none_of(references.begin(), references.end(), [&](const auto& e) { return e.first == key; }))
      references.emplace_back(key, r.true_beta1c);
  }
  if (rows.empty()) throw Error(ErrorCode::MalformedInput, "no successful replicates for the selected methods");

  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::InvalidOptions, "cannot write " + out_path.string());
  out << "scenario,n,method,beta1_hat\n";
  for (const auto& row : rows) out << row << '\n';
  for (const auto& [key, truth] : references)
    out << cell(key.first) << ',' << key.second << ",reference," << num(truth) << '\n';
  return rows.size() + references.size();
}

}  // namespace ncvax::harness
