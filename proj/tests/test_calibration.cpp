// Saddlepoint log-pmf error on the exhaustively enumerable instances, checked
// against tests/fixtures/saddlepoint_calibration.csv.
//
// Regenerate the fixture with LMTE_WRITE_CALIBRATION=1.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lmte/likelihood.hpp"
#include "lmte/oracle.hpp"

using namespace lmte;

namespace {

struct Row {
  std::string instance;
  std::string layout;
  std::string y;
  double exact = 0.0;
  double saddlepoint = 0.0;
  double error = 0.0;
  bool adjusted = false;
};

struct Instance {
  std::string name;
  std::vector<int> occasions;
  EmigrationFamily family;
  std::int64_t N;
};

const std::string kHeader = "instance,layout,y,exact_log_pmf,saddlepoint_log_pmf,relative_error,zero_adjusted";
const std::string kPath = std::string(LMTE_FIXTURE_DIR) + "/saddlepoint_calibration.csv";

std::vector<Row> compute() {
  const std::vector<Instance> instances{{"k2_t11_none_n5", {1, 1}, EmigrationFamily::None, 5},
                                        {"k2_t11_random_n5", {1, 1}, EmigrationFamily::CompletelyRandom, 5},
                                        {"k2_t11_markov_n5", {1, 1}, EmigrationFamily::Markovian, 5},
                                        {"k2_t11_none_n4", {1, 1}, EmigrationFamily::None, 4},
                                        {"k2_t11_markov_n4", {1, 1}, EmigrationFamily::Markovian, 4}};
  std::vector<Row> rows;
  for (const auto& in : instances) {
    const StudyDesign d(in.occasions);
    const auto th = uniform_parameters(d, in.family, static_cast<double>(in.N), 0.5, 0.8, 0.45, 0.3, 0.6);
    const auto pi = probability_vector(d, th, in.family);
    for (const auto& L : {ObservedLayout::batch(d, Aggregation::Occasion), ObservedLayout::batch(d, Aggregation::Period),
                          ObservedLayout::individual(d)}) {
      const auto A = build_link_matrix(d, L);
      for (const auto& [y, prob] : exact_pmf_table(in.N, pi, A)) {
        const ObservedData data(L, y);
        if (data.marked_total() == 0.0 || data.marked_total() == static_cast<double>(in.N)) continue;
        const LikelihoodEngine engine(data, in.family, th);
        Row r;
        r.instance = in.name;
        r.layout = fmt::format("{}/{}", to_string(L.scenario()), to_string(L.aggregation()));
        for (std::size_t i = 0; i < y.size(); ++i) r.y += fmt::format("{}{}", i ? " " : "", y[i]);
        r.exact = std::log(prob);
        r.saddlepoint = engine.saddlepoint_loglik(th);
        r.error = std::abs(r.saddlepoint - r.exact) / std::abs(r.exact);
        r.adjusted = engine.adjusted();
        rows.push_back(r);
      }
    }
  }
  return rows;
}

std::string format_row(const Row& r) {
  return fmt::format("{},{},{},{:.12g},{:.12g},{:.6g},{}", r.instance, r.layout, r.y, r.exact, r.saddlepoint, r.error,
                     r.adjusted ? 1 : 0);
}

}  // namespace

TEST_CASE("saddlepoint calibration matches the checked-in fixture") {
  const auto rows = compute();
  REQUIRE(!rows.empty());

  if (const char* w = std::getenv("LMTE_WRITE_CALIBRATION"); w != nullptr && std::string(w) == "1") {
    std::ofstream out(kPath);
    out << kHeader << "\n";
    for (const auto& r : rows) out << format_row(r) << "\n";
    MESSAGE("wrote " << kPath);
    return;
  }

  std::ifstream in(kPath);
  REQUIRE_MESSAGE(in.good(), "missing fixture " << kPath);
  std::string line;
  std::getline(in, line);
  CHECK(line == kHeader);
  std::size_t i = 0;
  double worst_interior = 0.0;
  while (std::getline(in, line)) {
    REQUIRE(i < rows.size());
    const auto& r = rows[i++];
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    REQUIRE(cols.size() == 7);
    CHECK(cols[0] == r.instance);
    CHECK(cols[1] == r.layout);
    CHECK(cols[2] == r.y);
    CHECK(std::stod(cols[3]) == doctest::Approx(r.exact).epsilon(1e-9));
    CHECK(std::stod(cols[4]) == doctest::Approx(r.saddlepoint).epsilon(1e-7));
    CHECK(cols[6] == (r.adjusted ? "1" : "0"));
    if (!r.adjusted) worst_interior = std::max(worst_interior, r.error);
  }
  CHECK(i == rows.size());
  MESSAGE(rows.size() << " rows, worst interior relative log-pmf error " << worst_interior);
}
