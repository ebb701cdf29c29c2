#include <doctest.h>

#include <cmath>
#include <random>

#include "nuc/errors.hpp"
#include "nuc/metrics.hpp"
#include "oracles.hpp"

using namespace nuc;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

// Random scores on a coarse grid so ties are frequent; both classes present.
Instance random_instance(std::mt19937_64& rng, std::size_t n, int levels) {
  Instance in;
  std::uniform_int_distribution<int> level(0, levels - 1);
  for (std::size_t i = 0; i < n; ++i) {
    in.labels.push_back(static_cast<std::uint8_t>(rng() % 2));
    in.scores.push_back(0.25 * level(rng) + (in.labels.back() ? 0.3 : 0.0));
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

std::vector<std::uint8_t> flipped(const std::vector<std::uint8_t>& l) {
  std::vector<std::uint8_t> out;
  for (auto v : l) out.push_back(1 - v);
  return out;
}

std::vector<double> negated(const std::vector<double>& s) {
  std::vector<double> out;
  for (auto v : s) out.push_back(-v);
  return out;
}

}  // namespace

TEST_CASE("AUROC basic values") {
  CHECK(auroc(std::vector<double>{1, 2, 3, 4}, std::vector<std::uint8_t>{0, 0, 1, 1}) == 1.0);
  CHECK(auroc(std::vector<double>{1, 2, 3, 4}, std::vector<std::uint8_t>{1, 1, 0, 0}) == 0.0);
  CHECK(auroc(std::vector<double>(6, 0.7), std::vector<std::uint8_t>{1, 0, 1, 0, 0, 0}) == 0.5);
}

TEST_CASE("AUROC equals the pairwise count exactly") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    auto in = random_instance(rng, n, 1 + static_cast<int>(rng() % 12));
    CHECK(auroc(in.scores, in.labels) == oracle::auroc_pairs(in.scores, in.labels).value());
  }
}

TEST_CASE("AUROC is invariant to increasing transforms and complements under negation") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (int i = 0; i < 80; ++i) {
      l.push_back(static_cast<std::uint8_t>(rng() % 2));
      s.push_back(g(rng) + l.back());
    }
    l[0] = 0;
    l[1] = 1;
    const double a = auroc(s, l);
    std::vector<double> ex, affine;
    for (double v : s) {
      ex.push_back(std::exp(v));
      affine.push_back(3.0 * v - 7.0);
    }
    CHECK(auroc(ex, l) == a);
    CHECK(auroc(affine, l) == a);
    CHECK(a + auroc(negated(s), l) == doctest::Approx(1.0).epsilon(1e-15));
    // label flip with flipped orientation
    CHECK(auroc(negated(s), flipped(l)) == doctest::Approx(a).epsilon(1e-15));
  }
}

TEST_CASE("average precision basic values") {
  std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
  std::vector<std::uint8_t> l = {0, 0, 1, 1};
  CHECK(aupr(s, l, PositiveClass::out) == 1.0);
  CHECK(aupr(s, l, PositiveClass::in) == 1.0);
  std::vector<double> flat(10, 0.3);
  std::vector<std::uint8_t> three = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  CHECK(aupr(flat, three, PositiveClass::out) == doctest::Approx(0.3));
  CHECK(aupr(flat, three, PositiveClass::in) == doctest::Approx(0.7));
}

TEST_CASE("average precision matches the threshold-enumerating oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    auto in = random_instance(rng, n, 1 + static_cast<int>(rng() % 30));
    CHECK(std::abs(aupr(in.scores, in.labels, PositiveClass::out) -
                   oracle::average_precision(in.scores, in.labels)) <= 1e-12);
    CHECK(std::abs(aupr(in.scores, in.labels, PositiveClass::in) -
                   oracle::average_precision(negated(in.scores), flipped(in.labels))) <= 1e-12);
  }
}

TEST_CASE("single-class and malformed inputs") {
  std::vector<double> s = {1, 2};
  CHECK_THROWS_AS(auroc(s, std::vector<std::uint8_t>{1, 1}), UndefinedMetricError);
  CHECK_THROWS_AS(aupr(s, std::vector<std::uint8_t>{0, 0}, PositiveClass::in),
                  UndefinedMetricError);
  CHECK_THROWS_AS(auroc(s, std::vector<std::uint8_t>{0, 2}), DataError);
  CHECK_THROWS_AS(auroc(std::vector<double>{NAN, 1}, std::vector<std::uint8_t>{0, 1}), DataError);
  CHECK_THROWS_AS(auroc(s, std::vector<std::uint8_t>{0}), ShapeError);
}

TEST_CASE("evaluate_task bundles the three metrics") {
  std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  std::vector<std::uint8_t> l = {0, 0, 1, 1};
  auto r = evaluate_task(s, l, "m", "t");
  CHECK(r.auroc == auroc(s, l));
  CHECK(r.aupr_out == aupr(s, l, PositiveClass::out));
  CHECK(r.aupr_in == oracle::average_precision(negated(s), flipped(l)));
  CHECK(r.n_pos == 2);
  CHECK(r.n_neg == 2);

  auto perfect = evaluate_task(std::vector<double>{0, 1, 2}, std::vector<std::uint8_t>{0, 1, 1},
                               "p", "t");
  CHECK(perfect.auroc == 1.0);
  CHECK(perfect.aupr_out == 1.0);
  CHECK(perfect.aupr_in == 1.0);

  std::vector<EvalReport> reports = {r, perfect};
  auto csv = reports_to_csv(reports);
  CHECK(csv.rfind("task,method,auroc,aupr_out,aupr_in,n_pos,n_neg\n", 0) == 0);
  CHECK(csv.find("t,p,1.000000,1.000000,1.000000,2,1\n") != std::string::npos);
  auto table = reports_to_table(reports);
  CHECK(table.find("AUPR-Out") != std::string::npos);
}
