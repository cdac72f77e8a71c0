#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "padeval/det_curve.hpp"
#include "padeval/error.hpp"
#include "padeval/normal.hpp"
#include "padeval/score_metrics.hpp"

using namespace pad;

namespace {

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::vector<std::pair<double, double>> rates(const DetCurve& c) {
  std::vector<std::pair<double, double>> out;
  for (const auto& p : c.points) out.emplace_back(p.apcer, p.bpcer);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("single pair of scores gives a three point staircase with a knee") {
  const std::vector<double> bona{0.1}, att{0.9};
  const auto c = sweep_det(bona, att);
  REQUIRE(c.points.size() == 3);
  CHECK(c.points[0].apcer == 0.0);
  CHECK(c.points[0].bpcer == 1.0);
  CHECK(c.points[1].apcer == 0.0);
  CHECK(c.points[1].bpcer == 0.0);
  CHECK(c.points[2].apcer == 1.0);
  CHECK(c.points[2].bpcer == 0.0);
  CHECK(line_count(export_det(c, DetScale::raw)) == 4);
}

TEST_CASE("identical single scores sum to one at every point") {
  const std::vector<double> s{0.5};
  const auto c = sweep_det(s, s);
  for (const auto& p : c.points) CHECK(p.apcer + p.bpcer == 1.0);
}

TEST_CASE("curve crosses the diagonal at the eer") {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> bona(20), att(20);
    for (double& v : bona) v = unit(gen);
    for (double& v : att) v = unit(gen);
    const auto c = sweep_det(bona, att);
    const auto e = eer(bona, att);
    // The eer threshold lies on the curve, and no point is closer to the
    // diagonal.
    auto it = std::find_if(c.points.begin(), c.points.end(), [&](const DetPoint& p) {
      return p.apcer == apcer(att, e.threshold) && p.bpcer == bpcer(bona, e.threshold);
    });
    REQUIRE(it != c.points.end());
    CHECK((it->apcer + it->bpcer) / 2.0 == e.eer);
    const double gap = std::abs(it->apcer - it->bpcer);
    for (const auto& p : c.points) CHECK(std::abs(p.apcer - p.bpcer) >= gap);
  }
}

TEST_CASE("curve invariants on random inputs") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto bona = oracle::random_scores(gen, 20);
    const auto att = oracle::random_scores(gen, 20);
    const auto c = sweep_det(bona, att);
    REQUIRE(!c.points.empty());
    CHECK(c.points.front().apcer == 0.0);
    CHECK(c.points.front().bpcer == 1.0);
    CHECK(c.points.back().apcer == 1.0);
    CHECK(c.points.back().bpcer == 0.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      const auto& a = c.points[i - 1];
      const auto& b = c.points[i];
      CHECK(b.threshold > a.threshold);
      CHECK(b.apcer >= a.apcer);
      CHECK(b.bpcer <= a.bpcer);
      CHECK((b.apcer != a.apcer || b.bpcer != a.bpcer));
    }
    // Same point set after a strictly increasing transform.
    auto transform = [](std::vector<double> v) {
      for (double& x : v) x = std::exp(3.0 * x) - 7.0;
      return v;
    };
    CHECK(rates(sweep_det(transform(bona), transform(att))) == rates(c));
  }
}

TEST_CASE("sweep_det rejects empty input") {
  const std::vector<double> some{0.5};
  CHECK_THROWS_AS(sweep_det({}, some), Error);
  CHECK_THROWS_AS(sweep_det(some, {}), Error);
}

TEST_CASE("probit coordinates") {
  CHECK(probit(0.5) == 0.0);
  CHECK(probit(0.1587) == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(probit(normal_cdf(-1.0)) == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(probit(0.0) == doctest::Approx(normal_quantile(1e-6)).epsilon(1e-12));
  CHECK(probit(1.0) == doctest::Approx(normal_quantile(1.0 - 1e-6)).epsilon(1e-12));
  CHECK(std::isfinite(probit(0.0)));
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p = 1e-9; p < 1.0; p = p < 0.5 ? p * 3.0 : p + (1.0 - p) * 0.6) {
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
  }
  for (double z = -6.0; z <= 6.0; z += 0.25) {
    CHECK(normal_quantile(normal_cdf(z)) == doctest::Approx(z).epsilon(1e-8).scale(1.0));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), Error);
  CHECK_THROWS_AS(normal_quantile(1.0), Error);
}

TEST_CASE("export formats") {
  const std::vector<double> bona{0.1, 0.2, 0.3, 0.6}, att{0.4, 0.7, 0.8, 0.9};
  const auto c = sweep_det(bona, att);
  const auto raw = export_det(c, DetScale::raw);
  CHECK(raw.rfind("threshold,apcer,bpcer\n", 0) == 0);
  const auto pro = export_det(c, DetScale::probit);
  CHECK(pro.rfind("threshold,probit_apcer,probit_bpcer\n", 0) == 0);
  CHECK(line_count(raw) == c.points.size() + 1);
  CHECK(line_count(pro) == c.points.size() + 1);

  std::istringstream lines(raw);
  std::string line;
  std::getline(lines, line);
  std::getline(lines, line);
  CHECK(line == "-0.900000,0.000000,1.000000");
  CHECK(pro.find("-4.753424") != std::string::npos);
}

TEST_CASE("raw export round-trips at six decimals") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto bona = oracle::random_scores(gen, 20);
    const auto att = oracle::random_scores(gen, 20);
    const auto c = sweep_det(bona, att);
    const auto text = export_det(c, DetScale::raw);
    const auto back = parse_det_csv(text);
    REQUIRE(back.points.size() == c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) {
      CHECK(std::abs(back.points[i].threshold - c.points[i].threshold) <= 5e-7);
      CHECK(std::abs(back.points[i].apcer - c.points[i].apcer) <= 5e-7);
      CHECK(std::abs(back.points[i].bpcer - c.points[i].bpcer) <= 5e-7);
    }
    CHECK(export_det(back, DetScale::raw) == text);
  }

  // Curves whose values are exact at six decimals come back unchanged.
  const std::vector<double> bona{0.25, 0.5}, att{0.75, 0.125};
  const auto exact = sweep_det(bona, att);
  CHECK(parse_det_csv(export_det(exact, DetScale::raw)) == exact);
}

TEST_CASE("det parser errors") {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_det_csv(text);
    } catch (const ParseError& e) {
      return static_cast<std::size_t>(e.where().value);
    }
    return 0;
  };
  CHECK(line_of("") == 1);
  CHECK(line_of("threshold,probit_apcer,probit_bpcer\n") == 1);
  CHECK(line_of("threshold,apcer,bpcer\n0.1,0.5\n") == 2);
  CHECK(line_of("threshold,apcer,bpcer\n0.1,1.5,0.0\n") == 2);
  CHECK(line_of("threshold,apcer,bpcer\n0.1,0.0,1.0\n0.2,x,0.5\n") == 3);
  CHECK(line_of("threshold,apcer,bpcer\n0.2,0.0,1.0\n0.1,0.5,0.5\n") == 3);
  CHECK(line_of("threshold,apcer,bpcer\n0.1,0.5,0.5\n0.2,0.4,0.5\n") == 3);
  CHECK(line_of("threshold,apcer,bpcer\n0.1,0.0,0.5\n0.2,0.5,0.6\n") == 3);
}
