#include "cone/theory.hpp"
#include "cone/types.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <tuple>

using namespace cone;
using namespace cone::theory;

namespace {

// Direct enumeration of the improvement event over (N_f, N_m, N_i).
double p_better_enumerated(const Params & p)
{
  const int n = p.n;
  double total = 0.0;
  for (int nf = 1; nf <= n; ++nf) {
    const double wf = binom_pmf(nf, n, 1.0 / p.k);
    for (int nm = 0; nm <= nf; ++nm) {
      const double wm = binom_pmf(nm, nf, p.p_c);
      for (int ni = 0; ni <= n - nf; ++ni) {
        const double wi = binom_pmf(ni, n - nf, p.cross_rate());
        const long kept = n - nm - ni;
        const bool improved = kept == 0 || static_cast<long>(nf - nm) * n < static_cast<long>(nf) * kept;
        if (improved) { total += wf * wm * wi; }
      }
    }
  }
  return total;
}

std::string slurp(const std::filesystem::path & p)
{
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("binomial pmf and cdf")
{
  CHECK(binom_pmf(1, 2, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(binom_cdf(2, 2, 0.5) == 1.0);
  // exact rational value of C(100,50) 0.3^50 0.7^50 for the double nearest 0.3
  const double exact = 1.302622713144534182663807896680588e-05;
  CHECK(std::abs(binom_pmf(50, 100, 0.3) - exact) / exact < 1e-12);

  for (int n : {1, 7, 64, 500}) {
    for (double p : {0.0, 0.01, 0.3, 0.5, 0.99, 1.0}) {
      double sum = 0.0;
      for (int i = 0; i <= n; ++i) { sum += binom_pmf(i, n, p); }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(binom_cdf(n, n, p) == 1.0);
    }
  }
  CHECK(binom_pmf(0, 5, 0.0) == 1.0);
  CHECK(binom_pmf(5, 5, 1.0) == 1.0);
  CHECK(binom_pmf(2, 5, 1.0) == 0.0);
  CHECK_THROWS_AS(binom_pmf(3, 2, 0.5), Error);
  CHECK_THROWS_AS(binom_pmf(-1, 2, 0.5), Error);
  CHECK_THROWS_AS(binom_pmf(1, 2, 1.5), Error);
  CHECK_THROWS_AS(binom_cdf(1, 2, -0.1), Error);
}

TEST_CASE("false negative rate")
{
  CHECK(false_negative_rate(Params{0.2, 5, 10}) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(false_negative_rate(Params{0.6, 5, 10}) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(false_negative_rate(Params{1.0, 5, 10}) == 0.0);
  for (int k : {2, 5, 10, 20}) {
    CHECK(std::abs(false_negative_rate(Params{1.0 / k, k, 1}) - 1.0 / k) < 1e-15);
    double prev = 2.0;
    for (double pc = 0.01; pc <= 1.0; pc += 0.01) {
      const double pn = false_negative_rate(Params{pc, k, 1});
      CHECK(pn < prev);
      if (pc > 1.0 / k + 1e-12) { CHECK(pn < 1.0 / k); }
      prev = pn;
    }
  }
  CHECK_THROWS_AS(false_negative_rate(Params{0.0, 5, 10}), Error);
  CHECK_THROWS_AS(false_negative_rate(Params{0.5, 1, 10}), Error);
  CHECK_THROWS_AS(false_negative_rate(Params{0.5, 5, 0}), Error);
}

TEST_CASE("analytic p_b")
{
  CHECK(p_better_analytic(Params{1.0, 2, 1}) == doctest::Approx(0.5).epsilon(1e-15));

  SUBCASE("matches direct enumeration of the event")
  {
    for (int k : {2, 3, 5, 10}) {
      for (int n : {1, 2, 5, 12, 25}) {
        for (double pc : {0.05, 0.2, 0.5, 0.9, 1.0}) {
          const Params p{pc, k, n};
          CAPTURE(k);
          CAPTURE(n);
          CAPTURE(pc);
          CHECK(p_better_analytic(p) == doctest::Approx(p_better_enumerated(p)).epsilon(1e-12));
        }
      }
    }
  }

  SUBCASE("bounded and monotone in p_c")
  {
    for (int k : {5, 20}) {
      for (int n : {32, 128}) {
        double prev = -1.0;
        for (double pc : make_grid(0.05, 1.0, 0.05)) {
          const double pb = p_better_analytic(Params{pc, k, n});
          CHECK(pb >= 0.0);
          CHECK(pb <= 1.0);
          CHECK(pb >= prev - 1e-9);
          prev = pb;
        }
      }
    }
  }

  SUBCASE("floor cutoff differs from the strict event")
  {
    const Params p{0.1, 20, 32};
    CHECK(std::abs(p_better_analytic(p, Cutoff::floor) - p_better_analytic(p)) > 1e-3);
  }

  CHECK_THROWS_AS(p_better_analytic(Params{0.5, 5, kMaxAnalyticN + 1}), Error);
}

TEST_CASE("Monte-Carlo p_b")
{
  const auto est = p_better_montecarlo(Params{1.0, 2, 1}, 100000, 42);
  CHECK(std::abs(est.mean - 0.5) <= 3.0 * std::sqrt(0.25 / 100000));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto one = p_better_montecarlo(Params{0.3, 10, 16}, 1, seed);
    CHECK((one.mean == 0.0 || one.mean == 1.0));
  }

  const Params grid_point{0.3, 10, 128};
  const auto mc = p_better_montecarlo(grid_point, 100000, 7);
  const double analytic = p_better_analytic(grid_point);
  const double se = std::sqrt(analytic * (1.0 - analytic) / 100000.0);
  CHECK(std::abs(mc.mean - analytic) <= 3.0 * se);

  const auto again = p_better_montecarlo(grid_point, 1000, 99);
  CHECK(again.mean == p_better_montecarlo(grid_point, 1000, 99).mean);
  CHECK_THROWS_AS(p_better_montecarlo(grid_point, 0, 1), Error);
}

TEST_CASE("curve export")
{
  const auto dir = std::filesystem::temp_directory_path() / "cone_theory_test";
  std::filesystem::create_directories(dir);

  const std::vector<int> k1{5}, n1{32};
  const std::vector<double> g1{0.3};
  export_curves(k1, n1, g1, 100, 3, dir / "one.csv");
  const auto text = slurp(dir / "one.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.rfind("k,N,p_c,p_b_analytic,p_b_mc,se\n", 0) == 0);

  const std::vector<int> ks{20, 10}, ns{128, 32};
  const auto grid = make_grid(0.05, 0.5, 0.05);
  const auto points = export_curves(ks, ns, grid, 200, 11, dir / "a.csv");
  export_curves(ks, ns, grid, 200, 11, dir / "b.csv");
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  // rows ordered by k, then N, then p_c
  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto & a = points[i - 1].params;
    const auto & b = points[i].params;
    CHECK(std::tie(a.k, a.n, a.p_c) < std::tie(b.k, b.n, b.p_c));
  }
  // same k and p_c, larger N
  for (const auto & small : points) {
    if (small.params.n != 32) { continue; }
    for (const auto & large : points) {
      if (large.params.n == 128 && large.params.k == small.params.k && large.params.p_c == small.params.p_c) {
        CHECK(large.p_b_analytic >= small.p_b_analytic - 0.02);
      }
    }
  }

  const std::vector<int> none;
  CHECK_THROWS_AS(evaluate_grid(none, ns, grid, 0, 1), Error);
  CHECK_THROWS_AS(write_curves_csv(points, dir / "missing" / "x.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("grid helpers")
{
  const auto g = make_grid(0.005, 1.0, 0.005);
  CHECK(g.size() == 200);
  CHECK(g.front() == 0.005);
  CHECK(g.back() == 1.0);
  CHECK(g[21] == 0.11);
  CHECK_THROWS_AS(make_grid(0.5, 0.1, 0.1), Error);
  CHECK_THROWS_AS(make_grid(0.1, 0.5, 0.0), Error);

  const auto pc = min_accuracy_for(20, 128, g);
  REQUIRE(pc.has_value());
  CHECK(*pc == doctest::Approx(0.11).epsilon(1e-12));
  const std::vector<double> tiny{0.01};
  CHECK_FALSE(min_accuracy_for(20, 128, tiny).has_value());
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
}
