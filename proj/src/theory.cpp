#include "cone/theory.hpp"

#include "cone/types.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

namespace cone::theory {

void Params::validate() const
{
  if (!(p_c > 0.0 && p_c <= 1.0)) { throw Error("theory: p_c must lie in (0, 1]"); }
  if (k < 2) { throw Error("theory: k must be >= 2"); }
  if (n < 1) { throw Error("theory: N must be >= 1"); }
}

namespace {

double log_pmf(int i, int n, double p)
{
  return std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) + i * std::log(p) +
         (n - i) * std::log1p(-p);
}

// cdf[x] = P(X <= x) for X ~ Binomial(n, p), x = 0..n
std::vector<double> cumulative(int n, double p)
{
  std::vector<double> out(static_cast<std::size_t>(n) + 1);
  double acc = 0.0;
  for (int x = 0; x <= n; ++x) {
    acc += binom_pmf(x, n, p);
    out[static_cast<std::size_t>(x)] = std::min(acc, 1.0);
  }
  return out;
}

}  // namespace

double binom_pmf(int i, int n, double p)
{
  if (n < 0 || i < 0 || i > n) { throw Error("binom_pmf: need 0 <= i <= n"); }
  if (!(p >= 0.0 && p <= 1.0)) { throw Error("binom_pmf: p must lie in [0, 1]"); }
  if (p == 0.0) { return i == 0 ? 1.0 : 0.0; }
  if (p == 1.0) { return i == n ? 1.0 : 0.0; }
  return std::exp(log_pmf(i, n, p));
}

double binom_cdf(int i, int n, double p)
{
  if (n < 0 || i < 0 || i > n) { throw Error("binom_cdf: need 0 <= i <= n"); }
  if (!(p >= 0.0 && p <= 1.0)) { throw Error("binom_cdf: p must lie in [0, 1]"); }
  if (i == n) { return 1.0; }
  double acc = 0.0;
  for (int x = 0; x <= i; ++x) { acc += binom_pmf(x, n, p); }
  return std::min(acc, 1.0);
}

double false_negative_rate(const Params & params)
{
  params.validate();
  const double k = params.k;
  const double denom = 1.0 - (1.0 - params.p_c) / k - params.p_c / k;
  if (!(denom > 0.0)) { throw Error("false_negative_rate: non-positive denominator"); }
  return (1.0 / k - params.p_c / k) / denom;
}

double p_better_analytic(const Params & params, Cutoff cutoff)
{
  params.validate();
  if (params.n > kMaxAnalyticN) {
    throw Error("p_better_analytic: N=" + std::to_string(params.n) + " exceeds " + std::to_string(kMaxAnalyticN));
  }
  const int n = params.n;
  const double p_false = 1.0 / params.k;
  const double q = params.cross_rate();
  constexpr double negligible = 1e-18;

  double total = 0.0;
  for (int i = 1; i <= n; ++i) {
    const double wi = binom_pmf(i, n, p_false);
    if (wi < negligible) { continue; }
    const int rest = n - i;
    const auto cdf = cumulative(rest, q);
    double inner = 0.0;
    for (int j = 0; j <= i; ++j) {
      const double wj = binom_pmf(j, i, params.p_c);
      if (wj == 0.0) { continue; }
      double tail = 0.0;
      if (cutoff == Cutoff::floor) {
        const long long cut = static_cast<long long>(rest) * j / i;
        tail = cdf[static_cast<std::size_t>(std::min<long long>(cut, rest))];
      } else if (j == i) {
        // every false negative filtered: the share drops to 0 whatever else happens
        tail = 1.0;
      } else {
        // improvement iff m * i < j * (N - i) for m wrongly filtered negatives
        const long long num = static_cast<long long>(j) * rest;
        if (num > 0) {
          const long long cut = (num - 1) / i;
          tail = cdf[static_cast<std::size_t>(std::min<long long>(cut, rest))];
        }
      }
      inner += wj * tail;
    }
    total += wi * inner;
  }
  return std::clamp(total, 0.0, 1.0);
}

MonteCarloEstimate p_better_montecarlo(const Params & params, long trials, std::uint64_t seed)
{
  params.validate();
  if (trials < 1) { throw Error("p_better_montecarlo: trials must be >= 1"); }
  std::mt19937_64 rng(seed);
  const long n = params.n;
  std::binomial_distribution<long> draw_false(n, 1.0 / params.k);
  long hits = 0;
  for (long t = 0; t < trials; ++t) {
    const long n_f = draw_false(rng);
    if (n_f == 0) { continue; }
    const long n_m = std::binomial_distribution<long>(n_f, params.p_c)(rng);
    const long n_i = std::binomial_distribution<long>(n - n_f, params.cross_rate())(rng);
    const long kept = n - n_m - n_i;
    // left side (n_f - n_m) / kept, defined 0 when kept == 0
    const bool improved = kept == 0 ? true : (n_f - n_m) * n < n_f * kept;
    hits += improved ? 1 : 0;
  }
  MonteCarloEstimate out;
  out.trials = trials;
  out.mean = static_cast<double>(hits) / static_cast<double>(trials);
  out.standard_error = std::sqrt(out.mean * (1.0 - out.mean) / static_cast<double>(trials));
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index)
{
  return mix_seed(seed, index);
}

std::vector<TheoryPoint> evaluate_grid(std::span<const int> k_list, std::span<const int> n_list,
                                       std::span<const double> pc_grid, long trials, std::uint64_t seed)
{
  if (k_list.empty() || n_list.empty() || pc_grid.empty()) { throw Error("theory grid: empty grid"); }
  std::vector<int> ks(k_list.begin(), k_list.end());
  std::vector<int> ns(n_list.begin(), n_list.end());
  std::vector<double> pcs(pc_grid.begin(), pc_grid.end());
  std::sort(ks.begin(), ks.end());
  std::sort(ns.begin(), ns.end());
  std::sort(pcs.begin(), pcs.end());

  std::vector<TheoryPoint> out;
  out.reserve(ks.size() * ns.size() * pcs.size());
  std::uint64_t index = 0;
  for (int k : ks) {
    for (int n : ns) {
      for (double pc : pcs) {
        TheoryPoint pt;
        pt.params = Params{pc, k, n};
        pt.p_b_analytic = p_better_analytic(pt.params);
        pt.p_n = false_negative_rate(pt.params);
        if (trials > 0) { pt.p_b_montecarlo = p_better_montecarlo(pt.params, trials, derive_seed(seed, index)); }
        out.push_back(pt);
        ++index;
      }
    }
  }
  return out;
}

void write_curves_csv(std::span<const TheoryPoint> points, const std::filesystem::path & path)
{
  std::ofstream os(path);
  if (!os) { throw Error("cannot write curve file '" + path.string() + "'"); }
  os << "k,N,p_c,p_b_analytic,p_b_mc,se\n";
  os << std::setprecision(12);
  for (const auto & pt : points) {
    os << pt.params.k << ',' << pt.params.n << ',' << pt.params.p_c << ',' << pt.p_b_analytic << ','
       << pt.p_b_montecarlo.mean << ',' << pt.p_b_montecarlo.standard_error << '\n';
  }
  if (!os) { throw Error("failed writing curve file '" + path.string() + "'"); }
}

std::vector<TheoryPoint> export_curves(std::span<const int> k_list, std::span<const int> n_list,
                                       std::span<const double> pc_grid, long trials, std::uint64_t seed,
                                       const std::filesystem::path & path)
{
  auto points = evaluate_grid(k_list, n_list, pc_grid, trials, seed);
  write_curves_csv(points, path);
  return points;
}

std::optional<double> min_accuracy_for(int k, int n, std::span<const double> pc_grid, double target)
{
  std::vector<double> pcs(pc_grid.begin(), pc_grid.end());
  std::sort(pcs.begin(), pcs.end());
  for (double pc : pcs) {
    if (p_better_analytic(Params{pc, k, n}) >= target) { return pc; }
  }
  return std::nullopt;
}

std::vector<double> make_grid(double lo, double hi, double step)
{
  if (!(step > 0.0) || hi < lo) { throw Error("make_grid: need step > 0 and hi >= lo"); }
  std::vector<double> out;
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  for (long s = 0; s <= count; ++s) {
    out.push_back(std::round((lo + static_cast<double>(s) * step) * 1e9) / 1e9);
  }
  return out;
}

}  // namespace cone::theory
