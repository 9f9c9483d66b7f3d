#ifndef CONE_THEORY_HPP_
#define CONE_THEORY_HPP_

// Exact and Monte-Carlo evaluation of the negative-sampling analysis:
// how likely label-aware negative filtering beats label-blind sampling,
// given clustering accuracy p_c, k clusters and a batch of N negatives.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace cone::theory {

struct Params
{
  double p_c{1.0};  // clustering accuracy, in (0, 1]
  int k{2};         // number of aspect clusters, >= 2
  int n{1};         // negatives per anchor, >= 1

  /// Probability a true negative is wrongly given the anchor's pseudo label.
  double cross_rate() const { return (1.0 - p_c) / static_cast<double>(k - 1); }
  void validate() const;
};

double binom_pmf(int i, int n, double p);
double binom_cdf(int i, int n, double p);

/// Expected share of false negatives left after label-aware filtering.
double false_negative_rate(const Params & params);

/// How the inner binomial CDF is cut off.
///   strict       the exact event (i-j)/(N-j-m) < i/N, ties are no improvement
///   floor  the literal F_B(floor((N-i)j/i), ...) cutoff
enum class Cutoff { strict, floor };

inline constexpr int kMaxAnalyticN = 4096;

/// Probability that filtering lowers the false-negative share, summed over
/// (false negatives i, correctly filtered j). The i = 0 stratum contributes 0.
double p_better_analytic(const Params & params, Cutoff cutoff = Cutoff::strict);

struct MonteCarloEstimate
{
  double mean{0.0};
  double standard_error{0.0};
  long trials{0};
};

MonteCarloEstimate p_better_montecarlo(const Params & params, long trials, std::uint64_t seed);

struct TheoryPoint
{
  Params params;
  double p_b_analytic{0.0};
  MonteCarloEstimate p_b_montecarlo;
  double p_n{0.0};
};

/// Grid evaluation in (k, N, p_c) row order. trials == 0 skips Monte-Carlo.
std::vector<TheoryPoint> evaluate_grid(std::span<const int> k_list, std::span<const int> n_list,
                                       std::span<const double> pc_grid, long trials, std::uint64_t seed);

/// Writes header k,N,p_c,p_b_analytic,p_b_mc,se and one row per point.
void write_curves_csv(std::span<const TheoryPoint> points, const std::filesystem::path & path);

std::vector<TheoryPoint> export_curves(std::span<const int> k_list, std::span<const int> n_list,
                                       std::span<const double> pc_grid, long trials, std::uint64_t seed,
                                       const std::filesystem::path & path);

/// Smallest p_c on the grid (ascending) with analytic p_b >= target.
std::optional<double> min_accuracy_for(int k, int n, std::span<const double> pc_grid, double target = 0.5);

/// Evenly spaced grid lo, lo+step, ..., <= hi (rounded to avoid drift).
std::vector<double> make_grid(double lo, double hi, double step);

/// Seed for the grid point at `index`, decorrelated from its neighbours.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace cone::theory

#endif  // CONE_THEORY_HPP_
