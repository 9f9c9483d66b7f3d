#ifndef CONE_CLUSTER_HPP_
#define CONE_CLUSTER_HPP_

#include "cone/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace cone {

/// Hard partition of a set of row vectors.
///
/// Invariants: every cluster has at least one member, assignments lie in
/// [0, count()), and each centroid is the mean of its members.
template<typename Scalar>
struct ClusterModel
{
  Matrix<Scalar> centroids;
  std::vector<int> assignments;

  int count() const { return static_cast<int>(centroids.rows()); }

  std::vector<int> sizes() const
  {
    std::vector<int> out(static_cast<std::size_t>(count()), 0);
    for (int a : assignments) { ++out[static_cast<std::size_t>(a)]; }
    return out;
  }
};

template<typename Scalar>
struct LloydResult
{
  ClusterModel<Scalar> model;
  Scalar inertia{0};
  int iterations{0};
  std::vector<Scalar> inertia_trace;  // within-cluster sum of squares after each iteration
};

namespace detail {

template<typename Scalar>
Scalar nearest_centroid(const Matrix<Scalar> & centroids, const auto & x, int & best)
{
  Scalar best_d = std::numeric_limits<Scalar>::infinity();
  best = 0;
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const Scalar d = (centroids.row(c) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best_d;
}

}  // namespace detail

/// Recompute centroids as member means. Clusters must be non-empty.
template<typename Scalar>
Matrix<Scalar> member_means(const Matrix<Scalar> & vectors, std::span<const int> assignments, int k)
{
  Matrix<Scalar> sums = Matrix<Scalar>::Zero(k, vectors.cols());
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const int a = assignments[static_cast<std::size_t>(i)];
    sums.row(a) += vectors.row(i);
    ++counts[static_cast<std::size_t>(a)];
  }
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) { throw Error("member_means: empty cluster"); }
    sums.row(c) /= static_cast<Scalar>(counts[static_cast<std::size_t>(c)]);
  }
  return sums;
}

template<typename Scalar>
Scalar within_cluster_ss(const Matrix<Scalar> & vectors, const ClusterModel<Scalar> & model)
{
  Scalar total{0};
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    total += (vectors.row(i) - model.centroids.row(model.assignments[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return total;
}

/// Lloyd's iteration from given initial centroids. Stops when assignments
/// stabilise or after max_iterations. A cluster that empties is reseeded with
/// the point farthest from its current centroid.
template<typename Scalar>
LloydResult<Scalar> lloyd(const Matrix<Scalar> & vectors, Matrix<Scalar> centroids, int max_iterations = 100)
{
  const auto m = vectors.rows();
  const int k = static_cast<int>(centroids.rows());
  LloydResult<Scalar> out;
  std::vector<int> assign(static_cast<std::size_t>(m), -1);
  std::vector<Scalar> dist(static_cast<std::size_t>(m));

  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < m; ++i) {
      int best = 0;
      dist[static_cast<std::size_t>(i)] = detail::nearest_centroid(centroids, vectors.row(i), best);
      if (best != assign[static_cast<std::size_t>(i)]) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) { break; }

    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int a : assign) { ++counts[static_cast<std::size_t>(a)]; }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] != 0) { continue; }
      // farthest point among those whose cluster can spare one
      Eigen::Index far = -1;
      Scalar far_d = Scalar(-1);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto a = static_cast<std::size_t>(assign[static_cast<std::size_t>(i)]);
        if (counts[a] > 1 && dist[static_cast<std::size_t>(i)] > far_d) {
          far_d = dist[static_cast<std::size_t>(i)];
          far = i;
        }
      }
      --counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(far)])];
      assign[static_cast<std::size_t>(far)] = c;
      dist[static_cast<std::size_t>(far)] = Scalar(0);
      counts[static_cast<std::size_t>(c)] = 1;
    }
    centroids = member_means(vectors, assign, k);
    out.iterations = it + 1;

    ClusterModel<Scalar> snapshot{centroids, assign};
    out.inertia_trace.push_back(within_cluster_ss(vectors, snapshot));
  }
  out.model = ClusterModel<Scalar>{member_means(vectors, assign, k), std::move(assign)};
  out.inertia = within_cluster_ss(vectors, out.model);
  return out;
}

/// k-means++ seeding followed by Lloyd's iteration; the restart with the
/// lowest within-cluster sum of squares wins.
template<typename Scalar>
ClusterModel<Scalar> kmeans(const Matrix<Scalar> & vectors, int k, std::uint64_t seed, int restarts = 4,
                            int max_iterations = 100)
{
  const auto m = vectors.rows();
  if (k < 1) { throw Error("kmeans: k must be >= 1"); }
  if (k > m) {
    throw Error("kmeans: k=" + std::to_string(k) + " exceeds number of points " + std::to_string(m));
  }
  std::mt19937_64 rng(seed);
  LloydResult<Scalar> best;
  bool have_best = false;
  for (int r = 0; r < std::max(1, restarts); ++r) {
    Matrix<Scalar> init(k, vectors.cols());
    std::vector<Scalar> d2(static_cast<std::size_t>(m), std::numeric_limits<Scalar>::infinity());
    std::uniform_int_distribution<Eigen::Index> first(0, m - 1);
    init.row(0) = vectors.row(first(rng));
    for (int c = 1; c < k; ++c) {
      Scalar total{0};
      for (Eigen::Index i = 0; i < m; ++i) {
        auto & di = d2[static_cast<std::size_t>(i)];
        di = std::min(di, (vectors.row(i) - init.row(c - 1)).squaredNorm());
        total += di;
      }
      Eigen::Index pick = 0;
      if (total > Scalar(0)) {
        std::uniform_real_distribution<double> u(0.0, static_cast<double>(total));
        double target = u(rng);
        for (pick = 0; pick < m - 1; ++pick) {
          target -= static_cast<double>(d2[static_cast<std::size_t>(pick)]);
          if (target < 0.0) { break; }
        }
      } else {
        pick = first(rng);
      }
      init.row(c) = vectors.row(pick);
    }
    auto result = lloyd(vectors, std::move(init), max_iterations);
    if (!have_best || result.inertia < best.inertia) {
      best = std::move(result);
      have_best = true;
    }
  }
  return std::move(best.model);
}

/// Mean silhouette coefficient under Euclidean distance.
/// Singleton clusters have a(z) = 0; a point with max(a, b) = 0 scores 0.
template<typename Scalar>
Scalar silhouette(const Matrix<Scalar> & vectors, const ClusterModel<Scalar> & model)
{
  const int k = model.count();
  if (k < 2) { throw Error("silhouette: needs at least 2 clusters"); }
  const auto m = vectors.rows();
  const auto sizes = model.sizes();
  std::vector<Scalar> sums(static_cast<std::size_t>(k));
  Scalar total{0};
  for (Eigen::Index i = 0; i < m; ++i) {
    std::fill(sums.begin(), sums.end(), Scalar(0));
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) { continue; }
      sums[static_cast<std::size_t>(model.assignments[static_cast<std::size_t>(j)])] +=
        (vectors.row(i) - vectors.row(j)).norm();
    }
    const auto own = static_cast<std::size_t>(model.assignments[static_cast<std::size_t>(i)]);
    const Scalar a = sizes[own] > 1 ? sums[own] / static_cast<Scalar>(sizes[own] - 1) : Scalar(0);
    Scalar b = std::numeric_limits<Scalar>::infinity();
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
      if (c == own || sizes[c] == 0) { continue; }
      b = std::min(b, sums[c] / static_cast<Scalar>(sizes[c]));
    }
    const Scalar denom = std::max(a, b);
    total += denom > Scalar(0) ? (b - a) / denom : Scalar(0);
  }
  return total / static_cast<Scalar>(m);
}

/// Fraction of points whose cluster's majority label matches their own label.
inline double purity(std::span<const int> assignments, std::span<const int> labels)
{
  if (assignments.size() != labels.size() || assignments.empty()) { throw Error("purity: size mismatch"); }
  const int k = *std::max_element(assignments.begin(), assignments.end()) + 1;
  const int l = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<int> table(static_cast<std::size_t>(k * l), 0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    ++table[static_cast<std::size_t>(assignments[i] * l + labels[i])];
  }
  int hits = 0;
  for (int c = 0; c < k; ++c) {
    hits += *std::max_element(table.begin() + c * l, table.begin() + (c + 1) * l);
  }
  return static_cast<double>(hits) / static_cast<double>(assignments.size());
}

// ---------------------------------------------------------------------------
// Log-normal merge threshold

/// Distance used for the log-normal fit and cluster merging: 1 - cos, clamped to [1e-6, 2].
template<typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(const Eigen::MatrixBase<DerivedA> & a, const Eigen::MatrixBase<DerivedB> & b)
{
  using Scalar = typename DerivedA::Scalar;
  return std::clamp(Scalar(1) - cosine(a, b), Scalar(1e-6), Scalar(2));
}

template<typename Scalar>
struct LogNormalFit
{
  Scalar mu{0};
  Scalar sigma2{0};
  int sample_size{0};      // number of sampled sentences N_S
  bool degenerate{false};  // every pairwise distance identical
};

/// Fit from a list of unordered-pair distances. The variance uses the
/// 1/(P-1) divisor over P pairs, i.e. 2/(N_S(N_S-1)-2) when P = N_S(N_S-1)/2.
template<typename Scalar>
LogNormalFit<Scalar> fit_lognormal_distances(std::span<const Scalar> distances, int sample_size = 0)
{
  if (distances.size() < 2) { throw Error("fit_lognormal: need at least 2 distances"); }
  const auto p = static_cast<Scalar>(distances.size());
  Scalar mu{0};
  for (Scalar d : distances) {
    if (!(d > Scalar(0))) { throw Error("fit_lognormal: distances must be positive"); }
    mu += std::log(d);
  }
  mu /= p;
  Scalar ss{0};
  bool all_equal = true;
  for (Scalar d : distances) {
    const Scalar dev = std::log(d) - mu;
    ss += dev * dev;
    all_equal = all_equal && d == distances.front();
  }
  LogNormalFit<Scalar> fit;
  fit.mu = mu;
  fit.sigma2 = all_equal ? Scalar(0) : ss / (p - Scalar(1));
  fit.degenerate = all_equal;
  fit.sample_size = sample_size > 0 ? sample_size : static_cast<int>(distances.size());
  return fit;
}

/// Sample n_s rows without replacement and fit a log-normal to their
/// pairwise cosine distances.
template<typename Scalar>
LogNormalFit<Scalar> fit_lognormal(const Matrix<Scalar> & vectors, int n_s, std::uint64_t seed)
{
  if (n_s < 3) { throw Error("fit_lognormal: N_S must be >= 3"); }
  if (vectors.rows() < n_s) {
    throw Error("fit_lognormal: N_S=" + std::to_string(n_s) + " exceeds " + std::to_string(vectors.rows()) +
                " vectors");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(vectors.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (int i = 0; i < n_s; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), idx.size() - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
  }
  std::vector<Scalar> d;
  d.reserve(static_cast<std::size_t>(n_s) * static_cast<std::size_t>(n_s - 1) / 2);
  for (int i = 0; i < n_s; ++i) {
    for (int j = i + 1; j < n_s; ++j) {
      d.push_back(cosine_distance(vectors.row(idx[static_cast<std::size_t>(i)]),
                                  vectors.row(idx[static_cast<std::size_t>(j)])));
    }
  }
  return fit_lognormal_distances<Scalar>(d, n_s);
}

/// Standard normal quantile. Acklam's rational approximation polished with
/// one Halley step against erfc; absolute error well below 1e-9.
inline double normal_quantile(double p)
{
  if (!(p > 0.0 && p < 1.0)) { throw Error("normal_quantile: p must lie in (0, 1)"); }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x;
  if (p < lo) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - lo) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

/// rho-quantile of the fitted log-normal.
template<typename Scalar>
Scalar merge_threshold(const LogNormalFit<Scalar> & fit, double rho)
{
  if (!(rho > 0.0 && rho < 1.0)) { throw Error("merge_threshold: rho must lie in (0, 1)"); }
  if (fit.sigma2 <= Scalar(0)) { return std::exp(fit.mu); }
  return std::exp(fit.mu + std::sqrt(fit.sigma2) * static_cast<Scalar>(normal_quantile(rho)));
}

template<typename Scalar>
struct MergeResult
{
  ClusterModel<Scalar> model;
  std::vector<std::vector<int>> groups;  // old cluster ids merged into each multi-member group
};

/// Union every pair of clusters whose centroid cosine distance is <= alpha,
/// then relabel densely (in order of first old id) and recompute centroids.
template<typename Scalar>
MergeResult<Scalar> merge_clusters(const Matrix<Scalar> & vectors, const ClusterModel<Scalar> & model, Scalar alpha)
{
  const int k = model.count();
  std::vector<int> parent(static_cast<std::size_t>(k));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      if (cosine_distance(model.centroids.row(a), model.centroids.row(b)) <= alpha) {
        const int ra = find(a);
        const int rb = find(b);
        if (ra != rb) { parent[static_cast<std::size_t>(std::max(ra, rb))] = std::min(ra, rb); }
      }
    }
  }
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  std::vector<std::vector<int>> members;
  for (int c = 0; c < k; ++c) {
    const int r = find(c);
    if (remap[static_cast<std::size_t>(r)] < 0) {
      remap[static_cast<std::size_t>(r)] = static_cast<int>(members.size());
      members.emplace_back();
    }
    remap[static_cast<std::size_t>(c)] = remap[static_cast<std::size_t>(r)];
    members[static_cast<std::size_t>(remap[static_cast<std::size_t>(c)])].push_back(c);
  }
  MergeResult<Scalar> out;
  if (static_cast<int>(members.size()) == k) {
    out.model = model;
    return out;
  }
  out.model.assignments.reserve(model.assignments.size());
  for (int a : model.assignments) { out.model.assignments.push_back(remap[static_cast<std::size_t>(a)]); }
  out.model.centroids = member_means(vectors, out.model.assignments, static_cast<int>(members.size()));
  for (auto & g : members) {
    if (g.size() > 1) { out.groups.push_back(std::move(g)); }
  }
  return out;
}

}  // namespace cone

#endif  // CONE_CLUSTER_HPP_
