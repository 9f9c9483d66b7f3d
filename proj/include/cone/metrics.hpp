#ifndef CONE_METRICS_HPP_
#define CONE_METRICS_HPP_

// Automatic cluster-quality metrics. Everything except disentanglement is
// computed on base embeddings so different models are scored alike.

#include "cone/corpus.hpp"
#include "cone/types.hpp"

#include <algorithm>
#include <array>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

namespace cone {

/// Mean cosine over ordered pairs i != j of the given rows. Needs >= 2 rows.
template<typename Scalar>
std::optional<Scalar> aspect_coherence(const Matrix<Scalar> & vectors, std::span<const int> members)
{
  const auto n = members.size();
  if (n < 2) { return std::nullopt; }
  Matrix<Scalar> unit(static_cast<Eigen::Index>(n), vectors.cols());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = vectors.row(members[i]);
    const Scalar norm = row.norm();
    unit.row(static_cast<Eigen::Index>(i)) = norm > Scalar(0) ? (row / norm).eval() : row.eval();
  }
  const Matrix<Scalar> gram = unit * unit.transpose();
  const Scalar off = gram.sum() - gram.trace();
  return off / static_cast<Scalar>(n * (n - 1));
}

/// Mean Euclidean distance over unordered centroid pairs.
template<typename Scalar>
Scalar cross_aspect_distance(const Matrix<Scalar> & centroids)
{
  const Eigen::Index c = centroids.rows();
  if (c < 2) { throw Error("cross_aspect_distance: need at least 2 clusters"); }
  Scalar total(0);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i + 1; j < c; ++j) { total += (centroids.row(i) - centroids.row(j)).norm(); }
  }
  return total / static_cast<Scalar>(c * (c - 1) / 2);
}

/// (1/C) sum_i 1 / sum_j max(cos(c_i, c_j), eps), self term included.
template<typename Scalar>
Scalar aspect_uniqueness(const Matrix<Scalar> & centroids, Scalar eps = Scalar(1e-6))
{
  const Eigen::Index c = centroids.rows();
  if (c < 2) { throw Error("aspect_uniqueness: need at least 2 clusters"); }
  Scalar total(0);
  for (Eigen::Index i = 0; i < c; ++i) {
    Scalar overlap(0);
    for (Eigen::Index j = 0; j < c; ++j) {
      const Scalar s = i == j ? Scalar(1) : cosine(centroids.row(i), centroids.row(j));
      overlap += std::max(s, eps);
    }
    total += Scalar(1) / overlap;
  }
  return total / static_cast<Scalar>(c);
}

template<typename Scalar>
struct Disentanglement
{
  Scalar similarity{0};
  std::size_t skipped{0};  // rows with a zero latent
};

/// Mean per-row cosine between aspect and sentiment latents.
template<typename Scalar>
Disentanglement<Scalar> disentanglement_similarity(const Matrix<Scalar> & aspect, const Matrix<Scalar> & sentiment)
{
  if (aspect.rows() != sentiment.rows() || aspect.cols() != sentiment.cols()) {
    throw Error("disentanglement_similarity: latent shapes differ");
  }
  Disentanglement<Scalar> out;
  Scalar total(0);
  std::size_t used = 0;
  for (Eigen::Index i = 0; i < aspect.rows(); ++i) {
    if (aspect.row(i).norm() == Scalar(0) || sentiment.row(i).norm() == Scalar(0)) {
      ++out.skipped;
      continue;
    }
    total += cosine(aspect.row(i), sentiment.row(i));
    ++used;
  }
  if (used == 0) { throw Error("disentanglement_similarity: every latent is zero"); }
  out.similarity = total / static_cast<Scalar>(used);
  return out;
}

struct Diversity
{
  double div1{0.0};
  double div2{0.0};
  std::size_t tokens{0};
};

/// Stopwords removed; unique unigrams and within-sentence bigrams over the
/// remaining token count. Empty after filtering gives nullopt.
std::optional<Diversity> word_diversity(std::span<const std::vector<std::string>> sentences,
                                        const std::unordered_set<std::string> & stopwords);

struct ClusterMetrics
{
  int cluster{0};
  int size{0};
  std::optional<double> coherence;
  std::optional<Diversity> diversity;
};

struct MetricReport
{
  double coherence{0.0};
  double div1{0.0};
  double div2{0.0};
  double uniqueness{0.0};
  double cross_distance{0.0};
  double disentanglement{0.0};
  int clusters{0};
  int skipped_coherence{0};
  int skipped_diversity{0};
  std::size_t skipped_disentanglement{0};
  std::vector<ClusterMetrics> per_cluster;

  bool all_finite() const;
};

/// Cluster means of base embeddings, one row per label 0..C-1.
Matrixd base_centroids(const Corpus & corpus, std::span<const int> labels, int clusters);

/// Metric averages over clusters; coherence and diversity skip clusters where
/// they are undefined. Cross distance and uniqueness need >= 2 clusters and
/// are reported as 0 otherwise.
MetricReport compute_metrics(const Corpus & corpus, std::span<const int> labels,
                             const std::unordered_set<std::string> & stopwords);

struct ClassScores
{
  double precision{0.0};
  double recall{0.0};
  double f1{0.0};
  int support{0};  // gold count
};

struct Classification
{
  double accuracy{0.0};
  double macro_precision{0.0};
  double macro_recall{0.0};
  double macro_f1{0.0};
  int evaluated{0};
  std::array<ClassScores, kSentimentCount> per_class{};  // indexed by Sentiment
};

/// Accuracy and macro-averaged precision/recall/F1 over the classes present
/// in `gold`. Precision with no predictions of a class counts as 0.
Classification classification_scores(std::span<const Sentiment> gold, std::span<const Sentiment> predicted);

}  // namespace cone

#endif  // CONE_METRICS_HPP_
