#ifndef CONE_KEYPOINTS_HPP_
#define CONE_KEYPOINTS_HPP_

#include "cone/cluster.hpp"
#include "cone/corpus.hpp"
#include "cone/refine.hpp"
#include "cone/types.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cone {

struct Representative
{
  int sentence{0};
  double similarity{0.0};  // cosine to the aspect centroid
  Sentiment sentiment{Sentiment::neutral};
};

struct AspectKeypoint
{
  int aspect_id{0};
  int size{0};
  double popularity{0.0};
  std::array<double, kSentimentCount> sentiment_distribution{};  // indexed by Sentiment
  std::vector<Representative> positive;
  std::vector<Representative> negative;
  std::vector<Representative> neutral;
};

/// Nearest sentiment centroid by cosine, for every sentence.
std::vector<Sentiment> classify_sentiment(const Corpus & corpus, const SentimentSpace & space);

/// Per aspect cluster: popularity, sentiment distribution and the top_n
/// members by centroid similarity in each polarity panel. Aspects come out
/// ordered by descending popularity, ties by id.
std::vector<AspectKeypoint> build_report(const Corpus & corpus, const ClusterModel<double> & aspects,
                                         const SentimentSpace & space, int top_n = 5);

struct DocumentScore
{
  double score{0.0};
  Sentiment label{Sentiment::neutral};
};

/// Signed distance score (|e - c_n| - |e - c_p|) / |c_p - c_n| of a document's
/// mean unit sentiment latent. With `unsigned_score` the score is
/// |c_p - e| / |c_p + c_n| instead. Labels use +-threshold.
DocumentScore document_sentiment(const Corpus & corpus, const Document & doc, const SentimentSpace & space,
                                 double threshold = 0.1, bool unsigned_score = false);

/// Same rule on an explicit document vector and centroids.
DocumentScore score_document_vector(const Vectord & e_d, const Vectord & c_p, const Vectord & c_n,
                                    double threshold = 0.1, bool unsigned_score = false);

template<typename Scalar>
struct Pca
{
  Vector<Scalar> mean;
  Matrix<Scalar> components;  // 2 x d
  std::array<Scalar, 2> eigenvalues{};
  Matrix<Scalar> coordinates;  // n x 2
  bool degenerate{false};      // zero variance: all coordinates 0
};

namespace detail {

template<typename Scalar>
Vector<Scalar> dominant_eigenvector(const Matrix<Scalar> & cov, const Matrix<Scalar> & deflate, Scalar tol,
                                    int max_iterations)
{
  const Eigen::Index d = cov.rows();
  auto orthogonalize = [&](Vector<Scalar> & v) {
    for (Eigen::Index r = 0; r < deflate.rows(); ++r) {
      const Vector<Scalar> u = deflate.row(r).transpose();
      v -= u.dot(v) * u;
    }
  };
  // start from the largest remaining column; a fixed, data-dependent start keeps results reproducible
  Vector<Scalar> v = Vector<Scalar>::Zero(d);
  Scalar best(-1);
  for (Eigen::Index c = 0; c < d; ++c) {
    Vector<Scalar> col = cov.col(c);
    orthogonalize(col);
    const Scalar n = col.norm();
    if (n > best) {
      best = n;
      v = col;
    }
  }
  if (!(best > Scalar(0))) { return Vector<Scalar>::Zero(d); }
  v /= v.norm();
  for (int it = 0; it < max_iterations; ++it) {
    Vector<Scalar> next = cov * v;
    orthogonalize(next);
    const Scalar n = next.norm();
    if (!(n > Scalar(0))) { return Vector<Scalar>::Zero(d); }
    next /= n;
    if (next.dot(v) < Scalar(0)) { next = -next; }
    const Scalar change = (next - v).norm();
    v = next;
    if (change < tol) { break; }
  }
  // fix the sign so the largest-magnitude coordinate is positive
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < Scalar(0)) { v = -v; }
  return v;
}

}  // namespace detail

/// Top-2 principal components by power iteration with deflation.
template<typename Scalar>
Pca<Scalar> pca2(const Matrix<Scalar> & vectors, Scalar tol = Scalar(1e-9), int max_iterations = 1000)
{
  if (vectors.rows() < 2) { throw Error("pca: need at least 2 vectors"); }
  Pca<Scalar> out;
  out.mean = vectors.colwise().mean().transpose();
  const Matrix<Scalar> centered = vectors.rowwise() - out.mean.transpose();
  const Matrix<Scalar> cov = centered.transpose() * centered / static_cast<Scalar>(vectors.rows() - 1);
  const Scalar total = cov.trace();
  out.components = Matrix<Scalar>::Zero(2, vectors.cols());
  out.coordinates = Matrix<Scalar>::Zero(vectors.rows(), 2);
  if (!(total > Scalar(0))) {
    out.degenerate = true;
    return out;
  }
  const Scalar floor = total * Scalar(1e-14);
  for (int k = 0; k < 2 && k < vectors.cols(); ++k) {
    const Matrix<Scalar> found = out.components.topRows(k);
    Vector<Scalar> v = detail::dominant_eigenvector(cov, found, tol, max_iterations);
    const Scalar lambda = v.dot(cov * v);
    if (!(lambda > floor)) { break; }
    out.components.row(k) = v.transpose();
    out.eigenvalues[static_cast<std::size_t>(k)] = lambda;
  }
  out.coordinates = centered * out.components.transpose();
  return out;
}

/// Writes "x,y,label" rows. Returns the projection; `degenerate` marks zero-variance input.
Pca<double> export_pca(const Matrixd & vectors, std::span<const std::string> labels, const std::filesystem::path & path);

}  // namespace cone

#endif  // CONE_KEYPOINTS_HPP_
