#include "cone/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace cone {

std::vector<Sentiment> classify_sentiment(const Corpus & corpus, const SentimentSpace & space)
{
  std::vector<Sentiment> out(corpus.size(), Sentiment::neutral);
  const auto & centroids = space.model.centroids;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto z = corpus.sentiment_latents.row(static_cast<Eigen::Index>(i));
    double best = -2.0;
    for (int c = 0; c < centroids.rows(); ++c) {
      const double s = cosine(z, centroids.row(c));
      if (s > best) {
        best = s;
        out[i] = space.polarity[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

std::vector<AspectKeypoint> build_report(const Corpus & corpus, const ClusterModel<double> & aspects,
                                         const SentimentSpace & space, int top_n)
{
  if (top_n < 0) { throw Error("build_report: top_n must be >= 0"); }
  if (aspects.assignments.size() != corpus.size()) { throw Error("build_report: model does not cover the corpus"); }
  const int clusters = aspects.count();
  const auto sentiments = classify_sentiment(corpus, space);

  std::vector<AspectKeypoint> out(static_cast<std::size_t>(clusters));
  std::vector<std::vector<Representative>> members(static_cast<std::size_t>(clusters));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const int a = aspects.assignments[i];
    Representative r;
    r.sentence = static_cast<int>(i);
    r.similarity = cosine(corpus.aspect_latents.row(static_cast<Eigen::Index>(i)), aspects.centroids.row(a));
    r.sentiment = sentiments[i];
    members[static_cast<std::size_t>(a)].push_back(r);
  }

  const auto total = static_cast<double>(corpus.size());
  for (int a = 0; a < clusters; ++a) {
    auto & kp = out[static_cast<std::size_t>(a)];
    auto & mem = members[static_cast<std::size_t>(a)];
    if (mem.empty()) { throw Error("build_report: aspect " + std::to_string(a) + " has no members"); }
    kp.aspect_id = a;
    kp.size = static_cast<int>(mem.size());
    kp.popularity = static_cast<double>(mem.size()) / total;
    std::array<int, kSentimentCount> counts{};
    for (const auto & r : mem) { ++counts[static_cast<std::size_t>(r.sentiment)]; }
    for (std::size_t s = 0; s < kSentimentCount; ++s) {
      kp.sentiment_distribution[s] = static_cast<double>(counts[s]) / static_cast<double>(mem.size());
    }
    std::stable_sort(mem.begin(), mem.end(), [](const Representative & x, const Representative & y) {
      return x.similarity > y.similarity;
    });
    for (const auto & r : mem) {
      auto & panel = r.sentiment == Sentiment::positive   ? kp.positive
                     : r.sentiment == Sentiment::negative ? kp.negative
                                                          : kp.neutral;
      if (static_cast<int>(panel.size()) < top_n) { panel.push_back(r); }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const AspectKeypoint & x, const AspectKeypoint & y) {
    return x.size > y.size;
  });
  return out;
}

DocumentScore score_document_vector(const Vectord & e_d, const Vectord & c_p, const Vectord & c_n, double threshold,
                                    bool unsigned_score)
{
  DocumentScore out;
  if (unsigned_score) {
    const double denom = (c_p + c_n).norm();
    if (denom == 0.0) { throw Error("document_sentiment: c_p + c_n is zero"); }
    out.score = (c_p - e_d).norm() / denom;
  } else {
    const double denom = (c_p - c_n).norm();
    if (denom == 0.0) { throw Error("document_sentiment: degenerate sentiment space (c_p = c_n)"); }
    out.score = ((e_d - c_n).norm() - (e_d - c_p).norm()) / denom;
  }
  out.label = sentiment_from_score(out.score, threshold);
  return out;
}

DocumentScore document_sentiment(const Corpus & corpus, const Document & doc, const SentimentSpace & space,
                                 double threshold, bool unsigned_score)
{
  if (doc.sentence_ids.empty()) { throw Error("document_sentiment: document '" + doc.doc_id + "' is empty"); }
  Vectord e_d = Vectord::Zero(corpus.sentiment_latents.cols());
  for (int i : doc.sentence_ids) {
    const auto z = corpus.sentiment_latents.row(i);
    const double n = z.norm();
    if (n > 0.0) { e_d += z.transpose() / n; }
  }
  e_d /= static_cast<double>(doc.sentence_ids.size());
  return score_document_vector(e_d, space.centroid(Sentiment::positive), space.centroid(Sentiment::negative),
                               threshold, unsigned_score);
}

Pca<double> export_pca(const Matrixd & vectors, std::span<const std::string> labels, const std::filesystem::path & path)
{
  if (labels.size() != static_cast<std::size_t>(vectors.rows())) { throw Error("export_pca: one label per vector required"); }
  auto pca = pca2<double>(vectors);
  std::ofstream os(path);
  if (!os) { throw Error("cannot write '" + path.string() + "'"); }
  os << "x,y,label\n" << std::setprecision(10);
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    // normalise -0 so output bytes do not depend on rounding direction
    const double x = pca.coordinates(i, 0) + 0.0;
    const double y = pca.coordinates(i, 1) + 0.0;
    os << x << ',' << y << ',' << labels[static_cast<std::size_t>(i)] << '\n';
  }
  if (!os) { throw Error("failed writing '" + path.string() + "'"); }
  return pca;
}

}  // namespace cone
