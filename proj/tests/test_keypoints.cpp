#include "cone/keypoints.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace cone;

namespace {

// One-document-per-sentence corpus with the given aspect and sentiment latents.
Corpus latent_corpus(const Matrixd & aspect, const Matrixd & sentiment)
{
  Corpus c;
  for (Eigen::Index i = 0; i < aspect.rows(); ++i) {
    SentenceRecord s;
    s.doc_id = "d" + std::to_string(i);
    s.doc_index = static_cast<int>(i);
    c.sentences.push_back(s);
    c.documents.push_back(Document{s.doc_id, {static_cast<int>(i)}, std::nullopt});
  }
  c.reindex();
  c.embeddings = aspect;
  c.aspect_latents = aspect;
  c.sentiment_latents = sentiment;
  return c;
}

SentimentSpace axis_space()
{
  SentimentSpace space;
  space.model.centroids.resize(3, 2);
  space.model.centroids << 1, 0, 0, 1, -1, 0;
  return space;
}

ClusterModel<double> single_aspect(const Matrixd & aspect)
{
  ClusterModel<double> m;
  m.centroids = aspect.colwise().mean();
  m.assignments.assign(static_cast<std::size_t>(aspect.rows()), 0);
  return m;
}

std::vector<std::vector<double>> distance_matrix(const Matrixd & x)
{
  std::vector<std::vector<double>> d(static_cast<std::size_t>(x.rows()), std::vector<double>(static_cast<std::size_t>(x.rows())));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.rows(); ++j) { d[std::size_t(i)][std::size_t(j)] = (x.row(i) - x.row(j)).norm(); }
  }
  return d;
}

}  // namespace

TEST_CASE("report over one aspect")
{
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrixd aspect(10, 4), senti(10, 2);
  for (Eigen::Index i = 0; i < 10; ++i) {
    aspect.row(i) << 1.0 + 0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng), 0.1 * g(rng);
    // six sentences near c_pos, four near c_neg
    senti.row(i) << (i < 6 ? 1.0 : -1.0), 0.2 * g(rng);
  }
  const auto corpus = latent_corpus(aspect, senti);
  const auto model = single_aspect(aspect);
  const auto report = build_report(corpus, model, axis_space(), 5);
  REQUIRE(report.size() == 1);
  const auto & kp = report[0];
  CHECK(kp.popularity == 1.0);
  CHECK(kp.sentiment_distribution[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(kp.sentiment_distribution[1] == 0.0);
  CHECK(kp.sentiment_distribution[2] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(kp.positive.size() == 5);
  CHECK(kp.negative.size() == 4);
  CHECK(kp.neutral.empty());
  for (std::size_t i = 1; i < kp.positive.size(); ++i) { CHECK(kp.positive[i - 1].similarity >= kp.positive[i].similarity); }
  for (const auto & r : kp.positive) { CHECK(r.sentence < 6); }

  const auto top1 = build_report(corpus, model, axis_space(), 1);
  double best = -2.0;
  int arg = -1;
  for (int i = 0; i < 6; ++i) {
    const double s = cosine(aspect.row(i), model.centroids.row(0));
    if (s > best) {
      best = s;
      arg = i;
    }
  }
  REQUIRE(top1[0].positive.size() == 1);
  CHECK(top1[0].positive[0].sentence == arg);

  CHECK(build_report(corpus, model, axis_space(), 0)[0].positive.empty());
  CHECK_THROWS_AS(build_report(corpus, model, axis_space(), -1), Error);

  auto with_empty = model;
  with_empty.centroids.conservativeResize(2, Eigen::NoChange);
  with_empty.centroids.row(1).setOnes();
  CHECK_THROWS_AS(build_report(corpus, with_empty, axis_space(), 5), Error);
}

TEST_CASE("report over several aspects")
{
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 30;
  Matrixd aspect(n, 3), senti(n, 2);
  ClusterModel<double> model;
  model.centroids = Matrixd::Identity(3, 3);
  for (int i = 0; i < n; ++i) {
    const int a = i < 15 ? 0 : (i < 25 ? 1 : 2);
    model.assignments.push_back(a);
    aspect.row(i) = model.centroids.row(a);
    aspect.row(i) += 0.05 * Eigen::RowVector3d(g(rng), g(rng), g(rng));
    senti.row(i) << g(rng), g(rng);
  }
  const auto corpus = latent_corpus(aspect, senti);
  const auto report = build_report(corpus, model, axis_space(), 3);
  REQUIRE(report.size() == 3);
  double total = 0.0;
  for (const auto & kp : report) {
    total += kp.popularity;
    CHECK(kp.sentiment_distribution[0] + kp.sentiment_distribution[1] + kp.sentiment_distribution[2] ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report[0].aspect_id == 0);
  CHECK(report[0].size == 15);
  CHECK(report[2].size == 5);

  const auto again = build_report(corpus, model, axis_space(), 3);
  for (std::size_t a = 0; a < 3; ++a) {
    CHECK(again[a].aspect_id == report[a].aspect_id);
    CHECK(again[a].positive.size() == report[a].positive.size());
  }
}

TEST_CASE("sentence sentiment by nearest centroid")
{
  Matrixd senti(4, 2);
  senti << 2, 0.1, -3, 0.2, 0.1, 5, 0, 0;
  const auto corpus = latent_corpus(Matrixd(Matrixd::Identity(4, 4)), senti);
  auto space = axis_space();
  const auto s = classify_sentiment(corpus, space);
  CHECK(s[0] == Sentiment::positive);
  CHECK(s[1] == Sentiment::negative);
  CHECK(s[2] == Sentiment::neutral);

  space.polarity = {Sentiment::negative, Sentiment::neutral, Sentiment::positive};
  CHECK(classify_sentiment(corpus, space)[0] == Sentiment::negative);
}

TEST_CASE("document score")
{
  Vectord cp(3), cn(3);
  cp << 1, 2, 0;
  cn << -1, 0, 1;
  const auto at_p = score_document_vector(cp, cp, cn);
  CHECK(at_p.score == doctest::Approx(1.0));
  CHECK(at_p.label == Sentiment::positive);
  const auto mid = score_document_vector((cp + cn) / 2.0, cp, cn);
  CHECK(std::abs(mid.score) < 1e-12);
  CHECK(mid.label == Sentiment::neutral);
  const auto at_n = score_document_vector(cn, cp, cn);
  CHECK(at_n.score == doctest::Approx(-1.0));
  CHECK(at_n.label == Sentiment::negative);

  // joint rotation leaves the score unchanged
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Matrixd a(3, 3);
    for (Eigen::Index i = 0; i < a.size(); ++i) { a.data()[i] = g(rng); }
    const Eigen::Matrix3d q = Eigen::HouseholderQR<Eigen::Matrix3d>(a).householderQ();
    Vectord e(3);
    e << g(rng), g(rng), g(rng);
    const auto before = score_document_vector(e, cp, cn);
    const auto after = score_document_vector(q * e, q * cp, q * cn);
    CHECK(after.score == doctest::Approx(before.score).epsilon(1e-12));
    CHECK(after.label == before.label);
  }

  CHECK_THROWS_AS(score_document_vector(cp, cp, cp), Error);
  CHECK(score_document_vector(cp, cp, cn, 0.1, true).score == 0.0);

  // document vector is the mean of unit sentiment latents
  Matrixd senti(2, 2);
  senti << 4, 0, 0.5, 0;
  auto corpus = latent_corpus(Matrixd(Matrixd::Identity(2, 2)), senti);
  corpus.documents = {Document{"d", {0, 1}, std::nullopt}, Document{"e", {}, std::nullopt}};
  auto space = axis_space();
  const auto doc = document_sentiment(corpus, corpus.documents[0], space);
  CHECK(doc.score == doctest::Approx(1.0));
  CHECK_THROWS_AS(document_sentiment(corpus, corpus.documents[1], space), Error);
}

TEST_CASE("pca")
{
  SUBCASE("collinear points")
  {
    Matrixd x(5, 3);
    for (int i = 0; i < 5; ++i) { x.row(i) << i, 2.0 * i, -i; }
    const auto p = pca2<double>(x);
    CHECK_FALSE(p.degenerate);
    CHECK(p.eigenvalues[1] <= 1e-9);
    // all variance sits on the first component: sum of squared deviations / (n - 1)
    const Matrixd centered = x.rowwise() - x.colwise().mean();
    CHECK(p.eigenvalues[0] == doctest::Approx(centered.squaredNorm() / 4.0).epsilon(1e-12));
    CHECK(p.coordinates.col(1).cwiseAbs().maxCoeff() < 1e-9);
  }

  SUBCASE("two-dimensional data keeps its distances")
  {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrixd plane(40, 2);
    for (Eigen::Index i = 0; i < plane.rows(); ++i) { plane.row(i) << 3.0 * g(rng), g(rng); }
    // embed with a random orthonormal frame in 5 dimensions
    Matrixd a(5, 5);
    for (Eigen::Index i = 0; i < a.size(); ++i) { a.data()[i] = g(rng); }
    const Matrixd q = Eigen::HouseholderQR<Matrixd>(a).householderQ();
    const Matrixd x = plane * q.leftCols(2).transpose();
    const auto p = pca2<double>(x);
    const auto d0 = distance_matrix(plane);
    const auto d1 = distance_matrix(p.coordinates);
    double worst = 0.0;
    for (std::size_t i = 0; i < d0.size(); ++i) {
      for (std::size_t j = 0; j < d0.size(); ++j) { worst = std::max(worst, std::abs(d0[i][j] - d1[i][j])); }
    }
    CHECK(worst < 1e-6);
    CHECK(p.eigenvalues[0] >= p.eigenvalues[1]);
    CHECK(std::abs(p.components.row(0).dot(p.components.row(1))) < 1e-9);
  }

  SUBCASE("separated blobs stay separated")
  {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    const int d = 64, per = 40;
    Matrixd centers(3, d);
    for (Eigen::Index i = 0; i < centers.size(); ++i) { centers.data()[i] = 2.0 * g(rng); }
    Matrixd x(3 * per, d);
    std::vector<int> labels;
    for (int b = 0; b < 3; ++b) {
      for (int i = 0; i < per; ++i) {
        const int r = b * per + i;
        for (int k = 0; k < d; ++k) { x(r, k) = centers(b, k) + 0.3 * g(rng); }
        labels.push_back(b);
      }
    }
    const auto p = pca2<double>(x);
    const Matrixd coords = p.coordinates;
    const auto km = kmeans<double>(coords, 3, 11);
    CHECK(purity(km.assignments, labels) >= 0.9);
  }

  SUBCASE("zero variance")
  {
    const Matrixd x = Matrixd::Constant(4, 3, 0.7);
    const auto p = pca2<double>(x);
    CHECK(p.degenerate);
    CHECK(p.coordinates.isZero());
  }

  CHECK_THROWS_AS(pca2<double>(Matrixd(Matrixd::Ones(1, 3))), Error);
}

TEST_CASE("pca export file")
{
  support::TempDir dir("pca");
  Matrixd x(3, 2);
  x << 0, 0, 1, 0, 2, 0;
  const std::vector<std::string> labels{"a", "b", "c"};
  const auto p = export_pca(x, labels, dir / "p.csv");
  CHECK_FALSE(p.degenerate);
  const auto text = support::read_file(dir / "p.csv");
  CHECK(text == "x,y,label\n-1,0,a\n0,0,b\n1,0,c\n");
  export_pca(x, labels, dir / "q.csv");
  CHECK(support::read_file(dir / "q.csv") == text);

  const std::vector<std::string> short_labels{"a"};
  CHECK_THROWS_AS(export_pca(x, short_labels, dir / "r.csv"), Error);
  const auto flat = export_pca(Matrixd(Matrixd::Zero(3, 2)), labels, dir / "z.csv");
  CHECK(flat.degenerate);
  CHECK(support::read_file(dir / "z.csv") == "x,y,label\n0,0,a\n0,0,b\n0,0,c\n");
}
