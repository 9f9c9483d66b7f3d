#include "cone/metrics.hpp"

#include <cmath>
#include <set>
#include <utility>

namespace cone {

std::optional<Diversity> word_diversity(std::span<const std::vector<std::string>> sentences,
                                        const std::unordered_set<std::string> & stopwords)
{
  std::set<std::string> unigrams;
  std::set<std::pair<std::string, std::string>> bigrams;
  std::size_t total = 0;
  for (const auto & tokens : sentences) {
    const std::string * prev = nullptr;
    for (const auto & tok : tokens) {
      if (stopwords.count(tok) != 0) { continue; }
      ++total;
      unigrams.insert(tok);
      if (prev != nullptr) { bigrams.emplace(*prev, tok); }
      prev = &tok;
    }
  }
  if (total == 0) { return std::nullopt; }
  Diversity d;
  d.tokens = total;
  d.div1 = static_cast<double>(unigrams.size()) / static_cast<double>(total);
  d.div2 = static_cast<double>(bigrams.size()) / static_cast<double>(total);
  return d;
}

Matrixd base_centroids(const Corpus & corpus, std::span<const int> labels, int clusters)
{
  if (labels.size() != corpus.size()) { throw Error("base_centroids: one label per sentence required"); }
  Matrixd centroids = Matrixd::Zero(clusters, corpus.dim());
  std::vector<int> counts(static_cast<std::size_t>(clusters), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int c = labels[i];
    if (c < 0 || c >= clusters) { throw Error("base_centroids: label out of range"); }
    centroids.row(c) += corpus.embeddings.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < clusters; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) { throw Error("base_centroids: empty cluster " + std::to_string(c)); }
    centroids.row(c) /= counts[static_cast<std::size_t>(c)];
  }
  return centroids;
}

bool MetricReport::all_finite() const
{
  for (double v : {coherence, div1, div2, uniqueness, cross_distance, disentanglement}) {
    if (!std::isfinite(v)) { return false; }
  }
  return true;
}

MetricReport compute_metrics(const Corpus & corpus, std::span<const int> labels,
                             const std::unordered_set<std::string> & stopwords)
{
  if (labels.size() != corpus.size() || labels.empty()) { throw Error("compute_metrics: one label per sentence required"); }
  int clusters = 0;
  for (int c : labels) { clusters = std::max(clusters, c + 1); }

  std::vector<std::vector<int>> members(static_cast<std::size_t>(clusters));
  for (std::size_t i = 0; i < labels.size(); ++i) { members[static_cast<std::size_t>(labels[i])].push_back(static_cast<int>(i)); }

  MetricReport report;
  report.clusters = clusters;
  double coh = 0.0, d1 = 0.0, d2 = 0.0;
  int coh_n = 0, div_n = 0;
  for (int c = 0; c < clusters; ++c) {
    const auto & ids = members[static_cast<std::size_t>(c)];
    ClusterMetrics cm;
    cm.cluster = c;
    cm.size = static_cast<int>(ids.size());
    cm.coherence = aspect_coherence(corpus.embeddings, std::span<const int>(ids));
    std::vector<std::vector<std::string>> tokens;
    tokens.reserve(ids.size());
    for (int i : ids) { tokens.push_back(corpus.sentences[static_cast<std::size_t>(i)].tokens); }
    cm.diversity = word_diversity(tokens, stopwords);
    if (cm.coherence) {
      coh += *cm.coherence;
      ++coh_n;
    } else {
      ++report.skipped_coherence;
    }
    if (cm.diversity) {
      d1 += cm.diversity->div1;
      d2 += cm.diversity->div2;
      ++div_n;
    } else {
      ++report.skipped_diversity;
    }
    report.per_cluster.push_back(std::move(cm));
  }
  if (coh_n > 0) { report.coherence = coh / coh_n; }
  if (div_n > 0) {
    report.div1 = d1 / div_n;
    report.div2 = d2 / div_n;
  }
  if (clusters >= 2) {
    // empty labels would have thrown above, so every centroid is defined
    const Matrixd centroids = base_centroids(corpus, labels, clusters);
    report.cross_distance = cross_aspect_distance(centroids);
    report.uniqueness = aspect_uniqueness(centroids);
  }
  if (corpus.aspect_latents.rows() == static_cast<Eigen::Index>(corpus.size()) &&
      corpus.sentiment_latents.rows() == corpus.aspect_latents.rows() && corpus.aspect_latents.cols() > 0) {
    const auto dis = disentanglement_similarity(corpus.aspect_latents, corpus.sentiment_latents);
    report.disentanglement = dis.similarity;
    report.skipped_disentanglement = dis.skipped;
  }
  return report;
}

Classification classification_scores(std::span<const Sentiment> gold, std::span<const Sentiment> predicted)
{
  if (gold.size() != predicted.size()) { throw Error("classification_scores: size mismatch"); }
  if (gold.empty()) { throw Error("classification_scores: nothing to evaluate"); }
  Classification out;
  out.evaluated = static_cast<int>(gold.size());
  std::array<int, kSentimentCount> tp{}, pred_count{};
  int correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(gold[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    ++out.per_class[g].support;
    ++pred_count[p];
    if (g == p) {
      ++tp[g];
      ++correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  int classes = 0;
  for (std::size_t c = 0; c < kSentimentCount; ++c) {
    auto & cs = out.per_class[c];
    cs.precision = pred_count[c] > 0 ? static_cast<double>(tp[c]) / pred_count[c] : 0.0;
    cs.recall = cs.support > 0 ? static_cast<double>(tp[c]) / cs.support : 0.0;
    cs.f1 = cs.precision + cs.recall > 0.0 ? 2.0 * cs.precision * cs.recall / (cs.precision + cs.recall) : 0.0;
    if (cs.support == 0) { continue; }
    ++classes;
    out.macro_precision += cs.precision;
    out.macro_recall += cs.recall;
    out.macro_f1 += cs.f1;
  }
  out.macro_precision /= classes;
  out.macro_recall /= classes;
  out.macro_f1 /= classes;
  return out;
}

}  // namespace cone
