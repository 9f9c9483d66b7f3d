#include "cone/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cone {

void RefineConfig::validate() const
{
  if (max_iterations < 0) { throw Error("max_iterations must be >= 0"); }
  if (!(tol >= 0.0)) { throw Error("tol must be >= 0"); }
  if (!(rho > 0.0 && rho < 1.0)) { throw Error("rho must lie in (0, 1)"); }
  if (n_s < 3) { throw Error("N_S must be >= 3"); }
  if (kmeans_restarts < 1) { throw Error("kmeans_restarts must be >= 1"); }
}

Vectord SentimentSpace::centroid(Sentiment s) const
{
  for (int c = 0; c < kSentimentCount; ++c) {
    if (polarity[static_cast<std::size_t>(c)] == s) { return model.centroids.row(c).transpose(); }
  }
  throw Error("sentiment space has no " + std::string(to_string(s)) + " cluster");
}

Matrixd normalized_rows(const Matrixd & m)
{
  Matrixd out = m;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (n > 0.0) { out.row(i) /= n; }
  }
  return out;
}

SentimentSpace update_sentiment_clusters(Corpus & corpus, std::uint64_t seed, int restarts, bool rewrite)
{
  SentimentSpace space;
  const Matrixd unit = normalized_rows(corpus.sentiment_latents);
  space.model = kmeans(unit, kSentimentCount, seed, restarts);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto c = static_cast<std::size_t>(space.model.assignments[i]);
    ++space.votes[c][static_cast<std::size_t>(corpus.lexicon_sentiment[i])];
  }
  std::array<int, kSentimentCount> perm{0, 1, 2};
  std::array<int, kSentimentCount> best = perm;
  int best_score = -1;
  do {
    int score = 0;
    for (std::size_t c = 0; c < kSentimentCount; ++c) { score += space.votes[c][static_cast<std::size_t>(perm[c])]; }
    if (score > best_score) {
      best_score = score;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t c = 0; c < kSentimentCount; ++c) { space.polarity[c] = static_cast<Sentiment>(best[c]); }

  if (rewrite) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      corpus.sentences[i].pseudo_sentiment = space.polarity[static_cast<std::size_t>(space.model.assignments[i])];
    }
  }
  return space;
}

RefineResult refine_loop(Corpus & corpus, Heads & heads, const TrainConfig & train, const RefineConfig & config,
                         const Augmenter & augmenter, const IterationCallback & on_iteration,
                         std::optional<RefineResult> resume)
{
  config.validate();
  train.validate();
  RefineResult result;
  compute_latents(corpus, heads);
  Matrixd aspect_unit = normalized_rows(corpus.aspect_latents);

  if (resume) {
    result = std::move(*resume);
  } else {
    const auto labels = corpus.aspect_labels();
    const int c0 = *std::max_element(labels.begin(), labels.end()) + 1;
    result.aspect_model = ClusterModel<double>{member_means(aspect_unit, labels, c0), labels};
    result.state.silhouette_history.push_back(c0 >= 2 ? silhouette(aspect_unit, result.aspect_model) : 0.0);
    result.state.cluster_history.push_back(c0);
    result.sentiment = update_sentiment_clusters(corpus, mix_seed(config.seed, 3000), config.kmeans_restarts, false);
  }

  const int m = static_cast<int>(corpus.size());
  for (int it = result.state.iteration + 1; it <= config.max_iterations; ++it) {
    if (result.state.converged || result.state.collapsed) { break; }
    IterationTrace trace;
    trace.iteration = it;
    if (!config.no_contrastive) {
      trace.epoch_losses = train_round(corpus, heads, train, augmenter, mix_seed(config.seed, static_cast<std::uint64_t>(it))).epoch_losses;
    }
    aspect_unit = normalized_rows(corpus.aspect_latents);

    const int k = std::min(result.aspect_model.count(), m);
    auto model = kmeans(aspect_unit, k, mix_seed(config.seed, 1000 + static_cast<std::uint64_t>(it)),
                        config.kmeans_restarts);
    if (!config.skip_refinement) {
      const auto fit = fit_lognormal(aspect_unit, std::min(config.n_s, m),
                                     mix_seed(config.seed, 2000 + static_cast<std::uint64_t>(it)));
      trace.alpha = merge_threshold(fit, config.rho);
      auto merged = merge_clusters(aspect_unit, model, trace.alpha);
      if (!merged.groups.empty()) { result.state.merge_log.push_back(MergeEvent{it, std::move(merged.groups)}); }
      model = std::move(merged.model);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) { corpus.sentences[i].pseudo_aspect = model.assignments[i]; }
    result.aspect_model = std::move(model);
    result.sentiment = update_sentiment_clusters(corpus, mix_seed(config.seed, 3000 + static_cast<std::uint64_t>(it)),
                                                 config.kmeans_restarts);

    trace.clusters = result.aspect_model.count();
    if (trace.clusters < 2) {
      result.state.collapsed = true;
      trace.silhouette = 0.0;
    } else {
      trace.silhouette = silhouette(aspect_unit, result.aspect_model);
    }
    const double previous = result.state.silhouette_history.back();
    result.state.silhouette_history.push_back(trace.silhouette);
    result.state.cluster_history.push_back(trace.clusters);
    result.state.iterations.push_back(trace);
    result.state.iteration = it;
    if (!config.skip_refinement && std::abs(trace.silhouette - previous) < config.tol) {
      result.state.converged = true;
    }
    if (on_iteration) { on_iteration(corpus, heads, result); }
    if (config.skip_refinement) { break; }
  }
  return result;
}

}  // namespace cone
