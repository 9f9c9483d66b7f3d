#ifndef CONE_REFINE_HPP_
#define CONE_REFINE_HPP_

#include "cone/cluster.hpp"
#include "cone/corpus.hpp"
#include "cone/repr.hpp"

#include <array>
#include <functional>
#include <optional>
#include <vector>

namespace cone {

struct RefineConfig
{
  int max_iterations{10};
  double tol{1e-3};
  double rho{0.05};
  int n_s{256};
  int kmeans_restarts{4};
  bool skip_refinement{false};  // one clustering pass, no merging
  bool no_contrastive{false};   // never train the heads
  std::uint64_t seed{13};

  void validate() const;
};

struct MergeEvent
{
  int iteration{0};
  std::vector<std::vector<int>> groups;  // cluster ids (pre-merge numbering) fused together
};

struct IterationTrace
{
  int iteration{0};
  double silhouette{0.0};
  int clusters{0};
  double alpha{0.0};
  std::vector<double> epoch_losses;
};

struct RefinementState
{
  int iteration{0};
  std::vector<double> silhouette_history;  // entry 0 is the initial clustering
  std::vector<int> cluster_history;
  std::vector<MergeEvent> merge_log;
  std::vector<IterationTrace> iterations;
  bool converged{false};
  bool collapsed{false};  // aspect clusters merged down to one
};

/// Sentiment latent partition with a polarity attached to each cluster.
struct SentimentSpace
{
  ClusterModel<double> model;                 // over unit sentiment latents, 3 clusters
  std::array<Sentiment, kSentimentCount> polarity{Sentiment::positive, Sentiment::neutral, Sentiment::negative};
  std::array<std::array<int, kSentimentCount>, kSentimentCount> votes{};  // [cluster][lexicon label]

  Vectord centroid(Sentiment s) const;
};

struct RefineResult
{
  ClusterModel<double> aspect_model;  // over unit aspect latents
  SentimentSpace sentiment;
  RefinementState state;
};

/// Rows scaled to unit length (zero rows stay zero).
Matrixd normalized_rows(const Matrixd & m);

/// Cluster sentiment latents into 3 groups and name them by the lexicon
/// labels of their members. Polarities are matched one-to-one to clusters
/// maximising agreement (first permutation wins ties). With `rewrite` the
/// pseudo sentiment labels are replaced by the cluster polarities.
SentimentSpace update_sentiment_clusters(Corpus & corpus, std::uint64_t seed, int restarts, bool rewrite = true);

using IterationCallback = std::function<void(const Corpus &, const Heads &, const RefineResult &)>;

/// Alternate contrastive training and aspect/sentiment re-clustering until
/// the aspect silhouette moves by less than tol. Pseudo labels must already
/// be set. Passing `resume` continues a checkpointed run after its last
/// completed iteration; corpus labels and heads must match that checkpoint.
RefineResult refine_loop(Corpus & corpus, Heads & heads, const TrainConfig & train, const RefineConfig & config,
                         const Augmenter & augmenter, const IterationCallback & on_iteration = {},
                         std::optional<RefineResult> resume = std::nullopt);

}  // namespace cone

#endif  // CONE_REFINE_HPP_
