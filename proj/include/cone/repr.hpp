#ifndef CONE_REPR_HPP_
#define CONE_REPR_HPP_

#include "cone/corpus.hpp"
#include "cone/head.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cone {

enum class PositiveStrategy { augment_always, same_doc_then_augment };
enum class AugmentMode { precomputed, token_dropout, embedding_noise };

PositiveStrategy positive_strategy_from_string(std::string_view s);
std::string_view to_string(PositiveStrategy s);
AugmentMode augment_mode_from_string(std::string_view s);
std::string_view to_string(AugmentMode m);

struct TrainConfig
{
  int batch_size{128};
  double temperature{0.1};
  double learning_rate{0.01};
  int epochs_per_round{10};
  PositiveStrategy positive_strategy{PositiveStrategy::augment_always};
  bool denoise_negatives{true};
  bool include_positive_in_denominator{false};
  int hidden_dim{256};
  int latent_dim{64};
  std::uint64_t seed{13};

  void validate() const;
};

struct Heads
{
  ProjectionHead<double> aspect;
  ProjectionHead<double> sentiment;

  static Heads random(int d_e, const TrainConfig & config);
  bool operator==(const Heads &) const = default;
};

/// Produces a label-preserving counterpart of a sentence's base embedding.
class Augmenter
{
public:
  explicit Augmenter(AugmentMode mode = AugmentMode::embedding_noise, double sigma = 0.05, double dropout = 0.1)
    : mode_(mode), sigma_(sigma), dropout_(dropout)
  {}

  AugmentMode mode() const { return mode_; }
  double sigma() const { return sigma_; }

  /// token_dropout has no local sentence encoder to re-embed the reduced
  /// text, so it falls back to embedding_noise after drawing the dropout.
  Vectord augment(const Corpus & corpus, int sentence, std::mt19937_64 & rng) const;

private:
  AugmentMode mode_;
  double sigma_;
  double dropout_;
};

/// 2N rows: anchors first, then their positives in the same order.
struct ContrastiveBatch
{
  std::vector<int> anchor_ids;
  Matrixd anchor_vectors;              // N x d_e
  Matrixd aspect_positives;            // N x d_e
  Matrixd sentiment_positives;         // N x d_e
  BoolMatrix aspect_mask;              // 2N x 2N valid negatives
  BoolMatrix sentiment_mask;           // 2N x 2N valid negatives
  std::vector<int> positive_index;     // partner row of each of the 2N rows

  int size() const { return static_cast<int>(anchor_ids.size()); }
};

/// Negative mask for rows carrying (document, label). A pair is a valid
/// negative when it is off-diagonal, crosses documents and, if denoising,
/// has different labels.
BoolMatrix negative_mask(std::span<const int> docs, std::span<const int> labels, bool denoise);

/// Batch over the given anchors.
ContrastiveBatch make_batch(const Corpus & corpus, std::span<const int> anchors, const TrainConfig & config,
                            const Augmenter & augmenter, std::mt19937_64 & rng);

/// Batch of batch_size anchors drawn without replacement.
ContrastiveBatch build_batch(const Corpus & corpus, const TrainConfig & config, const Augmenter & augmenter,
                             std::mt19937_64 & rng);

struct BatchDiagnostics
{
  int epoch{0};
  int batch{0};
  double aspect_loss{0.0};
  double sentiment_loss{0.0};
  int skipped_anchors{0};
};

struct RoundResult
{
  std::vector<double> epoch_losses;  // mean of L^a + L^s over batches
  std::vector<BatchDiagnostics> batches;
};

/// Epochs of plain mini-batch gradient descent on L^a + L^s, then rewrites
/// the aspect and sentiment latents of every sentence.
RoundResult train_round(Corpus & corpus, Heads & heads, const TrainConfig & config, const Augmenter & augmenter,
                        std::uint64_t round_seed);

/// Rewrite corpus latents from the current heads.
void compute_latents(Corpus & corpus, const Heads & heads);

void save_heads(const Heads & heads, std::uint64_t seed, const std::filesystem::path & path);
Heads load_heads(const std::filesystem::path & path);

}  // namespace cone

#endif  // CONE_REPR_HPP_
