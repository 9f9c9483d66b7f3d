#ifndef CONE_SYNTHETIC_HPP_
#define CONE_SYNTHETIC_HPP_

// Generator for labelled review-like corpora with known aspect and
// sentiment structure. Used by tests and the bundled fixture.

#include "cone/corpus.hpp"
#include "cone/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cone::synthetic {

struct Spec
{
  int aspects{3};
  int documents{100};
  int sentences_per_doc{6};
  int dim{48};
  double aspect_scale{1.0};     // length of each aspect direction
  double sentiment_scale{0.5};  // length of the sentiment direction
  double jitter{0.02};          // per-coordinate content spread, shared by the paraphrase
  int surface_dims{6};          // subspace carrying wording/style variation
  double surface{0.8};          // per-coordinate std of the style variation, redrawn for the paraphrase
  double noise{0.05};           // isotropic per-coordinate noise, redrawn for the paraphrase
  double rating_agreement{0.8}; // chance a sentence carries its document's polarity
  double unmarked_rate{0.1};    // sentences with no sentiment word
  double negated_rate{0.1};     // sentences phrased as "not <positive word>"
  std::uint64_t seed{7};
};

struct Sentence
{
  std::string doc_id;
  int sent_id{0};
  std::string text;
  Vectord embedding;
  std::string paraphrase;
  Vectord paraphrase_embedding;
  int aspect{0};
  Sentiment sentiment{Sentiment::positive};
  Sentiment doc_rating{Sentiment::positive};
};

struct Dataset
{
  Spec spec;
  std::vector<Sentence> sentences;
  std::size_t document_count() const;
};

Dataset generate(const Spec & spec);

struct Paths
{
  std::filesystem::path corpus;
  std::filesystem::path augmentations;
  std::filesystem::path gold;
  std::filesystem::path manifest;
};

/// In-memory equivalent of writing the files and ingesting them, with the
/// paraphrases loaded as augmentations.
Corpus to_corpus(const Dataset & data);
GoldLabels gold_labels(const Dataset & data);

/// Writes corpus.jsonl, augment.jsonl, gold.jsonl and manifest.json into `dir`.
Paths write(const Dataset & data, const std::filesystem::path & dir);

}  // namespace cone::synthetic

#endif  // CONE_SYNTHETIC_HPP_
