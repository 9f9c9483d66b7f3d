#ifndef CONE_CORPUS_HPP_
#define CONE_CORPUS_HPP_

#include "cone/cluster.hpp"
#include "cone/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace cone {

/// Per-sentence metadata and pseudo labels. The vector fields (base
/// embedding, aspect and sentiment latents) live as rows of the matrices in
/// Corpus, indexed by the sentence's position.
struct SentenceRecord
{
  std::string doc_id;
  int sent_id{0};
  std::string text;
  std::vector<std::string> tokens;
  int doc_index{0};
  Sentiment pseudo_sentiment{Sentiment::neutral};
  int pseudo_aspect{0};
};

struct Document
{
  std::string doc_id;
  std::vector<int> sentence_ids;  // indices into Corpus::sentences, ordered by sent_id
  std::optional<Sentiment> gold_rating;
};

struct CorpusStats
{
  std::size_t documents{0};
  std::size_t sentences{0};
  double mean_sentences_per_doc{0.0};
};

struct Corpus
{
  std::vector<SentenceRecord> sentences;
  std::vector<Document> documents;
  Matrixd embeddings;         // M x d_e, unit rows
  Matrixd aspect_latents;     // M x d_z
  Matrixd sentiment_latents;  // M x d_z
  Matrixd augmentations;      // M x d_e, valid where has_augmentation
  std::vector<bool> has_augmentation;
  // lexicon labels from the initial pass; sentiment clusters vote with these
  std::vector<Sentiment> lexicon_sentiment;

  std::size_t size() const { return sentences.size(); }
  int dim() const { return static_cast<int>(embeddings.cols()); }
  CorpusStats stats() const;
  std::optional<int> find(const std::string & doc_id, int sent_id) const;
  std::vector<int> aspect_labels() const;
  /// Rebuild the (doc_id, sent_id) lookup after editing `sentences` directly.
  void reindex();

private:
  std::unordered_map<std::string, std::unordered_map<int, int>> index_;
};

/// Lowercase, split on non-alphanumerics, drop empties.
std::vector<std::string> tokenize(std::string_view text);

/// Reads the ingestion JSONL. Documents keep first-appearance order; their
/// sentences are ordered by sent_id. Embeddings are L2-normalised.
Corpus ingest_corpus(const std::filesystem::path & path, int embedding_dim);

/// Embedding length of the first record in an ingestion JSONL.
int infer_embedding_dim(const std::filesystem::path & path);

/// Sidecar export manifest: {"encoder_id", "dim", "pivot", "fallback_used"}.
struct Manifest
{
  std::string encoder_id;
  int dim{0};
  std::string pivot;
  bool fallback_used{false};
};

Manifest load_manifest(const std::filesystem::path & path);

/// Loads backtranslation/augmentation pairs into Corpus::augmentations.
/// Pairs for unknown sentences are an error; returns the number loaded.
std::size_t load_augmentations(Corpus & corpus, const std::filesystem::path & path);

struct SentimentLexicon
{
  std::unordered_map<std::string, double> entries;
  std::unordered_set<std::string> negation_tokens;
  double negation_flip{-0.74};

  static SentimentLexicon load(const std::filesystem::path & tsv);
  static std::unordered_set<std::string> default_negations();
  void validate() const;
};

/// Lexicon compound score S / sqrt(S^2 + 15). A valence is scaled by the
/// flip factor when a negation appears in the 3 preceding tokens.
double score_sentiment(std::span<const std::string> tokens, const SentimentLexicon & lexicon);

Sentiment sentiment_from_score(double compound, double threshold);

void assign_sentiment_pseudo_labels(Corpus & corpus, const SentimentLexicon & lexicon, double threshold = 0.1);

/// k-means over base embeddings; writes pseudo_aspect.
ClusterModel<double> init_aspect_pseudo_labels(Corpus & corpus, int k_init, std::uint64_t seed, int restarts = 4);

std::unordered_set<std::string> load_stopwords(const std::filesystem::path & path);

/// Sentence-level gold labels for evaluation fixtures; never read in training.
struct GoldLabels
{
  std::vector<int> aspect;           // per corpus sentence
  std::vector<Sentiment> sentiment;  // per corpus sentence
};

/// Gold JSONL: {"doc_id", "sent_id", "aspect": int, "sentiment": str, "doc_rating"?: str}.
/// Document ratings, when present, are stored on corpus.documents.
GoldLabels load_gold(Corpus & corpus, const std::filesystem::path & path);

}  // namespace cone

#endif  // CONE_CORPUS_HPP_
