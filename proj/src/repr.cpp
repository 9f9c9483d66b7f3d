#include "cone/repr.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace cone {

using nlohmann::json;

PositiveStrategy positive_strategy_from_string(std::string_view s)
{
  if (s == "augment_always") return PositiveStrategy::augment_always;
  if (s == "same_doc_then_augment") return PositiveStrategy::same_doc_then_augment;
  throw Error("unknown positive strategy '" + std::string(s) + "'");
}

std::string_view to_string(PositiveStrategy s)
{
  return s == PositiveStrategy::augment_always ? "augment_always" : "same_doc_then_augment";
}

AugmentMode augment_mode_from_string(std::string_view s)
{
  if (s == "precomputed") return AugmentMode::precomputed;
  if (s == "token_dropout") return AugmentMode::token_dropout;
  if (s == "embedding_noise") return AugmentMode::embedding_noise;
  throw Error("unknown augmentation mode '" + std::string(s) + "'");
}

std::string_view to_string(AugmentMode m)
{
  switch (m) {
    case AugmentMode::precomputed: return "precomputed";
    case AugmentMode::token_dropout: return "token_dropout";
    case AugmentMode::embedding_noise: return "embedding_noise";
  }
  return "embedding_noise";
}

void TrainConfig::validate() const
{
  if (batch_size < 2) { throw Error("batch_size must be >= 2"); }
  if (!(temperature > 0.0)) { throw Error("temperature must be positive"); }
  if (!(learning_rate > 0.0)) { throw Error("learning_rate must be positive"); }
  if (epochs_per_round < 0) { throw Error("epochs_per_round must be >= 0"); }
  if (hidden_dim < 1 || latent_dim < 1) { throw Error("head dimensions must be positive"); }
}

Heads Heads::random(int d_e, const TrainConfig & config)
{
  std::mt19937_64 rng(config.seed);
  Heads h;
  h.aspect = ProjectionHead<double>::random(d_e, config.hidden_dim, config.latent_dim, rng);
  h.sentiment = ProjectionHead<double>::random(d_e, config.hidden_dim, config.latent_dim, rng);
  return h;
}

Vectord Augmenter::augment(const Corpus & corpus, int sentence, std::mt19937_64 & rng) const
{
  const auto row = static_cast<Eigen::Index>(sentence);
  if (mode_ == AugmentMode::precomputed) {
    if (!corpus.has_augmentation[static_cast<std::size_t>(sentence)]) {
      const auto & s = corpus.sentences[static_cast<std::size_t>(sentence)];
      throw Error("no augmentation pair on file for sentence (" + s.doc_id + ", " + std::to_string(s.sent_id) + ")");
    }
    return corpus.augmentations.row(row).transpose();
  }
  if (mode_ == AugmentMode::token_dropout) {
    std::bernoulli_distribution drop(dropout_);
    for (std::size_t t = 0; t < corpus.sentences[static_cast<std::size_t>(sentence)].tokens.size(); ++t) {
      (void)drop(rng);
    }
  }
  Vectord v = corpus.embeddings.row(row).transpose();
  if (sigma_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_);
    for (Eigen::Index i = 0; i < v.size(); ++i) { v[i] += noise(rng); }
  }
  const double n = v.norm();
  return n > 0.0 ? Vectord(v / n) : v;
}

BoolMatrix negative_mask(std::span<const int> docs, std::span<const int> labels, bool denoise)
{
  const auto n = static_cast<Eigen::Index>(docs.size());
  BoolMatrix mask(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto a = static_cast<std::size_t>(i);
      const auto b = static_cast<std::size_t>(k);
      mask(i, k) = i != k && docs[a] != docs[b] && (!denoise || labels[a] != labels[b]);
    }
  }
  return mask;
}

namespace {

int same_doc_partner(const Corpus & corpus, int anchor, bool by_aspect, std::mt19937_64 & rng)
{
  const auto & s = corpus.sentences[static_cast<std::size_t>(anchor)];
  std::vector<int> candidates;
  for (int other : corpus.documents[static_cast<std::size_t>(s.doc_index)].sentence_ids) {
    if (other == anchor) { continue; }
    const auto & o = corpus.sentences[static_cast<std::size_t>(other)];
    const bool same = by_aspect ? o.pseudo_aspect == s.pseudo_aspect : o.pseudo_sentiment == s.pseudo_sentiment;
    if (same) { candidates.push_back(other); }
  }
  if (candidates.empty()) { return -1; }
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

}  // namespace

ContrastiveBatch make_batch(const Corpus & corpus, std::span<const int> anchors, const TrainConfig & config,
                            const Augmenter & augmenter, std::mt19937_64 & rng)
{
  const auto n = static_cast<Eigen::Index>(anchors.size());
  const int d = corpus.dim();
  ContrastiveBatch b;
  b.anchor_ids.assign(anchors.begin(), anchors.end());
  b.anchor_vectors.resize(n, d);
  b.aspect_positives.resize(n, d);
  b.sentiment_positives.resize(n, d);

  std::vector<int> docs(static_cast<std::size_t>(2 * n));
  std::vector<int> aspects(static_cast<std::size_t>(2 * n));
  std::vector<int> sentiments(static_cast<std::size_t>(2 * n));
  b.positive_index.resize(static_cast<std::size_t>(2 * n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int id = anchors[static_cast<std::size_t>(i)];
    const auto & s = corpus.sentences[static_cast<std::size_t>(id)];
    b.anchor_vectors.row(i) = corpus.embeddings.row(id);

    const bool same_doc = config.positive_strategy == PositiveStrategy::same_doc_then_augment;
    const int a_partner = same_doc ? same_doc_partner(corpus, id, true, rng) : -1;
    const int s_partner = same_doc ? same_doc_partner(corpus, id, false, rng) : -1;
    Vectord augmented;
    if (a_partner < 0 || s_partner < 0) { augmented = augmenter.augment(corpus, id, rng); }
    b.aspect_positives.row(i) =
      (a_partner >= 0 ? Vectord(corpus.embeddings.row(a_partner).transpose()) : augmented).transpose();
    b.sentiment_positives.row(i) =
      (s_partner >= 0 ? Vectord(corpus.embeddings.row(s_partner).transpose()) : augmented).transpose();

    for (Eigen::Index r : {i, i + n}) {
      docs[static_cast<std::size_t>(r)] = s.doc_index;
      aspects[static_cast<std::size_t>(r)] = s.pseudo_aspect;
      sentiments[static_cast<std::size_t>(r)] = static_cast<int>(s.pseudo_sentiment);
    }
    b.positive_index[static_cast<std::size_t>(i)] = static_cast<int>(i + n);
    b.positive_index[static_cast<std::size_t>(i + n)] = static_cast<int>(i);
  }
  b.aspect_mask = negative_mask(docs, aspects, config.denoise_negatives);
  b.sentiment_mask = negative_mask(docs, sentiments, config.denoise_negatives);
  return b;
}

ContrastiveBatch build_batch(const Corpus & corpus, const TrainConfig & config, const Augmenter & augmenter,
                             std::mt19937_64 & rng)
{
  config.validate();
  if (corpus.documents.size() < 2) { throw Error("build_batch: corpus needs at least 2 documents"); }
  if (corpus.size() < static_cast<std::size_t>(config.batch_size)) {
    throw Error("build_batch: batch size " + std::to_string(config.batch_size) + " exceeds corpus size " +
                std::to_string(corpus.size()));
  }
  std::vector<int> ids(corpus.size());
  std::iota(ids.begin(), ids.end(), 0);
  for (int i = 0; i < config.batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), ids.size() - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[pick(rng)]);
  }
  ids.resize(static_cast<std::size_t>(config.batch_size));
  return make_batch(corpus, ids, config, augmenter, rng);
}

namespace {

Matrixd stack(const Matrixd & top, const Matrixd & bottom)
{
  Matrixd out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

// One head's loss on one batch; accumulates the parameter step into `head`.
double step_head(ProjectionHead<double> & head, const Matrixd & inputs, const ContrastiveBatch & batch,
                 const BoolMatrix & mask, const TrainConfig & config, int & skipped)
{
  const auto cache = forward_batch(head, inputs);
  const auto loss = contrastive_loss<double>(cache.output, batch.positive_index, mask, config.temperature,
                                             config.include_positive_in_denominator);
  skipped += static_cast<int>(loss.skipped.size());
  if (loss.contributing > 0) {
    auto grad = backward(head, inputs, cache, loss.gradient);
    grad *= config.learning_rate;
    head -= grad;
  }
  return loss.loss;
}

}  // namespace

RoundResult train_round(Corpus & corpus, Heads & heads, const TrainConfig & config, const Augmenter & augmenter,
                        std::uint64_t round_seed)
{
  config.validate();
  if (corpus.documents.size() < 2) { throw Error("train_round: corpus needs at least 2 documents"); }
  RoundResult result;
  std::mt19937_64 rng(round_seed);
  std::vector<int> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(order.size(), static_cast<std::size_t>(config.batch_size));

  for (int epoch = 0; epoch < config.epochs_per_round; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += n) {
      const std::size_t len = std::min(n, order.size() - start);
      const std::span<const int> anchors(order.data() + start, len);
      const auto batch = make_batch(corpus, anchors, config, augmenter, rng);

      BatchDiagnostics diag;
      diag.epoch = epoch;
      diag.batch = batches;
      diag.aspect_loss = step_head(heads.aspect, stack(batch.anchor_vectors, batch.aspect_positives), batch,
                                   batch.aspect_mask, config, diag.skipped_anchors);
      diag.sentiment_loss = step_head(heads.sentiment, stack(batch.anchor_vectors, batch.sentiment_positives), batch,
                                      batch.sentiment_mask, config, diag.skipped_anchors);
      const double total = diag.aspect_loss + diag.sentiment_loss;
      if (!std::isfinite(total) || !heads.aspect.all_finite() || !heads.sentiment.all_finite()) {
        throw Error("train_round: non-finite loss or parameters at epoch " + std::to_string(epoch) + " batch " +
                    std::to_string(batches));
      }
      epoch_total += total;
      result.batches.push_back(diag);
      ++batches;
    }
    result.epoch_losses.push_back(batches > 0 ? epoch_total / batches : 0.0);
  }
  compute_latents(corpus, heads);
  return result;
}

void compute_latents(Corpus & corpus, const Heads & heads)
{
  corpus.aspect_latents = forward_batch(heads.aspect, corpus.embeddings).output;
  corpus.sentiment_latents = forward_batch(heads.sentiment, corpus.embeddings).output;
}

namespace {

json head_to_json(const ProjectionHead<double> & h)
{
  auto flat = [](const auto & m) { return std::vector<double>(m.data(), m.data() + m.size()); };
  return json{{"w1", flat(h.w1)}, {"b1", flat(h.b1)}, {"w2", flat(h.w2)}, {"b2", flat(h.b2)}};
}

ProjectionHead<double> head_from_json(const json & j, int d_e, int d_h, int d_z)
{
  auto h = ProjectionHead<double>::zeros(d_e, d_h, d_z);
  auto fill = [&j](auto & m, const char * key) {
    const auto v = j.at(key).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != m.size()) {
      throw Error(std::string("head checkpoint: tensor '") + key + "' has wrong size");
    }
    std::copy(v.begin(), v.end(), m.data());
  };
  fill(h.w1, "w1");
  fill(h.b1, "b1");
  fill(h.w2, "w2");
  fill(h.b2, "b2");
  return h;
}

}  // namespace

void save_heads(const Heads & heads, std::uint64_t seed, const std::filesystem::path & path)
{
  json j{{"input_dim", heads.aspect.input_dim()},
         {"hidden_dim", heads.aspect.hidden_dim()},
         {"latent_dim", heads.aspect.output_dim()},
         {"seed", seed},
         {"aspect", head_to_json(heads.aspect)},
         {"sentiment", head_to_json(heads.sentiment)}};
  std::ofstream os(path);
  if (!os) { throw Error("cannot write checkpoint '" + path.string() + "'"); }
  os << j.dump() << '\n';
}

Heads load_heads(const std::filesystem::path & path)
{
  std::ifstream is(path);
  if (!is) { throw Error("cannot open checkpoint '" + path.string() + "'"); }
  try {
    const json j = json::parse(is);
    const int d_e = j.at("input_dim").get<int>();
    const int d_h = j.at("hidden_dim").get<int>();
    const int d_z = j.at("latent_dim").get<int>();
    return Heads{head_from_json(j.at("aspect"), d_e, d_h, d_z), head_from_json(j.at("sentiment"), d_e, d_h, d_z)};
  } catch (const json::exception & e) {
    throw Error("checkpoint '" + path.string() + "': " + e.what());
  }
}

}  // namespace cone
