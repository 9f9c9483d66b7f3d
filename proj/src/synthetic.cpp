#include "cone/synthetic.hpp"

#include <json.hpp>

#include <array>
#include <fstream>
#include <random>
#include <set>

namespace cone::synthetic {

using nlohmann::json;

namespace {

const std::vector<std::vector<std::string>> kAspectNouns = {
  {"room", "bed", "bathroom", "shower", "pillow", "carpet"},
  {"staff", "reception", "receptionist", "concierge", "manager", "porter"},
  {"breakfast", "buffet", "coffee", "restaurant", "dinner", "menu"},
  {"pool", "gym", "spa", "sauna", "garden", "terrace"},
  {"location", "neighbourhood", "street", "view", "station", "area"},
};

const std::vector<std::string> kPositive = {"great", "clean", "friendly", "excellent", "comfortable", "lovely",
                                            "wonderful", "helpful", "amazing", "pleasant"};
const std::vector<std::string> kNegative = {"dirty", "rude", "awful", "terrible", "noisy", "poor",
                                            "horrible", "disappointing", "broken", "unpleasant"};
const std::vector<std::string> kOpeners = {"the", "our", "honestly the", "i thought the", "overall the", "we found the"};
const std::vector<std::string> kVerbs = {"was", "seemed", "looked", "felt", "turned out"};
const std::vector<std::string> kTails = {"", " during our stay", " on the second night", " as expected",
                                         " for the price", " every morning"};

template<typename T>
const T & pick(const std::vector<T> & v, std::mt19937_64 & rng)
{
  std::uniform_int_distribution<std::size_t> d(0, v.size() - 1);
  return v[d(rng)];
}

std::string phrase(int aspect, Sentiment s, bool unmarked, bool negated, std::mt19937_64 & rng)
{
  const auto & noun = pick(kAspectNouns[static_cast<std::size_t>(aspect) % kAspectNouns.size()], rng);
  std::string out = pick(kOpeners, rng) + " " + noun + " " + pick(kVerbs, rng) + " ";
  if (unmarked) {
    out += "as described";
  } else if (negated) {
    // "not <positive>" reads negative, "not <negative>" reads positive
    out += "not " + (s == Sentiment::negative ? pick(kPositive, rng) : pick(kNegative, rng));
  } else {
    out += s == Sentiment::negative ? pick(kNegative, rng) : pick(kPositive, rng);
  }
  out += pick(kTails, rng) + ".";
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

}  // namespace

std::size_t Dataset::document_count() const
{
  std::set<std::string> ids;
  for (const auto & s : sentences) { ids.insert(s.doc_id); }
  return ids.size();
}

Dataset generate(const Spec & spec)
{
  if (spec.aspects < 2 || spec.dim < spec.aspects + 1 + spec.surface_dims) { throw Error("synthetic: need >= 2 aspects and dim > aspects"); }
  if (spec.documents < 2 || spec.sentences_per_doc < 1) { throw Error("synthetic: need >= 2 documents"); }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // random orthonormal frame: aspect directions then the sentiment axis
  Matrixd raw(spec.dim, spec.dim);
  for (Eigen::Index i = 0; i < raw.size(); ++i) { raw.data()[i] = gauss(rng); }
  const Matrixd frame = Eigen::HouseholderQR<Matrixd>(raw).householderQ();

  auto noise_vector = [&](double sigma) {
    Vectord v(spec.dim);
    for (Eigen::Index i = 0; i < v.size(); ++i) { v[i] = sigma * gauss(rng); }
    return v;
  };
  auto surface_vector = [&]() {
    Vectord v = Vectord::Zero(spec.dim);
    for (int j = 0; j < spec.surface_dims; ++j) { v += spec.surface * gauss(rng) * frame.col(spec.aspects + 1 + j); }
    return v;
  };

  Dataset data;
  data.spec = spec;
  std::uniform_int_distribution<int> any_aspect(0, spec.aspects - 1);
  for (int d = 0; d < spec.documents; ++d) {
    const Sentiment rating = unif(rng) < 0.5 ? Sentiment::positive : Sentiment::negative;
    for (int s = 0; s < spec.sentences_per_doc; ++s) {
      Sentence out;
      out.doc_id = "doc" + std::to_string(d);
      out.sent_id = s;
      out.doc_rating = rating;
      out.aspect = any_aspect(rng);
      const bool agree = unif(rng) < spec.rating_agreement;
      out.sentiment = agree ? rating : (rating == Sentiment::positive ? Sentiment::negative : Sentiment::positive);
      const bool unmarked = unif(rng) < spec.unmarked_rate;
      const bool negated = !unmarked && unif(rng) < spec.negated_rate;
      out.text = phrase(out.aspect, out.sentiment, unmarked, negated, rng);
      out.paraphrase = phrase(out.aspect, out.sentiment, unmarked, negated, rng);

      const double polarity = out.sentiment == Sentiment::positive ? 1.0 : -1.0;
      const Vectord content = spec.aspect_scale * frame.col(out.aspect) +
                              polarity * spec.sentiment_scale * frame.col(spec.aspects) + noise_vector(spec.jitter);
      out.embedding = content + surface_vector() + noise_vector(spec.noise);
      out.paraphrase_embedding = content + surface_vector() + noise_vector(spec.noise);
      data.sentences.push_back(std::move(out));
    }
  }
  return data;
}

Corpus to_corpus(const Dataset & data)
{
  Corpus corpus;
  const auto m = static_cast<Eigen::Index>(data.sentences.size());
  const Eigen::Index d = data.spec.dim;
  corpus.embeddings.resize(m, d);
  corpus.augmentations.resize(m, d);
  corpus.has_augmentation.assign(data.sentences.size(), true);
  corpus.lexicon_sentiment.assign(data.sentences.size(), Sentiment::neutral);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto & s = data.sentences[static_cast<std::size_t>(i)];
    if (corpus.documents.empty() || corpus.documents.back().doc_id != s.doc_id) {
      corpus.documents.push_back(Document{s.doc_id, {}, std::nullopt});
    }
    SentenceRecord rec;
    rec.doc_id = s.doc_id;
    rec.sent_id = s.sent_id;
    rec.text = s.text;
    rec.tokens = tokenize(s.text);
    rec.doc_index = static_cast<int>(corpus.documents.size()) - 1;
    corpus.documents.back().sentence_ids.push_back(static_cast<int>(i));
    corpus.documents.back().gold_rating = s.doc_rating;
    corpus.sentences.push_back(std::move(rec));
    corpus.embeddings.row(i) = s.embedding.normalized().transpose();
    corpus.augmentations.row(i) = s.paraphrase_embedding.normalized().transpose();
  }
  corpus.reindex();
  return corpus;
}

GoldLabels gold_labels(const Dataset & data)
{
  GoldLabels g;
  for (const auto & s : data.sentences) {
    g.aspect.push_back(s.aspect);
    g.sentiment.push_back(s.sentiment);
  }
  return g;
}

Paths write(const Dataset & data, const std::filesystem::path & dir)
{
  std::filesystem::create_directories(dir);
  Paths paths{dir / "corpus.jsonl", dir / "augment.jsonl", dir / "gold.jsonl", dir / "manifest.json"};
  std::ofstream corpus(paths.corpus);
  std::ofstream aug(paths.augmentations);
  std::ofstream gold(paths.gold);
  if (!corpus || !aug || !gold) { throw Error("synthetic: cannot write into '" + dir.string() + "'"); }
  auto vec = [](const Vectord & v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  for (const auto & s : data.sentences) {
    corpus << json{{"doc_id", s.doc_id}, {"sent_id", s.sent_id}, {"text", s.text}, {"embedding", vec(s.embedding)}}.dump()
           << '\n';
    aug << json{{"doc_id", s.doc_id},
                {"sent_id", s.sent_id},
                {"aug_text", s.paraphrase},
                {"aug_embedding", vec(s.paraphrase_embedding)}}
             .dump()
        << '\n';
    gold << json{{"doc_id", s.doc_id},
                 {"sent_id", s.sent_id},
                 {"aspect", s.aspect},
                 {"sentiment", std::string(to_string(s.sentiment))},
                 {"doc_rating", std::string(to_string(s.doc_rating))}}
              .dump()
         << '\n';
  }
  std::ofstream manifest(paths.manifest);
  manifest << json{{"encoder_id", "synthetic"}, {"dim", data.spec.dim}, {"pivot", ""}, {"fallback_used", false}}.dump()
           << '\n';
  if (!corpus || !aug || !gold || !manifest) { throw Error("synthetic: failed writing into '" + dir.string() + "'"); }
  return paths;
}

}  // namespace cone::synthetic
