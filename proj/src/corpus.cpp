#include "cone/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cone {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path & path)
{
  std::ifstream is(path);
  if (!is) { throw Error("cannot open '" + path.string() + "'"); }
  return is;
}

std::string where(const std::filesystem::path & path, std::size_t line)
{
  return path.string() + ":" + std::to_string(line);
}

json parse_line(const std::string & line, const std::filesystem::path & path, std::size_t lineno)
{
  try {
    auto j = json::parse(line);
    if (!j.is_object()) { throw Error(where(path, lineno) + ": expected a JSON object"); }
    return j;
  } catch (const json::parse_error & e) {
    throw Error(where(path, lineno) + ": malformed JSON (" + e.what() + ")");
  }
}

template<typename T>
T require(const json & j, const char * key, const std::filesystem::path & path, std::size_t lineno)
{
  const auto it = j.find(key);
  if (it == j.end()) { throw Error(where(path, lineno) + ": missing key '" + key + "'"); }
  try {
    return it->get<T>();
  } catch (const json::exception &) {
    throw Error(where(path, lineno) + ": key '" + key + "' has the wrong type");
  }
}

Vectord read_vector(const json & j, const char * key, int dim, const std::filesystem::path & path,
                    std::size_t lineno)
{
  const auto values = require<std::vector<double>>(j, key, path, lineno);
  if (static_cast<int>(values.size()) != dim) {
    throw Error(where(path, lineno) + ": embedding dimension mismatch, expected " + std::to_string(dim) +
                " found " + std::to_string(values.size()));
  }
  Vectord v = Eigen::Map<const Vectord>(values.data(), dim);
  if (!v.allFinite()) { throw Error(where(path, lineno) + ": non-finite embedding value"); }
  return v;
}

template<typename Fn>
void for_each_line(const std::filesystem::path & path, Fn && fn)
{
  auto is = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) { continue; }
    fn(parse_line(line, path, lineno), lineno);
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text)
{
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) { out.push_back(std::move(cur)); }
  return out;
}

CorpusStats Corpus::stats() const
{
  CorpusStats s;
  s.documents = documents.size();
  s.sentences = sentences.size();
  s.mean_sentences_per_doc = s.documents == 0 ? 0.0 : static_cast<double>(s.sentences) / static_cast<double>(s.documents);
  return s;
}

std::optional<int> Corpus::find(const std::string & doc_id, int sent_id) const
{
  const auto d = index_.find(doc_id);
  if (d == index_.end()) { return std::nullopt; }
  const auto s = d->second.find(sent_id);
  if (s == d->second.end()) { return std::nullopt; }
  return s->second;
}

void Corpus::reindex()
{
  index_.clear();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    index_[sentences[i].doc_id][sentences[i].sent_id] = static_cast<int>(i);
  }
}

std::vector<int> Corpus::aspect_labels() const
{
  std::vector<int> out;
  out.reserve(sentences.size());
  for (const auto & s : sentences) { out.push_back(s.pseudo_aspect); }
  return out;
}

Corpus ingest_corpus(const std::filesystem::path & path, int embedding_dim)
{
  if (embedding_dim < 1) { throw Error("ingest_corpus: embedding_dim must be positive"); }
  struct Raw
  {
    SentenceRecord rec;
    Vectord emb;
  };
  std::vector<std::string> doc_order;
  std::map<std::string, std::map<int, Raw>> by_doc;

  for_each_line(path, [&](const json & j, std::size_t lineno) {
    Raw raw;
    raw.rec.doc_id = require<std::string>(j, "doc_id", path, lineno);
    raw.rec.sent_id = require<int>(j, "sent_id", path, lineno);
    raw.rec.text = require<std::string>(j, "text", path, lineno);
    raw.emb = read_vector(j, "embedding", embedding_dim, path, lineno);
    const double norm = raw.emb.norm();
    if (norm == 0.0) { throw Error(where(path, lineno) + ": zero embedding cannot be normalised"); }
    raw.emb /= norm;
    raw.rec.tokens = tokenize(raw.rec.text);

    auto [doc, fresh] = by_doc.try_emplace(raw.rec.doc_id);
    if (fresh) { doc_order.push_back(raw.rec.doc_id); }
    const int sid = raw.rec.sent_id;
    if (!doc->second.try_emplace(sid, std::move(raw)).second) {
      throw Error(where(path, lineno) + ": duplicate sentence (" + doc->first + ", " + std::to_string(sid) + ")");
    }
  });
  if (doc_order.empty()) { throw Error("ingest_corpus: '" + path.string() + "' contains no sentences"); }

  Corpus corpus;
  std::size_t total = 0;
  for (const auto & [_, doc] : by_doc) { total += doc.size(); }
  corpus.embeddings.resize(static_cast<Eigen::Index>(total), embedding_dim);
  corpus.sentences.reserve(total);
  for (const auto & doc_id : doc_order) {
    Document doc;
    doc.doc_id = doc_id;
    for (auto & [sid, raw] : by_doc.at(doc_id)) {
      const int index = static_cast<int>(corpus.sentences.size());
      raw.rec.doc_index = static_cast<int>(corpus.documents.size());
      corpus.embeddings.row(index) = raw.emb.transpose();
      corpus.sentences.push_back(std::move(raw.rec));
      doc.sentence_ids.push_back(index);
    }
    corpus.documents.push_back(std::move(doc));
  }
  corpus.reindex();
  corpus.augmentations = Matrixd::Zero(corpus.embeddings.rows(), corpus.embeddings.cols());
  corpus.has_augmentation.assign(total, false);
  corpus.lexicon_sentiment.assign(total, Sentiment::neutral);
  return corpus;
}

int infer_embedding_dim(const std::filesystem::path & path)
{
  auto is = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) { continue; }
    const auto values = require<std::vector<double>>(parse_line(line, path, lineno), "embedding", path, lineno);
    if (values.empty()) { throw Error(where(path, lineno) + ": empty embedding"); }
    return static_cast<int>(values.size());
  }
  throw Error("'" + path.string() + "' contains no sentences");
}

Manifest load_manifest(const std::filesystem::path & path)
{
  auto is = open_input(path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error & e) {
    throw Error(path.string() + ": malformed JSON (" + e.what() + ")");
  }
  if (!j.is_object()) { throw Error(path.string() + ": manifest must be a JSON object"); }
  Manifest m;
  m.dim = require<int>(j, "dim", path, 1);
  if (m.dim < 1) { throw Error(path.string() + ": manifest dim must be positive"); }
  m.encoder_id = j.value("encoder_id", std::string{});
  m.pivot = j.value("pivot", std::string{});
  m.fallback_used = j.value("fallback_used", false);
  return m;
}

std::size_t load_augmentations(Corpus & corpus, const std::filesystem::path & path)
{
  std::size_t loaded = 0;
  for_each_line(path, [&](const json & j, std::size_t lineno) {
    const auto doc_id = require<std::string>(j, "doc_id", path, lineno);
    const int sent_id = require<int>(j, "sent_id", path, lineno);
    const auto idx = corpus.find(doc_id, sent_id);
    if (!idx) {
      throw Error(where(path, lineno) + ": augmentation for unknown sentence (" + doc_id + ", " +
                  std::to_string(sent_id) + ")");
    }
    (void)require<std::string>(j, "aug_text", path, lineno);
    Vectord v = read_vector(j, "aug_embedding", corpus.dim(), path, lineno);
    const double norm = v.norm();
    if (norm == 0.0) { throw Error(where(path, lineno) + ": zero augmentation embedding"); }
    corpus.augmentations.row(*idx) = (v / norm).transpose();
    corpus.has_augmentation[static_cast<std::size_t>(*idx)] = true;
    ++loaded;
  });
  return loaded;
}

std::unordered_set<std::string> SentimentLexicon::default_negations()
{
  return {"not",   "no",    "never", "none",   "nobody", "nothing", "neither", "nor",    "without",
          "cannot", "isn",  "wasn",  "aren",   "weren",  "don",     "doesn",   "didn",   "hasn",
          "haven", "hadn",  "won",   "wouldn", "shouldn", "couldn", "nowhere", "hardly", "ain"};
}

SentimentLexicon SentimentLexicon::load(const std::filesystem::path & tsv)
{
  auto is = open_input(tsv);
  SentimentLexicon lex;
  lex.negation_tokens = default_negations();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') { continue; }
    const auto tab = line.find('\t');
    if (tab == std::string::npos) { throw Error(where(tsv, lineno) + ": expected token<TAB>valence"); }
    const std::string token = line.substr(0, tab);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(line.substr(tab + 1), &used);
    } catch (const std::exception &) {
      throw Error(where(tsv, lineno) + ": bad valence");
    }
    lex.entries[token] = value;
  }
  lex.validate();
  return lex;
}

void SentimentLexicon::validate() const
{
  if (entries.empty()) { throw Error("sentiment lexicon is empty"); }
  if (!(negation_flip > -1.0 && negation_flip < 0.0)) { throw Error("negation_flip must lie in (-1, 0)"); }
}

double score_sentiment(std::span<const std::string> tokens, const SentimentLexicon & lexicon)
{
  double sum = 0.0;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto it = lexicon.entries.find(tokens[t]);
    if (it == lexicon.entries.end()) { continue; }
    double valence = it->second;
    const std::size_t from = t >= 3 ? t - 3 : 0;
    for (std::size_t p = from; p < t; ++p) {
      if (lexicon.negation_tokens.contains(tokens[p])) {
        valence *= lexicon.negation_flip;
        break;
      }
    }
    sum += valence;
  }
  return sum / std::sqrt(sum * sum + 15.0);
}

Sentiment sentiment_from_score(double compound, double threshold)
{
  if (compound > threshold) { return Sentiment::positive; }
  if (compound < -threshold) { return Sentiment::negative; }
  return Sentiment::neutral;
}

void assign_sentiment_pseudo_labels(Corpus & corpus, const SentimentLexicon & lexicon, double threshold)
{
  if (!(threshold > 0.0)) { throw Error("sentiment threshold must be positive"); }
  lexicon.validate();
  corpus.lexicon_sentiment.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto & s = corpus.sentences[i];
    s.pseudo_sentiment = sentiment_from_score(score_sentiment(s.tokens, lexicon), threshold);
    corpus.lexicon_sentiment[i] = s.pseudo_sentiment;
  }
}

ClusterModel<double> init_aspect_pseudo_labels(Corpus & corpus, int k_init, std::uint64_t seed, int restarts)
{
  if (k_init < 2) { throw Error("K_init must be >= 2"); }
  if (static_cast<int>(corpus.size()) < k_init) {
    throw Error("K_init=" + std::to_string(k_init) + " exceeds corpus size " + std::to_string(corpus.size()));
  }
  auto model = kmeans(corpus.embeddings, k_init, seed, restarts);
  for (std::size_t i = 0; i < corpus.size(); ++i) { corpus.sentences[i].pseudo_aspect = model.assignments[i]; }
  return model;
}

std::unordered_set<std::string> load_stopwords(const std::filesystem::path & path)
{
  auto is = open_input(path);
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    for (auto & tok : tokenize(line)) { out.insert(std::move(tok)); }
  }
  return out;
}

GoldLabels load_gold(Corpus & corpus, const std::filesystem::path & path)
{
  GoldLabels gold;
  gold.aspect.assign(corpus.size(), -1);
  gold.sentiment.assign(corpus.size(), Sentiment::neutral);
  std::size_t seen = 0;
  for_each_line(path, [&](const json & j, std::size_t lineno) {
    const auto doc_id = require<std::string>(j, "doc_id", path, lineno);
    const int sent_id = require<int>(j, "sent_id", path, lineno);
    const auto idx = corpus.find(doc_id, sent_id);
    if (!idx) { throw Error(where(path, lineno) + ": gold label for unknown sentence"); }
    gold.aspect[static_cast<std::size_t>(*idx)] = require<int>(j, "aspect", path, lineno);
    try {
      gold.sentiment[static_cast<std::size_t>(*idx)] =
        sentiment_from_string(require<std::string>(j, "sentiment", path, lineno));
      if (j.contains("doc_rating")) {
        corpus.documents[static_cast<std::size_t>(corpus.sentences[static_cast<std::size_t>(*idx)].doc_index)]
          .gold_rating = sentiment_from_string(j.at("doc_rating").get<std::string>());
      }
    } catch (const std::invalid_argument & e) {
      throw Error(where(path, lineno) + ": " + e.what());
    }
    ++seen;
  });
  if (seen != corpus.size()) {
    throw Error("gold labels cover " + std::to_string(seen) + " of " + std::to_string(corpus.size()) + " sentences");
  }
  return gold;
}

}  // namespace cone
