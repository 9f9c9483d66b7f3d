#include "cone/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace cone {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::set<std::string> & config_keys()
{
  static const std::set<std::string> keys{
    "corpus",        "lexicon",      "stopwords",       "augmentations",     "manifest",
    "gold",          "batch_size",   "temperature",     "learning_rate",     "epochs_per_round",
    "hidden_dim",    "latent_dim",   "positive_strategy", "include_positive_in_denominator",
    "k_init",        "rho",          "tol",             "max_iterations",    "n_s",
    "kmeans_restarts", "embedding_dim", "sentiment_threshold", "top_n",      "unsigned_doc_score",
    "augment_mode",  "augment_sigma", "augment_dropout", "no_denoise",       "no_contrastive",
    "no_refinement", "seed",         "checkpoint"};
  return keys;
}

template<typename T>
void read_key(const json & j, const char * key, T & out)
{
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) { return; }
  try {
    out = it->get<T>();
  } catch (const json::exception &) {
    throw ValidationError(std::string("config: key '") + key + "' has the wrong type");
  }
}

void read_path(const json & j, const char * key, const fs::path & base, fs::path & out)
{
  std::string s;
  read_key(j, key, s);
  if (s.empty()) { return; }
  fs::path p(s);
  out = p.is_absolute() ? p : (base / p).lexically_normal();
}

std::string path_string(const fs::path & p) { return p.empty() ? std::string{} : p.generic_string(); }

void require_file(const fs::path & p, const char * what)
{
  if (p.empty()) { throw ValidationError(std::string("config: no ") + what + " path given"); }
  if (!fs::is_regular_file(p)) { throw ValidationError(std::string(what) + " file not found: '" + p.string() + "'"); }
}

template<typename Fn>
auto as_validation(Fn && fn) -> decltype(fn())
{
  try {
    return fn();
  } catch (const ValidationError &) {
    throw;
  } catch (const Error & e) {
    throw ValidationError(e.what());
  } catch (const std::invalid_argument & e) {
    throw ValidationError(e.what());
  }
}

json matrix_to_json(const Matrixd & m)
{
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  }
  return rows;
}

Matrixd matrix_from_json(const json & j)
{
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) { return {}; }
  Matrixd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) { throw Error("ragged matrix in checkpoint"); }
    m.row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Vectord>(rows[r].data(), m.cols()).transpose();
  }
  return m;
}

json state_to_json(const RefinementState & s)
{
  json iters = json::array();
  for (const auto & t : s.iterations) {
    iters.push_back({{"iteration", t.iteration},
                     {"silhouette", t.silhouette},
                     {"clusters", t.clusters},
                     {"alpha", t.alpha},
                     {"epoch_losses", t.epoch_losses}});
  }
  json merges = json::array();
  for (const auto & m : s.merge_log) { merges.push_back({{"iteration", m.iteration}, {"groups", m.groups}}); }
  return {{"iteration", s.iteration},
          {"silhouette_history", s.silhouette_history},
          {"cluster_history", s.cluster_history},
          {"iterations", iters},
          {"merge_log", merges},
          {"converged", s.converged},
          {"collapsed", s.collapsed}};
}

RefinementState state_from_json(const json & j)
{
  RefinementState s;
  s.iteration = j.at("iteration").get<int>();
  s.silhouette_history = j.at("silhouette_history").get<std::vector<double>>();
  s.cluster_history = j.at("cluster_history").get<std::vector<int>>();
  for (const auto & t : j.at("iterations")) {
    IterationTrace trace;
    trace.iteration = t.at("iteration").get<int>();
    trace.silhouette = t.at("silhouette").get<double>();
    trace.clusters = t.at("clusters").get<int>();
    trace.alpha = t.at("alpha").get<double>();
    trace.epoch_losses = t.at("epoch_losses").get<std::vector<double>>();
    s.iterations.push_back(std::move(trace));
  }
  for (const auto & m : j.at("merge_log")) {
    s.merge_log.push_back(MergeEvent{m.at("iteration").get<int>(), m.at("groups").get<std::vector<std::vector<int>>>()});
  }
  s.converged = j.at("converged").get<bool>();
  s.collapsed = j.at("collapsed").get<bool>();
  return s;
}

json sentiment_to_json(const SentimentSpace & space)
{
  std::vector<std::string> polarity;
  for (auto p : space.polarity) { polarity.emplace_back(to_string(p)); }
  std::vector<std::vector<int>> votes;
  for (const auto & row : space.votes) { votes.emplace_back(row.begin(), row.end()); }
  return {{"centroids", matrix_to_json(space.model.centroids)},
          {"assignments", space.model.assignments},
          {"polarity", polarity},
          {"votes", votes}};
}

SentimentSpace sentiment_from_json(const json & j)
{
  SentimentSpace space;
  space.model.centroids = matrix_from_json(j.at("centroids"));
  space.model.assignments = j.at("assignments").get<std::vector<int>>();
  const auto polarity = j.at("polarity").get<std::vector<std::string>>();
  const auto votes = j.at("votes").get<std::vector<std::vector<int>>>();
  if (polarity.size() != kSentimentCount || votes.size() != kSentimentCount) { throw Error("bad sentiment block"); }
  for (std::size_t c = 0; c < kSentimentCount; ++c) {
    space.polarity[c] = sentiment_from_string(polarity[c]);
    if (votes[c].size() != kSentimentCount) { throw Error("bad sentiment votes"); }
    std::copy(votes[c].begin(), votes[c].end(), space.votes[c].begin());
  }
  return space;
}

json model_to_json(const ClusterModel<double> & m)
{
  return {{"centroids", matrix_to_json(m.centroids)}, {"assignments", m.assignments}};
}

ClusterModel<double> model_from_json(const json & j)
{
  return ClusterModel<double>{matrix_from_json(j.at("centroids")), j.at("assignments").get<std::vector<int>>()};
}

void write_checkpoint(const fs::path & dir, const RunConfig & config, const Corpus & corpus, const Heads & heads,
                      const RefineResult & result)
{
  fs::create_directories(dir);
  save_heads(heads, config.seed, dir / "heads.json");
  std::vector<std::string> sentiments;
  for (const auto & s : corpus.sentences) { sentiments.emplace_back(to_string(s.pseudo_sentiment)); }
  const json j{{"seed", config.seed},
               {"sentences", corpus.size()},
               {"pseudo_sentiment", sentiments},
               {"aspect_model", model_to_json(result.aspect_model)},
               {"sentiment", sentiment_to_json(result.sentiment)},
               {"state", state_to_json(result.state)}};
  write_text_file(dir / "state.json", j.dump() + "\n");
}

// Restores pseudo labels into `corpus` and returns the saved loop state.
RefineResult read_checkpoint(const fs::path & dir, const RunConfig & config, Corpus & corpus)
{
  const json j = read_json_file(dir / "state.json");
  try {
    if (j.at("seed").get<std::uint64_t>() != config.seed) { throw ValidationError("resume: checkpoint seed differs from config"); }
    if (j.at("sentences").get<std::size_t>() != corpus.size()) {
      throw ValidationError("resume: checkpoint covers a different corpus");
    }
    RefineResult r;
    r.aspect_model = model_from_json(j.at("aspect_model"));
    r.sentiment = sentiment_from_json(j.at("sentiment"));
    r.state = state_from_json(j.at("state"));
    const auto sentiments = j.at("pseudo_sentiment").get<std::vector<std::string>>();
    if (r.aspect_model.assignments.size() != corpus.size() || sentiments.size() != corpus.size()) {
      throw ValidationError("resume: checkpoint label count mismatch");
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      corpus.sentences[i].pseudo_aspect = r.aspect_model.assignments[i];
      corpus.sentences[i].pseudo_sentiment = sentiment_from_string(sentiments[i]);
    }
    return r;
  } catch (const json::exception & e) {
    throw ValidationError("resume: malformed checkpoint (" + std::string(e.what()) + ")");
  }
}

json trace_to_json(const RunConfig & config, const Corpus & corpus, const RefineResult & r)
{
  std::vector<std::string> polarity;
  for (auto p : r.sentiment.polarity) { polarity.emplace_back(to_string(p)); }
  const auto stats = corpus.stats();
  json j = state_to_json(r.state);
  j["config"] = config.to_json();
  j["corpus"] = {{"documents", stats.documents}, {"sentences", stats.sentences}, {"dim", corpus.dim()}};
  j["final"] = {{"aspect_assignments", r.aspect_model.assignments},
                {"sentiment_assignments", r.sentiment.model.assignments},
                {"sentiment_polarity", polarity}};
  return j;
}

Vectord document_vector(const Corpus & corpus, const Document & doc)
{
  Vectord e = Vectord::Zero(corpus.sentiment_latents.cols());
  for (int i : doc.sentence_ids) {
    const auto z = corpus.sentiment_latents.row(i);
    const double n = z.norm();
    if (n > 0.0) { e += z.transpose() / n; }
  }
  return e / static_cast<double>(std::max<std::size_t>(doc.sentence_ids.size(), 1));
}

std::string percent(double v)
{
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * v << '%';
  return os.str();
}

std::string cell(const Corpus & corpus, const Representative & r)
{
  std::string text = corpus.sentences[static_cast<std::size_t>(r.sentence)].text;
  std::string escaped;
  for (char ch : text) {
    if (ch == '|') { escaped += "\\|"; } else if (ch == '\n') { escaped += ' '; } else { escaped += ch; }
  }
  std::ostringstream os;
  os << escaped << " (" << std::fixed << std::setprecision(3) << r.similarity << ')';
  return os.str();
}

void check(bool ok, const std::string & what)
{
  if (!ok) { throw ValidationError(what); }
}

}  // namespace

RunConfig RunConfig::from_json(const json & j, const fs::path & base_dir)
{
  if (!j.is_object()) { throw ValidationError("config: expected a JSON object"); }
  for (const auto & [key, _] : j.items()) {
    if (config_keys().count(key) == 0) { throw ValidationError("config: unknown key '" + key + "'"); }
  }
  RunConfig c;
  c.paths.lexicon = fs::path(CONE_DATA_DIR) / "lexicon.tsv";
  c.paths.stopwords = fs::path(CONE_DATA_DIR) / "stopwords.txt";
  read_path(j, "corpus", base_dir, c.paths.corpus);
  read_path(j, "lexicon", base_dir, c.paths.lexicon);
  read_path(j, "stopwords", base_dir, c.paths.stopwords);
  read_path(j, "augmentations", base_dir, c.paths.augmentations);
  read_path(j, "manifest", base_dir, c.paths.manifest);
  read_path(j, "gold", base_dir, c.paths.gold);

  read_key(j, "batch_size", c.train.batch_size);
  read_key(j, "temperature", c.train.temperature);
  read_key(j, "learning_rate", c.train.learning_rate);
  read_key(j, "epochs_per_round", c.train.epochs_per_round);
  read_key(j, "hidden_dim", c.train.hidden_dim);
  read_key(j, "latent_dim", c.train.latent_dim);
  read_key(j, "include_positive_in_denominator", c.train.include_positive_in_denominator);
  std::string strategy;
  read_key(j, "positive_strategy", strategy);
  if (!strategy.empty()) { c.train.positive_strategy = as_validation([&] { return positive_strategy_from_string(strategy); }); }

  read_key(j, "k_init", c.k_init);
  read_key(j, "rho", c.refine.rho);
  read_key(j, "tol", c.refine.tol);
  read_key(j, "max_iterations", c.refine.max_iterations);
  read_key(j, "n_s", c.refine.n_s);
  read_key(j, "kmeans_restarts", c.refine.kmeans_restarts);
  read_key(j, "embedding_dim", c.embedding_dim);
  read_key(j, "sentiment_threshold", c.sentiment_threshold);
  read_key(j, "top_n", c.top_n);
  read_key(j, "unsigned_doc_score", c.unsigned_doc_score);
  std::string mode;
  read_key(j, "augment_mode", mode);
  if (!mode.empty() && mode != "auto") { c.augment_mode = as_validation([&] { return augment_mode_from_string(mode); }); }
  read_key(j, "augment_sigma", c.augment_sigma);
  read_key(j, "augment_dropout", c.augment_dropout);
  read_key(j, "no_denoise", c.no_denoise);
  read_key(j, "no_contrastive", c.no_contrastive);
  read_key(j, "no_refinement", c.no_refinement);
  read_key(j, "seed", c.seed);
  read_key(j, "checkpoint", c.checkpoint);
  c.sync();
  return c;
}

RunConfig RunConfig::load(const fs::path & path)
{
  const json j = as_validation([&] { return read_json_file(path); });
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const
{
  return {{"corpus", path_string(paths.corpus)},
          {"lexicon", path_string(paths.lexicon)},
          {"stopwords", path_string(paths.stopwords)},
          {"augmentations", path_string(paths.augmentations)},
          {"manifest", path_string(paths.manifest)},
          {"gold", path_string(paths.gold)},
          {"batch_size", train.batch_size},
          {"temperature", train.temperature},
          {"learning_rate", train.learning_rate},
          {"epochs_per_round", train.epochs_per_round},
          {"hidden_dim", train.hidden_dim},
          {"latent_dim", train.latent_dim},
          {"positive_strategy", std::string(to_string(train.positive_strategy))},
          {"include_positive_in_denominator", train.include_positive_in_denominator},
          {"k_init", k_init},
          {"rho", refine.rho},
          {"tol", refine.tol},
          {"max_iterations", refine.max_iterations},
          {"n_s", refine.n_s},
          {"kmeans_restarts", refine.kmeans_restarts},
          {"embedding_dim", embedding_dim},
          {"sentiment_threshold", sentiment_threshold},
          {"top_n", top_n},
          {"unsigned_doc_score", unsigned_doc_score},
          {"augment_mode", augment_mode ? std::string(to_string(*augment_mode)) : std::string("auto")},
          {"augment_sigma", augment_sigma},
          {"augment_dropout", augment_dropout},
          {"no_denoise", no_denoise},
          {"no_contrastive", no_contrastive},
          {"no_refinement", no_refinement},
          {"seed", seed},
          {"checkpoint", checkpoint}};
}

void RunConfig::sync()
{
  train.seed = seed;
  refine.seed = seed;
  train.denoise_negatives = !no_denoise;
  refine.no_contrastive = no_contrastive;
  refine.skip_refinement = no_refinement;
}

void RunConfig::validate() const
{
  as_validation([&] {
    train.validate();
    refine.validate();
    return 0;
  });
  if (k_init < 2) { throw ValidationError("config: k_init must be >= 2"); }
  if (top_n < 0) { throw ValidationError("config: top_n must be >= 0"); }
  if (!(sentiment_threshold > 0.0 && sentiment_threshold < 1.0)) {
    throw ValidationError("config: sentiment_threshold must lie in (0, 1)");
  }
  if (embedding_dim < 0) { throw ValidationError("config: embedding_dim must be >= 0"); }
  if (!(augment_sigma >= 0.0)) { throw ValidationError("config: augment_sigma must be >= 0"); }
  if (!(augment_dropout >= 0.0 && augment_dropout < 1.0)) { throw ValidationError("config: augment_dropout must lie in [0, 1)"); }
  require_file(paths.corpus, "corpus");
  require_file(paths.lexicon, "lexicon");
  require_file(paths.stopwords, "stopwords");
  if (!paths.augmentations.empty()) { require_file(paths.augmentations, "augmentations"); }
  if (!paths.manifest.empty()) { require_file(paths.manifest, "manifest"); }
  if (!paths.gold.empty()) { require_file(paths.gold, "gold"); }
  if (augment_mode == AugmentMode::precomputed && paths.augmentations.empty()) {
    throw ValidationError("config: augment_mode 'precomputed' needs an augmentations file");
  }
}

Corpus load_inputs(const RunConfig & config)
{
  return as_validation([&] {
    int dim = config.embedding_dim;
    if (!config.paths.manifest.empty()) {
      const auto manifest = load_manifest(config.paths.manifest);
      if (dim != 0 && dim != manifest.dim) {
        throw ValidationError("embedding_dim " + std::to_string(dim) + " disagrees with manifest dim " +
                              std::to_string(manifest.dim));
      }
      dim = manifest.dim;
    }
    if (dim == 0) { dim = infer_embedding_dim(config.paths.corpus); }
    Corpus corpus = ingest_corpus(config.paths.corpus, dim);
    if (!config.paths.augmentations.empty()) { load_augmentations(corpus, config.paths.augmentations); }
    const auto lexicon = SentimentLexicon::load(config.paths.lexicon);
    assign_sentiment_pseudo_labels(corpus, lexicon, config.sentiment_threshold);
    return corpus;
  });
}

RunOutput run_pipeline(const RunConfig & input, const fs::path & out, bool resume, const LogFn & log)
{
  RunConfig config = input;
  config.sync();
  config.validate();
  auto say = [&](const std::string & msg) {
    if (log) { log(msg); }
  };

  RunOutput result;
  result.corpus = load_inputs(config);
  Corpus & corpus = result.corpus;
  const auto stopwords = as_validation([&] { return load_stopwords(config.paths.stopwords); });
  if (static_cast<std::size_t>(config.k_init) > corpus.size()) {
    throw ValidationError("config: k_init " + std::to_string(config.k_init) + " exceeds the corpus size " +
                          std::to_string(corpus.size()));
  }
  const fs::path ckpt = out / artifact::checkpoint_dir;
  if (resume && !fs::is_regular_file(ckpt / "state.json")) {
    throw ValidationError("resume: no checkpoint in '" + out.string() + "'");
  }
  say("corpus: " + std::to_string(corpus.documents.size()) + " documents, " + std::to_string(corpus.size()) +
      " sentences, dim " + std::to_string(corpus.dim()));

  fs::create_directories(out);
  try {
    std::optional<RefineResult> restored;
    if (resume) {
      restored = read_checkpoint(ckpt, config, corpus);
      result.heads = load_heads(ckpt / "heads.json");
      if (result.heads.aspect.input_dim() != corpus.dim()) { throw ValidationError("resume: head input size differs from corpus"); }
      say("resuming after iteration " + std::to_string(restored->state.iteration));
    } else {
      init_aspect_pseudo_labels(corpus, config.k_init, config.seed, config.refine.kmeans_restarts);
      result.heads = Heads::random(corpus.dim(), config.train);
    }

    const AugmentMode mode =
      config.augment_mode.value_or(config.paths.augmentations.empty() ? AugmentMode::embedding_noise : AugmentMode::precomputed);
    const Augmenter augmenter(mode, config.augment_sigma, config.augment_dropout);

    auto on_iteration = [&](const Corpus & c, const Heads & h, const RefineResult & r) {
      const auto & t = r.state.iterations.back();
      std::ostringstream os;
      os << "iteration " << t.iteration << ": clusters " << t.clusters << ", silhouette " << std::setprecision(4)
         << t.silhouette;
      if (!t.epoch_losses.empty()) { os << ", loss " << t.epoch_losses.back(); }
      say(os.str());
      if (config.checkpoint) { write_checkpoint(ckpt, config, c, h, r); }
    };
    result.refine = refine_loop(corpus, result.heads, config.train, config.refine, augmenter, on_iteration, restored);
    if (result.refine.state.collapsed) { say("warning: aspect clusters collapsed to one"); }
    write_checkpoint(ckpt, config, corpus, result.heads, result.refine);

    result.keypoints = build_report(corpus, result.refine.aspect_model, result.refine.sentiment, config.top_n);
    for (const auto & doc : corpus.documents) {
      result.documents.push_back(DocumentResult{
        doc.doc_id, document_sentiment(corpus, doc, result.refine.sentiment, config.sentiment_threshold,
                                       config.unsigned_doc_score)});
    }
    const auto labels = corpus.aspect_labels();
    result.metrics = compute_metrics(corpus, labels, stopwords);

    write_text_file(out / artifact::report_json, report_to_json(corpus, result.keypoints, result.documents).dump(2) + "\n");
    write_text_file(out / artifact::report_md, report_to_markdown(corpus, result.keypoints, result.documents));
    write_text_file(out / artifact::metrics_json, metrics_to_json(result.metrics).dump(2) + "\n");
    write_text_file(out / artifact::trace_json, trace_to_json(config, corpus, result.refine).dump(2) + "\n");

    std::vector<std::string> aspect_names, sentiment_names, doc_names;
    for (int a : labels) { aspect_names.push_back(std::to_string(a)); }
    for (auto s : classify_sentiment(corpus, result.refine.sentiment)) { sentiment_names.emplace_back(to_string(s)); }
    Matrixd docs(static_cast<Eigen::Index>(corpus.documents.size()), corpus.sentiment_latents.cols());
    for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
      docs.row(static_cast<Eigen::Index>(d)) = document_vector(corpus, corpus.documents[d]).transpose();
      doc_names.emplace_back(to_string(result.documents[d].score.label));
    }
    const std::pair<const char *, bool> pcas[] = {
      {artifact::pca_aspect, export_pca(normalized_rows(corpus.aspect_latents), aspect_names, out / artifact::pca_aspect).degenerate},
      {artifact::pca_sentiment,
       export_pca(normalized_rows(corpus.sentiment_latents), sentiment_names, out / artifact::pca_sentiment).degenerate},
      {artifact::pca_docs, corpus.documents.size() >= 2 ? export_pca(docs, doc_names, out / artifact::pca_docs).degenerate : true},
    };
    if (corpus.documents.size() < 2) { write_text_file(out / artifact::pca_docs, "x,y,label\n0,0," + doc_names.front() + "\n"); }
    for (const auto & [name, degenerate] : pcas) {
      if (degenerate) { say(std::string("warning: ") + name + " has zero variance; coordinates are 0"); }
    }
    write_text_file(out / artifact::status_json, json{{"status", "ok"}}.dump() + "\n");
  } catch (const std::exception & e) {
    try {
      write_text_file(out / artifact::status_json,
                      json{{"status", "failed"}, {"message", e.what()}, {"partial", true}}.dump() + "\n");
    } catch (...) {
    }
    throw;
  }
  return result;
}

json report_to_json(const Corpus & corpus, const std::vector<AspectKeypoint> & keypoints,
                    const std::vector<DocumentResult> & documents)
{
  auto reps = [&](const std::vector<Representative> & panel) {
    json arr = json::array();
    for (const auto & r : panel) {
      const auto & s = corpus.sentences[static_cast<std::size_t>(r.sentence)];
      arr.push_back({{"doc_id", s.doc_id},
                     {"sent_id", s.sent_id},
                     {"text", s.text},
                     {"similarity", r.similarity},
                     {"sentiment", std::string(to_string(r.sentiment))}});
    }
    return arr;
  };
  json aspects = json::array();
  for (const auto & kp : keypoints) {
    aspects.push_back({{"aspect_id", kp.aspect_id},
                       {"size", kp.size},
                       {"popularity", kp.popularity},
                       {"sentiment_distribution",
                        {{"positive", kp.sentiment_distribution[0]},
                         {"neutral", kp.sentiment_distribution[1]},
                         {"negative", kp.sentiment_distribution[2]}}},
                       {"positive_reps", reps(kp.positive)},
                       {"negative_reps", reps(kp.negative)},
                       {"neutral_reps", reps(kp.neutral)}});
  }
  json docs = json::array();
  for (const auto & d : documents) {
    docs.push_back({{"doc_id", d.doc_id}, {"score", d.score.score}, {"label", std::string(to_string(d.score.label))}});
  }
  return {{"aspects", aspects}, {"documents", docs}};
}

std::string report_to_markdown(const Corpus & corpus, const std::vector<AspectKeypoint> & keypoints,
                               const std::vector<DocumentResult> & documents)
{
  std::ostringstream os;
  os << "# Contrastive key points\n\n";
  os << corpus.size() << " sentences in " << corpus.documents.size() << " documents, " << keypoints.size()
     << " aspects.\n";
  for (const auto & kp : keypoints) {
    os << "\n## Aspect " << kp.aspect_id << "\n\n";
    os << "Popularity: " << percent(kp.popularity) << " (" << kp.size << " sentences)\n\n";
    os << "Sentiment dist.: positive " << percent(kp.sentiment_distribution[0]) << ", neutral "
       << percent(kp.sentiment_distribution[1]) << ", negative " << percent(kp.sentiment_distribution[2]) << "\n\n";
    os << "| Positive | Negative |\n|---|---|\n";
    const std::size_t rows = std::max(kp.positive.size(), kp.negative.size());
    for (std::size_t r = 0; r < rows; ++r) {
      os << "| " << (r < kp.positive.size() ? cell(corpus, kp.positive[r]) : "") << " | "
         << (r < kp.negative.size() ? cell(corpus, kp.negative[r]) : "") << " |\n";
    }
    if (!kp.neutral.empty()) {
      os << "\nNeutral:\n\n";
      for (const auto & r : kp.neutral) { os << "- " << cell(corpus, r) << "\n"; }
    }
  }
  std::array<int, kSentimentCount> counts{};
  for (const auto & d : documents) { ++counts[static_cast<std::size_t>(d.score.label)]; }
  os << "\n## Documents\n\n";
  os << "positive " << counts[0] << ", neutral " << counts[1] << ", negative " << counts[2] << "\n";
  return os.str();
}

json metrics_to_json(const MetricReport & report)
{
  json clusters = json::array();
  for (const auto & c : report.per_cluster) {
    json entry{{"cluster", c.cluster}, {"size", c.size}};
    entry["coherence"] = c.coherence ? json(*c.coherence) : json(nullptr);
    entry["div1"] = c.diversity ? json(c.diversity->div1) : json(nullptr);
    entry["div2"] = c.diversity ? json(c.diversity->div2) : json(nullptr);
    clusters.push_back(entry);
  }
  return {{"coherence", report.coherence},
          {"div1", report.div1},
          {"div2", report.div2},
          {"uniqueness", report.uniqueness},
          {"cross_distance", report.cross_distance},
          {"disentanglement", report.disentanglement},
          {"clusters", report.clusters},
          {"skipped",
           {{"coherence", report.skipped_coherence},
            {"diversity", report.skipped_diversity},
            {"disentanglement", report.skipped_disentanglement}}},
          {"per_cluster", clusters}};
}

void validate_report_json(const json & j)
{
  check(j.is_object(), "report: expected a JSON object");
  check(j.contains("aspects") && j["aspects"].is_array() && !j["aspects"].empty(), "report: 'aspects' must be a non-empty array");
  check(j.contains("documents") && j["documents"].is_array(), "report: 'documents' must be an array");
  double popularity = 0.0;
  std::set<int> ids;
  for (const auto & a : j["aspects"]) {
    check(a.is_object(), "report: aspect entries must be objects");
    check(a.contains("aspect_id") && a["aspect_id"].is_number_integer(), "report: aspect_id must be an integer");
    check(ids.insert(a["aspect_id"].get<int>()).second, "report: duplicate aspect_id");
    check(a.contains("popularity") && a["popularity"].is_number(), "report: popularity must be a number");
    const double p = a["popularity"].get<double>();
    check(p >= 0.0 && p <= 1.0, "report: popularity outside [0, 1]");
    popularity += p;
    check(a.contains("sentiment_distribution") && a["sentiment_distribution"].is_object(),
          "report: sentiment_distribution must be an object");
    double dist = 0.0;
    for (const char * key : {"positive", "neutral", "negative"}) {
      const auto & sd = a["sentiment_distribution"];
      check(sd.contains(key) && sd[key].is_number(), std::string("report: sentiment_distribution.") + key + " missing");
      dist += sd[key].get<double>();
    }
    check(std::abs(dist - 1.0) <= 1e-9, "report: sentiment distribution does not sum to 1");
    for (const char * panel : {"positive_reps", "negative_reps", "neutral_reps"}) {
      check(a.contains(panel) && a[panel].is_array(), std::string("report: '") + panel + "' must be an array");
      double last = 2.0;
      for (const auto & r : a[panel]) {
        check(r.is_object() && r.contains("doc_id") && r["doc_id"].is_string() && r.contains("sent_id") &&
                r["sent_id"].is_number_integer() && r.contains("text") && r["text"].is_string() &&
                r.contains("similarity") && r["similarity"].is_number() && r.contains("sentiment") &&
                r["sentiment"].is_string(),
              std::string("report: malformed entry in '") + panel + "'");
        const double s = r["similarity"].get<double>();
        check(s <= last, std::string("report: '") + panel + "' not sorted by similarity");
        last = s;
      }
    }
  }
  check(std::abs(popularity - 1.0) <= 1e-9, "report: popularity does not sum to 1");
  for (const auto & d : j["documents"]) {
    check(d.is_object() && d.contains("doc_id") && d["doc_id"].is_string() && d.contains("score") &&
            d["score"].is_number() && d.contains("label") && d["label"].is_string(),
          "report: malformed document entry");
  }
}

void validate_trace_json(const json & j)
{
  check(j.is_object(), "trace: expected a JSON object");
  for (const char * key : {"config", "corpus", "final", "silhouette_history", "cluster_history", "iterations", "merge_log"}) {
    check(j.contains(key), std::string("trace: missing '") + key + "'");
  }
  check(j["config"].is_object(), "trace: 'config' must be an object");
  check(j["silhouette_history"].is_array() && !j["silhouette_history"].empty(), "trace: empty silhouette_history");
  check(j["iterations"].is_array(), "trace: 'iterations' must be an array");
  check(j["silhouette_history"].size() == j["iterations"].size() + 1, "trace: history and iterations disagree");
  const auto & f = j["final"];
  check(f.is_object() && f.contains("aspect_assignments") && f["aspect_assignments"].is_array() &&
          f.contains("sentiment_assignments") && f["sentiment_assignments"].is_array() &&
          f.contains("sentiment_polarity") && f["sentiment_polarity"].is_array() && f["sentiment_polarity"].size() == 3,
        "trace: malformed 'final' block");
  for (const auto & a : f["aspect_assignments"]) { check(a.is_number_integer() && a.get<int>() >= 0, "trace: bad aspect label"); }
  check(j["corpus"].is_object() && j["corpus"].contains("sentences") && j["corpus"]["sentences"].is_number_integer(),
        "trace: malformed 'corpus' block");
  check(f["aspect_assignments"].size() == j["corpus"]["sentences"].get<std::size_t>(),
        "trace: assignment count differs from corpus size");
}

void validate_metrics_json(const json & j)
{
  check(j.is_object(), "metrics: expected a JSON object");
  for (const char * key : {"coherence", "div1", "div2", "uniqueness", "cross_distance", "disentanglement"}) {
    check(j.contains(key) && j[key].is_number() && std::isfinite(j[key].get<double>()),
          std::string("metrics: '") + key + "' must be a finite number");
  }
  check(j["div1"].get<double>() <= 1.0, "metrics: div1 exceeds 1");
}

json read_json_file(const fs::path & path)
{
  std::ifstream is(path);
  if (!is) { throw Error("cannot open '" + path.string() + "'"); }
  try {
    return json::parse(is);
  } catch (const json::parse_error & e) {
    throw ValidationError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

void write_text_file(const fs::path & path, const std::string & text)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw Error("cannot write '" + path.string() + "'"); }
  os << text;
  if (!os) { throw Error("failed writing '" + path.string() + "'"); }
}

EvalResult evaluate_run(const fs::path & run_dir, const fs::path & gold, const fs::path & corpus_override)
{
  for (const char * name : {artifact::report_json, artifact::metrics_json, artifact::trace_json}) {
    if (!fs::is_regular_file(run_dir / name)) {
      throw ValidationError("eval: missing artifact '" + (run_dir / name).string() + "'");
    }
  }
  const fs::path heads_path = run_dir / artifact::checkpoint_dir / "heads.json";
  if (!fs::is_regular_file(heads_path)) { throw ValidationError("eval: missing artifact '" + heads_path.string() + "'"); }
  const json report = read_json_file(run_dir / artifact::report_json);
  validate_report_json(report);
  validate_metrics_json(read_json_file(run_dir / artifact::metrics_json));
  const json trace = read_json_file(run_dir / artifact::trace_json);
  validate_trace_json(trace);

  RunConfig config = RunConfig::from_json(trace["config"], fs::current_path());
  if (!corpus_override.empty()) {
    config.paths.corpus = corpus_override;
    config.paths.manifest.clear();
  }
  config.paths.augmentations.clear();  // training inputs are not needed here
  config.augment_mode.reset();
  config.paths.gold.clear();
  config.validate();
  Corpus corpus = load_inputs(config);
  const auto stopwords = as_validation([&] { return load_stopwords(config.paths.stopwords); });

  const auto labels = trace["final"]["aspect_assignments"].get<std::vector<int>>();
  if (labels.size() != corpus.size()) { throw ValidationError("eval: run covers a different corpus"); }
  for (std::size_t i = 0; i < corpus.size(); ++i) { corpus.sentences[i].pseudo_aspect = labels[i]; }
  const Heads heads = as_validation([&] { return load_heads(heads_path); });
  if (heads.aspect.input_dim() != corpus.dim()) { throw ValidationError("eval: checkpoint does not match corpus dimension"); }
  compute_latents(corpus, heads);

  EvalResult result;
  result.metrics = compute_metrics(corpus, labels, stopwords);
  if (gold.empty()) { return result; }

  const GoldLabels g = as_validation([&] { return load_gold(corpus, gold); });
  const json state = read_json_file(run_dir / artifact::checkpoint_dir / "state.json");
  SentimentSpace space;
  try {
    space = sentiment_from_json(state.at("sentiment"));
  } catch (const std::exception & e) {
    throw ValidationError(std::string("eval: malformed checkpoint sentiment block (") + e.what() + ")");
  }
  Supervised sup;
  sup.aspect_purity = purity(labels, g.aspect);
  const auto predicted = classify_sentiment(corpus, space);
  int agree = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) { agree += predicted[i] == g.sentiment[i] ? 1 : 0; }
  sup.sentence_sentiment_accuracy = static_cast<double>(agree) / static_cast<double>(corpus.size());
  std::vector<Sentiment> doc_gold, doc_pred;
  for (const auto & doc : corpus.documents) {
    if (!doc.gold_rating) { continue; }
    doc_gold.push_back(*doc.gold_rating);
    doc_pred.push_back(
      document_sentiment(corpus, doc, space, config.sentiment_threshold, config.unsigned_doc_score).label);
  }
  if (!doc_gold.empty()) { sup.documents = classification_scores(doc_gold, doc_pred); }
  result.supervised = sup;
  return result;
}

json eval_to_json(const EvalResult & result)
{
  json j{{"metrics", metrics_to_json(result.metrics)}};
  if (result.supervised) {
    const auto & s = *result.supervised;
    json sup{{"aspect_purity", s.aspect_purity}, {"sentence_sentiment_accuracy", s.sentence_sentiment_accuracy}};
    if (s.documents) {
      const auto & d = *s.documents;
      json per_class = json::object();
      for (int c = 0; c < kSentimentCount; ++c) {
        const auto & cs = d.per_class[static_cast<std::size_t>(c)];
        per_class[std::string(to_string(static_cast<Sentiment>(c)))] = {
          {"precision", cs.precision}, {"recall", cs.recall}, {"f1", cs.f1}, {"support", cs.support}};
      }
      sup["documents"] = {{"evaluated", d.evaluated},
                          {"accuracy", d.accuracy},
                          {"precision", d.macro_precision},
                          {"recall", d.macro_recall},
                          {"macro_f1", d.macro_f1},
                          {"per_class", per_class}};
    }
    j["supervised"] = sup;
  }
  return j;
}

}  // namespace cone
