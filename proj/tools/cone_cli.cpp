#include "cone/pipeline.hpp"
#include "cone/synthetic.hpp"
#include "cone/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { ok = 0, validation = 1, runtime = 2 };

struct RunFlags
{
  std::string config;
  std::string out;
  std::string corpus;
  std::string augmentations;
  std::string lexicon;
  std::string stopwords;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iterations;
  std::optional<int> batch_size;
  std::optional<int> epochs;
  std::optional<int> k_init;
  std::optional<int> top_n;
  std::optional<double> learning_rate;
  std::optional<double> temperature;
  std::optional<double> rho;
  std::optional<double> tol;
  std::string positive_strategy;
  std::string augment_mode;
  bool no_denoise{false};
  bool no_contrastive{false};
  bool no_refinement{false};
  bool resume{false};
  bool quiet{false};
};

struct TheoryFlags
{
  std::vector<int> k{10, 20};
  std::vector<int> n{2048};
  double pc_min{0.005};
  double pc_max{1.0};
  double pc_step{0.005};
  long trials{0};
  std::uint64_t seed{7};
  double target{0.5};
  std::string out;
};

struct EvalFlags
{
  std::string run;
  std::string gold;
  std::string corpus;
  std::string out;
};

struct IngestFlags
{
  std::string corpus;
  int dim{0};
  std::string manifest;
  std::string augmentations;
  std::string lexicon;
  std::string gold;
};

struct SynthFlags
{
  std::string out;
  std::uint64_t seed{7};
  int documents{100};
  int sentences{6};
  int aspects{3};
  int dim{48};
  double surface{0.8};
};

std::string absolute(const std::string & p) { return fs::absolute(p).lexically_normal().generic_string(); }

int cmd_run(const RunFlags & f)
{
  json j = json::object();
  fs::path base = fs::current_path();
  if (!f.config.empty()) {
    j = cone::read_json_file(f.config);
    if (!j.is_object()) { throw cone::ValidationError("config: expected a JSON object"); }
    base = fs::absolute(f.config).parent_path();
  }
  if (!f.corpus.empty()) { j["corpus"] = absolute(f.corpus); }
  if (!f.augmentations.empty()) { j["augmentations"] = absolute(f.augmentations); }
  if (!f.lexicon.empty()) { j["lexicon"] = absolute(f.lexicon); }
  if (!f.stopwords.empty()) { j["stopwords"] = absolute(f.stopwords); }
  if (f.seed) { j["seed"] = *f.seed; }
  if (f.max_iterations) { j["max_iterations"] = *f.max_iterations; }
  if (f.batch_size) { j["batch_size"] = *f.batch_size; }
  if (f.epochs) { j["epochs_per_round"] = *f.epochs; }
  if (f.k_init) { j["k_init"] = *f.k_init; }
  if (f.top_n) { j["top_n"] = *f.top_n; }
  if (f.learning_rate) { j["learning_rate"] = *f.learning_rate; }
  if (f.temperature) { j["temperature"] = *f.temperature; }
  if (f.rho) { j["rho"] = *f.rho; }
  if (f.tol) { j["tol"] = *f.tol; }
  if (!f.positive_strategy.empty()) { j["positive_strategy"] = f.positive_strategy; }
  if (!f.augment_mode.empty()) { j["augment_mode"] = f.augment_mode; }
  if (f.no_denoise) { j["no_denoise"] = true; }
  if (f.no_contrastive) { j["no_contrastive"] = true; }
  if (f.no_refinement) { j["no_refinement"] = true; }

  const auto config = cone::RunConfig::from_json(j, base);
  cone::LogFn log;
  if (!f.quiet) {
    log = [](const std::string & msg) { std::cerr << msg << '\n'; };
  }
  const auto out = cone::run_pipeline(config, f.out, f.resume, log);
  std::cout << "wrote artifacts to " << f.out << " (" << out.keypoints.size() << " aspects, final silhouette "
            << std::setprecision(4) << out.refine.state.silhouette_history.back() << ")\n";
  return ok;
}

int cmd_theory(const TheoryFlags & f)
{
  if (f.k.empty() || f.n.empty()) { throw cone::ValidationError("theory: --k and --n need at least one value"); }
  if (!(f.pc_step > 0.0) || !(f.pc_min > 0.0) || f.pc_max > 1.0 || f.pc_max < f.pc_min) {
    throw cone::ValidationError("theory: p_c grid must satisfy 0 < min <= max <= 1 and step > 0");
  }
  for (int k : f.k) {
    if (k < 2) { throw cone::ValidationError("theory: k must be >= 2"); }
  }
  for (int n : f.n) {
    if (n < 1 || n > cone::theory::kMaxAnalyticN) {
      throw cone::ValidationError("theory: N must lie in [1, " + std::to_string(cone::theory::kMaxAnalyticN) + "]");
    }
  }
  if (f.trials < 0) { throw cone::ValidationError("theory: trials must be >= 0"); }
  const auto grid = cone::theory::make_grid(f.pc_min, f.pc_max, f.pc_step);
  if (grid.empty()) { throw cone::ValidationError("theory: empty p_c grid"); }

  fs::path csv;
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    csv = fs::path(f.out) / cone::artifact::curves_csv;
  }
  const auto points = cone::theory::evaluate_grid(f.k, f.n, grid, f.trials, f.seed);
  if (!csv.empty()) { cone::theory::write_curves_csv(points, csv); }

  std::vector<int> ks = f.k, ns = f.n;
  std::sort(ks.begin(), ks.end());
  std::sort(ns.begin(), ns.end());
  for (int k : ks) {
    for (int n : ns) {
      std::optional<double> best;
      for (const auto & pt : points) {
        if (pt.params.k == k && pt.params.n == n && pt.p_b_analytic >= f.target) {
          best = pt.params.p_c;
          break;
        }
      }
      std::cout << "k=" << k << " N=" << n << " min p_c with p_b >= " << f.target << ": ";
      if (best) { std::cout << *best << '\n'; } else { std::cout << "none on grid\n"; }
    }
  }
  if (!csv.empty()) { std::cout << "wrote " << csv.string() << '\n'; }
  return ok;
}

int cmd_eval(const EvalFlags & f)
{
  const auto result = cone::evaluate_run(f.run, f.gold, f.corpus);
  const std::string text = cone::eval_to_json(result).dump(2) + "\n";
  if (!f.out.empty()) { cone::write_text_file(f.out, text); }
  std::cout << text;
  return ok;
}

int cmd_ingest_check(const IngestFlags & f)
{
  if (!fs::is_regular_file(f.corpus)) { throw cone::ValidationError("corpus file not found: '" + f.corpus + "'"); }
  int dim = f.dim;
  json out;
  if (!f.manifest.empty()) {
    const auto m = cone::load_manifest(f.manifest);
    if (dim != 0 && dim != m.dim) { throw cone::ValidationError("--dim disagrees with manifest dim"); }
    dim = m.dim;
    out["manifest"] = {{"encoder_id", m.encoder_id}, {"dim", m.dim}, {"pivot", m.pivot}, {"fallback_used", m.fallback_used}};
  }
  if (dim == 0) { dim = cone::infer_embedding_dim(f.corpus); }
  auto corpus = cone::ingest_corpus(f.corpus, dim);
  const auto stats = corpus.stats();
  out["documents"] = stats.documents;
  out["sentences"] = stats.sentences;
  out["mean_sentences_per_doc"] = stats.mean_sentences_per_doc;
  out["dim"] = dim;
  if (!f.augmentations.empty()) { out["augmentations"] = cone::load_augmentations(corpus, f.augmentations); }
  if (!f.lexicon.empty()) {
    const auto lex = cone::SentimentLexicon::load(f.lexicon);
    cone::assign_sentiment_pseudo_labels(corpus, lex);
    std::array<int, cone::kSentimentCount> counts{};
    for (auto s : corpus.lexicon_sentiment) { ++counts[static_cast<std::size_t>(s)]; }
    out["lexicon_labels"] = {{"positive", counts[0]}, {"neutral", counts[1]}, {"negative", counts[2]}};
  }
  if (!f.gold.empty()) {
    cone::load_gold(corpus, f.gold);
    out["gold"] = "ok";
  }
  std::cout << out.dump(2) << '\n';
  return ok;
}

int cmd_synth(const SynthFlags & f)
{
  cone::synthetic::Spec spec;
  spec.seed = f.seed;
  spec.documents = f.documents;
  spec.sentences_per_doc = f.sentences;
  spec.aspects = f.aspects;
  spec.dim = f.dim;
  spec.surface = f.surface;
  const auto data = cone::synthetic::generate(spec);
  const auto paths = cone::synthetic::write(data, f.out);
  std::cout << "wrote " << data.sentences.size() << " sentences to " << paths.corpus.parent_path().string() << '\n';
  return ok;
}

bool is_validation(const std::exception & e) { return dynamic_cast<const cone::ValidationError *>(&e) != nullptr; }

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Unsupervised contrastive opinion extraction"};
  app.require_subcommand(1);

  RunFlags rf;
  auto * run = app.add_subcommand("run", "Train, refine and write the key point report");
  run->add_option("--config", rf.config, "JSON run configuration");
  run->add_option("--out", rf.out, "Output directory")->required();
  run->add_option("--corpus", rf.corpus, "Corpus JSONL (overrides the config)");
  run->add_option("--augmentations", rf.augmentations, "Augmentation pairs JSONL");
  run->add_option("--lexicon", rf.lexicon, "Sentiment lexicon TSV");
  run->add_option("--stopwords", rf.stopwords, "Stopword list");
  run->add_option("--seed", rf.seed);
  run->add_option("--max-iterations", rf.max_iterations);
  run->add_option("--batch-size", rf.batch_size);
  run->add_option("--epochs", rf.epochs, "Epochs per refinement round");
  run->add_option("--k-init", rf.k_init);
  run->add_option("--top-n", rf.top_n);
  run->add_option("--learning-rate", rf.learning_rate);
  run->add_option("--temperature", rf.temperature);
  run->add_option("--rho", rf.rho);
  run->add_option("--tol", rf.tol);
  run->add_option("--positive-strategy", rf.positive_strategy, "augment_always | same_doc_then_augment");
  run->add_option("--augment-mode", rf.augment_mode, "precomputed | token_dropout | embedding_noise | auto");
  run->add_flag("--no-denoise", rf.no_denoise, "Keep same-label pairs as negatives");
  run->add_flag("--no-contrastive", rf.no_contrastive, "Never train the projection heads");
  run->add_flag("--no-refinement", rf.no_refinement, "One clustering pass without merging");
  run->add_flag("--resume", rf.resume, "Continue from the checkpoint in --out");
  run->add_flag("--quiet", rf.quiet);

  TheoryFlags tf;
  auto * theory = app.add_subcommand("theory", "Analytic and simulated p_b curves");
  theory->add_option("--k", tf.k, "Aspect counts")->delimiter(',');
  theory->add_option("--n", tf.n, "Batch sizes")->delimiter(',');
  theory->add_option("--pc-min", tf.pc_min);
  theory->add_option("--pc-max", tf.pc_max);
  theory->add_option("--pc-step", tf.pc_step);
  theory->add_option("--trials", tf.trials, "Monte-Carlo trials per point, 0 to skip");
  theory->add_option("--seed", tf.seed);
  theory->add_option("--target", tf.target, "p_b level for the printed minimum p_c");
  theory->add_option("--out", tf.out, "Directory for curves.csv");

  EvalFlags ef;
  auto * eval = app.add_subcommand("eval", "Recompute metrics from a finished run");
  eval->add_option("--run", ef.run, "Run output directory")->required();
  eval->add_option("--gold", ef.gold, "Gold labels JSONL");
  eval->add_option("--corpus", ef.corpus, "Corpus JSONL (overrides the recorded path)");
  eval->add_option("--out", ef.out, "Write the JSON result here as well");

  IngestFlags inf;
  auto * ingest = app.add_subcommand("ingest-check", "Validate input files and print corpus statistics");
  ingest->add_option("--corpus", inf.corpus)->required();
  ingest->add_option("--dim", inf.dim, "Expected embedding dimension");
  ingest->add_option("--manifest", inf.manifest);
  ingest->add_option("--augmentations", inf.augmentations);
  ingest->add_option("--lexicon", inf.lexicon);
  ingest->add_option("--gold", inf.gold);

  SynthFlags sf;
  auto * synth = app.add_subcommand("synth", "Write a labelled synthetic corpus");
  synth->add_option("--out", sf.out)->required();
  synth->add_option("--seed", sf.seed);
  synth->add_option("--documents", sf.documents);
  synth->add_option("--sentences", sf.sentences, "Sentences per document");
  synth->add_option("--aspects", sf.aspects);
  synth->add_option("--dim", sf.dim);
  synth->add_option("--surface", sf.surface, "Wording noise scale");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return validation;
  }

  try {
    if (*run) { return cmd_run(rf); }
    if (*theory) { return cmd_theory(tf); }
    if (*eval) { return cmd_eval(ef); }
    if (*ingest) { return cmd_ingest_check(inf); }
    if (*synth) { return cmd_synth(sf); }
  } catch (const std::exception & e) {
    // for ingest-check any input error is the validation result itself
    const bool invalid = is_validation(e) || (*ingest && dynamic_cast<const cone::Error *>(&e) != nullptr);
    std::cerr << "error: " << e.what() << '\n';
    return invalid ? validation : runtime;
  }
  return runtime;
}
