#ifndef CONE_PIPELINE_HPP_
#define CONE_PIPELINE_HPP_

// End-to-end run: configuration, artifacts, checkpoints and evaluation.

#include "cone/corpus.hpp"
#include "cone/keypoints.hpp"
#include "cone/metrics.hpp"
#include "cone/refine.hpp"
#include "cone/repr.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace cone {

struct RunPaths
{
  std::filesystem::path corpus;
  std::filesystem::path lexicon;
  std::filesystem::path stopwords;
  std::filesystem::path augmentations;  // empty: none
  std::filesystem::path manifest;       // empty: none
  std::filesystem::path gold;           // empty: none; only read by eval
};

struct RunConfig
{
  TrainConfig train;
  RefineConfig refine;
  int k_init{20};
  int embedding_dim{0};  // 0: manifest, else the first corpus record
  double sentiment_threshold{0.1};
  int top_n{5};
  bool unsigned_doc_score{false};
  std::optional<AugmentMode> augment_mode;  // unset: precomputed when augmentations are given, else embedding_noise
  double augment_sigma{0.05};
  double augment_dropout{0.1};
  bool no_denoise{false};
  bool no_contrastive{false};
  bool no_refinement{false};
  std::uint64_t seed{13};
  bool checkpoint{true};
  RunPaths paths;

  /// Keys as in to_json; unknown keys are rejected. Relative paths resolve
  /// against `base_dir`.
  static RunConfig from_json(const nlohmann::json & j, const std::filesystem::path & base_dir);
  static RunConfig load(const std::filesystem::path & path);
  nlohmann::json to_json() const;

  /// Copies seed and ablation flags into the train/refine sub-configs.
  void sync();
  /// Ranges plus existence of every required input. Throws ValidationError.
  void validate() const;
};

struct DocumentResult
{
  std::string doc_id;
  DocumentScore score;
};

struct RunOutput
{
  Corpus corpus;
  Heads heads;
  RefineResult refine;
  std::vector<AspectKeypoint> keypoints;
  std::vector<DocumentResult> documents;
  MetricReport metrics;
};

/// Fixed artifact names under the output directory.
namespace artifact {
inline constexpr const char * report_json = "report.json";
inline constexpr const char * report_md = "report.md";
inline constexpr const char * metrics_json = "metrics.json";
inline constexpr const char * trace_json = "trace.json";
inline constexpr const char * curves_csv = "curves.csv";
inline constexpr const char * pca_aspect = "pca_aspect.csv";
inline constexpr const char * pca_sentiment = "pca_sentiment.csv";
inline constexpr const char * pca_docs = "pca_docs.csv";
inline constexpr const char * checkpoint_dir = "checkpoint";
inline constexpr const char * status_json = "status.json";
}  // namespace artifact

/// Corpus with embeddings, augmentations and lexicon pseudo labels loaded.
Corpus load_inputs(const RunConfig & config);

using LogFn = std::function<void(const std::string &)>;

/// ingest -> pseudo labels -> refinement -> report -> metrics, writing every
/// artifact into `out`. With `resume` the run continues from the checkpoint
/// in `out`.
RunOutput run_pipeline(const RunConfig & config, const std::filesystem::path & out, bool resume = false,
                       const LogFn & log = {});

nlohmann::json report_to_json(const Corpus & corpus, const std::vector<AspectKeypoint> & keypoints,
                              const std::vector<DocumentResult> & documents);
std::string report_to_markdown(const Corpus & corpus, const std::vector<AspectKeypoint> & keypoints,
                               const std::vector<DocumentResult> & documents);
nlohmann::json metrics_to_json(const MetricReport & report);

/// Structural checks on artifacts read back from disk. Throw ValidationError.
void validate_report_json(const nlohmann::json & j);
void validate_trace_json(const nlohmann::json & j);
void validate_metrics_json(const nlohmann::json & j);

nlohmann::json read_json_file(const std::filesystem::path & path);
void write_text_file(const std::filesystem::path & path, const std::string & text);

struct Supervised
{
  double aspect_purity{0.0};
  double sentence_sentiment_accuracy{0.0};
  std::optional<Classification> documents;  // present when gold document ratings exist
};

struct EvalResult
{
  MetricReport metrics;
  std::optional<Supervised> supervised;
};

/// Recomputes metrics from the artifacts of a finished run; gold labels add
/// the supervised block. `corpus_override` replaces the recorded corpus path.
EvalResult evaluate_run(const std::filesystem::path & run_dir, const std::filesystem::path & gold = {},
                        const std::filesystem::path & corpus_override = {});
nlohmann::json eval_to_json(const EvalResult & result);

}  // namespace cone

#endif  // CONE_PIPELINE_HPP_
