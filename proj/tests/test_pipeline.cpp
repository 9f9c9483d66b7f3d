#include "cone/pipeline.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>

using namespace cone;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kFixture = fs::path(CONE_DATA_DIR) / "fixture";

RunConfig fixture_config() { return RunConfig::load(kFixture / "config.json"); }

// The default fixture run, shared by the tests that only read its artifacts.
const fs::path & reference_run()
{
  static support::TempDir dir("pipeline_reference");
  static const bool done = [] {
    run_pipeline(fixture_config(), dir.path());
    return true;
  }();
  (void)done;
  return dir.path();
}

const char * const kArtifacts[] = {artifact::report_json,   artifact::report_md,     artifact::metrics_json,
                                   artifact::trace_json,    artifact::pca_aspect,    artifact::pca_sentiment,
                                   artifact::pca_docs,      artifact::status_json};

}  // namespace

TEST_CASE("config parsing")
{
  const auto c = fixture_config();
  CHECK(c.paths.corpus == (kFixture / "corpus.jsonl").lexically_normal());
  CHECK(c.paths.lexicon == (kFixture.parent_path() / "lexicon.tsv").lexically_normal());
  CHECK(c.train.batch_size == 32);
  CHECK(c.augment_mode == AugmentMode::precomputed);
  CHECK(c.train.seed == 13);
  CHECK_NOTHROW(c.validate());

  const auto round = RunConfig::from_json(c.to_json(), "/");
  CHECK(round.to_json() == c.to_json());

  CHECK_THROWS_WITH_AS(RunConfig::from_json(json{{"corpus", "x"}, {"batch", 3}}, "/"),
                       doctest::Contains("unknown key 'batch'"), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"batch_size", "big"}}, "/"), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json(json{{"positive_strategy", "random"}}, "/"), ValidationError);
  CHECK_THROWS_AS(RunConfig::from_json(json::array(), "/"), ValidationError);
  CHECK(RunConfig::from_json(json{{"augment_mode", "auto"}}, "/").augment_mode == std::nullopt);

  auto missing = c;
  missing.paths.corpus = "/nonexistent/corpus.jsonl";
  CHECK_THROWS_WITH_AS(missing.validate(), doctest::Contains("/nonexistent/corpus.jsonl"), ValidationError);
  auto bad_rho = c;
  bad_rho.refine.rho = 1.5;
  CHECK_THROWS_AS(bad_rho.validate(), ValidationError);
  auto bad_threshold = c;
  bad_threshold.sentiment_threshold = 0.0;
  CHECK_THROWS_AS(bad_threshold.validate(), ValidationError);
  auto no_pairs = c;
  no_pairs.paths.augmentations.clear();
  CHECK_THROWS_AS(no_pairs.validate(), ValidationError);

  support::TempDir dir("config_file");
  support::write_file(dir / "broken.json", "{\"corpus\":");
  CHECK_THROWS_AS(RunConfig::load(dir / "broken.json"), ValidationError);
}

TEST_CASE("input loading")
{
  auto c = fixture_config();
  const auto corpus = load_inputs(c);
  CHECK(corpus.size() == 600);
  CHECK(corpus.dim() == 48);
  CHECK(std::all_of(corpus.has_augmentation.begin(), corpus.has_augmentation.end(), [](bool b) { return b; }));

  c.embedding_dim = 32;
  CHECK_THROWS_WITH_AS(load_inputs(c), doctest::Contains("manifest"), ValidationError);
  c.paths.manifest.clear();
  CHECK_THROWS_WITH_AS(load_inputs(c), doctest::Contains("expected 32"), ValidationError);
  c.embedding_dim = 0;
  CHECK(load_inputs(c).dim() == 48);
}

TEST_CASE("fixture run writes every artifact")
{
  const auto & dir = reference_run();
  for (const char * name : kArtifacts) {
    CAPTURE(name);
    CHECK(fs::is_regular_file(dir / name));
  }
  CHECK(fs::is_regular_file(dir / artifact::checkpoint_dir / "state.json"));
  CHECK(fs::is_regular_file(dir / artifact::checkpoint_dir / "heads.json"));
  CHECK(read_json_file(dir / artifact::status_json)["status"] == "ok");

  const auto report = read_json_file(dir / artifact::report_json);
  CHECK_NOTHROW(validate_report_json(report));
  CHECK_NOTHROW(validate_trace_json(read_json_file(dir / artifact::trace_json)));
  CHECK_NOTHROW(validate_metrics_json(read_json_file(dir / artifact::metrics_json)));
  CHECK(report["documents"].size() == 100);
  for (const auto & a : report["aspects"]) { CHECK(a["positive_reps"].size() <= 5); }

  const auto trace = read_json_file(dir / artifact::trace_json);
  CHECK(trace["converged"] == true);
  CHECK(trace["corpus"]["sentences"] == 600);

  const auto md = support::read_file(dir / artifact::report_md);
  CHECK(md.find("Popularity") != std::string::npos);
  const auto pca = support::read_file(dir / artifact::pca_aspect);
  CHECK(pca.rfind("x,y,label\n", 0) == 0);
  CHECK(std::count(pca.begin(), pca.end(), '\n') == 601);
}

TEST_CASE("identical runs give identical artifacts")
{
  support::TempDir again("pipeline_again");
  run_pipeline(fixture_config(), again.path());
  for (const char * name : kArtifacts) {
    CAPTURE(name);
    CHECK(support::read_file(reference_run() / name) == support::read_file(again / name));
  }
}

TEST_CASE("resuming a stopped run matches the uninterrupted run")
{
  support::TempDir dir("pipeline_resume");
  auto partial = fixture_config();
  partial.refine.max_iterations = 3;
  const auto first = run_pipeline(partial, dir.path());
  CHECK(first.refine.state.iteration == 3);

  const auto resumed = run_pipeline(fixture_config(), dir.path(), true);
  CHECK(resumed.refine.state.iteration > 3);
  for (const char * name : {artifact::report_json, artifact::metrics_json, artifact::trace_json}) {
    CAPTURE(name);
    CHECK(support::read_file(reference_run() / name) == support::read_file(dir / name));
  }

  auto other_seed = fixture_config();
  other_seed.seed = 99;
  CHECK_THROWS_AS(run_pipeline(other_seed, dir.path(), true), ValidationError);
  support::TempDir empty("pipeline_resume_empty");
  CHECK_THROWS_WITH_AS(run_pipeline(fixture_config(), empty.path(), true), doctest::Contains("no checkpoint"),
                       ValidationError);
}

TEST_CASE("ablation flags and loop bounds")
{
  support::TempDir dir("pipeline_flags");
  auto once = fixture_config();
  once.no_refinement = true;
  once.train.epochs_per_round = 2;
  run_pipeline(once, dir / "once");
  const auto trace = read_json_file(dir / "once" / artifact::trace_json);
  CHECK(trace["iterations"].size() == 1);
  CHECK(trace["merge_log"].empty());

  auto none = fixture_config();
  none.refine.max_iterations = 0;
  const auto out = run_pipeline(none, dir / "none");
  CHECK(out.refine.state.iterations.empty());
  CHECK(out.refine.aspect_model.count() == 20);
  CHECK(read_json_file(dir / "none" / artifact::trace_json)["silhouette_history"].size() == 1);

  auto too_many = fixture_config();
  too_many.k_init = 601;
  CHECK_THROWS_WITH_AS(run_pipeline(too_many, dir / "big"), doctest::Contains("k_init"), ValidationError);
  CHECK_FALSE(fs::exists(dir / "big"));
}

TEST_CASE("evaluation of a finished run")
{
  const auto & dir = reference_run();
  const auto plain = evaluate_run(dir);
  CHECK_FALSE(plain.supervised.has_value());
  CHECK_FALSE(eval_to_json(plain).contains("supervised"));
  const auto recorded = read_json_file(dir / artifact::metrics_json);
  CHECK(plain.metrics.coherence == doctest::Approx(recorded["coherence"].get<double>()).epsilon(1e-12));
  CHECK(plain.metrics.disentanglement == doctest::Approx(recorded["disentanglement"].get<double>()).epsilon(1e-12));

  const auto graded = evaluate_run(dir, kFixture / "gold.jsonl");
  REQUIRE(graded.supervised.has_value());
  CHECK(graded.supervised->aspect_purity >= 0.9);
  REQUIRE(graded.supervised->documents.has_value());
  CHECK(graded.supervised->documents->evaluated == 100);
  const auto j = eval_to_json(graded);
  CHECK(j["supervised"]["documents"].contains("macro_f1"));

  support::TempDir tampered("pipeline_tampered");
  fs::copy(dir, tampered.path(), fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  auto report = read_json_file(tampered / artifact::report_json);
  report["aspects"][0]["popularity"] = 0.9;
  write_text_file(tampered / artifact::report_json, report.dump());
  CHECK_THROWS_WITH_AS(evaluate_run(tampered.path()), doctest::Contains("popularity"), ValidationError);

  write_text_file(tampered / artifact::report_json, "{not json");
  CHECK_THROWS_AS(evaluate_run(tampered.path()), ValidationError);
  fs::remove(tampered / artifact::report_json);
  CHECK_THROWS_WITH_AS(evaluate_run(tampered.path()), doctest::Contains("missing artifact"), ValidationError);
}

TEST_CASE("artifact validators")
{
  CHECK_THROWS_AS(validate_report_json(json::object()), ValidationError);
  CHECK_THROWS_AS(validate_metrics_json(json{{"coherence", 1.0}}), ValidationError);
  CHECK_THROWS_AS(validate_trace_json(json{{"config", json::object()}}), ValidationError);

  auto report = read_json_file(reference_run() / artifact::report_json);
  auto unsorted = report;
  auto & panel = unsorted["aspects"][0]["positive_reps"];
  if (panel.size() >= 2) {
    std::swap(panel[0], panel[panel.size() - 1]);
    if (panel[0]["similarity"] != panel[panel.size() - 1]["similarity"]) {
      CHECK_THROWS_WITH_AS(validate_report_json(unsorted), doctest::Contains("sorted"), ValidationError);
    }
  }
  auto dup = report;
  dup["aspects"][1]["aspect_id"] = dup["aspects"][0]["aspect_id"];
  CHECK_THROWS_AS(validate_report_json(dup), ValidationError);
  auto metrics = read_json_file(reference_run() / artifact::metrics_json);
  metrics["div1"] = 1.5;
  CHECK_THROWS_AS(validate_metrics_json(metrics), ValidationError);
}
