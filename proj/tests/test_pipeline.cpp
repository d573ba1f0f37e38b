#include <cctype>
#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "emoclass/pipeline.hpp"
#include "emoclass/synth.hpp"
#include "emoclass/util.hpp"

using namespace emoclass;

namespace {

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("emoclass_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string s(const std::string& rel) const { return (path / rel).string(); }
};

PipelineConfig synth_config(const TempDir& dir, std::size_t n, std::uint64_t seed) {
  write_text_file(dir.s("corpus.csv"), corpus_to_csv(make_synthetic_corpus(n, 7)));
  PipelineConfig c;
  c.corpus_path = dir.s("corpus.csv");
  c.output_dir = dir.s("out");
  c.features.type = "bow";
  c.features.max_len = 12;
  c.features.min_freq = 1;
  c.features.dim = 16;
  c.seed = seed;
  return c;
}

nlohmann::json logreg_params() {
  return {{"C", 10.0}, {"penalty", "l2"}, {"solver", "liblinear"}};
}

std::string bytes_without_timestamp(const std::string& artifact_path) {
  ModelBundle bundle = load_bundle(artifact_path);
  bundle.training.created_at = "1970-01-01T00:00:00Z";
  return bundle_to_bytes(bundle);
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("pipeline config json round-trip and unknown keys") {
  PipelineConfig c;
  CHECK(c.features.type == "embedding");
  CHECK(c.test_frac == 0.20);
  CHECK(c.val_frac == 0.10);
  CHECK(c.stratified);
  CHECK(c.normalizer == Normalizer::lemma_then_stem);

  c.corpus_path = "corpus.csv";
  c.corpus_format = CorpusFormat::jsonl;
  c.features.type = "bow";
  c.test_frac = 0.25;
  c.seed = 42;
  c.normalizer = Normalizer::stem;
  PipelineConfig back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.corpus_format == CorpusFormat::jsonl);
  CHECK(back.seed == 42);

  CHECK_THROWS_AS(PipelineConfig::from_json({{"corpsu", "x"}}), UsageError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"preprocess", {{"lowcase", true}}}}), UsageError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"split", {{"test", 0.2}}}}), UsageError);
  CHECK_THROWS_AS(PipelineConfig::from_json(nlohmann::json::array()), UsageError);
}

TEST_CASE("config validation checks files and fractions") {
  TempDir dir("pipe_validate");
  PipelineConfig c = synth_config(dir, 40, 0);
  CHECK_NOTHROW(c.validate());

  PipelineConfig missing = c;
  missing.corpus_path = dir.s("nope.csv");
  CHECK_THROWS_AS(missing.validate(), DataError);
  missing = c;
  missing.corpus_path = "";
  CHECK_THROWS_AS(missing.validate(), UsageError);
  missing = c;
  missing.stopwords_path = dir.s("nope.txt");
  CHECK_THROWS_AS(missing.validate(), DataError);
  missing = c;
  missing.test_frac = 1.0;
  CHECK_THROWS_AS(missing.validate(), UsageError);
  missing = c;
  missing.val_frac = -0.1;
  CHECK_THROWS_AS(missing.validate(), UsageError);
  missing = c;
  missing.output_dir = "";
  CHECK_THROWS_AS(missing.validate(), UsageError);
  missing = c;
  missing.features.type = "tfidf";
  CHECK_THROWS_AS(missing.validate(), UsageError);
}

TEST_CASE("resource files resolve into preprocess settings") {
  TempDir dir("pipe_resolve");
  PipelineConfig c = synth_config(dir, 40, 0);

  PreprocessConfig defaults = c.resolve_preprocess();
  CHECK(defaults.stopwords.empty());
  CHECK(defaults.emoticons == PreprocessConfig::default_emoticons());

  write_text_file(dir.s("stop.txt"), "the\na\nAN\n");
  write_text_file(dir.s("abbr.tsv"), "omg\toh my god\nu\tyou\n");
  write_text_file(dir.s("emo.txt"), ":)\n:(\n");
  c.stopwords_path = dir.s("stop.txt");
  c.abbreviations_path = dir.s("abbr.tsv");
  c.emoticons_path = dir.s("emo.txt");
  c.normalizer = Normalizer::none;
  c.lowercase = false;

  PreprocessConfig p = c.resolve_preprocess();
  CHECK(p.stopwords.count("the") == 1);
  CHECK(p.stopwords.count("an") == 1);
  CHECK(p.abbreviations.at("omg") == "oh my god");
  REQUIRE(p.emoticons.size() == 2);
  CHECK(std::count(p.emoticons.begin(), p.emoticons.end(), ":)") == 1);
  CHECK(std::count(p.emoticons.begin(), p.emoticons.end(), ":(") == 1);
  CHECK(p.normalizer == Normalizer::none);
  CHECK_FALSE(p.lowercase);
}

TEST_CASE("score rows become probability rows") {
  DenseMatrix decisions(2, 4);
  decisions.at(0, 0) = 1.0;
  decisions.at(0, 2) = -1.0;
  decisions.at(1, 0) = 101.0;
  decisions.at(1, 1) = 100.0;
  decisions.at(1, 2) = 99.0;
  decisions.at(1, 3) = 100.0;
  DenseMatrix soft = scores_to_probabilities(Algorithm::svm, decisions);
  double denom = std::exp(1.0) + 1.0 + std::exp(-1.0) + 1.0;
  CHECK(soft.at(0, 0) == doctest::Approx(std::exp(1.0) / denom).epsilon(1e-12));
  CHECK(soft.at(0, 2) == doctest::Approx(std::exp(-1.0) / denom).epsilon(1e-12));
  for (std::size_t i = 0; i < 2; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) sum += soft.at(i, j);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
  // A uniform shift of the decision row must not change the softmax.
  DenseMatrix shifted(1, 4);
  for (std::size_t j = 0; j < 4; ++j) shifted.at(0, j) = decisions.at(0, j) + 100.0;
  DenseMatrix soft2 = scores_to_probabilities(Algorithm::svm, shifted);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(soft2.at(0, j) == doctest::Approx(soft.at(0, j)).epsilon(1e-9));
  }

  DenseMatrix weights(2, 4);
  weights.at(0, 0) = 3.0;
  weights.at(0, 1) = 1.0;
  DenseMatrix renorm = scores_to_probabilities(Algorithm::knn, weights);
  CHECK(renorm.at(0, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(renorm.at(0, 1) == doctest::Approx(0.25).epsilon(1e-12));
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(renorm.at(1, j) == doctest::Approx(0.25).epsilon(1e-12));  // zero row -> uniform
  }
}

TEST_CASE("preprocess writes tokens and vocabulary deterministically") {
  TempDir dir("pipe_preprocess");
  PipelineConfig c = synth_config(dir, 80, 3);

  nlohmann::json summary = run_preprocess(c);
  CHECK(summary["documents"] == 80);
  CHECK(summary["class_counts"]["anger"] == 20);
  CHECK(summary["class_counts"]["joy"] == 20);
  CHECK(summary["vocabulary_size"].get<std::size_t>() > 10);

  std::string tokens1 = read_text_file(summary["tokens_file"].get<std::string>());
  std::string vocab1 = read_text_file(summary["vocabulary_file"].get<std::string>());
  CHECK(std::count(tokens1.begin(), tokens1.end(), '\n') == 80);
  nlohmann::json first_line = nlohmann::json::parse(tokens1.substr(0, tokens1.find('\n')));
  CHECK(first_line.contains("id"));
  CHECK(first_line.contains("label"));
  CHECK(first_line["tokens"].is_array());

  run_preprocess(c);
  CHECK(read_text_file(summary["tokens_file"].get<std::string>()) == tokens1);
  CHECK(read_text_file(summary["vocabulary_file"].get<std::string>()) == vocab1);
}

TEST_CASE("bow logistic regression clears the synthetic gate") {
  TempDir dir("pipe_logreg");
  PipelineConfig c = synth_config(dir, 400, 0);
  TrainOptions opt;
  opt.model_name = "logreg";
  opt.params = logreg_params();

  nlohmann::json summary = run_train(c, opt);
  CHECK(summary["documents"]["train"] == 288);
  CHECK(summary["documents"]["validation"] == 32);
  CHECK(summary["documents"]["test"] == 80);
  CHECK(summary["test_accuracy"]["mean"].get<double>() >= 0.95);
  CHECK(is_artifact_file(summary["artifact"].get<std::string>()));

  ModelBundle bundle = load_bundle(summary["artifact"].get<std::string>());
  CHECK(bundle.kind == BundleKind::classical);
  CHECK(bundle.spec.algorithm == Algorithm::logreg);
  CHECK(bundle.training.config["pooled_validation"] == true);
  CHECK_FALSE(bundle.training.created_at.empty());
}

TEST_CASE("desk-scale bigru clears the synthetic gate") {
  TempDir dir("pipe_bigru");
  PipelineConfig c = synth_config(dir, 400, 0);
  c.features.type = "embedding";
  c.features.dim = 16;
  TrainOptions opt;
  opt.model_name = "bigru";
  opt.arch.hidden_units = 8;
  opt.train.epochs = 10;
  opt.train.batch_size = 16;
  opt.train.learning_rate = 0.001;

  nlohmann::json summary = run_train(c, opt);
  CHECK(summary["test_accuracy"]["mean"].get<double>() >= 0.90);
  CHECK(summary["total_steps"] == 180);  // ceil(288/16) * 10
  CHECK(summary["embedding"]["source"] == "random");

  std::string curves = read_text_file(dir.s("out/learning_curves.csv"));
  CHECK(std::count(curves.begin(), curves.end(), '\n') == 11);  // header + 10 epochs

  ModelBundle bundle = load_bundle(summary["artifact"].get<std::string>());
  CHECK(bundle.kind == BundleKind::neural);
  CHECK(bundle.members[0].arch.kind == ArchKind::bigru);
  CHECK(bundle.members[0].arch.hidden_units == 8);
}

TEST_CASE("ensemble training stores two members with curve files") {
  TempDir dir("pipe_ensemble");
  PipelineConfig c = synth_config(dir, 120, 1);
  c.features.type = "embedding";
  c.features.dim = 8;
  TrainOptions opt;
  opt.model_name = "ensemble";
  opt.arch.hidden_units = 4;
  opt.train.epochs = 3;
  opt.train.learning_rate = 0.01;

  nlohmann::json summary = run_train(c, opt);
  CHECK(summary["final_validation_accuracy"].size() == 2);

  ModelBundle bundle = load_bundle(summary["artifact"].get<std::string>());
  CHECK(bundle.kind == BundleKind::ensemble);
  REQUIRE(bundle.members.size() == 2);
  CHECK(bundle.members[0].arch.kind == ArchKind::bilstm);
  CHECK(bundle.members[1].arch.kind == ArchKind::bigru);
  CHECK(std::filesystem::exists(dir.s("out/bilstm/learning_curves.csv")));
  CHECK(std::filesystem::exists(dir.s("out/bigru/learning_curves.csv")));
}

TEST_CASE("repeats report spread and keep the first run's artifact") {
  TempDir dir("pipe_repeats");
  PipelineConfig c = synth_config(dir, 120, 2);
  c.features.type = "embedding";
  c.features.dim = 8;
  TrainOptions opt;
  opt.model_name = "gru";
  opt.arch.hidden_units = 4;
  opt.train.epochs = 2;
  opt.train.learning_rate = 0.01;
  opt.train.seed = 9;
  opt.repeats = 3;

  nlohmann::json repeated = run_train(c, opt);
  CHECK(repeated["test_accuracy"]["runs"].size() == 3);
  CHECK(repeated["test_accuracy"]["std"].get<double>() >= 0.0);

  PipelineConfig c2 = c;
  c2.output_dir = dir.s("out_single");
  TrainOptions single = opt;
  single.repeats = 1;
  nlohmann::json once = run_train(c2, single);
  CHECK(once["test_accuracy"]["runs"][0] == repeated["test_accuracy"]["runs"][0]);
  CHECK(bytes_without_timestamp(once["artifact"].get<std::string>()) ==
        bytes_without_timestamp(repeated["artifact"].get<std::string>()));
}

TEST_CASE("equal seeds give identical artifacts apart from the timestamp") {
  TempDir dir("pipe_determinism");
  PipelineConfig c = synth_config(dir, 120, 4);
  TrainOptions nb;
  nb.model_name = "naive_bayes";
  nb.train.seed = 5;

  PipelineConfig c2 = c;
  c2.output_dir = dir.s("out2");
  run_train(c, nb);
  run_train(c2, nb);
  CHECK(bytes_without_timestamp(dir.s("out/model_naive_bayes.bin")) ==
        bytes_without_timestamp(dir.s("out2/model_naive_bayes.bin")));

  PipelineConfig n1 = c;
  n1.features.type = "embedding";
  n1.features.dim = 8;
  n1.output_dir = dir.s("out_n1");
  PipelineConfig n2 = n1;
  n2.output_dir = dir.s("out_n2");
  TrainOptions gru;
  gru.model_name = "gru";
  gru.arch.hidden_units = 4;
  gru.train.epochs = 2;
  gru.train.seed = 5;
  run_train(n1, gru);
  run_train(n2, gru);
  CHECK(bytes_without_timestamp(dir.s("out_n1/model_gru.bin")) ==
        bytes_without_timestamp(dir.s("out_n2/model_gru.bin")));
}

TEST_CASE("evaluation writes reports without touching the artifact") {
  TempDir dir("pipe_evaluate");
  PipelineConfig c = synth_config(dir, 200, 6);
  TrainOptions nb;
  nb.model_name = "naive_bayes";
  nlohmann::json trained = run_train(c, nb);
  const std::string artifact = trained["artifact"].get<std::string>();
  const std::string before = read_text_file(artifact);

  PipelineConfig eval_config = c;
  eval_config.output_dir = dir.s("eval");
  nlohmann::json summary = run_evaluate(eval_config, artifact, "test", false);
  CHECK(summary["split"] == "test");
  CHECK(summary["documents"] == 40);
  CHECK(summary["corpus_fingerprint_match"] == true);
  CHECK(summary["model"] == "naive_bayes (bow)");
  double accuracy = summary["report"]["accuracy"].get<double>();
  CHECK(accuracy == doctest::Approx(trained["test_accuracy"]["mean"].get<double>()));
  CHECK(summary["auc"]["micro"].get<double>() > 0.5);

  CHECK(std::filesystem::exists(dir.s("eval/report.json")));
  CHECK(std::filesystem::exists(dir.s("eval/confusion.csv")));
  for (const char* name : {"anger", "fear", "joy", "sadness", "micro", "macro"}) {
    CHECK(std::filesystem::exists(dir.s("eval/roc_" + std::string(name) + ".csv")));
  }
  CHECK(read_text_file(artifact) == before);

  CHECK_NOTHROW(run_evaluate(eval_config, artifact, "validation", false));
  CHECK_NOTHROW(run_evaluate(eval_config, artifact, "all", false));
  CHECK_THROWS_AS(run_evaluate(eval_config, artifact, "dev", false), UsageError);

  std::string text = run_report(eval_config, artifact, "test");
  CHECK(text.find("precision") != std::string::npos);
  CHECK(text.find("weighted avg") != std::string::npos);
  CHECK(std::filesystem::exists(dir.s("eval/roc.svg")));
}

TEST_CASE("single text prediction returns four probabilities") {
  TempDir dir("pipe_predict");
  PipelineConfig c = synth_config(dir, 200, 6);
  TrainOptions nb;
  nb.model_name = "naive_bayes";
  nlohmann::json trained = run_train(c, nb);
  const std::string artifact = trained["artifact"].get<std::string>();

  nlohmann::json out = run_predict(artifact, "I am so happy today :)");
  CHECK(out["label"] == "joy");
  REQUIRE(out["probabilities"].size() == 4);
  double sum = 0.0;
  for (const char* name : {"anger", "fear", "joy", "sadness"}) {
    sum += out["probabilities"][name].get<double>();
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(run_predict(artifact, "I am so happy today :)").dump() == out.dump());
  CHECK(run_predict(artifact, "this is terrifying and scary")["label"] == "fear");
}

TEST_CASE("compare renders one row per model") {
  TempDir dir("pipe_compare");
  PipelineConfig c = synth_config(dir, 200, 6);
  TrainOptions nb;
  nb.model_name = "naive_bayes";
  TrainOptions lr;
  lr.model_name = "logreg";
  lr.params = logreg_params();
  std::string nb_path = run_train(c, nb)["artifact"].get<std::string>();
  std::string lr_path = run_train(c, lr)["artifact"].get<std::string>();

  std::string table = run_compare(c, {nb_path, lr_path}, "test");
  CHECK(table.find("Model") != std::string::npos);
  CHECK(table.find("naive_bayes (bow)") != std::string::npos);
  CHECK(table.find("logreg (bow)") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 4);  // header + rule + 2 rows
  // Each model row ends in a four-decimal accuracy.
  std::istringstream rows(table);
  std::string row;
  std::getline(rows, row);
  std::getline(rows, row);
  while (std::getline(rows, row)) {
    REQUIRE(row.size() > 5);
    std::size_t dot = row.rfind('.');
    REQUIRE(dot == row.size() - 5);
    for (std::size_t i = dot + 1; i < row.size(); ++i) CHECK(std::isdigit(row[i]));
  }

  CHECK_THROWS_AS(run_compare(c, {}, "test"), UsageError);
}

TEST_CASE("classical grid search tuning writes cv and best-params files") {
  TempDir dir("pipe_tune");
  PipelineConfig c = synth_config(dir, 200, 0);
  write_text_file(dir.s("grid.json"), R"({"max_depth": [3, null], "min_samples_leaf": [1]})");
  TuneOptions opt;
  opt.model_name = "decision_tree";
  opt.grid_path = dir.s("grid.json");
  opt.folds = 3;

  nlohmann::json summary = run_tune(c, opt);
  CHECK(summary["combinations"] == 2);
  CHECK(summary["valid_combinations"] == 2);
  CHECK(summary["best"]["model"] == "decision_tree");
  CHECK(summary["best"]["mean_accuracy"].get<double>() > 0.5);

  std::string csv = read_text_file(summary["csv_file"].get<std::string>());
  CHECK(csv.rfind("combination,fold,accuracy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);  // header + 2 combos x 3 folds
  nlohmann::json best =
      nlohmann::json::parse(read_text_file(summary["best_params_file"].get<std::string>()));
  CHECK(best["params"].contains("max_depth"));
}

TEST_CASE("deep tuning sweeps batch size and learning rate") {
  TempDir dir("pipe_tune_deep");
  PipelineConfig c = synth_config(dir, 120, 1);
  c.features.type = "embedding";
  c.features.dim = 8;
  write_text_file(dir.s("grid.json"), R"({"batch_size": [8, 16], "learning_rate": [0.01]})");
  TuneOptions opt;
  opt.model_name = "deep";
  opt.grid_path = dir.s("grid.json");
  opt.train.epochs = 2;
  opt.arch.hidden_units = 4;

  nlohmann::json summary = run_tune(c, opt);
  CHECK(summary["family"] == "neural");
  CHECK(summary["combinations"] == 2);
  CHECK(summary["best"]["model"] == "lstm");
  CHECK((summary["best"]["batch_size"] == 8 || summary["best"]["batch_size"] == 16));
  CHECK(summary["best"]["learning_rate"] == 0.01);

  std::string csv = read_text_file(dir.s("out/cv_deep.csv"));
  CHECK(csv.rfind("combination,batch_size,learning_rate,validation_accuracy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(std::filesystem::exists(dir.s("out/best_params_deep.json")));

  write_text_file(dir.s("bad_grid.json"), R"({"batch_size": [8], "momentum": [0.9]})");
  TuneOptions bad = opt;
  bad.grid_path = dir.s("bad_grid.json");
  CHECK_THROWS_AS(run_tune(c, bad), UsageError);
}

TEST_CASE("embedding features come from files or donor models") {
  TempDir dir("pipe_embeddings");
  PipelineConfig c = synth_config(dir, 120, 3);
  c.features.type = "embedding";
  c.features.dim = 8;

  // Donor: a trained neural model whose fine-tuned rows are reused by token.
  TrainOptions gru;
  gru.model_name = "gru";
  gru.arch.hidden_units = 4;
  gru.train.epochs = 1;
  std::string donor = run_train(c, gru)["artifact"].get<std::string>();

  PipelineConfig donor_config = c;
  donor_config.embeddings_path = donor;
  donor_config.output_dir = dir.s("out_donor");
  TrainOptions nb;
  nb.model_name = "naive_bayes";
  nlohmann::json via_donor = run_train(donor_config, nb);
  CHECK(via_donor["embedding"]["source"] == "model");
  CHECK(via_donor["embedding"]["found"].get<int>() > 0);
  ModelBundle donor_bundle = load_bundle(via_donor["artifact"].get<std::string>());
  REQUIRE(donor_bundle.embedding_table.has_value());
  CHECK(donor_bundle.embedding_table->dim() == 8);
  // Continuous features flip naive bayes to its gaussian variant.
  CHECK(donor_bundle.spec.get_string("variant", "multinomial") == "gaussian");

  // Word2vec text file: header line, then token + 8 components.
  std::ostringstream vec;
  vec << "2 8\n";
  vec << "happi 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8\n";
  vec << "sad -0.1 -0.2 -0.3 -0.4 -0.5 -0.6 -0.7 -0.8\n";
  write_text_file(dir.s("tiny.vec"), vec.str());
  PipelineConfig vec_config = c;
  vec_config.embeddings_path = dir.s("tiny.vec");
  vec_config.output_dir = dir.s("out_vec");
  nlohmann::json via_vec = run_train(vec_config, nb);
  CHECK(via_vec["embedding"]["source"] == "word2vec");
  CHECK(via_vec["embedding"]["found"].get<int>() >= 1);
  CHECK(via_vec["embedding"]["missing"].get<int>() > 0);

  PipelineConfig mismatch = donor_config;
  mismatch.features.dim = 16;
  CHECK_THROWS_AS(run_train(mismatch, nb), UsageError);
  PipelineConfig vec_mismatch = vec_config;
  vec_mismatch.features.dim = 16;
  CHECK_THROWS_AS(run_train(vec_mismatch, nb), UsageError);
}

TEST_CASE("pipeline rejects bad inputs") {
  TempDir dir("pipe_errors");
  PipelineConfig c = synth_config(dir, 80, 0);

  TrainOptions opt;
  opt.model_name = "bert";
  CHECK_THROWS_WITH_AS(run_train(c, opt), "unknown model: bert", UsageError);
  opt.model_name = "naive_bayes";
  opt.repeats = 0;
  CHECK_THROWS_AS(run_train(c, opt), UsageError);

  TuneOptions tune;
  tune.model_name = "logreg";
  CHECK_THROWS_AS(run_tune(c, tune), UsageError);  // no grid file
  tune.grid_path = dir.s("missing_grid.json");
  CHECK_THROWS_AS(run_tune(c, tune), DataError);
  write_text_file(dir.s("grid.json"), R"({"C": [1.0]})");
  tune.grid_path = dir.s("grid.json");
  tune.model_name = "ensemble";
  CHECK_THROWS_AS(run_tune(c, tune), UsageError);

  CHECK_THROWS_AS(run_predict(dir.s("missing.bin"), "hello"), DataError);
}

}  // TEST_SUITE
