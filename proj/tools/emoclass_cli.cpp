// Command-line driver for the emotion classification toolkit. Talks to the
// library exclusively through the C API in emoclass.h; everything else here is
// argument parsing, config assembly, and printing.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emoclass.h"
#include "json.hpp"

namespace {

using nlohmann::json;

// A failure that already knows its process exit code (1 usage, 2 data).
struct CliError {
  int code;
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError{2, "cannot open file: " + path};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Shared pipeline-config flags. Each option keeps its CLI11 handle so the
// overlay below can tell "explicitly set" apart from "default": precedence is
// flags > config file > built-in defaults.
struct CommonOpts {
  std::string config_path;
  std::string corpus;
  std::string format;
  std::string embeddings;
  std::string stopwords;
  std::string abbreviations;
  std::string emoticons;
  std::string output_dir;
  std::string feature_type;
  std::uint64_t max_len = 40;
  std::int64_t min_freq = 1;
  std::uint64_t dim = 300;
  double test_frac = 0.2;
  double val_frac = 0.1;
  bool stratified = true;
  std::uint64_t seed = 0;

  CLI::Option* o_corpus = nullptr;
  CLI::Option* o_format = nullptr;
  CLI::Option* o_embeddings = nullptr;
  CLI::Option* o_stopwords = nullptr;
  CLI::Option* o_abbreviations = nullptr;
  CLI::Option* o_emoticons = nullptr;
  CLI::Option* o_output = nullptr;
  CLI::Option* o_feature_type = nullptr;
  CLI::Option* o_max_len = nullptr;
  CLI::Option* o_min_freq = nullptr;
  CLI::Option* o_dim = nullptr;
  CLI::Option* o_test_frac = nullptr;
  CLI::Option* o_val_frac = nullptr;
  CLI::Option* o_stratified = nullptr;
  CLI::Option* o_seed = nullptr;
};

void add_common(CLI::App& cmd, CommonOpts& c) {
  cmd.add_option("--config", c.config_path, "JSON config file; explicit flags override its values");
  c.o_corpus = cmd.add_option("--corpus", c.corpus, "labeled corpus (CSV with text,label or JSONL)");
  c.o_format = cmd.add_option("--format", c.format, "corpus format: csv or jsonl");
  c.o_embeddings = cmd.add_option(
      "--embeddings", c.embeddings,
      "word2vec-style text vectors, or a saved model whose table should be reused");
  c.o_stopwords = cmd.add_option("--stopwords", c.stopwords, "stopword list, one token per line");
  c.o_abbreviations =
      cmd.add_option("--abbreviations", c.abbreviations, "abbreviation expansions, TSV");
  c.o_emoticons = cmd.add_option("--emoticons", c.emoticons, "emoticon list, one per line");
  c.o_output = cmd.add_option("--output", c.output_dir, "output directory (default: out)");
  c.o_feature_type = cmd.add_option("--features", c.feature_type, "feature type: bow or embedding");
  c.o_max_len = cmd.add_option("--max-len", c.max_len, "token sequence length cap");
  c.o_min_freq =
      cmd.add_option("--min-freq", c.min_freq, "minimum corpus frequency kept in the vocabulary");
  c.o_dim = cmd.add_option("--dim", c.dim, "embedding width (embedding features)");
  c.o_test_frac = cmd.add_option("--test-frac", c.test_frac, "held-out test fraction");
  c.o_val_frac = cmd.add_option("--val-frac", c.val_frac, "validation fraction of the remainder");
  c.o_stratified =
      cmd.add_flag("--stratified,!--no-stratified", c.stratified, "stratify the split by label");
  c.o_seed = cmd.add_option("--seed", c.seed, "seed for splitting, initialization, and training");
}

// Config file (if any) with explicitly set flags layered on top.
json build_config(const CommonOpts& c) {
  json j = json::object();
  if (!c.config_path.empty()) {
    std::string text = read_file(c.config_path);
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw CliError{1, "cannot parse config file " + c.config_path + ": " + e.what()};
    }
    if (!j.is_object()) throw CliError{1, "config file must hold a JSON object"};
  }
  if (c.o_corpus->count() > 0) j["corpus"] = c.corpus;
  if (c.o_format->count() > 0) j["format"] = c.format;
  if (c.o_embeddings->count() > 0) j["embeddings"] = c.embeddings;
  if (c.o_stopwords->count() > 0) j["stopwords"] = c.stopwords;
  if (c.o_abbreviations->count() > 0) j["abbreviations"] = c.abbreviations;
  if (c.o_emoticons->count() > 0) j["emoticons"] = c.emoticons;
  if (c.o_output->count() > 0) j["output_dir"] = c.output_dir;
  if (c.o_feature_type->count() > 0) j["features"]["type"] = c.feature_type;
  if (c.o_max_len->count() > 0) j["features"]["max_len"] = c.max_len;
  if (c.o_min_freq->count() > 0) j["features"]["min_freq"] = c.min_freq;
  if (c.o_dim->count() > 0) j["features"]["dim"] = c.dim;
  if (c.o_test_frac->count() > 0) j["split"]["test_frac"] = c.test_frac;
  if (c.o_val_frac->count() > 0) j["split"]["val_frac"] = c.val_frac;
  if (c.o_stratified->count() > 0) j["split"]["stratified"] = c.stratified;
  if (c.o_seed->count() > 0) j["split"]["seed"] = c.seed;
  return j;
}

// Training flags shared by tune and train.
struct FitOpts {
  std::string model;
  std::uint64_t epochs = 35;
  std::uint64_t batch_size = 16;
  double learning_rate = 0.001;
  std::string optimizer;
  std::uint64_t hidden_units = 0;
  std::uint64_t fc_units = 0;
  std::uint64_t conv_filters = 0;
  double dropout = 0.0;

  CLI::Option* o_epochs = nullptr;
  CLI::Option* o_batch_size = nullptr;
  CLI::Option* o_lr = nullptr;
  CLI::Option* o_optimizer = nullptr;
  CLI::Option* o_hidden_units = nullptr;
  CLI::Option* o_fc_units = nullptr;
  CLI::Option* o_conv_filters = nullptr;
  CLI::Option* o_dropout = nullptr;
};

void add_fit(CLI::App& cmd, FitOpts& f, const char* default_model) {
  f.model = default_model;
  cmd.add_option("--model", f.model,
                 "model name: logreg, svm, knn, decision_tree, random_forest, naive_bayes, "
                 "cnn, lstm, bilstm, bigru, ensemble");
  f.o_epochs = cmd.add_option("--epochs", f.epochs, "training epochs");
  f.o_batch_size = cmd.add_option("--batch-size", f.batch_size, "mini-batch size");
  f.o_lr = cmd.add_option("--lr", f.learning_rate, "learning rate");
  f.o_optimizer = cmd.add_option("--optimizer", f.optimizer, "optimizer: adam or sgd");
  f.o_hidden_units = cmd.add_option("--hidden-units", f.hidden_units, "recurrent units per layer");
  f.o_fc_units = cmd.add_option("--fc-units", f.fc_units, "fully connected layer width");
  f.o_conv_filters = cmd.add_option("--conv-filters", f.conv_filters, "convolution filter count");
  f.o_dropout = cmd.add_option("--dropout", f.dropout, "dropout rate in [0,1)");
}

// Flag sanity checks that can name the exact flag in the error message.
void validate_fit(const CommonOpts& c, const FitOpts& f) {
  if (f.o_lr->count() > 0 && !(f.learning_rate > 0)) {
    throw CliError{1, "--lr must be a positive learning rate"};
  }
  if (f.o_epochs->count() > 0 && f.epochs < 1) throw CliError{1, "--epochs must be at least 1"};
  if (f.o_batch_size->count() > 0 && f.batch_size < 1) {
    throw CliError{1, "--batch-size must be at least 1"};
  }
  if (f.o_dropout->count() > 0 && (f.dropout < 0.0 || f.dropout >= 1.0)) {
    throw CliError{1, "--dropout must lie in [0, 1)"};
  }
  if (c.o_max_len->count() > 0 && c.max_len < 1) throw CliError{1, "--max-len must be at least 1"};
}

json fit_train_json(const CommonOpts& c, const FitOpts& f) {
  json train = json::object();
  if (f.o_epochs->count() > 0) train["epochs"] = f.epochs;
  if (f.o_batch_size->count() > 0) train["batch_size"] = f.batch_size;
  if (f.o_lr->count() > 0) train["learning_rate"] = f.learning_rate;
  if (f.o_optimizer->count() > 0) train["optimizer"] = f.optimizer;
  if (c.o_seed->count() > 0) train["seed"] = c.seed;
  return train;
}

json fit_arch_json(const FitOpts& f) {
  json arch = json::object();
  if (f.o_hidden_units->count() > 0) arch["hidden_units"] = f.hidden_units;
  if (f.o_fc_units->count() > 0) arch["fc_units"] = f.fc_units;
  if (f.o_conv_filters->count() > 0) arch["conv_filters"] = f.conv_filters;
  if (f.o_dropout->count() > 0) arch["dropout"] = f.dropout;
  return arch;
}

// --params accepts inline JSON ("{...}") or a path to a JSON file.
json parse_params_arg(const std::string& value) {
  std::string text = value;
  if (text.empty()) return json::object();
  if (text.front() != '{') text = read_file(value);
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::exception& e) {
    throw CliError{1, std::string("cannot parse --params: ") + e.what()};
  }
  if (!parsed.is_object()) throw CliError{1, "--params must hold a JSON object"};
  return parsed;
}

int report_failure(emo_status status) {
  std::cerr << "error: " << emo_last_error() << "\n";
  return static_cast<int>(status);
}

// Print a C-API string result: pretty-printed when it is JSON meant for
// humans, verbatim otherwise. Frees the string.
int print_result(char* out, bool pretty_json) {
  std::string text = out != nullptr ? out : "";
  emo_string_free(out);
  if (pretty_json) text = json::parse(text).dump(2);
  std::cout << text;
  if (text.empty() || text.back() != '\n') std::cout << "\n";
  return 0;
}

int run_json_command(emo_status status, char* out) {
  if (status != EMO_OK) return report_failure(status);
  return print_result(out, /*pretty_json=*/true);
}

int run_predict_command(const std::string& artifact, const std::string& text) {
  emo_model* model = nullptr;
  emo_status status = emo_model_open(artifact.c_str(), &model);
  if (status != EMO_OK) return report_failure(status);
  char* out = nullptr;
  status = emo_model_predict(model, text.c_str(), &out);
  emo_model_close(model);
  if (status != EMO_OK) return report_failure(status);
  return print_result(out, /*pretty_json=*/false);  // one JSON line, as produced
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emotion classification toolkit: preprocess tweets, tune and train "
               "classical or neural classifiers, and evaluate saved models"};
  app.set_version_flag("--version", std::string(emo_version()));
  app.require_subcommand(1);

  // Shared option blocks, one instance per subcommand.
  std::vector<std::unique_ptr<CommonOpts>> commons;
  auto common_for = [&commons](CLI::App& cmd) -> CommonOpts& {
    commons.push_back(std::make_unique<CommonOpts>());
    add_common(cmd, *commons.back());
    return *commons.back();
  };

  CLI::App* pre_cmd = app.add_subcommand(
      "preprocess", "tokenize the corpus and write tokens.jsonl plus vocabulary.json");
  CommonOpts& pre_common = common_for(*pre_cmd);

  CLI::App* tune_cmd = app.add_subcommand(
      "tune", "grid-search hyper-parameters with cross validation; writes CV results");
  CommonOpts& tune_common = common_for(*tune_cmd);
  FitOpts tune_fit;
  add_fit(*tune_cmd, tune_fit, "logreg");
  std::string tune_grid;
  std::uint64_t tune_folds = 10;
  CLI::Option* o_tune_grid =
      tune_cmd->add_option("--grid", tune_grid, "JSON file of hyper-parameter axes");
  CLI::Option* o_tune_folds = tune_cmd->add_option("--folds", tune_folds, "cross-validation folds");

  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model and save it as a self-contained artifact");
  CommonOpts& train_common = common_for(*train_cmd);
  FitOpts train_fit;
  add_fit(*train_cmd, train_fit, "bigru");
  std::string train_params;
  std::string train_artifact;
  std::uint64_t train_repeats = 1;
  bool train_svg = false;
  train_cmd->add_option("--params", train_params,
                        "classical hyper-parameters: inline JSON object or a JSON file path");
  CLI::Option* o_train_artifact =
      train_cmd->add_option("--artifact", train_artifact, "output model path");
  CLI::Option* o_train_repeats = train_cmd->add_option(
      "--repeats", train_repeats, "train this many seed-derived runs; report mean/std accuracy");
  train_cmd->add_flag("--svg", train_svg, "also render learning-curve charts");

  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "score a saved model on a corpus split; writes report.json, confusion.csv, ROC CSVs");
  CommonOpts& eval_common = common_for(*eval_cmd);
  std::string eval_artifact;
  std::string eval_split = "test";
  bool eval_svg = false;
  eval_cmd->add_option("--artifact", eval_artifact, "saved model path")->required();
  eval_cmd->add_option("--split", eval_split, "corpus split: train, validation, test, or all");
  eval_cmd->add_flag("--svg", eval_svg, "also render ROC charts");

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "classify one text; prints a JSON line with probabilities");
  std::string predict_artifact;
  std::string predict_text;
  std::uint64_t predict_seed = 0;
  predict_cmd->add_option("--artifact", predict_artifact, "saved model path")->required();
  predict_cmd->add_option("--text", predict_text, "text to classify")->required();
  predict_cmd->add_option("--seed", predict_seed,
                          "accepted for interface uniformity; prediction is deterministic");

  CLI::App* report_cmd = app.add_subcommand(
      "report", "evaluate a saved model and print the per-label table; also writes charts");
  CommonOpts& report_common = common_for(*report_cmd);
  std::string report_artifact;
  std::string report_split = "test";
  report_cmd->add_option("--artifact", report_artifact, "saved model path")->required();
  report_cmd->add_option("--split", report_split, "corpus split: train, validation, test, or all");

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "evaluate several saved models and print one accuracy table");
  CommonOpts& compare_common = common_for(*compare_cmd);
  std::vector<std::string> compare_artifacts;
  std::string compare_split = "test";
  compare_cmd->add_option("--artifacts", compare_artifacts, "saved model paths")
      ->required()
      ->expected(-1);
  compare_cmd->add_option("--split", compare_split, "corpus split: train, validation, test, or all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (pre_cmd->parsed()) {
      char* out = nullptr;
      emo_status status = emo_preprocess(build_config(pre_common).dump().c_str(), &out);
      return run_json_command(status, out);
    }

    if (tune_cmd->parsed()) {
      validate_fit(tune_common, tune_fit);
      if (o_tune_folds->count() > 0 && tune_folds < 2) {
        throw CliError{1, "--folds must be at least 2"};
      }
      json options = {{"model", tune_fit.model}, {"folds", tune_folds}};
      if (o_tune_grid->count() > 0) options["grid"] = tune_grid;
      json train = fit_train_json(tune_common, tune_fit);
      if (!train.empty()) options["train"] = train;
      json arch = fit_arch_json(tune_fit);
      if (!arch.empty()) options["arch"] = arch;
      char* out = nullptr;
      emo_status status =
          emo_tune(build_config(tune_common).dump().c_str(), options.dump().c_str(), &out);
      return run_json_command(status, out);
    }

    if (train_cmd->parsed()) {
      validate_fit(train_common, train_fit);
      if (o_train_repeats->count() > 0 && train_repeats < 1) {
        throw CliError{1, "--repeats must be at least 1"};
      }
      json options = {{"model", train_fit.model}};
      json train = fit_train_json(train_common, train_fit);
      if (!train.empty()) options["train"] = train;
      json arch = fit_arch_json(train_fit);
      if (!arch.empty()) options["arch"] = arch;
      if (!train_params.empty()) options["params"] = parse_params_arg(train_params);
      if (o_train_repeats->count() > 0) options["repeats"] = train_repeats;
      if (train_svg) options["svg"] = true;
      if (o_train_artifact->count() > 0) options["artifact"] = train_artifact;
      char* out = nullptr;
      emo_status status =
          emo_train(build_config(train_common).dump().c_str(), options.dump().c_str(), &out);
      return run_json_command(status, out);
    }

    if (eval_cmd->parsed()) {
      char* out = nullptr;
      emo_status status = emo_evaluate(build_config(eval_common).dump().c_str(),
                                       eval_artifact.c_str(), eval_split.c_str(),
                                       eval_svg ? 1 : 0, &out);
      return run_json_command(status, out);
    }

    if (predict_cmd->parsed()) return run_predict_command(predict_artifact, predict_text);

    if (report_cmd->parsed()) {
      char* out = nullptr;
      emo_status status = emo_report(build_config(report_common).dump().c_str(),
                                     report_artifact.c_str(), report_split.c_str(), &out);
      if (status != EMO_OK) return report_failure(status);
      return print_result(out, /*pretty_json=*/false);
    }

    if (compare_cmd->parsed()) {
      std::vector<const char*> paths;
      paths.reserve(compare_artifacts.size());
      for (const std::string& p : compare_artifacts) paths.push_back(p.c_str());
      char* out = nullptr;
      emo_status status =
          emo_compare(build_config(compare_common).dump().c_str(), paths.data(), paths.size(),
                      compare_split.c_str(), &out);
      if (status != EMO_OK) return report_failure(status);
      return print_result(out, /*pretty_json=*/false);
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::cerr << "error: no command given\n";
  return 1;
}
