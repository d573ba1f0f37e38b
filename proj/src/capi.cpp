#include "emoclass.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "emoclass/pipeline.hpp"
#include "emoclass/util.hpp"

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

emo_status fail(emo_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

// Runs fn() and maps exceptions onto status codes: usage -> 1, data -> 2,
// numeric -> 3. Anything non-emoclass counts as a data failure.
template <typename Fn>
emo_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EMO_OK;
  } catch (const emoclass::UsageError& e) {
    return fail(EMO_ERR_USAGE, e.what());
  } catch (const emoclass::DataError& e) {
    return fail(EMO_ERR_DATA, e.what());
  } catch (const emoclass::NumericError& e) {
    return fail(EMO_ERR_NUMERIC, e.what());
  } catch (const std::exception& e) {
    return fail(EMO_ERR_DATA, e.what());
  }
}

nlohmann::json parse_json_arg(const char* text, const char* what) {
  if (text == nullptr) throw emoclass::UsageError(std::string(what) + " must not be null");
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw emoclass::UsageError(std::string("cannot parse ") + what + ": " + e.what());
  }
}

emoclass::PipelineConfig config_from_arg(const char* config_json) {
  return emoclass::PipelineConfig::from_json(parse_json_arg(config_json, "config JSON"));
}

void write_out(char** out, const std::string& value, const char* name) {
  if (out == nullptr) throw emoclass::UsageError(std::string(name) + " must not be null");
  *out = dup_string(value);
  if (*out == nullptr) throw std::bad_alloc();
}

const char* require_cstr(const char* value, const char* name) {
  if (value == nullptr) throw emoclass::UsageError(std::string(name) + " must not be null");
  return value;
}

}  // namespace

struct emo_model {
  emoclass::ModelBundle bundle;
};

extern "C" {

const char* emo_version(void) { return "1.0.0"; }

const char* emo_last_error(void) { return g_last_error.c_str(); }

void emo_string_free(char* s) { std::free(s); }

emo_status emo_preprocess(const char* config_json, char** out_summary_json) {
  return guarded([&] {
    nlohmann::json summary = emoclass::run_preprocess(config_from_arg(config_json));
    write_out(out_summary_json, summary.dump(), "out_summary_json");
  });
}

emo_status emo_tune(const char* config_json, const char* options_json,
                    char** out_summary_json) {
  return guarded([&] {
    emoclass::TuneOptions options =
        emoclass::TuneOptions::from_json(parse_json_arg(options_json, "tune options"));
    nlohmann::json summary = emoclass::run_tune(config_from_arg(config_json), options);
    write_out(out_summary_json, summary.dump(), "out_summary_json");
  });
}

emo_status emo_train(const char* config_json, const char* options_json,
                     char** out_summary_json) {
  return guarded([&] {
    emoclass::TrainOptions options =
        emoclass::TrainOptions::from_json(parse_json_arg(options_json, "train options"));
    nlohmann::json summary = emoclass::run_train(config_from_arg(config_json), options);
    write_out(out_summary_json, summary.dump(), "out_summary_json");
  });
}

emo_status emo_evaluate(const char* config_json, const char* artifact_path, const char* split,
                        int svg, char** out_summary_json) {
  return guarded([&] {
    nlohmann::json summary = emoclass::run_evaluate(
        config_from_arg(config_json), require_cstr(artifact_path, "artifact_path"),
        require_cstr(split, "split"), svg != 0);
    write_out(out_summary_json, summary.dump(), "out_summary_json");
  });
}

emo_status emo_report(const char* config_json, const char* artifact_path, const char* split,
                      char** out_text) {
  return guarded([&] {
    std::string text =
        emoclass::run_report(config_from_arg(config_json),
                             require_cstr(artifact_path, "artifact_path"),
                             require_cstr(split, "split"));
    write_out(out_text, text, "out_text");
  });
}

emo_status emo_compare(const char* config_json, const char* const* artifact_paths,
                       size_t artifact_count, const char* split, char** out_table) {
  return guarded([&] {
    if (artifact_paths == nullptr && artifact_count > 0) {
      throw emoclass::UsageError("artifact_paths must not be null");
    }
    std::vector<std::string> paths;
    paths.reserve(artifact_count);
    for (size_t i = 0; i < artifact_count; ++i) {
      paths.emplace_back(require_cstr(artifact_paths[i], "artifact path"));
    }
    std::string table = emoclass::run_compare(config_from_arg(config_json), paths,
                                              require_cstr(split, "split"));
    write_out(out_table, table, "out_table");
  });
}

emo_status emo_model_open(const char* path, emo_model** out_model) {
  return guarded([&] {
    if (out_model == nullptr) throw emoclass::UsageError("out_model must not be null");
    emoclass::ModelBundle bundle = emoclass::load_bundle(require_cstr(path, "path"));
    *out_model = new emo_model{std::move(bundle)};
  });
}

void emo_model_close(emo_model* model) { delete model; }

emo_status emo_model_info(const emo_model* model, char** out_json) {
  return guarded([&] {
    if (model == nullptr) throw emoclass::UsageError("model must not be null");
    write_out(out_json, emoclass::bundle_info(model->bundle).dump(), "out_json");
  });
}

emo_status emo_model_predict(const emo_model* model, const char* text, char** out_json) {
  return guarded([&] {
    if (model == nullptr) throw emoclass::UsageError("model must not be null");
    nlohmann::json result =
        emoclass::predict_with_bundle(model->bundle, require_cstr(text, "text"));
    write_out(out_json, result.dump(), "out_json");
  });
}

}  // extern "C"
