#include "fsad/fsad.h"

#include <exception>
#include <new>
#include <optional>
#include <string>

#include "fsad/detector.hpp"
#include "fsad/error.hpp"
#include "fsad/experiments.hpp"
#include "fsad/run_config.hpp"

struct fsad_config {
  fsad::RunConfig config;
};

struct fsad_report {
  fsad::CommandResult result;
};

struct fsad_model {
  fsad::Checkpoint checkpoint;
  std::string method;
  std::optional<fsad::Detector> detector;
};

namespace {

thread_local std::string last_error;

fsad_status to_status(fsad::ErrorCode code) {
  switch (code) {
    case fsad::ErrorCode::kInvalidArgument: return FSAD_ERR_INVALID_ARGUMENT;
    case fsad::ErrorCode::kConfig: return FSAD_ERR_CONFIG;
    case fsad::ErrorCode::kIo: return FSAD_ERR_IO;
    case fsad::ErrorCode::kFormat: return FSAD_ERR_FORMAT;
    case fsad::ErrorCode::kData: return FSAD_ERR_DATA;
    case fsad::ErrorCode::kNumeric: return FSAD_ERR_NUMERIC;
    case fsad::ErrorCode::kInternal: return FSAD_ERR_INTERNAL;
  }
  return FSAD_ERR_INTERNAL;
}

template <typename F>
fsad_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return FSAD_OK;
  } catch (const fsad::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return FSAD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return FSAD_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return FSAD_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) fsad::fail(fsad::ErrorCode::kInvalidArgument, what);
}

using Command = fsad::CommandResult (*)(const fsad::RunConfig&);

fsad_status run_command(Command command, const fsad_config* config, fsad_report** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto report = std::make_unique<fsad_report>();
    report->result = command(config->config);
    *out = report.release();
  });
}

}  // namespace

extern "C" {

const char* fsad_version(void) { return "1.0.0"; }

const char* fsad_status_string(fsad_status status) {
  switch (status) {
    case FSAD_OK: return "ok";
    case FSAD_ERR_INVALID_ARGUMENT: return "invalid argument";
    case FSAD_ERR_CONFIG: return "configuration error";
    case FSAD_ERR_IO: return "i/o error";
    case FSAD_ERR_FORMAT: return "format error";
    case FSAD_ERR_DATA: return "data error";
    case FSAD_ERR_NUMERIC: return "numeric error";
    case FSAD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* fsad_last_error(void) { return last_error.c_str(); }

fsad_status fsad_config_create(fsad_config** out) {
  return guarded([&] {
    require(out != nullptr, "null argument");
    *out = new fsad_config();
  });
}

void fsad_config_destroy(fsad_config* config) { delete config; }

fsad_status fsad_config_set(fsad_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr, "null argument");
    config->config.set(key, value);
  });
}

fsad_status fsad_config_load_file(fsad_config* config, const char* path) {
  return guarded([&] {
    require(config != nullptr && path != nullptr, "null argument");
    config->config.load_file(path);
  });
}

fsad_status fsad_config_validate(const fsad_config* config) {
  return guarded([&] {
    require(config != nullptr, "null argument");
    config->config.validate();
  });
}

fsad_status fsad_cmd_synth(const fsad_config* c, fsad_report** out) { return run_command(fsad::cmd_synth, c, out); }
fsad_status fsad_cmd_preprocess(const fsad_config* c, fsad_report** out) { return run_command(fsad::cmd_preprocess, c, out); }
fsad_status fsad_cmd_train(const fsad_config* c, fsad_report** out) { return run_command(fsad::cmd_train, c, out); }
fsad_status fsad_cmd_eval(const fsad_config* c, fsad_report** out) { return run_command(fsad::cmd_eval, c, out); }
fsad_status fsad_cmd_ablate(const fsad_config* c, fsad_report** out) { return run_command(fsad::cmd_ablate, c, out); }
fsad_status fsad_cmd_loo(const fsad_config* c, fsad_report** out) { return run_command(fsad::cmd_loo, c, out); }

const char* fsad_report_json(const fsad_report* report) {
  return report ? report->result.report_json.c_str() : "";
}

const char* fsad_report_table(const fsad_report* report) {
  return report ? report->result.table.c_str() : "";
}

void fsad_report_destroy(fsad_report* report) { delete report; }

fsad_status fsad_model_load(const char* path, fsad_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = nullptr;
    auto model = std::make_unique<fsad_model>();
    model->checkpoint = fsad::load_checkpoint(path);
    model->method = std::string(fsad::to_string(model->checkpoint.method));
    if (model->checkpoint.method == fsad::Method::kOneClass ||
        model->checkpoint.method == fsad::Method::kFineTune) {
      model->detector = fsad::Detector::unadapted(model->checkpoint);
    }
    *out = model.release();
  });
}

void fsad_model_destroy(fsad_model* model) { delete model; }

const char* fsad_model_method(const fsad_model* model) { return model ? model->method.c_str() : ""; }

fsad_status fsad_model_fit(fsad_model* model, const char* const* texts, const int* labels, size_t n,
                           unsigned long long seed) {
  return guarded([&] {
    require(model != nullptr, "null model");
    require(n == 0 || (texts != nullptr && labels != nullptr), "null argument");
    std::vector<fsad::TextRecord> records;
    records.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      require(texts[i] != nullptr, "null text");
      require(labels[i] == fsad::kNormal || labels[i] == fsad::kAnomaly, "labels must be 0 or 1");
      records.push_back({fsad::normalize_text(texts[i]), labels[i], ""});
    }
    fsad::DetectorFitOptions options;
    options.seed = seed;
    model->detector = fsad::Detector::fit(model->checkpoint, records, options);
  });
}

fsad_status fsad_model_score(const fsad_model* model, const char* const* texts, size_t n,
                             double* scores) {
  return guarded([&] {
    require(model != nullptr, "null model");
    require(n == 0 || (texts != nullptr && scores != nullptr), "null argument");
    if (!model->detector) {
      fsad::fail(fsad::ErrorCode::kInvalidArgument,
                 model->method + " models need fsad_model_fit before scoring");
    }
    for (size_t i = 0; i < n; ++i) {
      require(texts[i] != nullptr, "null text");
      scores[i] = model->detector->score(fsad::normalize_text(texts[i]));
    }
  });
}

}  // extern "C"
