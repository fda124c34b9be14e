#include "tsfound.h"

#include "tsfound/config.hpp"
#include "tsfound/corpus.hpp"
#include "tsfound/error.hpp"
#include "tsfound/pipeline.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>
#include <sstream>
#include <string>

struct tsf_config {
    tsfound::RunConfig cfg;
};

struct tsf_model {
    tsfound::Checkpoint ckpt;
};

struct tsf_prediction {
    tsfound::ForecastResult result;
    std::vector<double> flat_quantiles;
};

namespace {

thread_local std::string g_last_error;

tsf_status fail(tsf_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
tsf_status guarded(Fn&& fn) {
    try {
        g_last_error.clear();
        fn();
        return TSF_OK;
    } catch (const tsfound::Error& e) {
        return fail(e.kind() == tsfound::ErrorKind::Validation ? TSF_ERR_VALIDATION : TSF_ERR_RUNTIME, e.what());
    } catch (const nlohmann::json::exception& e) {
        return fail(TSF_ERR_VALIDATION, e.what());
    } catch (const std::bad_alloc&) {
        return fail(TSF_ERR_RUNTIME, "out of memory");
    } catch (const std::exception& e) {
        return fail(TSF_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(TSF_ERR_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

#define TSF_REQUIRE(ptr)                                                                                        \
    do {                                                                                                        \
        if (!(ptr)) {                                                                                           \
            return fail(TSF_ERR_ARGUMENT, std::string(__func__) + ": '" #ptr "' is null");                      \
        }                                                                                                       \
    } while (0)

std::string level_key(double q) {
    std::ostringstream s;
    s << q;
    return s.str();
}

} // namespace

extern "C" {

const char* tsf_version(void) {
    return "0.1.0";
}

const char* tsf_last_error(void) {
    return g_last_error.c_str();
}

void tsf_string_free(char* s) {
    std::free(s);
}

tsf_status tsf_config_preset(const char* name, tsf_config** out) {
    TSF_REQUIRE(name);
    TSF_REQUIRE(out);
    *out = nullptr;
    return guarded([&] { *out = new tsf_config{tsfound::preset_config(name)}; });
}

tsf_status tsf_config_load(const char* path, tsf_config** out) {
    TSF_REQUIRE(path);
    TSF_REQUIRE(out);
    *out = nullptr;
    return guarded([&] { *out = new tsf_config{tsfound::load_config(path)}; });
}

void tsf_config_free(tsf_config* cfg) {
    delete cfg;
}

tsf_status tsf_config_set_seed(tsf_config* cfg, uint64_t seed) {
    TSF_REQUIRE(cfg);
    cfg->cfg.seed = seed;
    cfg->cfg.train.seed = seed;
    return TSF_OK;
}

tsf_status tsf_config_set_steps(tsf_config* cfg, int64_t steps) {
    TSF_REQUIRE(cfg);
    if (steps < 1) {
        return fail(TSF_ERR_VALIDATION, "steps must be at least 1");
    }
    cfg->cfg.train.steps = static_cast<long>(steps);
    return TSF_OK;
}

tsf_status tsf_config_set_synth_series(tsf_config* cfg, int64_t series) {
    TSF_REQUIRE(cfg);
    if (series < 0) {
        return fail(TSF_ERR_VALIDATION, "series must not be negative");
    }
    cfg->cfg.data.synth.series = static_cast<long>(series);
    return TSF_OK;
}

tsf_status tsf_config_set_datasets(tsf_config* cfg, const char* path) {
    TSF_REQUIRE(cfg);
    TSF_REQUIRE(path);
    cfg->cfg.eval.datasets = {path};
    return TSF_OK;
}

tsf_status tsf_config_set_protocol(tsf_config* cfg, const char* protocol) {
    TSF_REQUIRE(cfg);
    TSF_REQUIRE(protocol);
    const std::string p = protocol;
    if (p != "last_window" && p != "rolling") {
        return fail(TSF_ERR_VALIDATION, "protocol must be 'last_window' or 'rolling'");
    }
    cfg->cfg.eval.protocol = p;
    return TSF_OK;
}

tsf_status tsf_config_to_json(const tsf_config* cfg, char** out_json) {
    TSF_REQUIRE(cfg);
    TSF_REQUIRE(out_json);
    return guarded([&] { *out_json = dup_string(tsfound::to_json(cfg->cfg).dump(2)); });
}

tsf_status tsf_config_param_count(const tsf_config* cfg, uint64_t* out) {
    TSF_REQUIRE(cfg);
    TSF_REQUIRE(out);
    return guarded([&] {
        tsfound::validate(cfg->cfg);
        *out = tsfound::param_count(cfg->cfg.model);
    });
}

tsf_status tsf_synth(const tsf_config* cfg, const char* out_dir, char** out_corpus_path) {
    TSF_REQUIRE(cfg);
    TSF_REQUIRE(out_dir);
    return guarded([&] {
        tsfound::validate(cfg->cfg);
        const auto corpus = tsfound::synthesize_corpus(cfg->cfg.data.synth, cfg->cfg.seed);
        const std::string path = tsfound::write_corpus(corpus, out_dir);
        if (out_corpus_path) {
            *out_corpus_path = dup_string(path);
        }
    });
}

tsf_status tsf_train(const tsf_config* cfg, const char* out_dir, const char* resume_checkpoint, tsf_log_fn log,
                     void* user, char** out_final_checkpoint) {
    TSF_REQUIRE(cfg);
    TSF_REQUIRE(out_dir);
    return guarded([&] {
        tsfound::validate(cfg->cfg);
        tsfound::TrainRunOptions opt;
        opt.out_dir = out_dir;
        if (resume_checkpoint) {
            opt.resume_from = resume_checkpoint;
        }
        if (log) {
            opt.on_log = [log, user](const tsfound::LogRecord& r) {
                log(user, r.step, r.lr, r.loss.mse, r.loss.ql, r.loss.total);
            };
        }
        const auto corpus = tsfound::training_corpus(cfg->cfg);
        const auto result = tsfound::run_training(cfg->cfg, corpus, opt);
        if (out_final_checkpoint) {
            *out_final_checkpoint = dup_string(result.final_checkpoint);
        }
    });
}

tsf_status tsf_model_load(const char* checkpoint, const tsf_config* expect, tsf_model** out) {
    TSF_REQUIRE(checkpoint);
    TSF_REQUIRE(out);
    *out = nullptr;
    return guarded([&] {
        tsfound::Checkpoint ck = tsfound::load_checkpoint(checkpoint);
        if (expect) {
            tsfound::require_compatible(ck, expect->cfg.model);
        }
        *out = new tsf_model{std::move(ck)};
    });
}

void tsf_model_free(tsf_model* model) {
    delete model;
}

tsf_status tsf_model_param_count(const tsf_model* model, uint64_t* out) {
    TSF_REQUIRE(model);
    TSF_REQUIRE(out);
    *out = model->ckpt.model.layout().parameter_count();
    return TSF_OK;
}

tsf_status tsf_forecast(const tsf_model* model, const double* context, size_t n_context, int32_t horizon,
                        const double* levels, size_t n_levels, tsf_prediction** out) {
    TSF_REQUIRE(model);
    TSF_REQUIRE(context);
    TSF_REQUIRE(out);
    if (n_levels > 0 && !levels) {
        return fail(TSF_ERR_ARGUMENT, "tsf_forecast: 'levels' is null");
    }
    *out = nullptr;
    return guarded([&] {
        tsfound::ForecastRequest req;
        req.context.assign(context, context + n_context);
        req.horizon = horizon;
        if (n_levels > 0) {
            req.quantile_levels.assign(levels, levels + n_levels);
        }
        auto fc = std::make_unique<tsf_prediction>();
        fc->result = tsfound::forecast(model->ckpt.model, req);
        for (const auto& row : fc->result.quantiles) {
            fc->flat_quantiles.insert(fc->flat_quantiles.end(), row.begin(), row.end());
        }
        *out = fc.release();
    });
}

void tsf_forecast_free(tsf_prediction* fc) {
    delete fc;
}

size_t tsf_forecast_horizon(const tsf_prediction* fc) {
    return fc ? fc->result.point.size() : 0;
}

const double* tsf_forecast_point(const tsf_prediction* fc) {
    return fc ? fc->result.point.data() : nullptr;
}

size_t tsf_forecast_num_levels(const tsf_prediction* fc) {
    return fc ? fc->result.levels.size() : 0;
}

const double* tsf_forecast_levels(const tsf_prediction* fc) {
    return fc ? fc->result.levels.data() : nullptr;
}

const double* tsf_forecast_quantiles(const tsf_prediction* fc) {
    return fc ? fc->flat_quantiles.data() : nullptr;
}

int32_t tsf_forecast_steps(const tsf_prediction* fc) {
    return fc ? fc->result.steps_used : 0;
}

tsf_status tsf_forecast_file(const tsf_model* model, const char* input_path, int32_t horizon, const double* levels,
                             size_t n_levels, char** out_jsonl) {
    TSF_REQUIRE(model);
    TSF_REQUIRE(input_path);
    TSF_REQUIRE(out_jsonl);
    if (n_levels > 0 && !levels) {
        return fail(TSF_ERR_ARGUMENT, "tsf_forecast_file: 'levels' is null");
    }
    return guarded([&] {
        const auto series = tsfound::read_series_file(input_path);
        if (series.empty()) {
            tsfound::fail_validation("input '" + std::string(input_path) + "' holds no series");
        }
        std::string text;
        for (const auto& s : series) {
            tsfound::ForecastRequest req;
            req.context = s.values;
            req.horizon = horizon;
            if (n_levels > 0) {
                req.quantile_levels.assign(levels, levels + n_levels);
            }
            const auto fc = tsfound::forecast(model->ckpt.model, req);
            nlohmann::ordered_json q = nlohmann::ordered_json::object();
            for (std::size_t l = 0; l < fc.levels.size(); ++l) {
                std::vector<double> col;
                col.reserve(fc.quantiles.size());
                for (const auto& row : fc.quantiles) {
                    col.push_back(row[l]);
                }
                q[level_key(fc.levels[l])] = col;
            }
            nlohmann::ordered_json obj;
            obj["id"] = s.id;
            obj["point"] = fc.point;
            obj["quantiles"] = q;
            text += obj.dump();
            text += '\n';
        }
        *out_jsonl = dup_string(text);
    });
}

tsf_status tsf_evaluate(const tsf_model* model, const tsf_config* cfg, const char* out_dir, char** out_report_json) {
    TSF_REQUIRE(cfg);
    return guarded([&] {
        tsfound::RunConfig run = cfg->cfg;
        if (model) {
            // Architecture and default horizon come from the checkpoint.
            run.model = model->ckpt.model_config;
            run.train = model->ckpt.train_config;
        }
        tsfound::validate(run);
        if (run.eval.datasets.empty()) {
            tsfound::fail_validation("config field 'eval.datasets' is empty");
        }
        const auto datasets = tsfound::load_datasets(run);
        tsfound::EvalReport report;
        if (model) {
            tsfound::ModelForecaster f(model->ckpt.model);
            report = tsfound::run_evaluation(run, f, datasets);
        } else {
            tsfound::SeasonalNaive f(0);
            report = tsfound::run_evaluation(run, f, datasets);
        }
        if (out_dir) {
            tsfound::write_report(report, out_dir);
        }
        if (out_report_json) {
            *out_report_json = dup_string(report.to_json());
        }
    });
}

} // extern "C"
